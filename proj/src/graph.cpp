#include "elflow/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "elflow/csv.hpp"
#include "elflow/errors.hpp"

namespace elflow {

ErnGraph::ErnGraph(GraphParams params) : params_(params) {
    if (!(params_.epsilon >= 0.0)) throw DomainError("epsilon must be non-negative");
    if (!(params_.sigma > 0.0)) throw DomainError("sigma must be positive");
    if (params_.rho < 1) throw DomainError("rho must be at least 1");
    if (!(params_.eta >= 0.0 && params_.eta <= 1.0)) throw DomainError("eta must lie in [0, 1]");
}

void ErnGraph::check_id(NodeId id) const {
    if (id >= nodes_.size()) throw DomainError("invalid node id " + std::to_string(id));
}

std::pair<NodeId, bool> ErnGraph::match_or_insert(const Eigen::VectorXd& x) {
    if (!x.allFinite()) throw DomainError("graph input must be finite");
    if (!nodes_.empty() && nodes_.front().position.size() != x.size()) {
        throw DomainError("graph input has wrong dimension");
    }

    if (last_ && (x - nodes_[*last_].position).norm() <= params_.epsilon) return {*last_, false};

    std::optional<NodeId> best;
    double best_dist = std::numeric_limits<double>::infinity();
    for (NodeId id = 0; id < nodes_.size(); ++id) {
        const double d = (x - nodes_[id].position).norm();
        if (d <= params_.epsilon && d < best_dist) {
            best = id;
            best_dist = d;
        }
    }
    if (best) {
        last_ = best;
        return {*best, false};
    }

    nodes_.push_back(ErnNode{x, 0.0, false, 0});
    incoming_.emplace_back();
    last_ = nodes_.size() - 1;
    return {*last_, true};
}

void ErnGraph::record_transition(NodeId prev, NodeId cur) {
    check_id(prev);
    check_id(cur);
    ++incoming_[cur][prev];
}

long long ErnGraph::transition_count(NodeId cur, NodeId prev) const {
    check_id(cur);
    check_id(prev);
    const auto it = incoming_[cur].find(prev);
    return it == incoming_[cur].end() ? 0 : it->second;
}

long long ErnGraph::temporal_normalizer(NodeId k) const {
    check_id(k);
    long long best = 0;
    for (const auto& [prev, count] : incoming_[k]) best = std::max(best, count);
    return best;
}

std::vector<std::pair<NodeId, double>> ErnGraph::spatial_neighbors(NodeId k) const {
    check_id(k);
    const double denom = 2.0 * params_.sigma * params_.sigma;
    std::vector<std::pair<NodeId, double>> all;
    all.reserve(nodes_.size());
    for (NodeId id = 0; id < nodes_.size(); ++id) {
        if (id == k) continue;
        const double d2 = (nodes_[k].position - nodes_[id].position).squaredNorm();
        all.emplace_back(id, std::exp(-d2 / denom));
    }
    const auto keep = std::min<std::size_t>(all.size(), static_cast<std::size_t>(params_.rho));
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(),
                      [](const auto& a, const auto& b) {
                          if (a.second != b.second) return a.second > b.second;
                          return a.first < b.first;
                      });
    all.resize(keep);
    return all;
}

double ErnGraph::error_signal(NodeId k, double ftilde, std::optional<double> supervision) const {
    check_id(k);
    const double delta = supervision ? ftilde - *supervision : 0.0;

    double temporal = 0.0;
    const long long norm = temporal_normalizer(k);
    if (norm > 0) {
        double sum = 0.0;
        for (const auto& [prev, count] : incoming_[k]) {
            sum += static_cast<double>(count) * (ftilde - nodes_[prev].value);
        }
        temporal = params_.eta / static_cast<double>(norm) * sum;
    }

    double spatial = 0.0;
    const auto neighbors = spatial_neighbors(k);
    if (!neighbors.empty()) {
        double sum = 0.0;
        for (const auto& [id, w] : neighbors) sum += w * (ftilde - nodes_[id].value);
        spatial = (1.0 - params_.eta) / static_cast<double>(params_.rho) * sum;
    }
    return delta + temporal + spatial;
}

void ErnGraph::store_value(NodeId k, double ftilde, std::optional<double> supervision) {
    check_id(k);
    auto& node = nodes_[k];
    if (supervision) {
        if (!node.supervised) {
            // The first supervision replaces whatever f̄ was stored.
            node.value = *supervision;
            node.supervision_count = 1;
            node.supervised = true;
        } else {
            ++node.supervision_count;
            node.value += (*supervision - node.value) / static_cast<double>(node.supervision_count);
        }
    } else if (!node.supervised) {
        node.value = ftilde;
    }
}

void ErnGraph::write_nodes_csv(const std::string& path) const {
    std::vector<std::string> header{"id"};
    const Eigen::Index d = nodes_.empty() ? 0 : nodes_.front().position.size();
    for (Eigen::Index i = 0; i < d; ++i) header.push_back("pos_" + std::to_string(i + 1));
    header.insert(header.end(), {"value", "supervised", "supervision_count"});
    CsvTable table(std::move(header));
    for (NodeId id = 0; id < nodes_.size(); ++id) {
        const auto& node = nodes_[id];
        std::vector<CsvCell> row{CsvCell(static_cast<long long>(id))};
        for (Eigen::Index i = 0; i < d; ++i) row.emplace_back(node.position[i]);
        row.emplace_back(node.value);
        row.emplace_back(node.supervised ? 1 : 0);
        row.emplace_back(node.supervision_count);
        table.add_row(std::move(row));
    }
    write_csv(table, path);
}

void ErnGraph::write_edges_csv(const std::string& path) const {
    CsvTable table({"cur", "prev", "count"});
    for (NodeId cur = 0; cur < incoming_.size(); ++cur) {
        for (const auto& [prev, count] : incoming_[cur]) {
            table.add_row({CsvCell(static_cast<long long>(cur)), CsvCell(static_cast<long long>(prev)),
                           CsvCell(count)});
        }
    }
    write_csv(table, path);
}

double estimate_sigma(const Eigen::MatrixXd& samples) {
    const Eigen::Index m = samples.rows();
    if (m < 2) throw DomainError("sigma estimation needs at least two samples");
    double sum = 0.0;
    long long pairs = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = i + 1; j < m; ++j) {
            sum += (samples.row(i) - samples.row(j)).norm();
            ++pairs;
        }
    }
    const double sigma = sum / static_cast<double>(pairs);
    if (!(sigma > 0.0)) throw DomainError("degenerate kernel width: all samples coincide");
    return sigma;
}

double mean_step_distance(const Eigen::MatrixXd& samples) {
    const Eigen::Index m = samples.rows();
    if (m < 2) throw DomainError("step distance needs at least two samples");
    double sum = 0.0;
    for (Eigen::Index i = 1; i < m; ++i) sum += (samples.row(i) - samples.row(i - 1)).norm();
    return sum / static_cast<double>(m - 1);
}

StateVector st_forward_step(const StateVector& f, const Propagator& prop, const OperatorSpec& spec, double b,
                            double error) {
    return prop.advance(f, error * impulse_scale(spec, b));
}

StateVector st_forward_step(const StateVector& f, const CompanionSystem& sys, const OperatorSpec& spec, double b,
                            double error, double step) {
    return st_forward_step(f, Propagator(sys, step), spec, b, error);
}

GraphRunLog run_graph_epochs(const Trajectory& traj, const CompanionSystem& sys, const OperatorSpec& spec,
                             const TrainingConfig& cfg, ErnGraph& graph) {
    const Eigen::Index n = traj.size();
    if (n == 0) throw DomainError("trajectory is empty");
    if (cfg.epochs < 1) throw DomainError("epochs must be at least 1");

    const Propagator prop(sys, cfg.tau_prime);
    StateVector f = cfg.initial_state.size() == 0 ? StateVector::Zero(sys.dim()) : cfg.initial_state;
    if (f.size() != sys.dim()) throw DomainError("initial state has wrong dimension");
    const int supervised = cfg.effective_supervised_epochs();

    GraphRunLog out;
    auto& log = out.log;
    Trajectory data = epoch_data(traj, cfg, 0);
    long long k = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.shuffle == TrainingConfig::Shuffle::per_epoch && epoch > 0) data = epoch_data(traj, cfg, epoch);
        const bool supervise = epoch < supervised;
        double sq = 0.0;
        for (Eigen::Index i = 0; i < n; ++i, ++k) {
            const auto previous = graph.last_visited();
            const auto [node, inserted] = graph.match_or_insert(data.x.row(i).transpose());
            if (previous) graph.record_transition(*previous, node);

            const double y = data.y[i];
            const std::optional<double> target = supervise ? std::optional<double>(y) : std::nullopt;
            const double ftilde = prop.half_step_value(f);
            const double error = graph.error_signal(node, ftilde, target);
            f = st_forward_step(f, prop, spec, data.b[i], error);
            graph.store_value(node, ftilde, target);

            const double err = ftilde - y;
            sq += err * err;
            log.trace.push_back({k, (static_cast<double>(k) + 0.5) * prop.step(), ftilde, y, error, supervise});
            if (!log.diverged && (!std::isfinite(ftilde) || std::abs(ftilde) > kDivergenceThreshold ||
                                  !f.allFinite() || f.cwiseAbs().maxCoeff() > kDivergenceThreshold)) {
                log.diverged = true;
            }
        }
        log.mse_per_epoch.push_back(sq / static_cast<double>(n));
        out.nodes_per_epoch.push_back(graph.size());
    }
    log.final_state = f;
    return out;
}

}  // namespace elflow
