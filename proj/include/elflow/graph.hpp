#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "elflow/integrator.hpp"
#include "elflow/operators.hpp"
#include "elflow/signals.hpp"

namespace elflow {

using NodeId = std::size_t;

struct ErnNode {
    Eigen::VectorXd position;
    double value = 0.0;  // last f̄ seen here, or the mean of its supervisions
    bool supervised = false;
    long long supervision_count = 0;
};

struct GraphParams {
    double epsilon = 0.1;  // matching radius
    double sigma = 1.0;    // Gaussian width of the spatial weights
    int rho = 1;           // spatial neighbourhood size
    double eta = 0.5;      // temporal share; the spatial share is 1 - η
};

/// Online spatio-temporal graph over the input space. Nodes are matched
/// within a radius ε, successions between consecutive nodes are counted and
/// spatial neighbours are weighted by a Gaussian kernel.
///
/// Single writer: the learning loop owns the graph and mutates it once per step.
class ErnGraph {
public:
    explicit ErnGraph(GraphParams params);

    const GraphParams& params() const { return params_; }
    std::size_t size() const { return nodes_.size(); }
    const ErnNode& node(NodeId id) const { return nodes_.at(id); }
    std::optional<NodeId> last_visited() const { return last_; }

    /// Node for input x: the last visited node if within ε, else the nearest
    /// node within ε, else a new node at x. Updates the last visited node.
    std::pair<NodeId, bool> match_or_insert(const Eigen::VectorXd& x);

    /// ŵ_{cur,prev} += 1
    void record_transition(NodeId prev, NodeId cur);
    long long transition_count(NodeId cur, NodeId prev) const;
    /// ŵ_k = max_j ŵ_{kj} (0 when the node has never been entered from another step).
    long long temporal_normalizer(NodeId k) const;
    /// Predecessors of k with their counts, ordered by id.
    const std::map<NodeId, long long>& predecessors(NodeId k) const { return incoming_.at(k); }

    /// Up to ρ other nodes by descending weight exp(-‖x_k - x_s‖² / 2σ²);
    /// ties are broken by ascending id.
    std::vector<std::pair<NodeId, double>> spatial_neighbors(NodeId k) const;

    /// E[k] = Δ + η/ŵ_k Σ_j ŵ_kj (f̃ - f̄_j) + (1-η)/ρ Σ_s w_ks (f̃ - f̄_s),
    /// with Δ = f̃ - y when a supervision is present. Terms with no
    /// contributing nodes are exactly zero.
    double error_signal(NodeId k, double ftilde, std::optional<double> supervision) const;

    /// Running mean of supervisions; unsupervised nodes track f̃.
    void store_value(NodeId k, double ftilde, std::optional<double> supervision);

    /// `id,pos_1..pos_d,value,supervised,supervision_count`
    void write_nodes_csv(const std::string& path) const;
    /// `cur,prev,count`
    void write_edges_csv(const std::string& path) const;

private:
    void check_id(NodeId id) const;

    GraphParams params_;
    std::vector<ErnNode> nodes_;
    std::vector<std::map<NodeId, long long>> incoming_;
    std::optional<NodeId> last_;
};

/// Mean Euclidean distance over all unordered pairs of rows.
/// Throws DomainError for fewer than two rows or a zero mean distance.
double estimate_sigma(const Eigen::MatrixXd& samples);

/// Mean distance between consecutive rows, used for an automatic radius.
double mean_step_distance(const Eigen::MatrixXd& samples);

/// f[k+1] = e^{Aτ} f[k] + e^{Aτ/2} B E[k] / (λ α_h² b_k)
StateVector st_forward_step(const StateVector& f, const Propagator& prop, const OperatorSpec& spec, double b,
                            double error);
StateVector st_forward_step(const StateVector& f, const CompanionSystem& sys, const OperatorSpec& spec, double b,
                            double error, double step);

struct GraphRunLog {
    RunLog log;
    std::vector<std::size_t> nodes_per_epoch;
};

/// Online training with the graph-augmented error signal. Each step matches
/// the input to a node, records the succession, evaluates f̃, forms E[k]
/// from the stored values, advances the state and finally stores f̃ (or the
/// supervision) in the node.
GraphRunLog run_graph_epochs(const Trajectory& traj, const CompanionSystem& sys, const OperatorSpec& spec,
                             const TrainingConfig& cfg, ErnGraph& graph);

}  // namespace elflow
