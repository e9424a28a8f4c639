#include "elflow/integrator.hpp"

#include <cmath>

#include "elflow/csv.hpp"
#include "elflow/errors.hpp"

namespace elflow {

Propagator::Propagator(const CompanionSystem& sys, double step) : step_(step) {
    if (!(step > 0.0) || !std::isfinite(step)) throw DomainError("step must be positive and finite");
    full_ = expm(sys.A * step);
    half_ = expm(sys.A * (0.5 * step));
    gain_ = half_ * sys.B;
}

StateVector half_step_state(const StateVector& f, const CompanionSystem& sys, double step) {
    if (!(step > 0.0)) throw DomainError("step must be positive");
    return expm(sys.A * (0.5 * step)) * f;
}

double impulse_scale(const OperatorSpec& spec, double b) {
    if (spec.lambda == 0.0) throw DomainError("lambda must be nonzero");
    const double lead = spec.leading();
    return 1.0 / (spec.lambda * lead * lead * b);
}

StepResult forward_step(const StateVector& f, const Propagator& prop, const OperatorSpec& spec,
                        double b, std::optional<double> target) {
    StepResult r;
    r.ftilde = prop.half_step_value(f);
    r.delta = target ? r.ftilde - *target : 0.0;
    r.next = prop.advance(f, r.delta * impulse_scale(spec, b));
    return r;
}

StepResult forward_step(const StateVector& f, const CompanionSystem& sys, const OperatorSpec& spec,
                        double b, std::optional<double> target, double step) {
    return forward_step(f, Propagator(sys, step), spec, b, target);
}

Trajectory epoch_data(const Trajectory& traj, const TrainingConfig& cfg, int epoch) {
    Trajectory data;
    switch (cfg.shuffle) {
        case TrainingConfig::Shuffle::none:
            return traj;
        case TrainingConfig::Shuffle::once:
            data = permute(traj, cfg.seed);
            break;
        case TrainingConfig::Shuffle::per_epoch:
            data = permute(traj, cfg.seed + static_cast<std::uint64_t>(epoch));
            break;
    }
    if (cfg.finite_difference_after_shuffle) data = with_finite_difference_derivatives(data);
    return data;
}

namespace {

bool out_of_range(double v) { return !std::isfinite(v) || std::abs(v) > kDivergenceThreshold; }

}  // namespace

RunLog run_epochs(const Trajectory& traj, const CompanionSystem& sys, const OperatorSpec& spec,
                  const TrainingConfig& cfg) {
    const Eigen::Index n = traj.size();
    if (n == 0) throw DomainError("trajectory is empty");
    if (cfg.epochs < 1) throw DomainError("epochs must be at least 1");
    if (traj.b.size() != n || traj.x.rows() != n) throw DomainError("trajectory fields have inconsistent lengths");

    const Propagator prop(sys, cfg.tau_prime);
    StateVector f = cfg.initial_state.size() == 0 ? StateVector::Zero(sys.dim()) : cfg.initial_state;
    if (f.size() != sys.dim()) throw DomainError("initial state has wrong dimension");

    const int supervised = cfg.effective_supervised_epochs();
    const bool reorders = cfg.shuffle == TrainingConfig::Shuffle::per_epoch;

    RunLog log;
    log.mse_per_epoch.reserve(static_cast<std::size_t>(cfg.epochs));
    log.trace.reserve(static_cast<std::size_t>(cfg.epochs) * static_cast<std::size_t>(n));

    Trajectory data = epoch_data(traj, cfg, 0);
    long long k = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (reorders && epoch > 0) data = epoch_data(traj, cfg, epoch);
        const bool supervise = epoch < supervised;
        double sq = 0.0;
        for (Eigen::Index i = 0; i < n; ++i, ++k) {
            const double y = data.y[i];
            const auto step = forward_step(f, prop, spec, data.b[i],
                                           supervise ? std::optional<double>(y) : std::nullopt);
            const double err = step.ftilde - y;
            sq += err * err;
            log.trace.push_back({k, (static_cast<double>(k) + 0.5) * prop.step(), step.ftilde, y, step.delta,
                                 supervise});
            f = step.next;
            if (!log.diverged && (out_of_range(step.ftilde) || out_of_range(f.cwiseAbs().maxCoeff()))) {
                log.diverged = true;
            }
        }
        log.mse_per_epoch.push_back(sq / static_cast<double>(n));
    }
    log.final_state = f;
    return log;
}

std::vector<StateVector> free_evolution(const StateVector& f, const CompanionSystem& sys, int steps,
                                        double step) {
    if (steps < 0) throw DomainError("steps must be non-negative");
    std::vector<StateVector> out;
    out.reserve(static_cast<std::size_t>(steps) + 1);
    out.push_back(f);
    if (steps == 0) return out;
    const Eigen::MatrixXd phi = expm(sys.A * step);
    for (int s = 0; s < steps; ++s) out.push_back(phi * out.back());
    return out;
}

DenseSamples sample_pass(const StateVector& f0, const Trajectory& traj, const CompanionSystem& sys,
                         const OperatorSpec& spec, double step, int refine) {
    if (refine < 2 || refine % 2 != 0) throw DomainError("refine must be an even number >= 2");
    const Propagator prop(sys, step);
    const int half_panels = refine / 2;

    // e^{A·j·step/refine} for j = 0..refine/2.
    std::vector<Eigen::MatrixXd> sub(static_cast<std::size_t>(half_panels) + 1);
    for (int j = 0; j <= half_panels; ++j) sub[static_cast<std::size_t>(j)] = expm(sys.A * (step * j / refine));

    DenseSamples out;
    StateVector f = f0;
    for (Eigen::Index i = 0; i < traj.size(); ++i) {
        const double t0 = static_cast<double>(i) * step;
        const auto r = forward_step(f, prop, spec, traj.b[i], traj.y[i]);
        const StateVector kick = sys.B * (r.delta * impulse_scale(spec, traj.b[i]));
        const StateVector mid = prop.half_step(f);

        // Before the impulse: [t0, t0 + step/2], left limit at the midpoint.
        for (int j = 0; j <= half_panels; ++j) {
            out.t.push_back(t0 + step * j / refine);
            out.state.push_back(sub[static_cast<std::size_t>(j)] * f);
        }
        // After: right limit at the midpoint through the end of the step.
        const StateVector after = mid + kick;
        for (int j = 0; j < half_panels; ++j) {
            out.t.push_back(t0 + 0.5 * step + step * j / refine);
            out.state.push_back(sub[static_cast<std::size_t>(j)] * after);
        }
        out.ftilde.push_back(r.ftilde);
        f = r.next;
    }
    out.t.push_back(static_cast<double>(traj.size()) * step);
    out.state.push_back(f);
    return out;
}

void write_mse_csv(const RunLog& log, const std::string& path) {
    CsvTable table({"epoch", "mse"});
    for (std::size_t e = 0; e < log.mse_per_epoch.size(); ++e) {
        table.add_row({CsvCell(static_cast<long long>(e + 1)), CsvCell(log.mse_per_epoch[e])});
    }
    write_csv(table, path);
}

void write_trace_csv(const RunLog& log, const std::string& path) {
    CsvTable table({"k", "t", "f_tilde", "y", "delta"});
    for (const auto& row : log.trace) {
        table.add_row({CsvCell(row.k), CsvCell(row.t), CsvCell(row.ftilde), CsvCell(row.y), CsvCell(row.delta)});
    }
    write_csv(table, path);
}

void write_state_csv(const StateVector& state, const std::string& path) {
    CsvTable table({"index", "value"});
    for (Eigen::Index i = 0; i < state.size(); ++i) {
        table.add_row({CsvCell(static_cast<long long>(i)), CsvCell(state[i])});
    }
    write_csv(table, path);
}

}  // namespace elflow
