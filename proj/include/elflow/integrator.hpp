#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "elflow/operators.hpp"
#include "elflow/signals.hpp"

namespace elflow {

/// Matrix exponential by scaling and squaring. Throws DomainError on
/// non-finite input or n > 16.
Eigen::MatrixXd expm(const Eigen::MatrixXd& M);

/// f = [f̄, Df̄, ..., D^{2h-1} f̄] at a grid instant.
using StateVector = Eigen::VectorXd;

/// Cached e^{A·step}, e^{A·step/2} and e^{A·step/2}·B for a fixed step.
/// A is constant for a run, so one Propagator serves every update.
class Propagator {
public:
    Propagator(const CompanionSystem& sys, double step);

    double step() const { return step_; }
    const Eigen::MatrixXd& full() const { return full_; }
    const Eigen::MatrixXd& half() const { return half_; }
    const Eigen::VectorXd& impulse_gain() const { return gain_; }

    /// e^{A·step/2} f
    StateVector half_step(const StateVector& f) const { return half_ * f; }
    /// (e^{A·step/2} f)[0] without forming the whole vector.
    double half_step_value(const StateVector& f) const { return half_.row(0).dot(f); }
    /// e^{A·step} f + e^{A·step/2} B · scaled_error
    StateVector advance(const StateVector& f, double scaled_error) const {
        return full_ * f + gain_ * scaled_error;
    }

private:
    double step_;
    Eigen::MatrixXd full_;
    Eigen::MatrixXd half_;
    Eigen::VectorXd gain_;
};

StateVector half_step_state(const StateVector& f, const CompanionSystem& sys, double step);

struct StepResult {
    StateVector next;
    double ftilde = 0.0;  // f̄ at the mid-interval supervision instant
    double delta = 0.0;   // f̃ - y, or 0 without a target
};

/// Impulse scale 1 / (λ α_h² b).
double impulse_scale(const OperatorSpec& spec, double b);

/// One exact update across a step with a supervision impulse at its midpoint.
StepResult forward_step(const StateVector& f, const CompanionSystem& sys, const OperatorSpec& spec,
                        double b, std::optional<double> target, double step);
StepResult forward_step(const StateVector& f, const Propagator& prop, const OperatorSpec& spec,
                        double b, std::optional<double> target);

struct TrainingConfig {
    int epochs = 1;
    double tau = 0.1;
    double tau_prime = 0.1;
    StateVector initial_state;  // empty means all zeros
    int supervised_epochs = -1; // negative means equal to epochs

    enum class Shuffle { none, once, per_epoch };
    Shuffle shuffle = Shuffle::none;
    std::uint64_t seed = 0;
    // Recompute x' and b by finite differences after every reordering.
    bool finite_difference_after_shuffle = false;

    int effective_supervised_epochs() const { return supervised_epochs < 0 ? epochs : supervised_epochs; }
};

struct TraceRow {
    long long k = 0;
    double t = 0.0;
    double ftilde = 0.0;
    double y = 0.0;
    double delta = 0.0;
    bool supervised = true;
};

struct RunLog {
    std::vector<double> mse_per_epoch;
    std::vector<TraceRow> trace;
    StateVector final_state;
    bool diverged = false;
};

/// Magnitude above which a run is reported as diverged.
inline constexpr double kDivergenceThreshold = 1e12;

/// Returns the trajectory presented during `epoch` under the shuffle policy.
Trajectory epoch_data(const Trajectory& traj, const TrainingConfig& cfg, int epoch);

/// Online training: forward_step over the samples in order for every epoch,
/// carrying the state across epochs. Targets are withheld after
/// supervised_epochs but the evolution continues.
RunLog run_epochs(const Trajectory& traj, const CompanionSystem& sys, const OperatorSpec& spec,
                  const TrainingConfig& cfg);

/// Homogeneous stepping f ← e^{A·step} f; element 0 is the input state.
std::vector<StateVector> free_evolution(const StateVector& f, const CompanionSystem& sys, int steps,
                                        double step);

/// Dense samples of the state over one pass through `traj` (starting from
/// f0 at time 0), `refine` samples per step, plus the final point. Used to
/// evaluate the functional along the online solution. Impulses are applied at
/// the midpoints exactly as in forward_step.
struct DenseSamples {
    std::vector<double> t;
    std::vector<StateVector> state;
    std::vector<double> ftilde;  // f̄ at each supervision instant
};
DenseSamples sample_pass(const StateVector& f0, const Trajectory& traj, const CompanionSystem& sys,
                         const OperatorSpec& spec, double step, int refine);

/// CSV writers for a RunLog: `epoch,mse` and `k,t,f_tilde,y,delta`.
void write_mse_csv(const RunLog& log, const std::string& path);
void write_trace_csv(const RunLog& log, const std::string& path);
void write_state_csv(const StateVector& state, const std::string& path);

}  // namespace elflow
