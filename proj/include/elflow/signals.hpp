#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace elflow {

/// Supervision stream sampled at mid-interval instants.
/// Rows of x, xdot, y and b are paired; t is the time grid of the system.
struct Trajectory {
    double tau = 0.0;
    double T = 0.0;
    Eigen::VectorXd t;
    Eigen::MatrixXd x;     // N × d
    Eigen::MatrixXd xdot;  // N × d
    Eigen::VectorXd y;
    Eigen::VectorXd b;     // √(1 + |x'|²)

    Eigen::Index size() const { return y.size(); }
    Eigen::Index input_dim() const { return x.cols(); }
};

enum class TaskKind { sine, cosine };

/// Mid-interval grid t_k = τ/2 + kτ with N = ⌊T/τ⌋ samples, so that every
/// update interval [kτ, (k+1)τ] lies inside [0, T].
Eigen::VectorXd sample_grid(double tau, double T);

/// Analytic supervision task on the default grid:
///   sine:   x = sin t,     x' = cos t,   y = 2x - 1
///   cosine: x = -3 cos t,  x' = 3 sin t, y = x + 3
Trajectory build_task(TaskKind kind, double tau, double T);
TaskKind parse_task_kind(const std::string& name);

/// Central differences on interior rows, one-sided at both ends.
Eigen::MatrixXd finite_difference_derivatives(const Eigen::MatrixXd& x, double tau);

/// Row-wise arc weight √(1 + ‖x'_i‖²).
Eigen::VectorXd arc_weights(const Eigen::MatrixXd& xdot);

/// Seeded Fisher-Yates permutation of {0..n-1}.
std::vector<Eigen::Index> seeded_permutation(Eigen::Index n, std::uint64_t seed);

/// Shuffles the data rows (x, xdot, y, b) together; t is left untouched.
Trajectory permute(const Trajectory& traj, std::uint64_t seed);

/// Replaces xdot and b with finite-difference estimates over the current row order.
Trajectory with_finite_difference_derivatives(const Trajectory& traj);

/// Reads `t,x_1..x_d,y` (header required) and optionally `xdot_1..xdot_d`
/// columns named with an `xdot` prefix. Missing derivatives are finite-differenced.
Trajectory load_trajectory_csv(const std::string& path);

}  // namespace elflow
