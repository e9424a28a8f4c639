#pragma once

#include <optional>
#include <variant>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "elflow/integrator.hpp"
#include "elflow/operators.hpp"
#include "elflow/signals.hpp"

namespace elflow {

enum class GreenMode { causal, noncausal };

/// Values beyond this magnitude are clamped and reported as saturated.
inline constexpr double kGreenClamp = 1e300;

/// Impulse response of the monic reduced operator Q with distinct roots ℓ_l,
/// normalized so that g and its first 2h-2 derivatives vanish at 0 and the
/// (2h-1)-th derivative jumps by one:
///   causal:     g(t) = Σ w_l e^{ℓ_l t} for t ≥ 0, zero for t < 0
///   noncausal:  g(t) = ½ sgn(t) Σ w_l e^{ℓ_l t}  (average of the causal and
///               anti-causal responses; grows without bound on t < 0 when the
///               roots are stable)
/// with w_l = 1 / Π_{m≠l} (ℓ_l - ℓ_m).
class GreensFunction {
public:
    GreensFunction(Roots roots, GreenMode mode);

    double operator()(double t) const { return derivative(t, 0); }
    /// s-th derivative; at t = 0 the right limit is returned unless
    /// `left_limit` is set.
    double derivative(double t, int s, bool left_limit = false) const;

    const Roots& roots() const { return roots_; }
    GreenMode mode() const { return mode_; }
    int order_h() const { return static_cast<int>(roots_.size()) / 2; }
    /// ν = (-1)^h
    int nu() const { return order_h() % 2 == 0 ? 1 : -1; }

private:
    Roots roots_;
    std::vector<std::complex<double>> weights_;
    GreenMode mode_;
};

/// Real basis of Ker(Q): e^{ℓt} for a real root, e^{at}cos(bt) and
/// e^{at}sin(bt) for a conjugate pair a ± ib.
class KernelBasis {
public:
    explicit KernelBasis(const Roots& roots);

    int size() const { return static_cast<int>(terms_.size()); }
    double derivative(int l, double t, int s) const;

private:
    enum class Part { real, imag };
    struct Term {
        std::complex<double> root;
        Part part;
    };
    std::vector<Term> terms_;
};

struct PeriodicBoundary {};
struct CauchyBoundary {
    std::vector<double> values;  // f̄^{(s)}(0), s = 0..2h-1
};
using Boundary = std::variant<PeriodicBoundary, CauchyBoundary>;

/// Dense system M [f̄(t_1..t_N), c_1..c_2h]ᵀ = rhs with the 2h boundary rows last.
struct GlobalSystem {
    Eigen::MatrixXd M;
    Eigen::VectorXd rhs;
    Eigen::MatrixXd Gg;  // g(t_j - t_i) / b_i
    Eigen::MatrixXd Cg;  // -φ_l(t_j)
    Eigen::MatrixXd Gc;  // boundary rows acting on f̄
    Eigen::MatrixXd Cc;  // boundary rows acting on c
    bool periodic = true;
    double period = 0.0;
    double cond_estimate = 0.0;  // 1-norm condition estimate of M
    bool saturated = false;      // some kernel value hit kGreenClamp

    Eigen::Index points() const { return Gg.rows(); }
};

GlobalSystem assemble_system(const Trajectory& traj, const GreensFunction& gf, const OperatorSpec& spec,
                             const Boundary& boundary);

struct GlobalSolution {
    Eigen::VectorXd fbar;  // f̄(t_i)
    Eigen::VectorXd c;     // kernel coefficients
    double residual = 0.0;           // ‖M·sol - rhs‖
    double relative_residual = 0.0;  // residual / ‖rhs‖ (absolute when rhs = 0)
    double cond_estimate = 0.0;
};

/// Throws SingularSystemError when the condition estimate exceeds 1/ε.
GlobalSolution solve_global(const GlobalSystem& gs);

/// s-th derivative of the global solution at time t:
/// Σ c_l φ_l(t) - ν/(λ α_h²) Σ_i (f̄(t_i) - y_i)/b_i · g(t - t_i).
/// At a supervision instant the right limit is used unless `left_limit` is set.
double reconstruct(const GreensFunction& gf, const GlobalSolution& sol, const Trajectory& traj,
                   const OperatorSpec& spec, double t, int s = 0, bool left_limit = false);

struct ConvergenceParams {
    double C = 1.0;
    double beta_conv = 1.0;
    double lambda = 1.0;
    long long N = 1;
    double T = 1.0;
};

/// C (1 + 1/λ)(1 + C/λ)^{N-1} e^{-βT}; below one predicts online/global agreement.
double convergence_indicator(const ConvergenceParams& p);

/// f̄ and its derivatives up to order h on a quadrature grid, plus f̄ at the
/// supervision instants. The grid may repeat an instant to represent the two
/// one-sided limits across an impulse.
struct FunctionalSamples {
    std::vector<double> t;
    std::vector<std::vector<double>> derivs;  // derivs[k][j] = f̄^{(k)}(t_j)
    std::vector<double> at_supervision;
};

/// λ∫(Pf̄)² e^{θt} dt + μ∫f̄² e^{θt} dt + Σ e^{θ t_i}/b_i (f̄(t_i) - y_i)²,
/// integrals by the trapezoidal rule.
double functional_value(const FunctionalSamples& samples, const Trajectory& traj, const OperatorSpec& spec);

/// Samples of the global solution on `grid` (derivatives from the closed form).
/// A repeated grid instant takes the left limit first, then the right one.
FunctionalSamples global_functional_samples(const GreensFunction& gf, const GlobalSolution& sol,
                                            const Trajectory& traj, const OperatorSpec& spec,
                                            const std::vector<double>& grid);

/// Samples of an online pass; state components give the derivative stack.
FunctionalSamples dense_functional_samples(const DenseSamples& dense, int order_h);

}  // namespace elflow
