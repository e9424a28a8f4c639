#pragma once

#include <complex>
#include <vector>

#include <Eigen/Core>

namespace elflow {

using Roots = std::vector<std::complex<double>>;

/// Regularizing differential operator P = α_0 + α_1 D (+ α_2 D²) together with
/// the dissipation rate θ of the weight e^{θt}, the μ flag and the
/// regularization weight λ.
struct OperatorSpec {
    int order_h = 1;
    std::vector<double> alpha{0.0, 1.0};
    double theta = 1.0;
    int mu = 0;
    double lambda = 1.0;

    /// Leading coefficient α_h.
    double leading() const { return alpha.back(); }

    /// Throws DomainError / UnsupportedOrderError when an invariant is broken.
    void validate() const;
};

enum class SystemSource { from_alpha, from_roots };

/// First-order state-space form of the monic reduced ODE
/// D^{2h} f + β_{2h-1} D^{2h-1} f + ... + β_0 f = forcing.
struct CompanionSystem {
    Eigen::VectorXd beta;  // β_0 .. β_{2h-1}
    Eigen::MatrixXd A;
    Eigen::VectorXd B;
    SystemSource source = SystemSource::from_alpha;
    Roots roots;

    int order_h() const { return static_cast<int>(beta.size()) / 2; }
    int dim() const { return static_cast<int>(beta.size()); }
    /// Slowest decay rate: largest real part among the roots.
    double slowest_real_part() const;
};

/// Reduced coefficients β of the Euler-Lagrange equation for h ∈ {1, 2}.
Eigen::VectorXd reduced_coefficients(const OperatorSpec& spec);

/// Companion matrices for a β vector of length 2 or 4; roots from the
/// eigenvalues of A.
CompanionSystem companion_system(const Eigen::VectorXd& beta);

/// Companion system whose characteristic polynomial is Π(s - ℓ_i).
/// The roots must be closed under complex conjugation and have length 2h.
CompanionSystem system_from_roots(const Roots& roots, int order_h);

/// Real coefficients (β_0 .. β_{n-1}) of the monic polynomial with the given
/// conjugate-closed roots.
Eigen::VectorXd monic_coefficients(const Roots& roots);

/// True when every non-real root has a matching conjugate (tolerance relative
/// to the root magnitude).
bool is_conjugate_closed(const Roots& roots, double rel_tol = 1e-12);

}  // namespace elflow
