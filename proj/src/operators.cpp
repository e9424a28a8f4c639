#include "elflow/operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

#include "elflow/errors.hpp"

namespace elflow {

void OperatorSpec::validate() const {
    if (order_h != 1 && order_h != 2) {
        throw UnsupportedOrderError("operator order " + std::to_string(order_h) +
                                    " is not supported (expected 1 or 2)");
    }
    if (alpha.size() != static_cast<std::size_t>(order_h) + 1) {
        throw DomainError("alpha must have order_h + 1 coefficients");
    }
    if (leading() == 0.0) throw DomainError("leading coefficient alpha_h must be nonzero");
    if (!(theta > 0.0)) throw DomainError("theta must be positive");
    if (mu != 0 && mu != 1) throw DomainError("mu must be 0 or 1");
    if (lambda == 0.0 || !std::isfinite(lambda)) throw DomainError("lambda must be finite and nonzero");
    for (double a : alpha) {
        if (!std::isfinite(a)) throw DomainError("alpha coefficients must be finite");
    }
}

double CompanionSystem::slowest_real_part() const {
    double slow = -std::numeric_limits<double>::infinity();
    for (const auto& r : roots) slow = std::max(slow, r.real());
    return slow;
}

Eigen::VectorXd reduced_coefficients(const OperatorSpec& spec) {
    spec.validate();
    const double th = spec.theta;
    const double mu_term = spec.mu / spec.lambda;

    if (spec.order_h == 1) {
        const double a0 = spec.alpha[0];
        const double a1 = spec.alpha[1];
        Eigen::VectorXd beta(2);
        beta[0] = (a0 * a1 * th - a0 * a0 - mu_term) / (a1 * a1);
        beta[1] = th;
        return beta;
    }

    const double a0 = spec.alpha[0];
    const double a1 = spec.alpha[1];
    const double a2 = spec.alpha[2];
    const double a2sq = a2 * a2;
    Eigen::VectorXd beta(4);
    beta[0] = (a0 * a2 * th * th - a0 * a1 * th + a0 * a0 + mu_term) / a2sq;
    beta[1] = (a1 * a2 * th * th + (2.0 * a0 * a2 - a1 * a1) * th) / a2sq;
    beta[2] = (a2sq * th * th + a1 * a2 * th + 2.0 * a0 * a2 - a1 * a1) / a2sq;
    beta[3] = 2.0 * th;
    return beta;
}

namespace {

CompanionSystem build_companion(const Eigen::VectorXd& beta) {
    const Eigen::Index n = beta.size();
    CompanionSystem sys;
    sys.beta = beta;
    sys.A = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i + 1 < n; ++i) sys.A(i, i + 1) = 1.0;
    sys.A.row(n - 1) = -beta.transpose();

    // Forcing enters the highest derivative with sign +1 for h = 1, -1 for h = 2.
    sys.B = Eigen::VectorXd::Zero(n);
    sys.B[n - 1] = (n == 2) ? 1.0 : -1.0;
    return sys;
}

// Descending real part, then descending imaginary part.
void sort_roots(Roots& roots) {
    std::sort(roots.begin(), roots.end(), [](const auto& a, const auto& b) {
        if (a.real() != b.real()) return a.real() > b.real();
        return a.imag() > b.imag();
    });
}

Roots eigen_roots(const Eigen::MatrixXd& A) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(A, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success) throw DomainError("eigenvalue computation failed");
    Roots roots(es.eigenvalues().begin(), es.eigenvalues().end());
    sort_roots(roots);
    return roots;
}

}  // namespace

CompanionSystem companion_system(const Eigen::VectorXd& beta) {
    if (beta.size() != 2 && beta.size() != 4) {
        throw DomainError("beta must have length 2 or 4");
    }
    for (Eigen::Index i = 0; i < beta.size(); ++i) {
        if (!std::isfinite(beta[i])) throw DomainError("beta must be finite");
    }
    CompanionSystem sys = build_companion(beta);
    sys.source = SystemSource::from_alpha;
    sys.roots = eigen_roots(sys.A);
    return sys;
}

bool is_conjugate_closed(const Roots& roots, double rel_tol) {
    std::vector<bool> used(roots.size(), false);
    for (std::size_t i = 0; i < roots.size(); ++i) {
        if (used[i]) continue;
        const auto& r = roots[i];
        const double tol = rel_tol * std::max(1.0, std::abs(r));
        if (std::abs(r.imag()) <= tol) {
            used[i] = true;
            continue;
        }
        bool found = false;
        for (std::size_t j = i + 1; j < roots.size(); ++j) {
            if (!used[j] && std::abs(roots[j] - std::conj(r)) <= tol) {
                used[i] = used[j] = true;
                found = true;
                break;
            }
        }
        if (!found) return false;
    }
    return true;
}

Eigen::VectorXd monic_coefficients(const Roots& roots) {
    if (!is_conjugate_closed(roots)) {
        throw DomainError("root set is not closed under complex conjugation");
    }
    // poly holds ascending coefficients; multiply factor by factor, a real
    // root as (s - r), a conjugate pair as (s² - 2 Re r s + |r|²).
    std::vector<double> poly{1.0};
    auto multiply = [&poly](const std::vector<double>& factor) {
        std::vector<double> out(poly.size() + factor.size() - 1, 0.0);
        for (std::size_t i = 0; i < poly.size(); ++i)
            for (std::size_t j = 0; j < factor.size(); ++j) out[i + j] += poly[i] * factor[j];
        poly = std::move(out);
    };

    std::vector<bool> used(roots.size(), false);
    for (std::size_t i = 0; i < roots.size(); ++i) {
        if (used[i]) continue;
        used[i] = true;
        const auto& r = roots[i];
        const double tol = 1e-12 * std::max(1.0, std::abs(r));
        if (std::abs(r.imag()) <= tol) {
            multiply({-r.real(), 1.0});
            continue;
        }
        for (std::size_t j = i + 1; j < roots.size(); ++j) {
            if (!used[j] && std::abs(roots[j] - std::conj(r)) <= tol) {
                used[j] = true;
                break;
            }
        }
        multiply({std::norm(r), -2.0 * r.real(), 1.0});
    }

    Eigen::VectorXd beta(static_cast<Eigen::Index>(roots.size()));
    for (std::size_t i = 0; i < roots.size(); ++i) beta[static_cast<Eigen::Index>(i)] = poly[i];
    return beta;
}

CompanionSystem system_from_roots(const Roots& roots, int order_h) {
    if (order_h != 1 && order_h != 2) {
        throw UnsupportedOrderError("operator order " + std::to_string(order_h) +
                                    " is not supported (expected 1 or 2)");
    }
    if (roots.size() != static_cast<std::size_t>(2 * order_h)) {
        throw DomainError("expected " + std::to_string(2 * order_h) + " roots");
    }
    for (const auto& r : roots) {
        if (!std::isfinite(r.real()) || !std::isfinite(r.imag()))
            throw DomainError("roots must be finite");
    }
    CompanionSystem sys = build_companion(monic_coefficients(roots));
    sys.source = SystemSource::from_roots;
    // Keep the requested roots verbatim; eigenvalues of A would only add noise.
    sys.roots = roots;
    sort_roots(sys.roots);
    return sys;
}

}  // namespace elflow
