#include "elflow/global_solver.hpp"

#include <cmath>
#include <limits>

#include <Eigen/LU>

#include "elflow/errors.hpp"

namespace elflow {

namespace {

bool is_real_root(const std::complex<double>& r) {
    return std::abs(r.imag()) <= 1e-12 * std::max(1.0, std::abs(r));
}

double clamp_kernel(double v, double sign_hint) {
    if (std::isfinite(v) && std::abs(v) < kGreenClamp) return v;
    if (std::isfinite(v)) return std::copysign(kGreenClamp, v);
    return std::copysign(kGreenClamp, sign_hint);
}

}  // namespace

GreensFunction::GreensFunction(Roots roots, GreenMode mode) : roots_(std::move(roots)), mode_(mode) {
    if (roots_.size() != 2 && roots_.size() != 4) throw DomainError("Green's function needs 2 or 4 roots");
    if (!is_conjugate_closed(roots_)) throw DomainError("root set is not closed under complex conjugation");
    for (std::size_t l = 0; l < roots_.size(); ++l) {
        std::complex<double> denom = 1.0;
        for (std::size_t m = 0; m < roots_.size(); ++m) {
            if (m == l) continue;
            const auto diff = roots_[l] - roots_[m];
            if (std::abs(diff) <= 1e-12 * std::max(1.0, std::abs(roots_[l]))) {
                throw DomainError("repeated roots are not supported by the Green's function kernel");
            }
            denom *= diff;
        }
        weights_.push_back(1.0 / denom);
    }
}

double GreensFunction::derivative(double t, int s, bool left_limit) const {
    const bool positive_side = t > 0.0 || (t == 0.0 && !left_limit);
    double factor = 1.0;
    if (mode_ == GreenMode::causal) {
        if (!positive_side) return 0.0;
    } else {
        factor = positive_side ? 0.5 : -0.5;
    }

    std::complex<double> sum = 0.0;
    double dominant_exponent = -std::numeric_limits<double>::infinity();
    double dominant_sign = 1.0;
    for (std::size_t l = 0; l < roots_.size(); ++l) {
        const auto term = weights_[l] * std::pow(roots_[l], s) * std::exp(roots_[l] * t);
        sum += term;
        const double exponent = roots_[l].real() * t;
        if (exponent > dominant_exponent) {
            dominant_exponent = exponent;
            const double coeff = (weights_[l] * std::pow(roots_[l], s)).real();
            dominant_sign = coeff < 0.0 ? -1.0 : 1.0;
        }
    }
    return clamp_kernel(factor * sum.real(), factor * dominant_sign);
}

KernelBasis::KernelBasis(const Roots& roots) {
    for (const auto& r : roots) {
        if (is_real_root(r)) {
            terms_.push_back({{r.real(), 0.0}, Part::real});
        } else if (r.imag() > 0.0) {
            terms_.push_back({r, Part::real});
            terms_.push_back({r, Part::imag});
        }
    }
    if (terms_.size() != roots.size()) throw DomainError("root set is not closed under complex conjugation");
}

double KernelBasis::derivative(int l, double t, int s) const {
    const auto& term = terms_.at(static_cast<std::size_t>(l));
    const auto v = std::pow(term.root, s) * std::exp(term.root * t);
    return clamp_kernel(term.part == Part::real ? v.real() : v.imag(), 1.0);
}

GlobalSystem assemble_system(const Trajectory& traj, const GreensFunction& gf, const OperatorSpec& spec,
                             const Boundary& boundary) {
    const Eigen::Index n = traj.size();
    if (n < 1) throw DomainError("global system needs at least one supervision point");
    if (2 * spec.order_h != static_cast<int>(gf.roots().size())) {
        throw DomainError("Green's function order does not match the operator");
    }
    if (spec.lambda == 0.0) throw DomainError("lambda must be nonzero");

    const KernelBasis basis(gf.roots());
    const Eigen::Index m = basis.size();
    // Q is monic here, so the operator's leading α_h² rides along with λ.
    const double lead = spec.leading();
    const double q = spec.lambda * lead * lead / gf.nu();

    GlobalSystem gs;
    gs.period = traj.T;
    gs.periodic = std::holds_alternative<PeriodicBoundary>(boundary);
    gs.Gg.resize(n, n);
    gs.Cg.resize(n, m);
    gs.Gc.resize(m, n);
    gs.Cc.resize(m, m);

    auto kernel = [&gs](double v) {
        if (std::abs(v) >= kGreenClamp) gs.saturated = true;
        return v;
    };

    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) gs.Gg(j, i) = kernel(gf(traj.t[j] - traj.t[i])) / traj.b[i];
        for (Eigen::Index l = 0; l < m; ++l) gs.Cg(j, l) = -kernel(basis.derivative(static_cast<int>(l), traj.t[j], 0));
    }

    Eigen::VectorXd boundary_shift = Eigen::VectorXd::Zero(m);
    if (gs.periodic) {
        // f̄^{(s)}(0) = f̄^{(s)}(T), multiplied through by λ/ν.
        const double T = traj.T;
        for (Eigen::Index s = 0; s < m; ++s) {
            const int order = static_cast<int>(s);
            for (Eigen::Index l = 0; l < m; ++l) {
                const int li = static_cast<int>(l);
                gs.Cc(s, l) = kernel(basis.derivative(li, 0.0, order)) - kernel(basis.derivative(li, T, order));
            }
            for (Eigen::Index i = 0; i < n; ++i) {
                gs.Gc(s, i) = (kernel(gf.derivative(T - traj.t[i], order)) -
                               kernel(gf.derivative(-traj.t[i], order))) / traj.b[i];
            }
        }
    } else {
        const auto& values = std::get<CauchyBoundary>(boundary).values;
        if (values.size() != static_cast<std::size_t>(m)) {
            throw DomainError("Cauchy boundary needs " + std::to_string(m) + " values");
        }
        // f̄^{(s)}(0) = v_s, multiplied through by λ/ν.
        for (Eigen::Index s = 0; s < m; ++s) {
            const int order = static_cast<int>(s);
            for (Eigen::Index l = 0; l < m; ++l) gs.Cc(s, l) = kernel(basis.derivative(static_cast<int>(l), 0.0, order));
            for (Eigen::Index i = 0; i < n; ++i) gs.Gc(s, i) = -kernel(gf.derivative(-traj.t[i], order)) / traj.b[i];
            boundary_shift[s] = q * values[static_cast<std::size_t>(s)];
        }
    }

    // M = (λ/ν)(I_N + C) + G with C = [0 Cg; 0 Cc], G = [Gg 0; Gc 0].
    gs.M = Eigen::MatrixXd::Zero(n + m, n + m);
    gs.M.topLeftCorner(n, n) = gs.Gg;
    gs.M.topLeftCorner(n, n).diagonal().array() += q;
    gs.M.topRightCorner(n, m) = q * gs.Cg;
    gs.M.bottomLeftCorner(m, n) = gs.Gc;
    gs.M.bottomRightCorner(m, m) = q * gs.Cc;

    gs.rhs.resize(n + m);
    gs.rhs.head(n) = gs.Gg * traj.y;
    gs.rhs.tail(m) = gs.Gc * traj.y + boundary_shift;

    if (gs.M.allFinite()) {
        const Eigen::PartialPivLU<Eigen::MatrixXd> lu(gs.M);
        const double rcond = lu.rcond();
        gs.cond_estimate = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
    } else {
        gs.cond_estimate = std::numeric_limits<double>::infinity();
    }
    return gs;
}

GlobalSolution solve_global(const GlobalSystem& gs) {
    if (!gs.M.allFinite() || !gs.rhs.allFinite()) {
        throw SingularSystemError("global system has non-finite entries", gs.cond_estimate);
    }
    const double limit = 1.0 / std::numeric_limits<double>::epsilon();
    if (!(gs.cond_estimate < limit)) {
        // A NaN estimate comes from a zero pivot.
        const double cond = std::isnan(gs.cond_estimate) ? std::numeric_limits<double>::infinity() : gs.cond_estimate;
        throw SingularSystemError("global system is numerically singular (condition estimate " +
                                      std::to_string(cond) + ")",
                                  cond);
    }
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(gs.M);
    const Eigen::VectorXd sol = lu.solve(gs.rhs);

    GlobalSolution out;
    const Eigen::Index n = gs.points();
    out.fbar = sol.head(n);
    out.c = sol.tail(sol.size() - n);
    out.residual = (gs.M * sol - gs.rhs).norm();
    const double rhs_norm = gs.rhs.norm();
    out.relative_residual = rhs_norm > 0.0 ? out.residual / rhs_norm : out.residual;
    out.cond_estimate = gs.cond_estimate;
    return out;
}

double reconstruct(const GreensFunction& gf, const GlobalSolution& sol, const Trajectory& traj,
                   const OperatorSpec& spec, double t, int s, bool left_limit) {
    const KernelBasis basis(gf.roots());
    double kernel_part = 0.0;
    for (int l = 0; l < basis.size(); ++l) kernel_part += sol.c[l] * basis.derivative(l, t, s);

    double impulse_part = 0.0;
    for (Eigen::Index i = 0; i < traj.size(); ++i) {
        impulse_part += (sol.fbar[i] - traj.y[i]) / traj.b[i] * gf.derivative(t - traj.t[i], s, left_limit);
    }
    const double lead = spec.leading();
    return kernel_part - gf.nu() / (spec.lambda * lead * lead) * impulse_part;
}

double convergence_indicator(const ConvergenceParams& p) {
    if (p.lambda == 0.0) throw DomainError("lambda must be nonzero");
    if (!(p.C >= 1.0)) throw DomainError("C must be at least 1");
    if (!(p.beta_conv > 0.0)) throw DomainError("convergence rate must be positive");
    if (p.N < 1) throw DomainError("N must be at least 1");
    return p.C * (1.0 + 1.0 / p.lambda) * std::pow(1.0 + p.C / p.lambda, static_cast<double>(p.N - 1)) *
           std::exp(-p.beta_conv * p.T);
}

double functional_value(const FunctionalSamples& samples, const Trajectory& traj, const OperatorSpec& spec) {
    const std::size_t n = samples.t.size();
    const auto h = static_cast<std::size_t>(spec.order_h);
    if (samples.derivs.size() < h + 1) throw DomainError("derivative stack must reach order h");
    for (std::size_t k = 0; k <= h; ++k) {
        if (samples.derivs[k].size() != n) throw DomainError("mismatched grid lengths in derivative stack");
    }
    if (samples.at_supervision.size() != static_cast<std::size_t>(traj.size())) {
        throw DomainError("mismatched supervision sample count");
    }

    auto integrand = [&](std::size_t j) {
        double pf = 0.0;
        for (std::size_t k = 0; k <= h; ++k) pf += spec.alpha[k] * samples.derivs[k][j];
        const double f = samples.derivs[0][j];
        return (spec.lambda * pf * pf + spec.mu * f * f) * std::exp(spec.theta * samples.t[j]);
    };

    double integral = 0.0;
    for (std::size_t j = 1; j < n; ++j) {
        const double dt = samples.t[j] - samples.t[j - 1];
        if (dt < 0.0) throw DomainError("quadrature grid must be non-decreasing");
        integral += 0.5 * dt * (integrand(j - 1) + integrand(j));
    }

    double penalty = 0.0;
    for (Eigen::Index i = 0; i < traj.size(); ++i) {
        const double err = samples.at_supervision[static_cast<std::size_t>(i)] - traj.y[i];
        penalty += std::exp(spec.theta * traj.t[i]) / traj.b[i] * err * err;
    }
    return integral + penalty;
}

FunctionalSamples global_functional_samples(const GreensFunction& gf, const GlobalSolution& sol,
                                            const Trajectory& traj, const OperatorSpec& spec,
                                            const std::vector<double>& grid) {
    FunctionalSamples out;
    out.t = grid;
    const auto h = static_cast<std::size_t>(spec.order_h);
    out.derivs.assign(h + 1, std::vector<double>(grid.size()));
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const bool left = j + 1 < grid.size() && grid[j + 1] == grid[j];
        for (std::size_t k = 0; k <= h; ++k) {
            out.derivs[k][j] = reconstruct(gf, sol, traj, spec, grid[j], static_cast<int>(k), left);
        }
    }
    out.at_supervision.assign(sol.fbar.data(), sol.fbar.data() + sol.fbar.size());
    return out;
}

FunctionalSamples dense_functional_samples(const DenseSamples& dense, int order_h) {
    FunctionalSamples out;
    out.t = dense.t;
    const auto h = static_cast<std::size_t>(order_h);
    out.derivs.assign(h + 1, std::vector<double>(dense.t.size()));
    for (std::size_t j = 0; j < dense.t.size(); ++j) {
        for (std::size_t k = 0; k <= h; ++k) out.derivs[k][j] = dense.state[j][static_cast<Eigen::Index>(k)];
    }
    out.at_supervision = dense.ftilde;
    return out;
}

}  // namespace elflow
