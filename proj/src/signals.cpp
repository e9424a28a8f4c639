#include "elflow/signals.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "elflow/errors.hpp"

namespace elflow {

Eigen::VectorXd sample_grid(double tau, double T) {
    if (!(tau > 0.0) || !std::isfinite(tau) || !std::isfinite(T)) {
        throw DomainError("sampling step must be positive and finite");
    }
    if (tau >= T) throw DomainError("sampling step must be smaller than the period (empty grid)");

    // One sample per whole update interval [kτ, (k+1)τ] inside [0, T].
    // The small slack absorbs rounding when T is an exact multiple of τ.
    const auto n = static_cast<Eigen::Index>(std::floor(T / tau * (1.0 + 1e-12)));
    Eigen::VectorXd t(n);
    for (Eigen::Index k = 0; k < n; ++k) t[k] = 0.5 * tau + static_cast<double>(k) * tau;
    return t;
}

TaskKind parse_task_kind(const std::string& name) {
    if (name == "sine") return TaskKind::sine;
    if (name == "cosine") return TaskKind::cosine;
    throw DomainError("unknown task kind '" + name + "'");
}

Eigen::VectorXd arc_weights(const Eigen::MatrixXd& xdot) {
    return (1.0 + xdot.rowwise().squaredNorm().array()).sqrt().matrix();
}

Trajectory build_task(TaskKind kind, double tau, double T) {
    Trajectory traj;
    traj.tau = tau;
    traj.T = T;
    traj.t = sample_grid(tau, T);
    const Eigen::Index n = traj.t.size();
    traj.x.resize(n, 1);
    traj.xdot.resize(n, 1);
    traj.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double ti = traj.t[i];
        switch (kind) {
            case TaskKind::sine:
                traj.x(i, 0) = std::sin(ti);
                traj.xdot(i, 0) = std::cos(ti);
                traj.y[i] = 2.0 * traj.x(i, 0) - 1.0;
                break;
            case TaskKind::cosine:
                traj.x(i, 0) = -3.0 * std::cos(ti);
                traj.xdot(i, 0) = 3.0 * std::sin(ti);
                traj.y[i] = traj.x(i, 0) + 3.0;
                break;
        }
    }
    traj.b = arc_weights(traj.xdot);
    return traj;
}

Eigen::MatrixXd finite_difference_derivatives(const Eigen::MatrixXd& x, double tau) {
    const Eigen::Index n = x.rows();
    if (n < 2) throw DomainError("finite differences need at least two samples");
    if (!(tau > 0.0)) throw DomainError("sampling step must be positive");

    Eigen::MatrixXd d(n, x.cols());
    d.row(0) = (x.row(1) - x.row(0)) / tau;
    d.row(n - 1) = (x.row(n - 1) - x.row(n - 2)) / tau;
    for (Eigen::Index i = 1; i + 1 < n; ++i) d.row(i) = (x.row(i + 1) - x.row(i - 1)) / (2.0 * tau);
    return d;
}

std::vector<Eigen::Index> seeded_permutation(Eigen::Index n, std::uint64_t seed) {
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;

    // Bounded draws by rejection so the sequence depends only on mt19937_64,
    // not on the standard library's distribution implementation.
    std::mt19937_64 rng(seed);
    auto draw = [&rng](std::uint64_t bound) {
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t v;
        do {
            v = rng();
        } while (v >= limit);
        return v % bound;
    };
    for (std::size_t i = perm.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(draw(i));
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

Trajectory permute(const Trajectory& traj, std::uint64_t seed) {
    const auto perm = seeded_permutation(traj.size(), seed);
    Trajectory out = traj;
    for (std::size_t i = 0; i < perm.size(); ++i) {
        const auto dst = static_cast<Eigen::Index>(i);
        const auto src = perm[i];
        out.x.row(dst) = traj.x.row(src);
        out.xdot.row(dst) = traj.xdot.row(src);
        out.y[dst] = traj.y[src];
        out.b[dst] = traj.b[src];
    }
    return out;
}

Trajectory with_finite_difference_derivatives(const Trajectory& traj) {
    Trajectory out = traj;
    out.xdot = finite_difference_derivatives(traj.x, traj.tau);
    out.b = arc_weights(out.xdot);
    return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        cells.push_back(cell);
    }
    return cells;
}

}  // namespace

Trajectory load_trajectory_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open trajectory file '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw DomainError("trajectory file '" + path + "' is empty");
    const auto header = split_csv_line(line);

    int t_col = -1, y_col = -1;
    std::vector<int> x_cols, xdot_cols;
    for (int c = 0; c < static_cast<int>(header.size()); ++c) {
        const auto& h = header[static_cast<std::size_t>(c)];
        if (h == "t") t_col = c;
        else if (h == "y") y_col = c;
        else if (h.rfind("xdot", 0) == 0) xdot_cols.push_back(c);
        else if (h.rfind("x", 0) == 0) x_cols.push_back(c);
        else throw DomainError("unexpected trajectory column '" + h + "'");
    }
    if (t_col < 0 || y_col < 0 || x_cols.empty()) {
        throw DomainError("trajectory header needs t, y and at least one x column");
    }
    if (!xdot_cols.empty() && xdot_cols.size() != x_cols.size()) {
        throw DomainError("xdot columns must match x columns");
    }

    std::vector<std::vector<double>> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw DomainError("trajectory line " + std::to_string(line_no) + " has wrong column count");
        }
        std::vector<double> row;
        for (const auto& c : cells) {
            try {
                row.push_back(std::stod(c));
            } catch (const std::exception&) {
                throw DomainError("trajectory line " + std::to_string(line_no) + ": bad number '" + c + "'");
            }
        }
        rows.push_back(std::move(row));
    }
    if (rows.size() < 2) throw DomainError("trajectory needs at least two rows");

    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto d = static_cast<Eigen::Index>(x_cols.size());
    Trajectory traj;
    traj.t.resize(n);
    traj.y.resize(n);
    traj.x.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        traj.t[i] = r[static_cast<std::size_t>(t_col)];
        traj.y[i] = r[static_cast<std::size_t>(y_col)];
        for (Eigen::Index k = 0; k < d; ++k) traj.x(i, k) = r[static_cast<std::size_t>(x_cols[static_cast<std::size_t>(k)])];
    }
    traj.tau = traj.t[1] - traj.t[0];
    if (!(traj.tau > 0.0)) throw DomainError("trajectory times must be increasing");
    for (Eigen::Index i = 1; i < n; ++i) {
        if (std::abs((traj.t[i] - traj.t[i - 1]) - traj.tau) > 1e-9 * std::max(1.0, traj.tau)) {
            throw DomainError("trajectory times must be uniformly spaced");
        }
    }
    traj.T = traj.t[n - 1] + 0.5 * traj.tau;

    if (xdot_cols.empty()) {
        traj.xdot = finite_difference_derivatives(traj.x, traj.tau);
    } else {
        traj.xdot.resize(n, d);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index k = 0; k < d; ++k)
                traj.xdot(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(xdot_cols[static_cast<std::size_t>(k)])];
    }
    traj.b = arc_weights(traj.xdot);
    return traj;
}

}  // namespace elflow
