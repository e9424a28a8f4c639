#include "elflow/run.hpp"

#include <cmath>
#include <filesystem>
#include <limits>

#include "elflow/csv.hpp"
#include "elflow/errors.hpp"
#include "elflow/global_solver.hpp"
#include "elflow/graph.hpp"
#include "elflow/integrator.hpp"

namespace elflow {

namespace fs = std::filesystem;

namespace {

const char* green_name(GreenMode mode) { return mode == GreenMode::causal ? "causal" : "noncausal"; }

struct GlobalOutcome {
    GreenMode mode;
    std::optional<GreensFunction> gf;
    std::optional<GlobalSystem> system;
    std::optional<GlobalSolution> solution;
    std::string error;
};

GlobalOutcome solve_path(const Trajectory& traj, const CompanionSystem& sys, const RunConfig& cfg, GreenMode mode) {
    GlobalOutcome out{mode, std::nullopt, std::nullopt, std::nullopt, {}};
    try {
        out.gf.emplace(sys.roots, mode);
        out.system = assemble_system(traj, *out.gf, cfg.spec, cfg.boundary);
        out.solution = solve_global(*out.system);
    } catch (const Error& e) {
        out.error = e.what();
    }
    return out;
}

void add_diagnostics_row(CsvTable& table, const GlobalOutcome& g, const Trajectory& traj, const RunConfig& cfg) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double cond = g.system ? g.system->cond_estimate : nan;
    const double residual = g.solution ? g.solution->residual : nan;
    const double rel = g.solution ? g.solution->relative_residual : nan;
    double gap = nan;
    if (g.solution && std::holds_alternative<PeriodicBoundary>(cfg.boundary)) {
        gap = std::abs(reconstruct(*g.gf, *g.solution, traj, cfg.spec, 0.0) -
                       reconstruct(*g.gf, *g.solution, traj, cfg.spec, traj.T));
    }
    double indicator = nan;
    if (cfg.probe) {
        indicator = convergence_indicator({cfg.probe->C, cfg.probe->beta, cfg.spec.lambda,
                                           static_cast<long long>(traj.size()), traj.T});
    }
    table.add_row({green_name(g.mode), g.solution ? 1 : 0, cond, residual, rel, gap,
                   (g.system && g.system->saturated) ? 1 : 0, indicator});
}

void write_global_csv(const GlobalOutcome& g, const Trajectory& traj, const std::string& path) {
    CsvTable table({"t", "fbar"});
    if (g.solution) {
        for (Eigen::Index i = 0; i < traj.size(); ++i) table.add_row({traj.t[i], g.solution->fbar[i]});
    }
    write_csv(table, path);
}

CsvTable diagnostics_table() {
    return CsvTable({"green", "solved", "cond_estimate", "residual", "relative_residual", "periodic_gap", "saturated",
                     "convergence_indicator"});
}

}  // namespace

Trajectory make_trajectory(const RunConfig& cfg) {
    Trajectory traj;
    switch (cfg.task.kind) {
        case TaskConfig::Kind::sine:
            traj = build_task(TaskKind::sine, cfg.tau, cfg.task.period);
            break;
        case TaskConfig::Kind::cosine:
            traj = build_task(TaskKind::cosine, cfg.tau, cfg.task.period);
            break;
        case TaskConfig::Kind::csv:
            traj = load_trajectory_csv(cfg.task.path);
            break;
    }
    // With shuffling the derivatives are recomputed after every reordering instead.
    if (cfg.finite_difference && cfg.shuffle == TrainingConfig::Shuffle::none) {
        traj = with_finite_difference_derivatives(traj);
    }
    return traj;
}

RunResult run(const RunConfig& cfg_in, const RunOptions& options) {
    RunConfig cfg = cfg_in;
    if (options.seed) cfg.seed = *options.seed;

    RunResult result;
    result.output_dir = options.output_dir.value_or(cfg.output_dir);
    std::error_code ec;
    fs::create_directories(result.output_dir, ec);
    if (ec) throw Error("cannot create output directory '" + result.output_dir + "': " + ec.message());
    const fs::path dir(result.output_dir);
    auto artifact = [&](const std::string& name) {
        result.artifacts.push_back(name);
        return (dir / name).string();
    };

    const Trajectory traj = make_trajectory(cfg);
    const CompanionSystem sys = cfg.system();
    const TrainingConfig training = cfg.training();

    RunLog log;
    std::optional<ErnGraph> graph;
    if (cfg.mode == RunMode::graph) {
        const Eigen::Index warm = std::min<Eigen::Index>(cfg.graph.warmup, traj.size());
        const Eigen::MatrixXd head = traj.x.topRows(warm);
        GraphParams params;
        params.sigma = cfg.graph.sigma ? *cfg.graph.sigma : estimate_sigma(head);
        params.epsilon = cfg.graph.epsilon ? *cfg.graph.epsilon : 0.5 * mean_step_distance(head);
        params.rho = cfg.graph.rho;
        params.eta = cfg.graph.eta;
        graph.emplace(params);
        log = run_graph_epochs(traj, sys, cfg.spec, training, *graph).log;
    } else {
        log = run_epochs(traj, sys, cfg.spec, training);
    }
    result.diverged = log.diverged;

    write_mse_csv(log, artifact("mse.csv"));
    write_trace_csv(log, artifact("trace.csv"));
    write_state_csv(log.final_state, artifact("state.csv"));

    bool global_failed = false;
    if (cfg.mode == RunMode::global) {
        const auto g = solve_path(traj, sys, cfg, cfg.green);
        global_failed = !g.solution;
        write_global_csv(g, traj, artifact("global.csv"));
        auto diag = diagnostics_table();
        add_diagnostics_row(diag, g, traj, cfg);
        write_csv(diag, artifact("diagnostics.csv"));
        if (g.system) {
            write_matrix_text(g.system->M, artifact("M.txt"));
            write_matrix_text(g.system->rhs, artifact("rhs.txt"));
        }
    }

    if (cfg.mode == RunMode::compare) {
        auto diag = diagnostics_table();
        CsvTable functional({"path", "functional"});

        // Online path: the last training epoch, sampled densely from the
        // state it started from.
        TrainingConfig before = training;
        StateVector start = training.initial_state.size() ? training.initial_state : StateVector::Zero(sys.dim());
        if (cfg.epochs > 1) {
            before.epochs = cfg.epochs - 1;
            before.supervised_epochs = std::min(training.effective_supervised_epochs(), before.epochs);
            start = run_epochs(traj, sys, cfg.spec, before).final_state;
        }
        const Trajectory last = epoch_data(traj, training, cfg.epochs - 1);
        const auto dense = sample_pass(start, last, sys, cfg.spec, cfg.tau, cfg.refine);
        functional.add_row({"forward", functional_value(dense_functional_samples(dense, cfg.spec.order_h), last, cfg.spec)});

        for (GreenMode mode : {GreenMode::causal, GreenMode::noncausal}) {
            const auto g = solve_path(traj, sys, cfg, mode);
            global_failed = global_failed || !g.solution;
            write_global_csv(g, traj, artifact(std::string("global_") + green_name(mode) + ".csv"));
            add_diagnostics_row(diag, g, traj, cfg);
            double value = std::numeric_limits<double>::quiet_NaN();
            if (g.solution) {
                value = functional_value(global_functional_samples(*g.gf, *g.solution, traj, cfg.spec, dense.t), traj,
                                         cfg.spec);
            }
            functional.add_row({std::string("global_") + green_name(mode), value});
        }
        write_csv(diag, artifact("diagnostics.csv"));
        write_csv(functional, artifact("functional.csv"));
    }

    if (graph) {
        graph->write_nodes_csv(artifact("nodes.csv"));
        graph->write_edges_csv(artifact("edges.csv"));
    }

    CsvTable summary({"key", "value"});
    summary.add_row({"mode", to_string(cfg.mode)});
    summary.add_row({"diverged", result.diverged ? "true" : "false"});
    summary.add_row({"seed", static_cast<long long>(cfg.seed)});
    summary.add_row({"samples", static_cast<long long>(traj.size())});
    summary.add_row({"epochs", cfg.epochs});
    summary.add_row({"supervised_epochs", cfg.supervised_epochs});
    summary.add_row({"final_mse", log.mse_per_epoch.back()});
    if (cfg.mode == RunMode::global || cfg.mode == RunMode::compare) {
        summary.add_row({"global_solved", global_failed ? "false" : "true"});
    }
    if (graph) summary.add_row({"nodes", static_cast<long long>(graph->size())});
    write_csv(summary, artifact("summary.csv"));

    result.exit_code = (result.diverged || global_failed) ? 2 : 0;
    return result;
}

}  // namespace elflow
