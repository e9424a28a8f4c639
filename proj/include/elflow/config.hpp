#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "elflow/global_solver.hpp"
#include "elflow/integrator.hpp"
#include "elflow/operators.hpp"

namespace elflow {

enum class RunMode { forward, global, graph, compare };

struct TaskConfig {
    enum class Kind { sine, cosine, csv };
    Kind kind = Kind::sine;
    double period = 0.0;  // T for the analytic tasks
    std::string path;     // csv only, resolved against the config's directory
};

struct GraphConfig {
    std::optional<double> epsilon;  // nullopt: estimated on the warm-up samples
    std::optional<double> sigma;    // nullopt: estimated on the warm-up samples
    int rho = 3;
    double eta = 0.5;
    int warmup = 20;
};

struct ProbeConfig {
    double C = 1.0;
    double beta = 1.0;
};

/// Fully validated run description. Defaults: zero initial state, τ' = τ,
/// supervised_epochs = epochs, no shuffling, analytic derivatives, periodic
/// boundary, causal Green's function.
struct RunConfig {
    RunMode mode = RunMode::forward;
    TaskConfig task;

    OperatorSpec spec;            // α, θ, μ, λ (α = (0, .., 0, 1) for root-defined operators)
    std::optional<Roots> roots;   // set when the operator is given by its roots

    double tau = 0.1;
    double tau_prime = 0.1;
    int epochs = 1;
    int supervised_epochs = 1;
    TrainingConfig::Shuffle shuffle = TrainingConfig::Shuffle::none;
    std::uint64_t seed = 0;
    bool finite_difference = false;
    std::vector<double> initial_state;

    GraphConfig graph;
    Boundary boundary = PeriodicBoundary{};
    GreenMode green = GreenMode::causal;
    std::optional<ProbeConfig> probe;
    int refine = 10;  // quadrature panels per update step (compare mode)
    std::string output_dir = "out";

    CompanionSystem system() const;
    TrainingConfig training() const;
};

/// Parses and validates a JSON run description. Unknown keys are rejected;
/// parse errors report line and column, validation errors name the field.
RunConfig parse_config(const std::string& text, const std::string& base_dir = ".");
RunConfig load_config(const std::string& path);

std::string to_string(RunMode mode);

}  // namespace elflow
