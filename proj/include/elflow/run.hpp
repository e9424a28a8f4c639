#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "elflow/config.hpp"
#include "elflow/signals.hpp"

namespace elflow {

struct RunOptions {
    std::optional<std::string> output_dir;  // overrides the config's directory
    std::optional<std::uint64_t> seed;      // overrides the shuffle seed
};

struct RunResult {
    int exit_code = 0;  // 0 ok, 2 diverged or unsolvable global system
    bool diverged = false;
    std::string output_dir;
    std::vector<std::string> artifacts;  // file names written, in order
};

/// Trajectory described by the config's task (before any shuffling).
Trajectory make_trajectory(const RunConfig& cfg);

/// Executes the configured pipeline and writes its artifacts:
///   every mode:  mse.csv, trace.csv, state.csv, summary.csv
///   global:      global.csv, diagnostics.csv, M.txt, rhs.txt
///   compare:     global_causal.csv, global_noncausal.csv, diagnostics.csv, functional.csv
///   graph:       nodes.csv, edges.csv
/// I/O failures throw Error.
RunResult run(const RunConfig& cfg, const RunOptions& options = {});

}  // namespace elflow
