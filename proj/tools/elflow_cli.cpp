// elflow: run or validate an experiment configuration.
//
//   elflow run <config.json> [--out DIR] [--seed N]
//   elflow validate <config.json>
//
// The output directory is taken from --out, then $ELFLOW_OUT_DIR, then the
// config's "output_dir". Exit status: 0 ok, 1 operational failure, 2 the run
// diverged or the global system could not be solved.

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "elflow/config.hpp"
#include "elflow/errors.hpp"
#include "elflow/run.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Online learning by Euler-Lagrange integration"};
    app.require_subcommand(1);

    std::string run_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    auto* run_cmd = app.add_subcommand("run", "execute a configuration and write its artifacts");
    run_cmd->add_option("config", run_path, "JSON run description")->required();
    auto* out_opt = run_cmd->add_option("--out", out_dir, "output directory");
    auto* seed_opt = run_cmd->add_option("--seed", seed, "shuffle seed override");

    std::string validate_path;
    auto* validate_cmd = app.add_subcommand("validate", "parse and validate a configuration");
    validate_cmd->add_option("config", validate_path, "JSON run description")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate_cmd->parsed()) {
            const auto cfg = elflow::load_config(validate_path);
            std::cout << validate_path << ": ok (mode " << elflow::to_string(cfg.mode) << ")\n";
            return 0;
        }

        const auto cfg = elflow::load_config(run_path);
        elflow::RunOptions options;
        if (*out_opt) {
            options.output_dir = out_dir;
        } else if (const char* env = std::getenv("ELFLOW_OUT_DIR"); env && *env) {
            options.output_dir = std::string(env);
        }
        if (*seed_opt) options.seed = seed;

        const auto result = elflow::run(cfg, options);
        for (const auto& name : result.artifacts) std::cout << result.output_dir << '/' << name << '\n';
        if (result.diverged) std::cerr << "run diverged\n";
        if (result.exit_code == 2 && !result.diverged) std::cerr << "global system could not be solved\n";
        return result.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "elflow: " << e.what() << '\n';
        return 1;
    }
}
