#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "elflow/config.hpp"
#include "elflow/csv.hpp"
#include "elflow/errors.hpp"
#include "elflow/run.hpp"

using namespace elflow;
namespace fs = std::filesystem;

namespace {

const std::string kConfigDir = ELFLOW_CONFIG_DIR;
const std::string kCli = ELFLOW_CLI_PATH;

const char* kMinimal = R"({
  "mode": "forward",
  "task": "sine",
  "operator": {"order": 1, "alpha": [0.999, 1], "theta": 1},
  "lambda": -3,
  "tau": 0.1,
  "epochs": 4
})";

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "elflow_test_cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string config_path(const std::string& name) { return kConfigDir + "/" + name + ".json"; }

std::string error_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

// Replaces the first occurrence of `from` in the minimal config.
std::string edit(const std::string& from, const std::string& to) {
    std::string s = kMinimal;
    const auto pos = s.find(from);
    REQUIRE(pos != std::string::npos);
    return s.replace(pos, from.size(), to);
}

int shell(const std::string& cmd) {
    const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string quoted(const std::string& s) { return "'" + s + "'"; }

std::vector<double> column(const CsvContent& csv, const std::string& name) {
    const auto it = std::find(csv.header.begin(), csv.header.end(), name);
    REQUIRE(it != csv.header.end());
    const auto idx = static_cast<std::size_t>(it - csv.header.begin());
    std::vector<double> out;
    for (const auto& row : csv.rows) out.push_back(std::stod(row.at(idx)));
    return out;
}

std::string summary_value(const fs::path& dir, const std::string& key) {
    for (const auto& row : read_csv((dir / "summary.csv").string()).rows) {
        if (row.at(0) == key) return row.at(1);
    }
    return "";
}

}  // namespace

TEST_CASE("configuration defaults") {
    const auto cfg = parse_config(kMinimal);
    CHECK(cfg.mode == RunMode::forward);
    CHECK(cfg.task.kind == TaskConfig::Kind::sine);
    CHECK(cfg.task.period == doctest::Approx(2.0 * std::numbers::pi));
    CHECK(cfg.tau_prime == cfg.tau);
    CHECK(cfg.supervised_epochs == cfg.epochs);
    CHECK(cfg.initial_state.empty());
    CHECK(cfg.spec.mu == 0);
    CHECK(cfg.shuffle == TrainingConfig::Shuffle::none);
    CHECK_FALSE(cfg.finite_difference);
    CHECK(std::holds_alternative<PeriodicBoundary>(cfg.boundary));
    CHECK(cfg.green == GreenMode::causal);
    const auto t = cfg.training();
    CHECK(t.initial_state.size() == 0);
    CHECK(t.epochs == 4);
}

TEST_CASE("operator given by roots") {
    const auto cfg = parse_config(R"({"mode": "forward", "task": "sine",
        "operator": {"order": 2, "roots": [-1e-8, -0.6, -0.65, -0.74999999]},
        "lambda": 1, "tau": 0.1, "epochs": 1})");
    REQUIRE(cfg.roots);
    CHECK(cfg.spec.alpha == std::vector<double>{0.0, 0.0, 1.0});
    // β3 = 2θ and β3 is minus the root sum.
    CHECK(cfg.spec.theta == doctest::Approx((1e-8 + 0.6 + 0.65 + 0.74999999) / 2.0));
    const auto sys = cfg.system();
    CHECK(sys.A.rows() == 4);

    const auto complex_pair = parse_config(R"({"mode": "forward", "task": "sine",
        "operator": {"order": 1, "roots": [[-0.5, 1], [-0.5, -1]]}, "lambda": 1, "tau": 0.1, "epochs": 1})");
    CHECK(complex_pair.spec.theta == doctest::Approx(1.0));
}

TEST_CASE("configuration rejections") {
    SUBCASE("zero lambda") { CHECK(error_of(edit("\"lambda\": -3", "\"lambda\": 0")).find("lambda") != std::string::npos); }
    SUBCASE("unknown keys name the key") {
        CHECK(error_of(edit("\"epochs\": 4", "\"epochs\": 4, \"learning_rate\": 1")).find("learning_rate") !=
              std::string::npos);
        CHECK(error_of(edit("\"theta\": 1", "\"theta\": 1, \"gamma\": 2")).find("operator.gamma") !=
              std::string::npos);
    }
    SUBCASE("roots not closed under conjugation") {
        const auto msg = error_of(R"({"mode": "forward", "task": "sine",
            "operator": {"order": 1, "roots": [[-0.5, 1], [-0.5, 2]]}, "lambda": 1, "tau": 0.1, "epochs": 1})");
        CHECK(msg.find("operator.roots") != std::string::npos);
    }
    SUBCASE("parse errors carry a position") {
        const auto msg = error_of("{\n  \"mode\": \"forward\",\n  \"task\" \"sine\"\n}");
        CHECK(msg.find("line 3") != std::string::npos);
        CHECK(msg.find("column") != std::string::npos);
    }
    SUBCASE("shuffling needs a seed") {
        CHECK(error_of(edit("\"epochs\": 4", "\"epochs\": 4, \"shuffle\": {\"kind\": \"once\"}")).find("shuffle.seed") !=
              std::string::npos);
        CHECK(error_of(edit("\"epochs\": 4", "\"epochs\": 4, \"shuffle\": \"per_epoch\"")).find("seed") !=
              std::string::npos);
    }
    SUBCASE("field ranges") {
        CHECK(error_of(edit("\"tau\": 0.1", "\"tau\": 7")).find("tau") != std::string::npos);
        CHECK(error_of(edit("\"tau\": 0.1", "\"tau\": -0.1")).find("tau") != std::string::npos);
        CHECK(error_of(edit("\"epochs\": 4", "\"epochs\": 0")).find("epochs") != std::string::npos);
        CHECK(error_of(edit("\"epochs\": 4", "\"epochs\": 4, \"supervised_epochs\": 5")).find("supervised_epochs") !=
              std::string::npos);
        CHECK(error_of(edit("\"theta\": 1", "\"theta\": 0")).find("operator.theta") != std::string::npos);
        CHECK(error_of(edit("[0.999, 1]", "[0.999, 0]")).find("operator.alpha") != std::string::npos);
        CHECK(error_of(edit("\"order\": 1", "\"order\": 3")).find("operator.order") != std::string::npos);
        CHECK(error_of(edit("\"epochs\": 4", "\"epochs\": 4, \"initial_state\": [1]")).find("initial_state") !=
              std::string::npos);
        CHECK(error_of(edit("\"mode\": \"forward\"", "\"mode\": \"graph\"")).find("graph") != std::string::npos);
        CHECK(error_of(edit("\"epochs\": 4", "\"epochs\": 4, \"refine\": 3")).find("refine") != std::string::npos);
    }
    SUBCASE("missing fields") {
        CHECK(error_of(R"({"mode": "forward"})").find("missing") != std::string::npos);
        CHECK(error_of("[1, 2]").find("object") != std::string::npos);
    }
    SUBCASE("compare mode wants coefficients") {
        const auto msg = error_of(R"({"mode": "compare", "task": "sine",
            "operator": {"order": 1, "roots": [-0.5, -1.5]}, "lambda": 1, "tau": 0.1, "epochs": 1})");
        CHECK(msg.find("alpha") != std::string::npos);
    }
    CHECK_THROWS_AS(load_config(config_path("does_not_exist")), ConfigError);
}

TEST_CASE("shipped configurations load") {
    const std::vector<std::string> required{"fo1", "fo2", "fo2a", "fo3", "fo4", "fo5", "fo6",   "fo7",
                                            "so1", "so2", "so3",  "so4", "IC1", "IC2", "newinput", "newinput2",
                                            "NoSup", "rand1", "rand2"};
    for (const auto& name : required) {
        CAPTURE(name);
        CHECK(fs::exists(config_path(name)));
    }
    for (const auto& entry : fs::directory_iterator(kConfigDir)) {
        if (entry.path().extension() != ".json") continue;
        CAPTURE(entry.path().string());
        CHECK_NOTHROW(load_config(entry.path().string()));
    }
}

TEST_CASE("forward run artifacts") {
    const auto dir = scratch("fo5");
    auto cfg = load_config(config_path("fo5"));
    const auto result = run(cfg, {dir.string(), std::nullopt});
    CHECK(result.exit_code == 0);
    CHECK_FALSE(result.diverged);
    CHECK(result.output_dir == dir.string());
    for (const char* name : {"mse.csv", "trace.csv", "state.csv", "summary.csv"}) {
        CAPTURE(name);
        CHECK(fs::exists(dir / name));
        CHECK(std::find(result.artifacts.begin(), result.artifacts.end(), name) != result.artifacts.end());
    }

    const auto mse = read_csv((dir / "mse.csv").string());
    CHECK(mse.header == std::vector<std::string>{"epoch", "mse"});
    REQUIRE(mse.rows.size() == 10);
    const auto values = column(mse, "mse");
    const auto epochs = column(mse, "epoch");
    for (std::size_t e = 0; e < values.size(); ++e) {
        CHECK(epochs[e] == static_cast<double>(e + 1));
        CHECK(std::isfinite(values[e]));
    }
    for (std::size_t e = 2; e < values.size(); ++e) CHECK(values[e] <= values[e - 1] * (1.0 + 1e-12));

    const auto trace = read_csv((dir / "trace.csv").string());
    CHECK(trace.header == std::vector<std::string>{"k", "t", "f_tilde", "y", "delta"});
    CHECK(trace.rows.size() == 620);
    // The reported MSE is the mean of delta² over the last epoch.
    const auto delta = column(trace, "delta");
    double sum = 0.0;
    for (std::size_t i = delta.size() - 62; i < delta.size(); ++i) sum += delta[i] * delta[i];
    CHECK(sum / 62.0 == doctest::Approx(values.back()).epsilon(1e-12));

    CHECK(read_csv((dir / "state.csv").string()).rows.size() == 2);
    CHECK(summary_value(dir, "mode") == "forward");
    CHECK(summary_value(dir, "diverged") == "false");
    CHECK(summary_value(dir, "samples") == "62");
}

TEST_CASE("blackout stops the corrections") {
    const auto dir = scratch("nosup");
    const auto result = run(load_config(config_path("NoSup")), {dir.string(), std::nullopt});
    CHECK(result.exit_code == 0);
    const auto trace = read_csv((dir / "trace.csv").string());
    REQUIRE(trace.rows.size() == 13 * 62);
    const auto delta = column(trace, "delta");
    const auto ftilde = column(trace, "f_tilde");
    for (std::size_t i = 3 * 62; i < delta.size(); ++i) CHECK(delta[i] == 0.0);
    // Free evolution of a stable system: the per-epoch envelope shrinks.
    double previous = HUGE_VAL;
    for (int e = 3; e < 13; ++e) {
        double peak = 0.0;
        for (int i = 0; i < 62; ++i) peak = std::max(peak, std::abs(ftilde[static_cast<std::size_t>(e * 62 + i)]));
        CHECK(peak <= previous);
        previous = peak;
    }
    CHECK(summary_value(dir, "supervised_epochs") == "3");
}

TEST_CASE("divergence is reported") {
    // Roots in the right half plane make the free response grow.
    const auto cfg = parse_config(R"({"mode": "forward", "task": "sine",
        "operator": {"order": 1, "roots": [0.5, 1.5], "theta": 1}, "lambda": 1, "tau": 0.1, "tau_prime": 10,
        "epochs": 20})");
    const auto dir = scratch("diverge");
    const auto result = run(cfg, {dir.string(), std::nullopt});
    CHECK(result.diverged);
    CHECK(result.exit_code == 2);
    CHECK(summary_value(dir, "diverged") == "true");
}

TEST_CASE("global and compare artifacts") {
    SUBCASE("global") {
        const auto dir = scratch("toy_global");
        const auto result = run(load_config(config_path("toy_global")), {dir.string(), std::nullopt});
        CHECK(result.exit_code == 0);
        for (const char* name : {"global.csv", "diagnostics.csv", "M.txt", "rhs.txt"}) CHECK(fs::exists(dir / name));
        const auto g = read_csv((dir / "global.csv").string());
        CHECK(g.header == std::vector<std::string>{"t", "fbar"});
        CHECK(g.rows.size() == 8);
        const auto diag = read_csv((dir / "diagnostics.csv").string());
        REQUIRE(diag.rows.size() == 1);
        CHECK(column(diag, "relative_residual")[0] <= 1e-12);
        CHECK(column(diag, "periodic_gap")[0] <= 1e-10);
        CHECK(std::isfinite(column(diag, "convergence_indicator")[0]));
        std::ifstream m(dir / "M.txt");
        int lines = 0;
        for (std::string line; std::getline(m, line);) ++lines;
        CHECK(lines == 10);
        CHECK(summary_value(dir, "global_solved") == "true");
    }
    SUBCASE("compare") {
        const auto dir = scratch("toy_compare");
        const auto result = run(load_config(config_path("toy_compare")), {dir.string(), std::nullopt});
        CHECK(result.exit_code == 0);
        const auto f = read_csv((dir / "functional.csv").string());
        CHECK(f.header == std::vector<std::string>{"path", "functional"});
        REQUIRE(f.rows.size() == 3);
        CHECK(f.rows[0][0] == "forward");
        CHECK(f.rows[1][0] == "global_causal");
        CHECK(f.rows[2][0] == "global_noncausal");
        for (const auto& row : f.rows) CHECK(std::isfinite(std::stod(row[1])));
        CHECK(read_csv((dir / "diagnostics.csv").string()).rows.size() == 2);
        CHECK(read_csv((dir / "global_causal.csv").string()).rows.size() == 8);
        CHECK(read_csv((dir / "global_noncausal.csv").string()).rows.size() == 8);
    }
}

TEST_CASE("graph artifacts") {
    const auto dir = scratch("graph");
    const auto result = run(load_config(config_path("graph_sine")), {dir.string(), std::nullopt});
    CHECK(result.exit_code == 0);
    const auto nodes = read_csv((dir / "nodes.csv").string());
    const auto edges = read_csv((dir / "edges.csv").string());
    CHECK(nodes.header.front() == "id");
    CHECK(nodes.header.back() == "supervision_count");
    CHECK(edges.header == std::vector<std::string>{"cur", "prev", "count"});
    CHECK(!nodes.rows.empty());
    CHECK(summary_value(dir, "nodes") == std::to_string(nodes.rows.size()));
    long long transitions = 0;
    for (const auto& row : edges.rows) {
        CHECK(std::stoll(row[0]) < static_cast<long long>(nodes.rows.size()));
        transitions += std::stoll(row[2]);
    }
    // One transition per step after the first.
    CHECK(transitions == 10 * 62 - 1);
}

TEST_CASE("determinism and seed override") {
    const auto cfg = load_config(config_path("rand2"));
    const auto a = scratch("det_a");
    const auto b = scratch("det_b");
    const auto c = scratch("det_c");
    run(cfg, {a.string(), std::nullopt});
    run(cfg, {b.string(), std::nullopt});
    run(cfg, {c.string(), std::uint64_t{999}});
    for (const char* name : {"mse.csv", "trace.csv", "state.csv", "summary.csv"}) {
        CAPTURE(name);
        CHECK(slurp(a / name) == slurp(b / name));
    }
    CHECK(slurp(a / "trace.csv") != slurp(c / "trace.csv"));
    CHECK(summary_value(c, "seed") == "999");
}

TEST_CASE("csv writer") {
    const auto dir = scratch("csv");
    SUBCASE("header only") {
        CsvTable t({"epoch", "mse"});
        write_csv(t, (dir / "empty.csv").string());
        CHECK(slurp(dir / "empty.csv") == "epoch,mse\n");
        const auto back = read_csv((dir / "empty.csv").string());
        CHECK(back.rows.empty());
    }
    SUBCASE("round trip keeps every bit") {
        CsvTable t({"i", "x", "name"});
        const std::vector<double> xs{0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::numbers::pi};
        for (std::size_t i = 0; i < xs.size(); ++i) t.add_row({static_cast<int>(i), xs[i], "r" + std::to_string(i)});
        write_csv(t, (dir / "rt.csv").string());
        const auto back = read_csv((dir / "rt.csv").string());
        REQUIRE(back.rows.size() == xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) {
            CHECK(std::stod(back.rows[i][1]) == xs[i]);
            CHECK(back.rows[i][2] == "r" + std::to_string(i));
        }
        CHECK(format_double(0.1) == "0.10000000000000001");
    }
    SUBCASE("bad rows and paths") {
        CsvTable t({"a", "b"});
        CHECK_THROWS_AS(t.add_row({1.0}), Error);
        CHECK_THROWS_AS(write_csv(t, "/dev/null/x.csv"), Error);
    }
}

TEST_CASE("command line") {
    const auto dir = scratch("cli");
    SUBCASE("validate") {
        CHECK(shell(quoted(kCli) + " validate " + quoted(config_path("fo5"))) == 0);
        const auto bad = dir / "bad.json";
        std::ofstream(bad) << "{\"mode\": \"forward\", \"typo\": 1}";
        CHECK(shell(quoted(kCli) + " validate " + quoted(bad.string())) == 1);
        CHECK(shell(quoted(kCli) + " validate " + quoted((dir / "missing.json").string())) == 1);
    }
    SUBCASE("output directory precedence") {
        const auto flag = dir / "flag";
        const auto env = dir / "env";
        CHECK(shell("ELFLOW_OUT_DIR=" + quoted(env.string()) + " " + quoted(kCli) + " run " +
                    quoted(config_path("fo7")) + " --out " + quoted(flag.string())) == 0);
        CHECK(fs::exists(flag / "mse.csv"));
        CHECK_FALSE(fs::exists(env));
        CHECK(shell("ELFLOW_OUT_DIR=" + quoted(env.string()) + " " + quoted(kCli) + " run " +
                    quoted(config_path("fo7"))) == 0);
        CHECK(fs::exists(env / "mse.csv"));
        CHECK(slurp(flag / "trace.csv") == slurp(env / "trace.csv"));
    }
    SUBCASE("seed flag") {
        CHECK(shell(quoted(kCli) + " run " + quoted(config_path("rand1")) + " --seed 5 --out " +
                    quoted((dir / "s5").string())) == 0);
        CHECK(summary_value(dir / "s5", "seed") == "5");
    }
    SUBCASE("exit codes") {
        CHECK(shell(quoted(kCli) + " run " + quoted(config_path("fo7")) + " --out /dev/null/x") == 1);
        CHECK(shell(quoted(kCli)) != 0);
        const auto unstable = dir / "unstable.json";
        std::ofstream(unstable) << R"({"mode": "forward", "task": "sine",
            "operator": {"order": 1, "roots": [0.5, 1.5], "theta": 1}, "lambda": 1, "tau": 0.1, "tau_prime": 10,
            "epochs": 20})";
        CHECK(shell(quoted(kCli) + " run " + quoted(unstable.string()) + " --out " + quoted((dir / "u").string())) == 2);
    }
}
