#include "elflow/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "elflow/errors.hpp"

namespace elflow {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& why) {
    throw ConfigError("invalid field '" + field + "': " + why);
}

void reject_unknown(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.count(key)) {
            throw ConfigError("unknown key '" + (where.empty() ? key : where + "." + key) + "'");
        }
    }
}

double get_number(const json& obj, const std::string& key, const std::string& field) {
    const auto& v = obj.at(key);
    if (!v.is_number()) invalid(field, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) invalid(field, "must be finite");
    return d;
}

int get_int(const json& obj, const std::string& key, const std::string& field) {
    const auto& v = obj.at(key);
    if (!v.is_number_integer()) invalid(field, "expected an integer");
    return v.get<int>();
}

std::string get_string(const json& obj, const std::string& key, const std::string& field) {
    const auto& v = obj.at(key);
    if (!v.is_string()) invalid(field, "expected a string");
    return v.get<std::string>();
}

std::vector<double> get_number_array(const json& v, const std::string& field) {
    if (!v.is_array()) invalid(field, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) invalid(field, "expected an array of numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

Roots parse_roots(const json& v) {
    if (!v.is_array()) invalid("operator.roots", "expected an array");
    Roots roots;
    for (const auto& e : v) {
        if (e.is_number()) {
            roots.emplace_back(e.get<double>(), 0.0);
        } else if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
            roots.emplace_back(e[0].get<double>(), e[1].get<double>());
        } else {
            invalid("operator.roots", "each root is a number or a [re, im] pair");
        }
    }
    return roots;
}

void parse_operator(const json& op, RunConfig& cfg) {
    if (!op.is_object()) invalid("operator", "expected an object");
    reject_unknown(op, "operator", {"order", "alpha", "theta", "mu", "roots"});
    if (!op.contains("order")) invalid("operator.order", "missing");
    const int order = get_int(op, "order", "operator.order");
    if (order != 1 && order != 2) invalid("operator.order", "must be 1 or 2");
    cfg.spec.order_h = order;

    const bool has_alpha = op.contains("alpha");
    const bool has_roots = op.contains("roots");
    if (has_alpha == has_roots) invalid("operator", "give exactly one of 'alpha' or 'roots'");

    if (has_alpha) {
        cfg.spec.alpha = get_number_array(op.at("alpha"), "operator.alpha");
        if (cfg.spec.alpha.size() != static_cast<std::size_t>(order) + 1) {
            invalid("operator.alpha", "needs order + 1 coefficients");
        }
        if (cfg.spec.alpha.back() == 0.0) invalid("operator.alpha", "leading coefficient must be nonzero");
        if (!op.contains("theta")) invalid("operator.theta", "required with 'alpha'");
        cfg.spec.theta = get_number(op, "theta", "operator.theta");
        if (op.contains("mu")) cfg.spec.mu = get_int(op, "mu", "operator.mu");
        if (cfg.spec.mu != 0 && cfg.spec.mu != 1) invalid("operator.mu", "must be 0 or 1");
        cfg.roots.reset();
    } else {
        Roots roots = parse_roots(op.at("roots"));
        if (roots.size() != static_cast<std::size_t>(2 * order)) invalid("operator.roots", "needs 2 * order roots");
        if (!is_conjugate_closed(roots)) invalid("operator.roots", "roots are not closed under complex conjugation");
        if (op.contains("mu")) invalid("operator.mu", "only allowed with 'alpha'");
        // Root-defined operators are monic (α_h = 1) with μ = 0; θ follows from
        // β_{2h-1} = hθ unless stated.
        cfg.spec.alpha.assign(static_cast<std::size_t>(order) + 1, 0.0);
        cfg.spec.alpha.back() = 1.0;
        cfg.spec.mu = 0;
        const Eigen::VectorXd beta = monic_coefficients(roots);
        cfg.spec.theta = op.contains("theta") ? get_number(op, "theta", "operator.theta")
                                              : beta[beta.size() - 1] / order;
        cfg.roots = std::move(roots);
    }
    if (!(cfg.spec.theta > 0.0)) invalid("operator.theta", "must be positive");
}

void parse_task(const json& task, RunConfig& cfg, const std::string& base_dir) {
    if (task.is_string()) {
        const auto name = task.get<std::string>();
        if (name == "sine") cfg.task.kind = TaskConfig::Kind::sine;
        else if (name == "cosine") cfg.task.kind = TaskConfig::Kind::cosine;
        else invalid("task", "unknown task '" + name + "'");
        cfg.task.period = 2.0 * std::numbers::pi;
        return;
    }
    if (!task.is_object()) invalid("task", "expected a string or an object");
    reject_unknown(task, "task", {"kind", "period", "path"});
    if (!task.contains("kind")) invalid("task.kind", "missing");
    const auto kind = get_string(task, "kind", "task.kind");
    if (kind == "sine") cfg.task.kind = TaskConfig::Kind::sine;
    else if (kind == "cosine") cfg.task.kind = TaskConfig::Kind::cosine;
    else if (kind == "csv") cfg.task.kind = TaskConfig::Kind::csv;
    else invalid("task.kind", "unknown task '" + kind + "'");

    if (cfg.task.kind == TaskConfig::Kind::csv) {
        if (!task.contains("path")) invalid("task.path", "required for csv tasks");
        if (task.contains("period")) invalid("task.period", "not used by csv tasks");
        std::filesystem::path p = get_string(task, "path", "task.path");
        if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
        cfg.task.path = p.lexically_normal().string();
    } else {
        if (task.contains("path")) invalid("task.path", "only used by csv tasks");
        cfg.task.period = task.contains("period") ? get_number(task, "period", "task.period") : 2.0 * std::numbers::pi;
        if (!(cfg.task.period > 0.0)) invalid("task.period", "must be positive");
    }
}

void parse_shuffle(const json& v, RunConfig& cfg) {
    if (v.is_string()) {
        if (v.get<std::string>() != "none") invalid("shuffle", "a seed is required unless shuffle is 'none'");
        cfg.shuffle = TrainingConfig::Shuffle::none;
        return;
    }
    if (!v.is_object()) invalid("shuffle", "expected 'none' or an object");
    reject_unknown(v, "shuffle", {"kind", "seed"});
    if (!v.contains("kind")) invalid("shuffle.kind", "missing");
    const auto kind = get_string(v, "kind", "shuffle.kind");
    if (kind == "none") {
        cfg.shuffle = TrainingConfig::Shuffle::none;
    } else if (kind == "once" || kind == "per_epoch") {
        cfg.shuffle = kind == "once" ? TrainingConfig::Shuffle::once : TrainingConfig::Shuffle::per_epoch;
        if (!v.contains("seed")) invalid("shuffle.seed", "required when shuffling");
        const auto& seed = v.at("seed");
        if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0)) {
            invalid("shuffle.seed", "expected a non-negative integer");
        }
        cfg.seed = seed.get<std::uint64_t>();
    } else {
        invalid("shuffle.kind", "unknown shuffle '" + kind + "'");
    }
}

void parse_graph(const json& g, RunConfig& cfg) {
    if (!g.is_object()) invalid("graph", "expected an object");
    reject_unknown(g, "graph", {"epsilon", "sigma", "rho", "eta", "warmup"});
    auto auto_or_number = [&g](const std::string& key) -> std::optional<double> {
        if (!g.contains(key)) return std::nullopt;
        const auto& v = g.at(key);
        if (v.is_string() && v.get<std::string>() == "auto") return std::nullopt;
        return get_number(g, key, "graph." + key);
    };
    cfg.graph.epsilon = auto_or_number("epsilon");
    cfg.graph.sigma = auto_or_number("sigma");
    if (cfg.graph.epsilon && *cfg.graph.epsilon < 0.0) invalid("graph.epsilon", "must be non-negative");
    if (cfg.graph.sigma && !(*cfg.graph.sigma > 0.0)) invalid("graph.sigma", "must be positive");
    if (g.contains("rho")) cfg.graph.rho = get_int(g, "rho", "graph.rho");
    if (cfg.graph.rho < 1) invalid("graph.rho", "must be at least 1");
    if (g.contains("eta")) cfg.graph.eta = get_number(g, "eta", "graph.eta");
    if (!(cfg.graph.eta >= 0.0 && cfg.graph.eta <= 1.0)) invalid("graph.eta", "must lie in [0, 1]");
    if (g.contains("warmup")) cfg.graph.warmup = get_int(g, "warmup", "graph.warmup");
    if (cfg.graph.warmup < 2) invalid("graph.warmup", "must be at least 2");
}

std::string position_message(const std::string& text, std::size_t byte) {
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

}  // namespace

std::string to_string(RunMode mode) {
    switch (mode) {
        case RunMode::forward: return "forward";
        case RunMode::global: return "global";
        case RunMode::graph: return "graph";
        case RunMode::compare: return "compare";
    }
    return "unknown";
}

CompanionSystem RunConfig::system() const {
    if (roots) return system_from_roots(*roots, spec.order_h);
    return companion_system(reduced_coefficients(spec));
}

TrainingConfig RunConfig::training() const {
    TrainingConfig t;
    t.epochs = epochs;
    t.tau = tau;
    t.tau_prime = tau_prime;
    t.supervised_epochs = supervised_epochs;
    t.shuffle = shuffle;
    t.seed = seed;
    t.finite_difference_after_shuffle = finite_difference && shuffle != TrainingConfig::Shuffle::none;
    if (!initial_state.empty()) {
        t.initial_state = Eigen::Map<const Eigen::VectorXd>(initial_state.data(),
                                                            static_cast<Eigen::Index>(initial_state.size()));
    }
    return t;
}

RunConfig parse_config(const std::string& text, const std::string& base_dir) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        const std::size_t byte = e.byte > 0 ? e.byte - 1 : 0;
        throw ConfigError("parse error at " + position_message(text, byte) + ": " + e.what());
    }
    if (!doc.is_object()) throw ConfigError("configuration must be a JSON object");

    reject_unknown(doc, "", {"description", "mode", "task", "operator", "lambda", "tau", "tau_prime", "epochs",
                             "supervised_epochs", "shuffle", "derivatives", "initial_state", "graph", "boundary",
                             "green", "convergence_probe", "refine", "output_dir"});

    RunConfig cfg;
    try {
        for (const char* key : {"mode", "task", "operator", "lambda", "tau", "epochs"}) {
            if (!doc.contains(key)) invalid(key, "missing");
        }

        const auto mode = get_string(doc, "mode", "mode");
        if (mode == "forward") cfg.mode = RunMode::forward;
        else if (mode == "global") cfg.mode = RunMode::global;
        else if (mode == "graph") cfg.mode = RunMode::graph;
        else if (mode == "compare") cfg.mode = RunMode::compare;
        else invalid("mode", "unknown mode '" + mode + "'");

        if (doc.contains("description") && !doc.at("description").is_string()) invalid("description", "expected a string");
        parse_task(doc.at("task"), cfg, base_dir);
        parse_operator(doc.at("operator"), cfg);

        cfg.spec.lambda = get_number(doc, "lambda", "lambda");
        if (cfg.spec.lambda == 0.0) invalid("lambda", "must be nonzero");

        cfg.tau = get_number(doc, "tau", "tau");
        if (!(cfg.tau > 0.0)) invalid("tau", "must be positive");
        if (cfg.task.kind != TaskConfig::Kind::csv && !(cfg.tau < cfg.task.period)) {
            invalid("tau", "must be smaller than the task period");
        }
        cfg.tau_prime = doc.contains("tau_prime") ? get_number(doc, "tau_prime", "tau_prime") : cfg.tau;
        if (!(cfg.tau_prime > 0.0)) invalid("tau_prime", "must be positive");

        cfg.epochs = get_int(doc, "epochs", "epochs");
        if (cfg.epochs < 1) invalid("epochs", "must be at least 1");
        cfg.supervised_epochs =
            doc.contains("supervised_epochs") ? get_int(doc, "supervised_epochs", "supervised_epochs") : cfg.epochs;
        if (cfg.supervised_epochs < 0 || cfg.supervised_epochs > cfg.epochs) {
            invalid("supervised_epochs", "must lie in [0, epochs]");
        }

        if (doc.contains("shuffle")) parse_shuffle(doc.at("shuffle"), cfg);

        if (doc.contains("derivatives")) {
            const auto d = get_string(doc, "derivatives", "derivatives");
            if (d == "analytic") cfg.finite_difference = false;
            else if (d == "finite_difference") cfg.finite_difference = true;
            else invalid("derivatives", "expected 'analytic' or 'finite_difference'");
        }

        if (doc.contains("initial_state")) {
            cfg.initial_state = get_number_array(doc.at("initial_state"), "initial_state");
            if (cfg.initial_state.size() != static_cast<std::size_t>(2 * cfg.spec.order_h)) {
                invalid("initial_state", "needs 2 * order entries");
            }
        }

        if (doc.contains("graph")) {
            parse_graph(doc.at("graph"), cfg);
        } else if (cfg.mode == RunMode::graph) {
            invalid("graph", "required for graph mode");
        }

        if (doc.contains("boundary")) {
            const auto& b = doc.at("boundary");
            if (b.is_string() && b.get<std::string>() == "periodic") {
                cfg.boundary = PeriodicBoundary{};
            } else if (b.is_object()) {
                reject_unknown(b, "boundary", {"cauchy"});
                if (!b.contains("cauchy")) invalid("boundary", "expected 'periodic' or {\"cauchy\": [...]}");
                auto values = get_number_array(b.at("cauchy"), "boundary.cauchy");
                if (values.size() != static_cast<std::size_t>(2 * cfg.spec.order_h)) {
                    invalid("boundary.cauchy", "needs 2 * order values");
                }
                cfg.boundary = CauchyBoundary{std::move(values)};
            } else {
                invalid("boundary", "expected 'periodic' or {\"cauchy\": [...]}");
            }
        }

        if (doc.contains("green")) {
            const auto g = get_string(doc, "green", "green");
            if (g == "causal") cfg.green = GreenMode::causal;
            else if (g == "noncausal") cfg.green = GreenMode::noncausal;
            else invalid("green", "expected 'causal' or 'noncausal'");
        }

        if (doc.contains("convergence_probe")) {
            const auto& p = doc.at("convergence_probe");
            if (!p.is_object()) invalid("convergence_probe", "expected an object");
            reject_unknown(p, "convergence_probe", {"C", "beta"});
            if (!p.contains("C") || !p.contains("beta")) invalid("convergence_probe", "needs 'C' and 'beta'");
            ProbeConfig probe{get_number(p, "C", "convergence_probe.C"), get_number(p, "beta", "convergence_probe.beta")};
            if (!(probe.C >= 1.0)) invalid("convergence_probe.C", "must be at least 1");
            if (!(probe.beta > 0.0)) invalid("convergence_probe.beta", "must be positive");
            cfg.probe = probe;
        }

        if (doc.contains("refine")) {
            cfg.refine = get_int(doc, "refine", "refine");
            if (cfg.refine < 2 || cfg.refine % 2 != 0) invalid("refine", "must be an even integer >= 2");
        }
        if (doc.contains("output_dir")) cfg.output_dir = get_string(doc, "output_dir", "output_dir");

        if (cfg.mode == RunMode::compare) {
            // The functional needs every coefficient of P, not just its roots.
            if (cfg.roots) invalid("operator", "compare mode needs the operator coefficients 'alpha'");
            if (cfg.tau_prime != cfg.tau) invalid("tau_prime", "compare mode integrates in real time (tau_prime = tau)");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed configuration: ") + e.what());
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open configuration '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const auto dir = std::filesystem::path(path).parent_path();
    return parse_config(ss.str(), dir.empty() ? "." : dir.string());
}

}  // namespace elflow
