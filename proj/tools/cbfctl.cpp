// cbfctl: command-line front end.
//   cbfctl <simulate|adjoint|optimize|verify|delta-sweep|oracle> --config <file> --out <dir>
//          [--seed N] [--threads N]
// Exit codes: 0 pass, 1 invariant violation, 2 solver failure, 3 config error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cbf/config.hpp"
#include "cbf/errors.hpp"
#include "cbf/experiment.hpp"

namespace {

enum Exit { kPass = 0, kViolation = 1, kSolverFailure = 2, kConfigError = 3 };

int threads_from_env(int fallback) {
    const char* env = std::getenv("CBFCTL_THREADS");
    if (!env || !*env) return fallback;
    try {
        std::size_t used = 0;
        const int v = std::stoi(env, &used);
        if (used != std::string(env).size() || v < 1) throw std::invalid_argument(env);
        return v;
    } catch (const std::exception&) {
        throw cbf::ConfigError(std::string("CBFCTL_THREADS must be a positive integer, got '") + env + "'");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal control toolkit for the convective Brinkman-Forchheimer equations"};
    app.require_subcommand(1, 1);

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    int threads = 1;
    for (const auto& kind : cbf::experiment_kinds()) {
        CLI::App* sub = app.add_subcommand(kind, "run the " + kind + " experiment");
        sub->add_option("--config", config_path, "JSON problem configuration")->required();
        sub->add_option("--out", out_dir, "output directory")->required();
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("--threads", threads, "worker threads (CBFCTL_THREADS overrides)")->check(CLI::PositiveNumber);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kPass : kConfigError;
    }
    const std::string kind = app.get_subcommands().front()->get_name();

    cbf::ProblemConfig cfg;
    cbf::RunOptions opts;
    try {
        cfg = cbf::parse_config(config_path);
        if (seed) cfg.seed = *seed;
        opts.out = out_dir;
        opts.threads = threads_from_env(threads);
    } catch (const cbf::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    }
    for (const auto& w : cfg.hypothesis.warnings) std::cerr << "warning: " << w << '\n';

    try {
        const cbf::ExperimentResult r = cbf::run_experiment(kind, cfg, opts);
        for (const auto& c : r.checks)
            std::cout << (c.passed ? "ok    " : "FAIL  ") << c.name << "  " << c.value << (c.upper ? " <= " : " >= ")
                      << c.limit << '\n';
        std::cout << kind << ": " << (r.passed() ? "pass" : "invariant violation") << " (" << opts.out.string()
                  << "/summary.json)\n";
        return r.passed() ? kPass : kViolation;
    } catch (const cbf::NonConvergence& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return kSolverFailure;
    } catch (const cbf::LineSearchFailure& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return kSolverFailure;
    } catch (const cbf::HypothesisViolated& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const cbf::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kSolverFailure;
    }
}
