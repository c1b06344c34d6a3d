#pragma once

// Orchestration behind the cbfctl subcommands.  Each run writes its
// artifacts and summary.json into the output directory; the summary lists
// every check with its value, limit and verdict.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cbf/config.hpp"
#include "cbf/fields.hpp"

namespace cbf {

struct RunOptions {
    std::filesystem::path out = ".";
    int threads = 1;
};

/// passed = value >= limit, or value <= limit when upper is set.
struct Check {
    std::string name;
    double value = 0.0;
    double limit = 0.0;
    bool upper = false;
    bool passed = false;
};

Check at_least(std::string name, double value, double limit);
Check at_most(std::string name, double value, double limit);
Check holds(std::string name, bool ok);

struct ExperimentResult {
    std::string kind;
    nlohmann::json summary;
    std::vector<Check> checks;

    bool passed() const;
};

/// Seeded problem data shared by all experiments.
struct ProblemData {
    Grid grid;
    SpectralField m0;
    Trajectory f1;  ///< primary forcing, also the hidden control of the tracking problem
    Trajectory f2;  ///< f1 plus a perturbation of relative size cfg.perturbation
    Trajectory h;   ///< adjoint source
};

ProblemData make_data(const ProblemConfig& cfg);

ExperimentResult run_simulate(const ProblemConfig& cfg, const RunOptions& opts);
ExperimentResult run_adjoint(const ProblemConfig& cfg, const RunOptions& opts);
ExperimentResult run_optimize(const ProblemConfig& cfg, const RunOptions& opts);
ExperimentResult run_delta_sweep(const ProblemConfig& cfg, const RunOptions& opts);
ExperimentResult run_oracle(const ProblemConfig& cfg, const RunOptions& opts);
ExperimentResult run_verify(const ProblemConfig& cfg, const RunOptions& opts);

const std::vector<std::string>& experiment_kinds();

/// Dispatches on kind and writes summary.json.  Solver failures are
/// recorded in a partial summary before being rethrown.
ExperimentResult run_experiment(const std::string& kind, const ProblemConfig& cfg, const RunOptions& opts);

}  // namespace cbf
