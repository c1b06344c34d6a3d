#pragma once

// Flat JSON problem configuration.  Every key is optional; unknown keys are
// rejected so typos do not silently fall back to defaults.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cbf/operators.hpp"
#include "cbf/state_solver.hpp"

namespace cbf {

struct HypothesisReport {
    double kappa = 0.0;
    bool kappa_defaulted = true;
    double two_beta_mu = 0.0;
    bool wellposed = false;   ///< 2 beta mu >= 1
    bool hypothesis = false;  ///< 2 beta mu > 1 / kappa, 0 < kappa < 1
    std::vector<std::string> warnings;
};

struct ProblemConfig {
    int d = 2;
    int n = 16;
    int nt = 64;
    double t_end = 1.0;

    double mu = 1.0;
    double alpha = 0.1;
    double beta = 1.0;
    double kappa = -1.0;  ///< <= 0 until resolved to kappa*
    double lambda = 5e-3;
    double delta = 0.0;
    double radius = 50.0;

    std::uint64_t seed = 1;

    double picard_tol = 1e-11;
    int max_picard_iters = 200;
    double tol_vi = 1e-6;
    double tol_duality = 1e-10;

    /// Amplitudes and spectral width of the seeded random data.
    double initial_amplitude = 1.0;
    double forcing_amplitude = 2.0;
    double spectral_width = 1.5;
    /// Relative size of the second forcing in difference / adjoint runs.
    double perturbation = 0.3;

    int max_iters = 100;
    double opt_tol = 1e-8;
    int probes = 32;
    std::vector<double> deltas{1e-1, 1e-2, 1e-3, 1e-4, 1e-5};
    std::vector<double> rho_ladder{0.5, 0.25, 0.1, 0.01};

    HypothesisReport hypothesis;

    OperatorParams params() const { return {mu, alpha, beta}; }
    SolverSettings settings() const { return {picard_tol, max_picard_iters}; }
};

/// Throws ConfigError naming the offending key.
ProblemConfig parse_config_text(const std::string& text);
ProblemConfig parse_config(const std::filesystem::path& path);

/// Range checks plus kappa resolution and the hypothesis report.
void validate(ProblemConfig& cfg);

std::string to_json(const ProblemConfig& cfg);

}  // namespace cbf
