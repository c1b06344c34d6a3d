#pragma once

// Velocity tracking:
//   J(f) = 1/2 sum_{i=1..nt} dt ||m_i - md_i||^2 + lambda/2 sum_{n=0..nt-1} dt ||f_n||^2
// over the ball ||f||_{L2(0,T;H)} <= R, with m the discrete state of f.
// The control inner product is the left-endpoint one (l2_time_inner), in which
// q~ + lambda f is the exact gradient of the discrete J.

#include <cstdint>
#include <random>
#include <vector>

#include "cbf/adjoint_solver.hpp"
#include "cbf/fields.hpp"
#include "cbf/state_solver.hpp"

namespace cbf {

struct ControlProblem {
    OperatorParams params;
    SolverSettings settings;
    double lambda = 1e-2;
    double radius = 10.0;
    double kappa = -1.0;  ///< <= 0 selects the midpoint default
    SpectralField m0;
    Trajectory target;

    /// Throws InvalidArgument on lambda <= 0 or R <= 0, GridMismatch for a target on another grid.
    void validate() const;
};

double cost(const Trajectory& f, const Trajectory& m, const Trajectory& target, double lambda);
/// Pointwise q + lambda f.
Trajectory gradient(const Trajectory& q_noc, const Trajectory& f, double lambda);
/// Radial projection onto the L2(0,T;H) ball of radius R.
Trajectory project_admissible(const Trajectory& f, double radius);

struct Evaluation {
    Trajectory f;
    StateRun state;
    double J = 0.0;
};

Evaluation evaluate(const ControlProblem& problem, const Trajectory& f);

struct OptimizeOptions {
    int max_iters = 100;
    /// Stop when ||f - P(f - G)|| <= tol * (||q~|| + lambda ||f||).
    double tol = 1e-8;
    double armijo_c = 1e-4;
    double shrink = 0.5;
    int max_backtracks = 60;
    /// Accepted as converged when the line search stalls at round-off with
    /// relative projected gradient below this.
    double stall_tol = 1e-6;
    /// Barzilai-Borwein trial step after the first iteration (capped at 1/lambda).
    bool bb_step = true;
};

struct TraceRow {
    int iter = 0;
    double J = 0.0;
    double grad_norm = 0.0;   ///< ||q~ + lambda f||
    double pg_norm = 0.0;     ///< ||f - P(f - G)||
    double step = 0.0;        ///< accepted step, 0 on the final row
    double vi_residual = 0.0; ///< min over the probe v = P(f - G) and -R G/||G||
    int backtracks = 0;
};

struct OptimizeResult {
    Trajectory f;
    StateRun state;
    AdjointRun adjoint;
    std::vector<TraceRow> trace;
    bool converged = false;
    bool stalled = false;  ///< stopped because J could not resolve the required decrease
    double relative_pg = 0.0;
};

/// Projected gradient with Armijo backtracking.  Throws LineSearchFailure.
OptimizeResult optimize(const ControlProblem& problem, const Trajectory& f_init, const OptimizeOptions& options = {});

struct DirectionalCheck {
    double eps = 0.0;
    double fd = 0.0;       ///< (J(f + eps g) - J(f - eps g)) / (2 eps)
    double adjoint = 0.0;  ///< int (q~ + lambda f, g)
    double rel_error = 0.0;
};

/// Central-difference check of the adjoint gradient along g.  Admissibility
/// is not enforced for the perturbed controls.
DirectionalCheck directional_check(const ControlProblem& problem, const Trajectory& f, const Trajectory& grad,
                                   const Trajectory& g, double eps);

struct ViResult {
    double residual = 0.0;  ///< min over probes of int (v - f*, q~ + lambda f*)
    double scale = 0.0;     ///< max ||v - f*|| (||q~|| + lambda ||f*||)
    std::vector<double> per_probe;
};

ViResult vi_residual(const Trajectory& f_star, const Trajectory& q_noc, double lambda,
                     const std::vector<Trajectory>& probes);

/// count admissible probes: the projected gradient step, +-R along the
/// gradient and along f*, and random fields at random radii in the ball.
std::vector<Trajectory> probe_bank(const Trajectory& f_star, const Trajectory& grad, double radius, int count,
                                   std::uint64_t seed);

struct IocResult {
    double rho = 0.0;
    double pairing = 0.0;        ///< int (u - f~, q~_rho + lambda f~)
    double state_term = 0.0;     ///< rho/2 int ||(m~_rho - m~)/rho||^2
    double control_term = 0.0;   ///< rho lambda/2 int ||u - f~||^2
    double total = 0.0;
    double scale = 0.0;          ///< ||u - f~|| (||q~_rho|| + lambda ||f~||)
    double cost_quotient = 0.0;  ///< (J(f~_rho) - J(f~)) / rho, equal to total
    double q_distance = 0.0;     ///< ||q~_rho - q~||_{L2(0,T;H)}
    double q_sup2 = 0.0;         ///< ||q~_rho||^2_{L^inf(H)}
    double k_tilde = 0.0;        ///< e^T int ||m~ - m_d||^2
    double energy_margin = 0.0;  ///< full adjoint energy inequality for q~_rho
};

IocResult ioc_residual(const ControlProblem& problem, const Evaluation& tilde, const Trajectory& q_tilde,
                       const Trajectory& u, double rho);

}  // namespace cbf
