#pragma once

// Linearly implicit time stepping of
//   dm/dt + mu A m + B(m) + alpha m + beta C(m) = f,   m(0) = m0,
// and of the difference system for v = m1 - m2.
//
// One step:
//   (I + dt mu A + dt alpha) m' + dt B(m, m') + dt beta P{|m|^2 m'} = m + dt f.
//
// The difference scheme below is the exact secant of that step, so
// v_n = m1_n - m2_n holds to solver tolerance at any dt:
//   M_n v_{n+1} = N_n v_n + dt (f1_n - f2_n),
//   M_n x = x + dt (mu A + alpha) x + dt B(m1_n, x) + dt beta/2 P{(|m1_n|^2 + |m2_n|^2) x},
//   N_n x = x - dt B(x, m2_{n+1}) - dt beta/2 P{((m1_n + m2_n) . x)(m1_{n+1} + m2_{n+1})}.

#include <optional>
#include <string>
#include <vector>

#include "cbf/fields.hpp"
#include "cbf/operators.hpp"

namespace cbf {

struct SolverSettings {
    double picard_tol = 1e-11;
    int max_iters = 200;
};

struct StepStats {
    int iterations = 0;
    double residual = 0.0;
};

/// Solves (I + dt(mu A + alpha)) x + dt L(x) = rhs, where L is the frozen
/// operator: fixed-point iteration first, restarted GMRES when it diverges
/// or runs out of iterations.  Throws NonConvergence.
SpectralField picard_solve(const SpectralField& rhs, const SpectralField& guess, const FrozenImplicit& op,
                           double sign, double dt, const OperatorParams& params, const SolverSettings& settings,
                           StepStats* stats = nullptr);

SpectralField step_state(const SpectralField& m_n, const SpectralField& f_n, double dt, const OperatorParams& params,
                         const SolverSettings& settings = {}, StepStats* stats = nullptr);

struct SolveReport {
    std::vector<double> t;
    std::vector<FieldNorms> norms;
    double energy_equality_residual = 0.0;
    double energy_bound_margin = 0.0;
    double energy_bound_scale = 0.0;  ///< K at t = T
    std::optional<double> lipschitz_margin;
    int picard_total = 0;
    int picard_max = 0;
    std::vector<std::string> warnings;
};

struct StateRun {
    OperatorParams params;
    SolverSettings settings;
    Trajectory forcing;  ///< samples 0..nt-1 drive the steps; the last one is unused
    SpectralField initial;
    Trajectory solution;
    SolveReport report;
};

/// Integrates the state equation on the time grid of f.  NonConvergence
/// carries the failing step index.
StateRun solve_state(const SpectralField& m0, const Trajectory& f, const OperatorParams& params,
                     const SolverSettings& settings = {});

// Time integrals in the checks read the discrete solution as piecewise
// constant the way the implicit step produces it: m = m_{n+1} and f = f_n on
// (t_n, t_{n+1}].  State quantities therefore use right-endpoint sums and the
// forcing left-endpoint sums.

/// max_i | ||m_i||^2 + int_0^{t_i} (2 mu ||m||_V^2 + 2 alpha ||m||^2 + 2 beta ||m||_4^4 - 2 (f, m)) - ||m_0||^2 |
double energy_equality_residual(const StateRun& run);

struct EnergyBound {
    double margin = 0.0;          ///< min_i (K_i - E_i)
    double scale = 0.0;           ///< K at t = T
    double sup_form_margin = 0.0; ///< same with sup_{s<=t} ||m(s)||^2 in place of ||m(t)||^2
};

/// E(t) = ||m(t)||^2 + 2 mu int ||m||_V^2 + 2 alpha int ||m||^2 + 2 beta int ||m||_4^4
/// against K_t = (||m0||^2 + int_0^t ||f||^2) e^t.
EnergyBound energy_estimate_check(const StateRun& run);

/// Operators of one time slab of the difference system, frozen at
/// (m1_n, m2_n, m1_{n+1}, m2_{n+1}).
class DifferenceSlab {
public:
    DifferenceSlab(const SpectralField& m1_lo, const SpectralField& m2_lo, const SpectralField& m1_hi,
                   const SpectralField& m2_hi, double dt, const OperatorParams& params);

    SpectralField apply_M(const SpectralField& x) const;
    SpectralField apply_N(const SpectralField& x) const;
    SpectralField apply_MT(const SpectralField& x) const;
    SpectralField apply_NT(const SpectralField& x) const;

    SpectralField solve_M(const SpectralField& rhs, const SolverSettings& settings, StepStats* stats = nullptr) const;
    /// Solves M^T x + dt P{extra x} = rhs.  extra is a pointwise weight on the
    /// padded grid (empty for none).
    SpectralField solve_MT(const SpectralField& rhs, const RealArray& extra, const SolverSettings& settings,
                           StepStats* stats = nullptr) const;

    double dt() const noexcept { return dt_; }

private:
    double dt_;
    OperatorParams params_;
    SpectralField m1_lo_;
    RealArray weight_;
    FrozenImplicit implicit_;
    FrozenCross cross_;
};

struct DifferenceRun {
    Trajectory v;
    double defect = 0.0;  ///< max_i ||v_i - (m1_i - m2_i)||_2
    double scale = 0.0;   ///< max_i ||m1_i - m2_i||_2
};

/// Integrates the difference system with coefficients from two runs that
/// share initial data and time grid.
DifferenceRun solve_difference(const StateRun& run1, const StateRun& run2);

struct LipschitzBound {
    double margin = 0.0;
    double bound = 0.0;  ///< e^T int ||f1 - f2||^2
    double lhs = 0.0;
    double kappa = 0.0;
};

/// Bound for v = m1 - m2.  Throws HypothesisViolated unless 2 beta mu > 1/kappa
/// with kappa in (0, 1).  Uses m1 - m2 for v unless a trajectory is supplied.
LipschitzBound lipschitz_check(const StateRun& run1, const StateRun& run2, double kappa,
                               const Trajectory* v = nullptr);

}  // namespace cbf
