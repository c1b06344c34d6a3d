#pragma once

// Backward adjoint of the difference system.  With delta = 0 one step is the
// exact transpose of the difference step:
//   M_n^T q_n = N_{n+1}^T q_{n+1} + dt h_{n+1},   q_nt = 0,
// which gives the discrete duality
//   sum_{n<nt} dt (f1_n - f2_n, q_n) = sum_{i>=1} dt (h_i, v_i)
// to solver tolerance.  For delta > 0 the term dt delta P{|q_{n+1}|^2 q_n} is
// added on the left (frozen coefficient).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cbf/fields.hpp"
#include "cbf/operators.hpp"
#include "cbf/state_solver.hpp"

namespace cbf {

struct DerivativeBound {
    double lhs = 0.0;         ///< sampled dual norm of the difference quotient of q
    double rhs = 0.0;         ///< khat + delta^{1/4} (K~/2)^{3/4}
    double khat = 0.0;
    double delta_term = 0.0;
    double margin = 0.0;
};

struct AdjointReport {
    std::vector<double> t;
    std::vector<FieldNorms> norms;
    double energy_margin = 0.0;  ///< K~ - lhs of the adjoint energy inequality
    double energy_lhs = 0.0;
    double energy_scale = 0.0;   ///< K~ = e^T int ||h||^2
    std::optional<DerivativeBound> derivative;
    int picard_total = 0;
    int picard_max = 0;
    std::vector<std::string> warnings;
};

struct AdjointRun {
    OperatorParams params;
    SolverSettings settings;
    double kappa = 0.75;
    double delta = 0.0;
    Trajectory m1;
    Trajectory m2;
    Trajectory h;         ///< samples 1..nt are used
    Trajectory solution;  ///< q; q_nt = 0
    Trajectory transported;  ///< N_i^T q_i, the boundary term of the running duality
    AdjointReport report;
};

/// One step in reversed time p_k = q_{nt-k}.  slab is the difference slab n
/// (coefficients at t_n, t_{n+1}); next is slab n+1, or null when p_k = q_nt.
/// Returns q_n.
SpectralField step_adjoint(const SpectralField& q_next, const DifferenceSlab& slab, const DifferenceSlab* next,
                           const SpectralField& h_next, double delta, const SolverSettings& settings,
                           StepStats* stats = nullptr);

AdjointRun solve_adjoint(const Trajectory& m1, const Trajectory& m2, const Trajectory& h, double delta,
                         const OperatorParams& params, const SolverSettings& settings = {}, double kappa = -1.0);

/// Optimality adjoint at the state m~: m1 = m2 = m~, delta = 0, h = m~ - m_d.
/// The target is linearly resampled if its time grid differs.
AdjointRun solve_adjoint_noc(const StateRun& state, const Trajectory& target, double kappa = -1.0);

struct DualityResidual {
    double control_pairing = 0.0;  ///< sum dt (f1 - f2, q)
    double delta_pairing = 0.0;    ///< delta sum dt <C(q_n), v_n>
    double tracking_pairing = 0.0; ///< sum dt (h, v)
    double delta_form = 0.0;
    double limit_form = 0.0;
    double scale = 0.0;            ///< ||f1 - f2|| ||q|| + ||h|| ||v||, discrete L2(0,T;H)
    std::vector<double> running;   ///< per t_i, zero at every i when delta = 0
};

/// Throws InvalidArgument when the adjoint was not built from these runs.
DualityResidual duality_residual(const AdjointRun& adj, const StateRun& run1, const StateRun& run2,
                                 const Trajectory& v);

/// Adjoint energy inequality: sup ||q||^2 + 2 mu (1 - kappa) int ||q||_V^2 + 2 alpha int ||q||^2
/// + 2 delta int ||q||_4^4 + (beta - 1/(2 mu kappa)) int (|||m1| q||^2 + |||m2| q||^2) <= e^T int ||h||^2.
void adjoint_energy_check(AdjointRun& adj);

/// Approximate: the dual norm is sampled over a fixed bank of test fields.
DerivativeBound derivative_bound_check(const AdjointRun& adj, std::uint64_t seed = 0x5eed, int bank = 64);

struct DeltaSweepEntry {
    double delta = 0.0;
    double distance = 0.0;  ///< ||q^delta - q^0||_{L2(0,T;H)}
    double energy_margin = 0.0;
    double derivative_rhs = 0.0;
};

/// Adjoint solves over a ladder of delta values, compared with delta = 0.
std::vector<DeltaSweepEntry> delta_sweep(const Trajectory& m1, const Trajectory& m2, const Trajectory& h,
                                         const std::vector<double>& deltas, const OperatorParams& params,
                                         const SolverSettings& settings, double kappa, int threads = 1);

}  // namespace cbf
