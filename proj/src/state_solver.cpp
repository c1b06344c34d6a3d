#include "cbf/state_solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cbf/errors.hpp"

namespace cbf {

namespace {

double coeff_norm2(const SpectralField& u) {
    double s = 0.0;
    for (const auto& c : u.coeffs()) s += std::norm(c);
    return s;
}

double coeff_dist2(const SpectralField& a, const SpectralField& b) {
    const auto x = a.coeffs();
    const auto y = b.coeffs();
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += std::norm(x[i] - y[i]);
    return s;
}

RealArray weight_of(const SpectralField& m1, const SpectralField& m2, double beta) {
    auto& tr = transform_for(m1.grid());
    RealArray w = squared_magnitude(tr.to_physical(m1));
    const RealArray w2 = squared_magnitude(tr.to_physical(m2));
    for (std::size_t x = 0; x < w.size(); ++x) w[x] = 0.5 * beta * (w[x] + w2[x]);
    return w;
}

std::vector<FieldNorms> norm_history(const Trajectory& traj) {
    std::vector<FieldNorms> out;
    out.reserve(traj.samples().size());
    for (const auto& s : traj.samples()) out.push_back(norms(s));
    return out;
}

// Restarted GMRES on (I + dt(mu A + alpha) + dt L) x = rhs, right-preconditioned
// by the resolvent.  Fallback for stiff steps where the fixed point diverges.
SpectralField gmres_solve(const SpectralField& rhs, const SpectralField& guess, const FrozenImplicit& op, double sign,
                          double dt, const OperatorParams& params, const SolverSettings& settings, int& iters,
                          double& rel) {
    constexpr int restart = 40;
    auto apply = [&](const SpectralField& x) {
        return axpy(shifted_stokes(x, dt, params.mu, params.alpha), dt, op.apply(x, sign));
    };
    auto precond = [&](const SpectralField& y) { return resolvent(y, dt, params.mu, params.alpha); };
    const double bnorm = norm_l2(rhs);
    SpectralField x = guess;
    iters = 0;
    rel = 1.0;
    if (bnorm == 0.0) return SpectralField::zero(rhs.grid());
    while (iters < settings.max_iters) {
        const SpectralField r = rhs - apply(x);
        const double beta = norm_l2(r);
        rel = beta / bnorm;
        if (rel <= settings.picard_tol) return x;
        std::vector<SpectralField> V{(1.0 / beta) * r};
        std::vector<std::vector<double>> H;
        std::vector<double> cs, sn, g{beta};
        int k = 0;
        for (; k < restart && iters < settings.max_iters; ++k, ++iters) {
            SpectralField w = apply(precond(V[k]));
            std::vector<double> h(k + 2, 0.0);
            for (int i = 0; i <= k; ++i) {
                h[i] = inner_product(w, V[i]);
                w = axpy(w, -h[i], V[i]);
            }
            h[k + 1] = norm_l2(w);
            for (int i = 0; i < k; ++i) {
                const double t = cs[i] * h[i] + sn[i] * h[i + 1];
                h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
                h[i] = t;
            }
            const double den = std::hypot(h[k], h[k + 1]);
            cs.push_back(h[k] / den);
            sn.push_back(h[k + 1] / den);
            const double hk1 = h[k + 1];
            h[k] = den;
            h[k + 1] = 0.0;
            g.push_back(-sn[k] * g[k]);
            g[k] *= cs[k];
            H.push_back(std::move(h));
            rel = std::abs(g[k + 1]) / bnorm;
            if (rel <= 0.1 * settings.picard_tol || hk1 == 0.0) {
                ++k;
                ++iters;
                break;
            }
            V.push_back((1.0 / hk1) * w);
        }
        std::vector<double> y(k);
        for (int i = k - 1; i >= 0; --i) {
            double t = g[i];
            for (int j = i + 1; j < k; ++j) t -= H[j][i] * y[j];
            y[i] = t / H[i][i];
        }
        SpectralField z = SpectralField::zero(rhs.grid());
        for (int i = 0; i < k; ++i) z = axpy(z, y[i], V[i]);
        x = x + precond(z);
    }
    const SpectralField r = rhs - apply(x);
    rel = norm_l2(r) / bnorm;
    if (rel <= settings.picard_tol) return x;
    std::ostringstream os;
    os << "GMRES did not reach tolerance " << settings.picard_tol << " in " << settings.max_iters
       << " iterations (relative residual " << rel << ")";
    throw NonConvergence(os.str(), iters, rel);
}

}  // namespace

SpectralField picard_solve(const SpectralField& rhs, const SpectralField& guess, const FrozenImplicit& op,
                           double sign, double dt, const OperatorParams& params, const SolverSettings& settings,
                           StepStats* stats) {
    SpectralField x = guess.empty() ? rhs : guess;
    double rel = 0.0;
    int it = 1;
    for (; it <= settings.max_iters; ++it) {
        SpectralField next = resolvent(axpy(rhs, -dt, op.apply(x, sign)), dt, params.mu, params.alpha);
        const double scale = coeff_norm2(next);
        const double diff = coeff_dist2(next, x);
        rel = scale > 0.0 ? std::sqrt(diff / scale) : std::sqrt(diff);
        if (!std::isfinite(rel) || rel > 1e8 || (it > 20 && rel > 1.0)) break;
        x = std::move(next);
        if (rel <= settings.picard_tol || scale == 0.0) {
            if (stats) *stats = {it, rel};
            return x;
        }
    }
    // the fixed point stalls or diverges on stiff steps; the step is linear, so switch to Krylov
    const SpectralField start = guess.empty() ? SpectralField::zero(rhs.grid()) : guess;
    int gm = 0;
    double gres = 0.0;
    x = gmres_solve(rhs, start, op, sign, dt, params, settings, gm, gres);
    if (stats) *stats = {std::min(it, settings.max_iters) + gm, gres};
    return x;
}

SpectralField step_state(const SpectralField& m_n, const SpectralField& f_n, double dt, const OperatorParams& params,
                         const SolverSettings& settings, StepStats* stats) {
    if (!(dt > 0.0)) throw InvalidArgument("step_state: dt must be positive");
    require_same_grid(m_n.grid(), f_n.grid(), "step_state");
    const FrozenImplicit op(m_n, weight_of(m_n, m_n, params.beta));
    return picard_solve(axpy(m_n, dt, f_n), m_n, op, 1.0, dt, params, settings, stats);
}

StateRun solve_state(const SpectralField& m0, const Trajectory& f, const OperatorParams& params,
                     const SolverSettings& settings) {
    params.validate();
    require_same_grid(m0.grid(), f.grid(), "solve_state");
    const double dt = f.dt();
    std::vector<SpectralField> m;
    m.reserve(f.samples().size());
    m.push_back(m0);
    SolveReport report;
    for (int n = 0; n < f.nt(); ++n) {
        StepStats st;
        try {
            m.push_back(step_state(m.back(), f[n], dt, params, settings, &st));
        } catch (const NonConvergence& e) {
            std::ostringstream os;
            os << "state step " << n << ": " << e.what();
            throw NonConvergence(os.str(), e.iterations(), e.residual(), n);
        }
        report.picard_total += st.iterations;
        report.picard_max = std::max(report.picard_max, st.iterations);
    }
    StateRun run{params, settings, f, m0, Trajectory(f.t_end(), std::move(m)), {}};
    for (int i = 0; i <= f.nt(); ++i) report.t.push_back(f.time(i));
    report.norms = norm_history(run.solution);
    run.report = std::move(report);
    run.report.energy_equality_residual = energy_equality_residual(run);
    const EnergyBound eb = energy_estimate_check(run);
    run.report.energy_bound_margin = eb.margin;
    run.report.energy_bound_scale = eb.scale;
    const double cfl = dt * std::max_element(run.report.norms.begin(), run.report.norms.end(), [](auto& a, auto& b) {
                                 return a.v < b.v;
                             })->v;
    if (2.0 * params.beta * params.mu < 1.0) {
        std::ostringstream os;
        os << "2 beta mu = " << 2.0 * params.beta * params.mu << " < 1: uniqueness of the continuous solution is not covered";
        run.report.warnings.push_back(os.str());
    }
    if (cfl > 10.0) {
        std::ostringstream os;
        os << "dt * max ||m||_V = " << cfl << " is large; the step may be inaccurate";
        run.report.warnings.push_back(os.str());
    }
    return run;
}

namespace {
const std::vector<FieldNorms>& history_of(const StateRun& run, std::vector<FieldNorms>& scratch) {
    if (run.report.norms.size() == run.solution.samples().size()) return run.report.norms;
    scratch = norm_history(run.solution);
    return scratch;
}
}  // namespace

double energy_equality_residual(const StateRun& run) {
    std::vector<FieldNorms> scratch;
    const auto& nm = history_of(run, scratch);
    const auto& p = run.params;
    const double dt = run.solution.dt();
    const double e0 = nm[0].l2 * nm[0].l2;
    double acc = 0.0;
    double worst = 0.0;
    for (int i = 1; i <= run.solution.nt(); ++i) {
        const auto& a = nm[i];
        acc += dt * (2.0 * p.mu * a.v * a.v + 2.0 * p.alpha * a.l2 * a.l2 + 2.0 * p.beta * std::pow(a.l4, 4) -
                     2.0 * inner_product(run.forcing[i - 1], run.solution[i]));
        worst = std::max(worst, std::abs(nm[i].l2 * nm[i].l2 + acc - e0));
    }
    return worst;
}

EnergyBound energy_estimate_check(const StateRun& run) {
    std::vector<FieldNorms> scratch;
    const auto& nm = history_of(run, scratch);
    const auto& p = run.params;
    const double dt = run.solution.dt();
    const double e0 = nm[0].l2 * nm[0].l2;
    double diss = 0.0;
    double force = 0.0;
    double sup = e0;
    EnergyBound out;
    out.margin = 0.0;  // t = 0: both sides equal ||m0||^2
    out.sup_form_margin = 0.0;
    double k = e0;
    for (int i = 1; i <= run.solution.nt(); ++i) {
        const auto& a = nm[i];
        diss += dt * (2.0 * p.mu * a.v * a.v + 2.0 * p.alpha * a.l2 * a.l2 + 2.0 * p.beta * std::pow(a.l4, 4));
        const double fn = norm_l2(run.forcing[i - 1]);
        force += dt * fn * fn;
        k = (e0 + force) * std::exp(run.solution.time(i));
        const double cur = nm[i].l2 * nm[i].l2;
        sup = std::max(sup, cur);
        out.margin = std::min(out.margin, k - (cur + diss));
        out.sup_form_margin = std::min(out.sup_form_margin, k - (sup + diss));
    }
    out.scale = k;
    return out;
}

// ---------------------------------------------------------------- difference system

DifferenceSlab::DifferenceSlab(const SpectralField& m1_lo, const SpectralField& m2_lo, const SpectralField& m1_hi,
                               const SpectralField& m2_hi, double dt, const OperatorParams& params)
    : dt_(dt),
      params_(params),
      m1_lo_(m1_lo),
      weight_(weight_of(m1_lo, m2_lo, params.beta)),
      implicit_(m1_lo, weight_),
      cross_(m2_hi, 0.5 * params.beta * (m1_lo + m2_lo), m1_hi + m2_hi) {}

SpectralField DifferenceSlab::apply_M(const SpectralField& x) const {
    return axpy(shifted_stokes(x, dt_, params_.mu, params_.alpha), dt_, implicit_.apply(x, 1.0));
}

SpectralField DifferenceSlab::apply_MT(const SpectralField& x) const {
    return axpy(shifted_stokes(x, dt_, params_.mu, params_.alpha), dt_, implicit_.apply(x, -1.0));
}

SpectralField DifferenceSlab::apply_N(const SpectralField& x) const { return axpy(x, -dt_, cross_.apply(x)); }

SpectralField DifferenceSlab::apply_NT(const SpectralField& x) const {
    return axpy(x, -dt_, cross_.apply_transpose(x));
}

SpectralField DifferenceSlab::solve_M(const SpectralField& rhs, const SolverSettings& settings,
                                      StepStats* stats) const {
    return picard_solve(rhs, rhs, implicit_, 1.0, dt_, params_, settings, stats);
}

SpectralField DifferenceSlab::solve_MT(const SpectralField& rhs, const RealArray& extra,
                                       const SolverSettings& settings, StepStats* stats) const {
    if (extra.empty()) return picard_solve(rhs, rhs, implicit_, -1.0, dt_, params_, settings, stats);
    RealArray w = weight_;
    if (extra.size() != w.size()) throw InvalidArgument("DifferenceSlab::solve_MT: weight array has wrong size");
    for (std::size_t x = 0; x < w.size(); ++x) w[x] += extra[x];
    const FrozenImplicit op(m1_lo_, std::move(w));
    return picard_solve(rhs, rhs, op, -1.0, dt_, params_, settings, stats);
}

DifferenceRun solve_difference(const StateRun& run1, const StateRun& run2) {
    const Trajectory& m1 = run1.solution;
    const Trajectory& m2 = run2.solution;
    require_aligned(m1, m2, "solve_difference");
    require_aligned(run1.forcing, m1, "solve_difference");
    require_aligned(run2.forcing, m2, "solve_difference");
    const double dt = m1.dt();
    const Grid& g = m1.grid();
    std::vector<SpectralField> v;
    v.reserve(m1.samples().size());
    v.push_back(SpectralField::zero(g));
    DifferenceRun out;
    for (int n = 0; n < m1.nt(); ++n) {
        const DifferenceSlab slab(m1[n], m2[n], m1[n + 1], m2[n + 1], dt, run1.params);
        const SpectralField rhs = axpy(slab.apply_N(v.back()), dt, run1.forcing[n] - run2.forcing[n]);
        try {
            v.push_back(slab.solve_M(rhs, run1.settings));
        } catch (const NonConvergence& e) {
            std::ostringstream os;
            os << "difference step " << n << ": " << e.what();
            throw NonConvergence(os.str(), e.iterations(), e.residual(), n);
        }
    }
    out.v = Trajectory(m1.t_end(), std::move(v));
    for (int i = 0; i <= m1.nt(); ++i) {
        const SpectralField d = m1[i] - m2[i];
        out.defect = std::max(out.defect, norm_l2(out.v[i] - d));
        out.scale = std::max(out.scale, norm_l2(d));
    }
    return out;
}

LipschitzBound lipschitz_check(const StateRun& run1, const StateRun& run2, double kappa, const Trajectory* v) {
    const auto& p = run1.params;
    if (!p.hypothesis_holds(kappa)) {
        std::ostringstream os;
        os << "2 beta mu = " << 2.0 * p.beta * p.mu << " does not exceed 1/kappa = " << 1.0 / kappa
           << " for kappa = " << kappa;
        throw HypothesisViolated(os.str());
    }
    require_aligned(run1.solution, run2.solution, "lipschitz_check");
    const Trajectory diff = v ? *v : run1.solution - run2.solution;
    require_aligned(diff, run1.solution, "lipschitz_check");
    const double dt = diff.dt();
    const double c4 = 0.5 * (p.beta - 1.0 / (2.0 * p.mu * kappa));
    double sup = 0.0;
    double integral = 0.0;
    double force = 0.0;
    for (int i = 1; i <= diff.nt(); ++i) {
        const FieldNorms nm = norms(diff[i]);
        sup = std::max(sup, nm.l2 * nm.l2);
        integral += dt * (2.0 * p.mu * (1.0 - kappa) * nm.v * nm.v + 2.0 * p.alpha * nm.l2 * nm.l2 +
                          c4 * std::pow(nm.l4, 4));
        const double g = norm_l2(run1.forcing[i - 1] - run2.forcing[i - 1]);
        force += dt * g * g;
    }
    LipschitzBound out;
    out.kappa = kappa;
    out.bound = std::exp(diff.t_end()) * force;
    out.lhs = sup + integral;
    out.margin = out.bound - out.lhs;
    return out;
}

}  // namespace cbf
