#include "cbf/adjoint_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cbf/errors.hpp"
#include "cbf/parallel.hpp"

namespace cbf {

namespace {

SpectralField adjoint_update(const SpectralField& transported_next, const SpectralField& q_next,
                             const DifferenceSlab& slab, const SpectralField& h_next, double delta,
                             const SolverSettings& settings, StepStats* stats) {
    const SpectralField rhs = axpy(transported_next, slab.dt(), h_next);
    RealArray extra;
    if (delta > 0.0) {
        auto& tr = transform_for(q_next.grid());
        extra = squared_magnitude(tr.to_physical(q_next));
        for (auto& x : extra) x *= delta;
    }
    return slab.solve_MT(rhs, extra, settings, stats);
}

// int |m|^2 |q|^2
double weighted_l2(const SpectralField& m, const SpectralField& q) {
    auto& tr = transform_for(m.grid());
    RealArray a = squared_magnitude(tr.to_physical(m));
    const RealArray b = squared_magnitude(tr.to_physical(q));
    for (std::size_t x = 0; x < a.size(); ++x) a[x] *= b[x];
    return tr.integrate(a);
}

bool same_samples(const Trajectory& a, const Trajectory& b) {
    if (a.samples().size() != b.samples().size() || !(a.grid() == b.grid())) return false;
    for (std::size_t i = 0; i < a.samples().size(); ++i) {
        const auto x = a.samples()[i].coeffs();
        const auto y = b.samples()[i].coeffs();
        if (!std::equal(x.begin(), x.end(), y.begin())) return false;
    }
    return true;
}

}  // namespace

SpectralField step_adjoint(const SpectralField& q_next, const DifferenceSlab& slab, const DifferenceSlab* next,
                           const SpectralField& h_next, double delta, const SolverSettings& settings,
                           StepStats* stats) {
    if (delta < 0.0) throw InvalidArgument("step_adjoint: delta must be >= 0");
    const SpectralField transported = next ? next->apply_NT(q_next) : SpectralField::zero(q_next.grid());
    return adjoint_update(transported, q_next, slab, h_next, delta, settings, stats);
}

AdjointRun solve_adjoint(const Trajectory& m1, const Trajectory& m2, const Trajectory& h, double delta,
                         const OperatorParams& params, const SolverSettings& settings, double kappa) {
    params.validate();
    if (!(delta >= 0.0)) throw InvalidArgument("solve_adjoint: delta must be >= 0");
    require_aligned(m1, m2, "solve_adjoint");
    require_aligned(m1, h, "solve_adjoint");
    const int nt = m1.nt();
    const double dt = m1.dt();
    const Grid& g = m1.grid();

    AdjointRun run;
    run.params = params;
    run.settings = settings;
    run.kappa = kappa > 0.0 ? kappa : params.kappa_star();
    run.delta = delta;
    run.m1 = m1;
    run.m2 = m2;
    run.h = h;

    // reversed time: p_k = q_{nt-k}, p_0 = 0
    std::vector<SpectralField> p;
    std::vector<SpectralField> transported(static_cast<std::size_t>(nt) + 1, SpectralField::zero(g));
    p.reserve(static_cast<std::size_t>(nt) + 1);
    p.push_back(SpectralField::zero(g));
    std::optional<DifferenceSlab> next;
    for (int k = 0; k < nt; ++k) {
        const int n = nt - 1 - k;
        DifferenceSlab slab(m1[n], m2[n], m1[n + 1], m2[n + 1], dt, params);
        if (next) transported[n + 1] = next->apply_NT(p.back());
        StepStats st;
        try {
            p.push_back(adjoint_update(transported[n + 1], p.back(), slab, h[n + 1], delta, settings, &st));
        } catch (const NonConvergence& e) {
            std::ostringstream os;
            os << "adjoint step " << n << ": " << e.what();
            throw NonConvergence(os.str(), e.iterations(), e.residual(), n);
        }
        run.report.picard_total += st.iterations;
        run.report.picard_max = std::max(run.report.picard_max, st.iterations);
        if (n == 0) transported[0] = slab.apply_NT(p.back());
        next.emplace(std::move(slab));
    }
    run.solution = time_reverse(Trajectory(m1.t_end(), std::move(p)));
    run.transported = Trajectory(m1.t_end(), std::move(transported));
    for (int i = 0; i <= nt; ++i) {
        run.report.t.push_back(m1.time(i));
        run.report.norms.push_back(norms(run.solution[i]));
    }
    adjoint_energy_check(run);
    return run;
}

AdjointRun solve_adjoint_noc(const StateRun& state, const Trajectory& target, double kappa) {
    const Trajectory& m = state.solution;
    require_same_grid(m.grid(), target.grid(), "solve_adjoint_noc");
    if (std::abs(target.t_end() - m.t_end()) > 1e-12 * m.t_end())
        throw GridMismatch("solve_adjoint_noc: target covers a different time interval");
    const Trajectory md = target.nt() == m.nt() ? target : resample(target, m.nt());
    return solve_adjoint(m, m, m - Trajectory(m.t_end(), md.samples()), 0.0, state.params, state.settings, kappa);
}

void adjoint_energy_check(AdjointRun& adj) {
    const auto& p = adj.params;
    const double kappa = adj.kappa;
    const Trajectory& q = adj.solution;
    const int nt = q.nt();
    const double dt = q.dt();
    const double cm = p.beta - 1.0 / (2.0 * p.mu * kappa);
    double sup = 0.0;
    double integral = 0.0;
    double hsum = 0.0;
    for (int n = 0; n < nt; ++n) {
        const FieldNorms nm = adj.report.norms.size() == q.samples().size() ? adj.report.norms[n] : norms(q[n]);
        sup = std::max(sup, nm.l2 * nm.l2);
        integral += dt * (2.0 * p.mu * (1.0 - kappa) * nm.v * nm.v + 2.0 * p.alpha * nm.l2 * nm.l2 +
                          2.0 * adj.delta * std::pow(nm.l4, 4));
        if (cm != 0.0) integral += dt * cm * (weighted_l2(adj.m1[n], q[n]) + weighted_l2(adj.m2[n], q[n]));
        const double hn = norm_l2(adj.h[n + 1]);
        hsum += dt * hn * hn;
    }
    adj.report.energy_scale = std::exp(q.t_end()) * hsum;
    adj.report.energy_lhs = sup + integral;
    adj.report.energy_margin = adj.report.energy_scale - adj.report.energy_lhs;
    if (!p.hypothesis_holds(kappa)) {
        std::ostringstream os;
        os << "hypothesis 2 beta mu > 1/kappa fails for kappa = " << kappa << "; the energy bound does not apply";
        adj.report.warnings.push_back(os.str());
    }
}

DualityResidual duality_residual(const AdjointRun& adj, const StateRun& run1, const StateRun& run2,
                                 const Trajectory& v) {
    if (!same_samples(adj.m1, run1.solution) || !same_samples(adj.m2, run2.solution))
        throw InvalidArgument("duality_residual: adjoint coefficients do not come from these state runs");
    require_aligned(v, adj.solution, "duality_residual");
    const Trajectory& q = adj.solution;
    const int nt = q.nt();
    const double dt = q.dt();
    DualityResidual out;
    std::vector<double> gq(static_cast<std::size_t>(nt) + 1, 0.0);
    std::vector<double> hv(static_cast<std::size_t>(nt) + 1, 0.0);
    double gg = 0.0, qq = 0.0, hh = 0.0, vv = 0.0;
    for (int n = 0; n < nt; ++n) {
        const SpectralField g = run1.forcing[n] - run2.forcing[n];
        gq[n] = dt * inner_product(g, q[n]);
        hv[n + 1] = dt * inner_product(adj.h[n + 1], v[n + 1]);
        out.control_pairing += gq[n];
        out.tracking_pairing += hv[n + 1];
        if (adj.delta > 0.0 && n > 0) out.delta_pairing += adj.delta * dt * inner_product(apply_C(q[n]), v[n]);
        gg += dt * std::pow(norm_l2(g), 2);
        qq += dt * std::pow(norm_l2(q[n]), 2);
        hh += dt * std::pow(norm_l2(adj.h[n + 1]), 2);
        vv += dt * std::pow(norm_l2(v[n + 1]), 2);
    }
    out.delta_form = std::abs(out.control_pairing + out.delta_pairing - out.tracking_pairing);
    out.limit_form = std::abs(out.control_pairing - out.tracking_pairing);
    out.scale = std::sqrt(gg * qq) + std::sqrt(hh * vv);
    out.running.assign(static_cast<std::size_t>(nt) + 1, 0.0);
    double tail_gq = 0.0;
    double tail_hv = 0.0;
    for (int i = nt; i >= 0; --i) {
        if (i < nt) tail_gq += gq[i];
        out.running[i] = tail_gq + inner_product(v[i], adj.transported[i]) - tail_hv;
        tail_hv += hv[i];
    }
    return out;
}

DerivativeBound derivative_bound_check(const AdjointRun& adj, std::uint64_t seed, int bank) {
    const auto& p = adj.params;
    const Trajectory& q = adj.solution;
    const Grid& g = q.grid();
    const int nt = q.nt();
    const double dt = q.dt();
    DerivativeBound out;

    std::vector<SpectralField> dq;
    dq.reserve(nt);
    for (int n = 0; n < nt; ++n) dq.push_back((1.0 / dt) * (q[n + 1] - q[n]));

    std::mt19937_64 rng(seed);
    for (int b = 0; b < bank; ++b) {
        const SpectralField psi = random_field(g, rng, 1.0);
        const FieldNorms pn = norms(psi);
        double num = 0.0, a2 = 0.0, a4 = 0.0;
        for (int n = 0; n < nt; ++n) {
            const double s = inner_product(dq[n], psi);
            num += dt * s * s;
            a2 += dt * s * s;
            a4 += dt * s * s * s * s;
        }
        const double denom = std::max(std::sqrt(a2) * pn.v, std::pow(a4, 0.25) * pn.l4);
        if (denom > 0.0) out.lhs = std::max(out.lhs, num / denom);
    }

    double hsum = 0.0, m1_4 = 0.0, m2_4 = 0.0;
    for (int n = 0; n < nt; ++n) {
        hsum += dt * std::pow(norm_l2(adj.h[n + 1]), 2);
        m1_4 += dt * std::pow(norm_l4(adj.m1[n]), 4);
        m2_4 += dt * std::pow(norm_l4(adj.m2[n]), 4);
    }
    const double kt = std::exp(q.t_end()) * hsum;
    const double kappa = adj.kappa;
    const double cm = p.beta - 1.0 / (2.0 * p.mu * kappa);
    if (cm <= 0.0 || kappa >= 1.0) {
        out.khat = std::numeric_limits<double>::infinity();
    } else {
        const double w = std::sqrt(kt / cm);
        out.khat = std::sqrt(p.mu * kt / (2.0 * (1.0 - kappa))) + std::sqrt(p.alpha * kt / 2.0) + 2.0 * w +
                   std::sqrt(hsum) + 1.5 * p.beta * (std::pow(m1_4, 0.25) + std::pow(m2_4, 0.25)) * w;
    }
    out.delta_term = std::pow(adj.delta, 0.25) * std::pow(kt / 2.0, 0.75);
    out.rhs = out.khat + out.delta_term;
    out.margin = out.rhs - out.lhs;
    return out;
}

std::vector<DeltaSweepEntry> delta_sweep(const Trajectory& m1, const Trajectory& m2, const Trajectory& h,
                                         const std::vector<double>& deltas, const OperatorParams& params,
                                         const SolverSettings& settings, double kappa, int threads) {
    const AdjointRun base = solve_adjoint(m1, m2, h, 0.0, params, settings, kappa);
    std::vector<DeltaSweepEntry> out(deltas.size());
    parallel_for(deltas.size(), threads, [&](std::size_t i) {
        const AdjointRun run = solve_adjoint(m1, m2, h, deltas[i], params, settings, kappa);
        out[i].delta = deltas[i];
        out[i].distance = l2_time_norm(run.solution - base.solution);
        out[i].energy_margin = run.report.energy_margin;
        out[i].derivative_rhs = derivative_bound_check(run).rhs;
    });
    return out;
}

}  // namespace cbf
