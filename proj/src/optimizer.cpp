#include "cbf/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cbf/errors.hpp"

namespace cbf {

void ControlProblem::validate() const {
    params.validate();
    if (!(lambda > 0.0)) throw InvalidArgument("lambda must be positive");
    if (!(radius > 0.0)) throw InvalidArgument("radius must be positive");
    if (m0.empty() || target.samples().empty()) throw InvalidArgument("control problem needs m0 and a target");
    require_same_grid(m0.grid(), target.grid(), "ControlProblem");
}

namespace {

Trajectory aligned_target(const Trajectory& target, const Trajectory& like) {
    if (std::abs(target.t_end() - like.t_end()) > 1e-12 * like.t_end())
        throw GridMismatch("target covers a different time interval than the control");
    const Trajectory md = target.nt() == like.nt() ? target : resample(target, like.nt());
    return Trajectory(like.t_end(), md.samples());
}

double right_norm2(const Trajectory& a) { return time_pairing(a, a, 1, a.nt()); }

// J(b) - J(a) as a sum of pairings, which keeps its relative accuracy when the
// two costs agree to many digits.
double cost_change(const Evaluation& a, const Evaluation& b, const Trajectory& target, double lambda) {
    const Trajectory md = aligned_target(target, a.f);
    const Trajectory dm = b.state.solution - a.state.solution;
    const Trajectory sm = b.state.solution + a.state.solution - 2.0 * md;
    return 0.5 * time_pairing(dm, sm, 1, dm.nt()) + 0.5 * lambda * l2_time_inner(b.f - a.f, b.f + a.f);
}

}  // namespace

double cost(const Trajectory& f, const Trajectory& m, const Trajectory& target, double lambda) {
    require_aligned(f, m, "cost");
    require_aligned(m, target, "cost");
    const double fn = l2_time_norm(f);
    return 0.5 * right_norm2(m - target) + 0.5 * lambda * fn * fn;
}

Trajectory gradient(const Trajectory& q_noc, const Trajectory& f, double lambda) { return axpy(q_noc, lambda, f); }

Trajectory project_admissible(const Trajectory& f, double radius) {
    if (!(radius > 0.0)) throw InvalidArgument("project_admissible: radius must be positive");
    const double n = l2_time_norm(f);
    return n <= radius ? f : (radius / n) * f;
}

Evaluation evaluate(const ControlProblem& problem, const Trajectory& f) {
    StateRun state = solve_state(problem.m0, f, problem.params, problem.settings);
    const double J = cost(f, state.solution, aligned_target(problem.target, f), problem.lambda);
    return {f, std::move(state), J};
}

OptimizeResult optimize(const ControlProblem& problem, const Trajectory& f_init, const OptimizeOptions& options) {
    problem.validate();
    if (l2_time_norm(f_init) > problem.radius * (1.0 + 1e-12))
        throw InvalidArgument("optimize: initial control lies outside the admissible ball");
    const double lambda = problem.lambda;
    const double max_step = 1.0 / lambda;

    Evaluation cur = evaluate(problem, f_init);
    AdjointRun adj = solve_adjoint_noc(cur.state, problem.target, problem.kappa);
    Trajectory G = gradient(adj.solution, cur.f, lambda);
    double trial = max_step;

    OptimizeResult out;
    for (int iter = 0;; ++iter) {
        TraceRow row;
        row.iter = iter;
        row.J = cur.J;
        row.grad_norm = l2_time_norm(G);
        const Trajectory pstep = project_admissible(axpy(cur.f, -1.0, G), problem.radius);
        row.pg_norm = l2_time_norm(pstep - cur.f);
        row.vi_residual = l2_time_inner(pstep - cur.f, G);
        if (row.grad_norm > 0.0) {
            const Trajectory edge = (-problem.radius / row.grad_norm) * G;
            row.vi_residual = std::min(row.vi_residual, l2_time_inner(edge - cur.f, G));
        }
        const double scale = l2_time_norm(adj.solution) + lambda * l2_time_norm(cur.f);
        out.relative_pg = scale > 0.0 ? row.pg_norm / scale : row.pg_norm;
        if (row.pg_norm <= options.tol * scale || row.pg_norm == 0.0) out.converged = true;
        if (out.converged || iter >= options.max_iters) {
            out.trace.push_back(row);
            break;
        }

        double s = trial;
        bool stalled = false;
        for (;;) {
            const Trajectory cand_f = project_admissible(axpy(cur.f, -s, G), problem.radius);
            const double decrease = l2_time_inner(G, cand_f - cur.f);
            if (-decrease <= std::numeric_limits<double>::epsilon() * std::abs(cur.J)) {
                // the required decrease is below what J can resolve in double precision
                stalled = true;
                break;
            }
            bool accepted = false;
            Evaluation cand;
            try {
                cand = evaluate(problem, cand_f);
                accepted = cost_change(cur, cand, problem.target, lambda) <= options.armijo_c * decrease;
            } catch (const NonConvergence&) {
                accepted = false;  // step too long for the state solver; shrink
            }
            if (accepted) {
                AdjointRun next_adj = solve_adjoint_noc(cand.state, problem.target, problem.kappa);
                Trajectory next_G = gradient(next_adj.solution, cand.f, lambda);
                if (options.bb_step) {
                    const Trajectory sd = cand.f - cur.f;
                    const double sy = l2_time_inner(sd, next_G - G);
                    const double ss = l2_time_inner(sd, sd);
                    trial = sy > 0.0 ? std::min(ss / sy, max_step) : max_step;
                } else {
                    trial = max_step;
                }
                row.step = s;
                cur = std::move(cand);
                adj = std::move(next_adj);
                G = std::move(next_G);
                break;
            }
            if (++row.backtracks > options.max_backtracks) {
                if (out.relative_pg <= options.stall_tol) {
                    stalled = true;
                    break;
                }
                std::ostringstream os;
                os << "Armijo backtracking failed at iteration " << iter << " after " << options.max_backtracks
                   << " reductions (last step " << s << ")";
                throw LineSearchFailure(os.str());
            }
            s *= options.shrink;
        }
        if (stalled) {
            out.stalled = true;
            out.converged = out.relative_pg <= options.stall_tol;
            out.trace.push_back(row);
            break;
        }
        out.trace.push_back(row);
    }
    out.f = std::move(cur.f);
    out.state = std::move(cur.state);
    out.adjoint = std::move(adj);
    return out;
}

DirectionalCheck directional_check(const ControlProblem& problem, const Trajectory& f, const Trajectory& grad,
                                   const Trajectory& g, double eps) {
    if (!(eps > 0.0)) throw InvalidArgument("directional_check: eps must be positive");
    DirectionalCheck out;
    out.eps = eps;
    const Evaluation plus = evaluate(problem, axpy(f, eps, g));
    const Evaluation minus = evaluate(problem, axpy(f, -eps, g));
    out.fd = cost_change(minus, plus, problem.target, problem.lambda) / (2.0 * eps);
    out.adjoint = l2_time_inner(grad, g);
    const double denom = std::max(std::abs(out.adjoint), std::numeric_limits<double>::min());
    out.rel_error = std::abs(out.fd - out.adjoint) / denom;
    return out;
}

ViResult vi_residual(const Trajectory& f_star, const Trajectory& q_noc, double lambda,
                     const std::vector<Trajectory>& probes) {
    const Trajectory G = gradient(q_noc, f_star, lambda);
    ViResult out;
    out.residual = std::numeric_limits<double>::infinity();
    double reach = 0.0;
    for (const auto& v : probes) {
        const Trajectory d = v - f_star;
        const double r = l2_time_inner(d, G);
        out.per_probe.push_back(r);
        out.residual = std::min(out.residual, r);
        reach = std::max(reach, l2_time_norm(d));
    }
    if (probes.empty()) out.residual = 0.0;
    out.scale = reach * (l2_time_norm(q_noc) + lambda * l2_time_norm(f_star));
    return out;
}

std::vector<Trajectory> probe_bank(const Trajectory& f_star, const Trajectory& grad, double radius, int count,
                                   std::uint64_t seed) {
    std::vector<Trajectory> bank;
    bank.push_back(project_admissible(axpy(f_star, -1.0, grad), radius));
    const double gn = l2_time_norm(grad);
    if (gn > 0.0) {
        bank.push_back((-radius / gn) * grad);
        bank.push_back((radius / gn) * grad);
    }
    const double fn = l2_time_norm(f_star);
    if (fn > 0.0) {
        bank.push_back((radius / fn) * f_star);
        bank.push_back((-radius / fn) * f_star);
    }
    bank.push_back(Trajectory::zero(f_star.grid(), f_star.t_end(), f_star.nt()));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; static_cast<int>(bank.size()) < count; ++i) {
        const double r = (i % 2 == 0) ? radius : radius * unit(rng);
        bank.push_back(random_trajectory(f_star.grid(), f_star.t_end(), f_star.nt(), rng, r));
    }
    bank.resize(std::min<std::size_t>(bank.size(), static_cast<std::size_t>(std::max(count, 0))));
    return bank;
}

IocResult ioc_residual(const ControlProblem& problem, const Evaluation& tilde, const Trajectory& q_tilde,
                       const Trajectory& u, double rho) {
    if (!(rho > 0.0 && rho < 1.0)) throw InvalidArgument("ioc_residual: rho must lie in (0, 1)");
    require_aligned(tilde.f, u, "ioc_residual");
    const double lambda = problem.lambda;
    const Trajectory du = u - tilde.f;
    const Evaluation moved = evaluate(problem, axpy(tilde.f, rho, du));
    const Trajectory md = aligned_target(problem.target, tilde.f);
    const Trajectory h = tilde.state.solution - md;
    const AdjointRun adj =
        solve_adjoint(tilde.state.solution, moved.state.solution, h, 0.0, problem.params, problem.settings,
                      problem.kappa);
    const Trajectory& q_rho = adj.solution;

    IocResult out;
    out.rho = rho;
    out.pairing = l2_time_inner(du, axpy(q_rho, lambda, tilde.f));
    const Trajectory dm = (1.0 / rho) * (moved.state.solution - tilde.state.solution);
    out.state_term = 0.5 * rho * right_norm2(dm);
    const double dun = l2_time_norm(du);
    out.control_term = 0.5 * rho * lambda * dun * dun;
    out.total = out.pairing + out.state_term + out.control_term;
    out.scale = dun * (l2_time_norm(q_rho) + lambda * l2_time_norm(tilde.f));
    out.cost_quotient = (moved.J - tilde.J) / rho;
    out.q_distance = l2_time_norm(q_rho - q_tilde);
    for (const auto& s : q_rho.samples()) out.q_sup2 = std::max(out.q_sup2, std::pow(norm_l2(s), 2));
    out.k_tilde = adj.report.energy_scale;
    out.energy_margin = adj.report.energy_margin;
    return out;
}

}  // namespace cbf
