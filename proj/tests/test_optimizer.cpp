#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cbf/errors.hpp"
#include "cbf/optimizer.hpp"

using namespace cbf;

namespace {

const OperatorParams kP{1.0, 0.1, 1.0};

ControlProblem tracking(const Grid& g, int nt, double lambda, double radius, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    ControlProblem pr;
    pr.params = kP;
    pr.lambda = lambda;
    pr.radius = radius;
    pr.m0 = random_field(g, rng, 1.0, 1.5);
    const Trajectory hidden = random_trajectory(g, 1.0, nt, rng, 2.0, 1.5);
    pr.target = solve_state(pr.m0, hidden, kP).solution;
    return pr;
}

}  // namespace

TEST(Cost, Examples) {
    const Grid g(2, 8);
    std::mt19937_64 rng(1);
    const Trajectory zero = Trajectory::zero(g, 1.0, 10);
    const Trajectory m = random_trajectory(g, 1.0, 10, rng, 1.0);
    EXPECT_EQ(cost(zero, m, m, 0.3), 0.0);

    const SpectralField u = random_field(g, rng, 1.0);
    EXPECT_NEAR(cost(zero, m + Trajectory::constant(u, 1.0, 10), m, 0.3), 0.5, 1e-14);

    const Trajectory f = random_trajectory(g, 1.0, 10, rng, 2.0);
    const double fn = l2_time_norm(f);
    EXPECT_NEAR(cost(f, m, zero, 0.6) - cost(f, m, zero, 0.3), 0.15 * fn * fn, 1e-13);
    EXPECT_THROW(cost(f, m, Trajectory::zero(g, 1.0, 5), 0.3), GridMismatch);
}

TEST(Gradient, Examples) {
    const Grid g(2, 8);
    std::mt19937_64 rng(2);
    const Trajectory zero = Trajectory::zero(g, 1.0, 6);
    const Trajectory q = random_trajectory(g, 1.0, 6, rng, 1.0), f = random_trajectory(g, 1.0, 6, rng, 1.0);
    for (int i = 0; i <= 6; ++i) {
        EXPECT_EQ(gradient(zero, zero, 0.5)[i].max_abs(), 0.0);
        EXPECT_EQ((gradient(q, f, 0.0)[i] - q[i]).max_abs(), 0.0);
    }
}

TEST(Gradient, MatchesCentralDifferences) {
    const Grid g(2, 16);
    for (int nt : {16, 32}) {
        const ControlProblem pr = tracking(g, nt, 1e-2, 100.0, 3);
        std::mt19937_64 rng(4);
        const Trajectory f = random_trajectory(g, 1.0, nt, rng, 1.0, 1.5);
        const Evaluation ev = evaluate(pr, f);
        const Trajectory G = gradient(solve_adjoint_noc(ev.state, pr.target).solution, f, pr.lambda);
        for (int k = 0; k < 5; ++k) {
            const Trajectory dir = random_trajectory(g, 1.0, nt, rng, 1.0, 2.0);
            for (double eps : {1e-3, 1e-4, 1e-5, 1e-6}) EXPECT_LE(directional_check(pr, f, G, dir, eps).rel_error, 1e-4);
        }
    }
}

TEST(Projection, BallProperties) {
    const Grid g(2, 8);
    std::mt19937_64 rng(5);
    const Trajectory inside = random_trajectory(g, 1.0, 8, rng, 0.5);
    const Trajectory p_in = project_admissible(inside, 1.0);
    for (int i = 0; i <= 8; ++i) EXPECT_EQ((p_in[i] - inside[i]).max_abs(), 0.0);

    const Trajectory big = random_trajectory(g, 1.0, 8, rng, 2.0);
    const Trajectory p = project_admissible(big, 1.0);
    EXPECT_NEAR(l2_time_norm(p), 1.0, 1e-14);
    const Trajectory pp = project_admissible(p, 1.0);
    for (int i = 0; i <= 8; ++i) EXPECT_LE((pp[i] - p[i]).max_abs(), 1e-15);

    std::uniform_real_distribution<double> A(0.1, 5.0);
    for (int i = 0; i < 100; ++i) {
        const Trajectory a = random_trajectory(g, 1.0, 8, rng, A(rng)), b = random_trajectory(g, 1.0, 8, rng, A(rng));
        EXPECT_LE(l2_time_norm(project_admissible(a, 1.0) - project_admissible(b, 1.0)),
                  l2_time_norm(a - b) * (1 + 1e-12));
    }
    EXPECT_THROW(project_admissible(big, 0.0), InvalidArgument);
}

TEST(Problem, Validation) {
    const Grid g(2, 8);
    ControlProblem pr = tracking(g, 4, 1e-2, 1.0, 6);
    EXPECT_NO_THROW(pr.validate());
    pr.lambda = 0.0;
    EXPECT_THROW(pr.validate(), InvalidArgument);
    pr.lambda = 1e-2;
    pr.radius = -1.0;
    EXPECT_THROW(pr.validate(), InvalidArgument);
    pr.radius = 1.0;
    pr.target = Trajectory::zero(Grid(2, 6), 1.0, 4);
    EXPECT_THROW(pr.validate(), GridMismatch);
}

TEST(Optimize, TrivialOptimum) {
    const Grid g(2, 16);
    std::mt19937_64 rng(7);
    ControlProblem pr;
    pr.params = kP;
    pr.m0 = random_field(g, rng, 1.0);
    const Trajectory zero = Trajectory::zero(g, 1.0, 16);
    pr.target = solve_state(pr.m0, zero, kP).solution;
    const OptimizeResult res = optimize(pr, zero);
    ASSERT_EQ(res.trace.size(), 1u);
    EXPECT_EQ(res.trace[0].J, 0.0);
    EXPECT_TRUE(res.converged);
}

TEST(Optimize, ManufacturedTrackingDescends) {
    const Grid g(2, 16);
    const ControlProblem pr = tracking(g, 32, 5e-3, 50.0, 8);
    const OptimizeResult res = optimize(pr, Trajectory::zero(g, 1.0, 32));
    ASSERT_GE(res.trace.size(), 2u);
    for (std::size_t i = 1; i < res.trace.size(); ++i) EXPECT_LE(res.trace[i].J, res.trace[i - 1].J);
    EXPECT_LE(res.trace.back().J, res.trace.front().J / 10.0);
    EXPECT_TRUE(res.converged);

    // interior optimum: the VI residual is tiny for every probe
    const Trajectory G = gradient(res.adjoint.solution, res.f, pr.lambda);
    const ViResult vi = vi_residual(res.f, res.adjoint.solution, pr.lambda, probe_bank(res.f, G, pr.radius, 16, 9));
    EXPECT_GE(vi.residual, -1e-6 * vi.scale);
    ASSERT_EQ(vi.per_probe.size(), 16u);

    // intermediate optimality over the rho ladder
    const Evaluation tilde{res.f, res.state, res.trace.back().J};
    std::mt19937_64 rng(10);
    const Trajectory u = project_admissible(res.f + random_trajectory(g, 1.0, 32, rng, 3.0, 1.5), pr.radius);
    double prev_dist = INFINITY, prev_state = 0.0;
    for (double rho : {0.5, 0.25, 0.125}) {
        const IocResult io = ioc_residual(pr, tilde, res.adjoint.solution, u, rho);
        EXPECT_GE(io.total, -1e-6 * io.scale);
        EXPECT_NEAR(io.total, io.cost_quotient, 1e-9 * io.scale);
        EXPECT_LT(io.q_distance, prev_dist);
        EXPECT_LE(io.q_sup2, io.k_tilde);
        EXPECT_GE(io.energy_margin, 0.0);
        if (prev_state > 0.0) EXPECT_NEAR(prev_state / io.state_term, 2.0, 0.2);
        prev_dist = io.q_distance;
        prev_state = io.state_term;
    }
    const IocResult same = ioc_residual(pr, tilde, res.adjoint.solution, res.f, 0.5);
    EXPECT_EQ(same.pairing, 0.0);
    EXPECT_EQ(same.state_term, 0.0);
    EXPECT_EQ(same.control_term, 0.0);
}

TEST(Optimize, ExpensiveControlStaysSmall) {
    const Grid g(2, 16);
    const ControlProblem pr = tracking(g, 16, 1e3, 1e3, 11);
    const Trajectory zero = Trajectory::zero(g, 1.0, 16);
    const double J0 = evaluate(pr, zero).J;
    const OptimizeResult res = optimize(pr, zero);
    const double fn = l2_time_norm(res.f);
    EXPECT_LE(fn * fn, 2.0 * J0 / pr.lambda);
    EXPECT_LE(res.trace.back().J, J0);
}

TEST(Optimize, ActiveConstraintSatisfiesVi) {
    const Grid g(2, 16);
    const ControlProblem pr = tracking(g, 16, 5e-3, 0.3, 12);
    const OptimizeResult res = optimize(pr, Trajectory::zero(g, 1.0, 16));
    EXPECT_NEAR(l2_time_norm(res.f), pr.radius, 1e-10);
    const Trajectory G = gradient(res.adjoint.solution, res.f, pr.lambda);
    const double gn = l2_time_norm(G);
    // the extreme probe against the gradient and the projected gradient step
    const std::vector<Trajectory> probes{(-pr.radius / gn) * G, project_admissible(res.f - G, pr.radius)};
    const ViResult vi = vi_residual(res.f, res.adjoint.solution, pr.lambda, probes);
    EXPECT_GE(vi.residual, -1e-6 * vi.scale);
}

TEST(Optimize, NonOptimalPointHasDescentCertificate) {
    const Grid g(2, 16);
    const ControlProblem pr = tracking(g, 16, 5e-3, 50.0, 13);
    const Trajectory f = Trajectory::zero(g, 1.0, 16);
    const Evaluation ev = evaluate(pr, f);
    const AdjointRun adj = solve_adjoint_noc(ev.state, pr.target);
    const Trajectory G = gradient(adj.solution, f, pr.lambda);
    const ViResult vi = vi_residual(f, adj.solution, pr.lambda, {project_admissible(f - 10.0 * G, pr.radius)});
    EXPECT_LT(vi.residual, 0.0);
}

TEST(Optimize, LineSearchFailureIsReported) {
    const Grid g(2, 16);
    const ControlProblem pr = tracking(g, 16, 1e-4, 1e4, 14);
    OptimizeOptions opts;
    opts.armijo_c = 0.999;
    opts.max_backtracks = 0;
    EXPECT_THROW(optimize(pr, Trajectory::zero(g, 1.0, 16), opts), LineSearchFailure);
}

TEST(Optimize, RejectsInadmissibleStart) {
    const Grid g(2, 8);
    const ControlProblem pr = tracking(g, 4, 1e-2, 0.1, 15);
    std::mt19937_64 rng(16);
    EXPECT_THROW(optimize(pr, random_trajectory(g, 1.0, 4, rng, 1.0)), InvalidArgument);
}
