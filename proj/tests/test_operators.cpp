#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cbf/dense_oracle.hpp"
#include "cbf/errors.hpp"
#include "cbf/operators.hpp"
#include "direct_eval.hpp"

using namespace cbf;
using cbf::testing::DirectGrid;
using cbf::testing::Point;

namespace {

struct Fixture {
    Grid g;
    std::mt19937_64 rng;
    SpectralField next(double amp = 1.0, double width = 2.0) { return random_field(g, rng, amp, width); }
};

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// b(p, q, r) summed directly over the point grid
double direct_b(const DirectGrid& dg, const SpectralField& p, const SpectralField& q, const SpectralField& r) {
    const auto pv = dg.eval(p), rv = dg.eval(r);
    std::vector<std::vector<Point>> dq;
    for (int a = 0; a < dg.d; ++a) dq.push_back(dg.eval(q, a));
    return dg.integrate([&](std::size_t i) {
        double s = 0.0;
        for (int a = 0; a < dg.d; ++a)
            for (int j = 0; j < dg.d; ++j) s += pv[i][a] * dq[a][i][j] * rv[i][j];
        return s;
    });
}

}  // namespace

TEST(Params, HypothesisAndKappa) {
    const OperatorParams p{1.0, 0.1, 1.0};
    EXPECT_DOUBLE_EQ(p.kappa_star(), 0.75);
    EXPECT_TRUE(p.hypothesis_holds(0.75));
    EXPECT_FALSE(p.hypothesis_holds(0.4));
    EXPECT_FALSE(p.hypothesis_holds(1.0));
    const OperatorParams critical{0.5, 0.1, 1.0};
    EXPECT_FALSE(critical.hypothesis_holds(critical.kappa_star()));
    EXPECT_THROW((OperatorParams{-1.0, 0.1, 1.0}.validate()), InvalidArgument);
    EXPECT_THROW((OperatorParams{1.0, 0.0, 1.0}.validate()), InvalidArgument);
    EXPECT_THROW((OperatorParams{1.0, 0.1, 0.0}.validate()), InvalidArgument);
}

TEST(Stokes, EigenmodesAndEnergy) {
    Fixture f{Grid(2, 16), std::mt19937_64(1)};
    EXPECT_EQ(apply_A(SpectralField::zero(f.g)).max_abs(), 0.0);
    const std::vector<ModeAmplitude> m{{{1, 0, 0}, {Complex(0), Complex(1), Complex(0)}}};
    const SpectralField e = make_field(f.g, m);
    EXPECT_EQ((apply_A(e) - e).max_abs(), 0.0);
    for (int i = 0; i < 20; ++i) {
        const SpectralField u = f.next(), w = f.next();
        EXPECT_LE(rel(inner_product(apply_A(u), u), std::pow(norm_v(u), 2)), 1e-12);
        EXPECT_LE(std::abs(inner_product(apply_A(u), w) - inner_product(u, apply_A(w))), 1e-12 * norm_v(u) * norm_v(w));
        EXPECT_LE(norm_v_dual(apply_A(u)), norm_v(u) * (1 + 1e-12));
    }
}

TEST(Stokes, ResolventInvertsShift) {
    Fixture f{Grid(3, 8), std::mt19937_64(2)};
    const SpectralField u = f.next();
    const SpectralField back = resolvent(shifted_stokes(u, 0.3, 1.2, 0.1), 0.3, 1.2, 0.1);
    EXPECT_LE((back - u).max_abs(), 1e-15 * u.max_abs() * 10);
}

TEST(Trilinear, MatchesDirectQuadrature) {
    for (int d : {2, 3}) {
        Fixture f{Grid(d, 6), std::mt19937_64(10 + d)};
        const DirectGrid dg(d, 9);  // degree 3 kmax = 6 < 9
        for (int i = 0; i < 3; ++i) {
            const SpectralField p = f.next(), q = f.next(), r = f.next();
            const double scale = norm_v(p) * norm_v(q) * norm_v(r);
            EXPECT_LE(std::abs(trilinear_b(p, q, r) - direct_b(dg, p, q, r)), 1e-12 * scale);
        }
    }
}

TEST(Trilinear, AlternationAndSkew) {
    for (int d : {2, 3}) {
        Fixture f{Grid(d, d == 2 ? 24 : 12), std::mt19937_64(20 + d)};
        for (int i = 0; i < 50; ++i) {
            const SpectralField p = f.next(), q = f.next(1.0, 3.0), r = f.next();
            EXPECT_LE(std::abs(trilinear_b(p, q, q)), 1e-12 * norm_v(p) * norm_v(q) * norm_v(q));
            EXPECT_LE(std::abs(trilinear_b(p, q, r) + trilinear_b(p, r, q)),
                      1e-12 * norm_v(p) * norm_v(q) * norm_v(r));
        }
    }
}

TEST(Convection, PairingAndBounds) {
    Fixture f{Grid(2, 16), std::mt19937_64(3)};
    const SpectralField z = SpectralField::zero(f.g);
    for (int i = 0; i < 20; ++i) {
        const SpectralField p = f.next(), q = f.next(), r = f.next();
        EXPECT_EQ(apply_B(z, q).max_abs(), 0.0);
        EXPECT_LE(std::abs(inner_product(apply_B(p, q), r) - trilinear_b(p, q, r)),
                  1e-12 * norm_v(p) * norm_v(q) * norm_v(r));
        EXPECT_LE(norm_v_dual(apply_B(p, p)), std::pow(norm_l4(p), 2) * (1 + 1e-12));
    }
}

TEST(Convection, DifferenceFactorization) {
    Fixture f{Grid(2, 16), std::mt19937_64(4)};
    for (int i = 0; i < 10; ++i) {
        const SpectralField m1 = f.next(), m2 = f.next(), v = m1 - m2;
        const SpectralField lhs = apply_B(m1, m1) - apply_B(m2, m2);
        const SpectralField rhs = apply_B(m1, v) + apply_B(v, m2);
        EXPECT_LE(norm_l2(lhs - rhs), 1e-11 * norm_l2(lhs));
    }
}

TEST(Forchheimer, QuarticIdentityAndHomogeneity) {
    for (int d : {2, 3}) {
        Fixture f{Grid(d, d == 2 ? 16 : 8), std::mt19937_64(30 + d)};
        EXPECT_EQ(apply_C(SpectralField::zero(f.g)).max_abs(), 0.0);
        for (int i = 0; i < 20; ++i) {
            const SpectralField p = f.next(0.5 + i);
            EXPECT_LE(rel(inner_product(apply_C(p), p), std::pow(norm_l4(p), 4)), 1e-10);
            const SpectralField scaled = apply_C(-1.7 * p), expect = (-1.7 * -1.7 * -1.7) * apply_C(p);
            EXPECT_LE(norm_l2(scaled - expect), 1e-13 * norm_l2(expect));
        }
    }
}

TEST(Forchheimer, Monotonicity) {
    Fixture f{Grid(2, 16), std::mt19937_64(5)};
    const SpectralField z = SpectralField::zero(f.g);
    const SpectralField p0 = f.next(3.0);
    EXPECT_NEAR(monotonicity_gap(p0, p0), 0.0, 1e-14);
    EXPECT_LE(rel(monotonicity_gap(p0, z), 0.75 * std::pow(norm_l4(p0), 4)), 1e-12);
    std::uniform_real_distribution<double> A(0.01, 10.0);
    for (int i = 0; i < 1000; ++i) {
        const SpectralField p = f.next(A(f.rng)), q = f.next(A(f.rng));
        const double scale = std::pow(norm_l4(p), 4) + std::pow(norm_l4(q), 4);
        EXPECT_GE(monotonicity_gap(p, q), -1e-10 * scale);
    }
}

TEST(AdjointConvection, TransposeOfDifferenceConvection) {
    Fixture f{Grid(2, 16), std::mt19937_64(6)};
    const SpectralField z = SpectralField::zero(f.g);
    const SpectralField m1 = f.next(), m2 = f.next(), q = f.next();
    EXPECT_EQ(adjoint_convection(m1, m2, z).max_abs(), 0.0);
    EXPECT_EQ(adjoint_convection(z, z, q).max_abs(), 0.0);
    const SpectralField a = adjoint_convection(m1, m2, q);
    for (int i = 0; i < 10; ++i) {
        const SpectralField w = f.next();
        const double scale = (norm_v(m1) + norm_v(m2)) * norm_v(w) * norm_v(q);
        EXPECT_LE(std::abs(inner_product(a, w) - trilinear_b(m1, w, q) - trilinear_b(w, m2, q)), 1e-11 * scale);
        // through apply_B, independent of trilinear_b
        EXPECT_LE(std::abs(inner_product(a, w) - inner_product(apply_B(m1, w) + apply_B(w, m2), q)), 1e-11 * scale);
        EXPECT_LE(std::abs(inner_product(transport(m2, q), w) - trilinear_b(w, m2, q)), 1e-11 * scale);
    }
}

TEST(AdjointForchheimer, SymmetryAndFactorization) {
    Fixture f{Grid(2, 12), std::mt19937_64(7)};
    const DirectGrid dg(2, 18);  // quartic integrands, degree 4 kmax = 16 < 18
    const double beta = 1.3;
    const SpectralField m1 = f.next(), m2 = f.next(), q = f.next(), w = f.next();
    EXPECT_EQ(adjoint_forchheimer(m1, m2, SpectralField::zero(f.g), beta).max_abs(), 0.0);
    const double s = norm_l2(adjoint_forchheimer(m1, m2, q, beta)) * norm_l2(w);
    EXPECT_LE(std::abs(inner_product(adjoint_forchheimer(m1, m2, q, beta), w) -
                       inner_product(adjoint_forchheimer(m1, m2, w, beta), q)),
              1e-12 * s);

    // m1 = m2 = m: beta P{|m|^2 q} + 2 beta P{(m.q) m}, paired with w on the point grid
    const auto mv = dg.eval(m1), qv = dg.eval(q), wv = dg.eval(w);
    const double expect = dg.integrate([&](std::size_t i) {
        using cbf::testing::dot;
        return beta * dot(mv[i], mv[i], 2) * dot(qv[i], wv[i], 2) + 2 * beta * dot(mv[i], qv[i], 2) * dot(mv[i], wv[i], 2);
    });
    EXPECT_LE(rel(inner_product(adjoint_forchheimer(m1, m1, q, beta), w), expect), 1e-11);

    // a^3 - b^3 factorization
    for (int i = 0; i < 5; ++i) {
        const SpectralField a = f.next(2.0), b = f.next(2.0), t = f.next();
        const double lhs = inner_product(adjoint_forchheimer(a, b, a - b, beta), t) / beta;
        EXPECT_LE(std::abs(lhs - inner_product(apply_C(a) - apply_C(b), t)),
                  1e-11 * norm_l2(apply_C(a) - apply_C(b)) * norm_l2(t));
        EXPECT_GE(inner_product(adjoint_forchheimer(a, a, t, beta), t), 0.0);
    }
}

TEST(AdjointForchheimer, LinearPartSelfAdjoint) {
    Fixture f{Grid(3, 8), std::mt19937_64(8)};
    const double alpha = 0.1, beta = 1.0;
    const SpectralField m1 = f.next(), m2 = f.next();
    auto L = [&](const SpectralField& v) { return alpha * v + adjoint_forchheimer(m1, m2, v, beta); };
    for (int i = 0; i < 5; ++i) {
        const SpectralField x = f.next(), y = f.next();
        EXPECT_LE(std::abs(inner_product(L(x), y) - inner_product(x, L(y))), 1e-13 * norm_l2(L(x)) * norm_l2(y) * 10);
    }
}

TEST(Frozen, TransposePairs) {
    Fixture f{Grid(2, 16), std::mt19937_64(9)};
    const SpectralField a = f.next(), b = f.next(), c = f.next(), e = f.next();
    RealArray w(transform_for(f.g).points());
    std::uniform_real_distribution<double> U(0.0, 2.0);
    for (double& x : w) x = U(f.rng);
    const FrozenImplicit fi(a, w);
    const FrozenCross fc(b, c, e);
    for (int i = 0; i < 5; ++i) {
        const SpectralField x = f.next(), y = f.next();
        const double s1 = norm_l2(fi.apply(x)) * norm_l2(y) + norm_l2(x) * norm_l2(fi.apply(y, -1.0));
        EXPECT_LE(std::abs(inner_product(fi.apply(x), y) - inner_product(x, fi.apply(y, -1.0))), 1e-13 * s1);
        const double s2 = norm_l2(fc.apply(x)) * norm_l2(y) + norm_l2(x) * norm_l2(fc.apply_transpose(y));
        EXPECT_LE(std::abs(inner_product(fc.apply(x), y) - inner_product(x, fc.apply_transpose(y))), 1e-13 * s2);
    }
}

TEST(DenseOracle, OperatorsMatchSpectral) {
    const OperatorParams params{1.0, 0.1, 1.0};
    for (const auto& [d, n] : {std::pair{2, 4}, std::pair{2, 6}, std::pair{3, 4}}) {
        const Grid g(d, n);
        const DenseSystem sys(g, params);
        std::mt19937_64 rng(50 + n + d);
        const SpectralField p = random_field(g, rng, 1.0, 1.5), q = random_field(g, rng, 1.0, 1.5),
                            r = random_field(g, rng, 1.0, 1.5);
        const Eigen::VectorXd yp = sys.coords(p), yq = sys.coords(q), yr = sys.coords(r);
        EXPECT_LE((sys.field(yp) - p).max_abs(), 1e-14);
        const double s = norm_v(p) * norm_v(q) * norm_v(r);
        EXPECT_LE(std::abs(sys.trilinear(yp, yq, yr) - trilinear_b(p, q, r)), 1e-12 * s);
        auto close = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
            return (a - b).norm() / std::max(b.norm(), 1e-300);
        };
        EXPECT_LE(close(sys.convection(yp, yq), sys.coords(apply_B(p, q))), 1e-12);
        EXPECT_LE(close(sys.forchheimer(yp), sys.coords(apply_C(p))), 1e-12);
        EXPECT_LE(close(sys.transport(yp, yq), sys.coords(transport(p, q))), 1e-12);
        // A column test and symmetry of the dense A
        for (int j = 0; j < sys.dim(); ++j) {
            const Eigen::VectorXd e = Eigen::VectorXd::Unit(sys.dim(), j);
            EXPECT_LE((sys.stokes() * e - sys.coords(apply_A(sys.field(e)))).norm(), 1e-13);
        }
        EXPECT_LE((sys.stokes() - sys.stokes().transpose()).norm(), 0.0);
        EXPECT_GT(sys.stokes().diagonal().minCoeff(), 0.0);
        // skew in the last two arguments
        EXPECT_LE(std::abs(sys.trilinear(yp, yq, yr) + sys.trilinear(yp, yr, yq)), 1e-12 * s);
    }
    EXPECT_THROW(DenseSystem(Grid(3, 6), params), InvalidArgument);
}
