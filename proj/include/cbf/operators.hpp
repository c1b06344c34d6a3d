#pragma once

// Stokes operator A, convection B / trilinear form b, Forchheimer operator C
// and the coupling terms of the difference and adjoint systems.
//
// Conventions:  b(p, q, r) = int (p . grad) q . r,   <B(p, q), r> = b(p, q, r),
// C(p) = P(|p|^2 p).  All nonlinear products are evaluated on the padded grid.

#include "cbf/fields.hpp"
#include "cbf/transform.hpp"

namespace cbf {

struct OperatorParams {
    double mu = 1.0;
    double alpha = 0.1;
    double beta = 1.0;

    /// Throws InvalidArgument unless mu, beta > 0 and alpha >= 1e-12.
    void validate() const;
    /// 2 beta mu > 1 / kappa with kappa in (0, 1).
    bool hypothesis_holds(double kappa) const noexcept;
    /// Midpoint of (1 / (2 beta mu), 1), clamped into (0, 1).
    double kappa_star() const noexcept;
};

SpectralField apply_A(const SpectralField& u);
double trilinear_b(const SpectralField& p, const SpectralField& q, const SpectralField& r);
SpectralField apply_B(const SpectralField& p, const SpectralField& q);
SpectralField apply_C(const SpectralField& p);
/// <C(p) - C(q), p - q> - 1/4 ||p - q||_4^4, nonnegative up to round-off.
double monotonicity_gap(const SpectralField& p, const SpectralField& q);

/// P[ sum_j q_j grad (m)_j ], the transpose of v -> B(v, m).
SpectralField transport(const SpectralField& m, const SpectralField& q);
/// -B(m1, q) + transport(m2, q).  For all w:
/// <result, w> = b(m1, w, q) + b(w, m2, q).
SpectralField adjoint_convection(const SpectralField& m1, const SpectralField& m2, const SpectralField& q);
/// beta/2 P{(|m1|^2 + |m2|^2) q} + beta/2 P{((m1 + m2) . q)(m1 + m2)}; self-adjoint in q.
SpectralField adjoint_forchheimer(const SpectralField& m1, const SpectralField& m2, const SpectralField& q,
                                  double beta);

/// Multiplies coefficient k by 1 / (1 + dt (mu |k|^2 + alpha)).
SpectralField resolvent(const SpectralField& u, double dt, double mu, double alpha);
/// u + dt (mu A + alpha) u
SpectralField shifted_stokes(const SpectralField& u, double dt, double mu, double alpha);

/// Frozen-coefficient operator x -> P[ s (a . grad) x + w x ] with a and w held
/// on the padded grid.  s = +1 gives the forward form, s = -1 its transpose.
class FrozenImplicit {
public:
    FrozenImplicit(const SpectralField& a, RealArray w);
    SpectralField apply(const SpectralField& x, double sign = 1.0) const;

private:
    Grid grid_;
    PhysicalVector a_;
    RealArray w_;
};

/// Frozen-coefficient operator v -> P[ (v . grad) b + (c . v) e ].
/// apply_transpose gives q -> P[ sum_j q_j grad b_j + (e . q) c ].
class FrozenCross {
public:
    FrozenCross(const SpectralField& b, const SpectralField& c, const SpectralField& e);
    SpectralField apply(const SpectralField& v) const;
    SpectralField apply_transpose(const SpectralField& q) const;

private:
    Grid grid_;
    PhysicalGradient grad_b_;
    PhysicalVector c_;
    PhysicalVector e_;
};

}  // namespace cbf
