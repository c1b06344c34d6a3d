#include "cbf/operators.hpp"

#include <algorithm>
#include <cmath>

#include "cbf/errors.hpp"

namespace cbf {

void OperatorParams::validate() const {
    if (!(mu > 0.0)) throw InvalidArgument("mu must be positive");
    if (!(alpha >= 1e-12)) throw InvalidArgument("alpha must be >= 1e-12");
    if (!(beta > 0.0)) throw InvalidArgument("beta must be positive");
}

bool OperatorParams::hypothesis_holds(double kappa) const noexcept {
    return kappa > 0.0 && kappa < 1.0 && 2.0 * beta * mu > 1.0 / kappa;
}

double OperatorParams::kappa_star() const noexcept {
    const double k = 0.5 * (1.0 / (2.0 * beta * mu) + 1.0);
    return std::clamp(k, 1e-6, 1.0 - 1e-12);
}

namespace {

SpectralField scale_modes(const SpectralField& u, auto&& factor) {
    const Grid& g = u.grid();
    std::vector<Complex> out(g.size());
    for (int j = 0; j < g.dim(); ++j) {
        const auto c = u.component(j);
        for (std::size_t idx : g.active()) out[j * g.modes() + idx] = factor(g.k2(idx)) * c[idx];
    }
    return SpectralField::trusted(g, std::move(out));
}

PhysicalVector zero_vector(int dim, std::size_t points) {
    PhysicalVector v;
    v.dim = dim;
    for (int j = 0; j < dim; ++j) v.c[j].assign(points, 0.0);
    return v;
}

// (p . grad) q on the padded grid.
PhysicalVector convect(const PhysicalVector& p, const PhysicalGradient& gq, double sign = 1.0) {
    const int d = p.dim;
    PhysicalVector out = zero_vector(d, p.c[0].size());
    for (int j = 0; j < d; ++j) {
        auto& o = out.c[j];
        for (int i = 0; i < d; ++i) {
            const auto& a = p.c[i];
            const auto& g = gq.g[i][j];
            for (std::size_t x = 0; x < o.size(); ++x) o[x] += sign * a[x] * g[x];
        }
    }
    return out;
}

}  // namespace

SpectralField apply_A(const SpectralField& u) {
    return scale_modes(u, [](double k2) { return k2; });
}

SpectralField resolvent(const SpectralField& u, double dt, double mu, double alpha) {
    return scale_modes(u, [=](double k2) { return 1.0 / (1.0 + dt * (mu * k2 + alpha)); });
}

SpectralField shifted_stokes(const SpectralField& u, double dt, double mu, double alpha) {
    return scale_modes(u, [=](double k2) { return 1.0 + dt * (mu * k2 + alpha); });
}

double trilinear_b(const SpectralField& p, const SpectralField& q, const SpectralField& r) {
    require_same_grid(p.grid(), q.grid(), "trilinear_b");
    require_same_grid(p.grid(), r.grid(), "trilinear_b");
    auto& tr = transform_for(p.grid());
    const PhysicalVector pq = convect(tr.to_physical(p), tr.gradient(q));
    return tr.integrate(dot(pq, tr.to_physical(r)));
}

SpectralField apply_B(const SpectralField& p, const SpectralField& q) {
    require_same_grid(p.grid(), q.grid(), "apply_B");
    auto& tr = transform_for(p.grid());
    return tr.project(convect(tr.to_physical(p), tr.gradient(q)));
}

SpectralField apply_C(const SpectralField& p) {
    auto& tr = transform_for(p.grid());
    PhysicalVector v = tr.to_physical(p);
    const RealArray s = squared_magnitude(v);
    for (int j = 0; j < v.dim; ++j)
        for (std::size_t x = 0; x < s.size(); ++x) v.c[j][x] *= s[x];
    return tr.project(v);
}

double monotonicity_gap(const SpectralField& p, const SpectralField& q) {
    require_same_grid(p.grid(), q.grid(), "monotonicity_gap");
    auto& tr = transform_for(p.grid());
    const PhysicalVector a = tr.to_physical(p);
    const PhysicalVector b = tr.to_physical(q);
    const RealArray a2 = squared_magnitude(a);
    const RealArray b2 = squared_magnitude(b);
    RealArray f(a2.size(), 0.0);
    for (std::size_t x = 0; x < f.size(); ++x) {
        double pair = 0.0;
        double diff2 = 0.0;
        for (int j = 0; j < a.dim; ++j) {
            const double dj = a.c[j][x] - b.c[j][x];
            pair += (a2[x] * a.c[j][x] - b2[x] * b.c[j][x]) * dj;
            diff2 += dj * dj;
        }
        f[x] = pair - 0.25 * diff2 * diff2;
    }
    return tr.integrate(f);
}

SpectralField transport(const SpectralField& m, const SpectralField& q) {
    require_same_grid(m.grid(), q.grid(), "transport");
    auto& tr = transform_for(m.grid());
    const PhysicalGradient gm = tr.gradient(m);
    const PhysicalVector pq = tr.to_physical(q);
    const int d = pq.dim;
    PhysicalVector out = zero_vector(d, tr.points());
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (std::size_t x = 0; x < tr.points(); ++x) out.c[i][x] += pq.c[j][x] * gm.g[i][j][x];
    return tr.project(out);
}

SpectralField adjoint_convection(const SpectralField& m1, const SpectralField& m2, const SpectralField& q) {
    require_same_grid(m1.grid(), m2.grid(), "adjoint_convection");
    return transport(m2, q) - apply_B(m1, q);
}

SpectralField adjoint_forchheimer(const SpectralField& m1, const SpectralField& m2, const SpectralField& q,
                                  double beta) {
    require_same_grid(m1.grid(), m2.grid(), "adjoint_forchheimer");
    require_same_grid(m1.grid(), q.grid(), "adjoint_forchheimer");
    auto& tr = transform_for(m1.grid());
    const PhysicalVector a = tr.to_physical(m1);
    const PhysicalVector b = tr.to_physical(m2);
    const PhysicalVector pq = tr.to_physical(q);
    const PhysicalVector s = add(a, b);
    const RealArray w = [&] {
        RealArray a2 = squared_magnitude(a);
        const RealArray b2 = squared_magnitude(b);
        for (std::size_t x = 0; x < a2.size(); ++x) a2[x] += b2[x];
        return a2;
    }();
    const RealArray sq = dot(s, pq);
    PhysicalVector out = zero_vector(pq.dim, tr.points());
    for (int j = 0; j < pq.dim; ++j)
        for (std::size_t x = 0; x < tr.points(); ++x)
            out.c[j][x] = 0.5 * beta * (w[x] * pq.c[j][x] + sq[x] * s.c[j][x]);
    return tr.project(out);
}

// ---------------------------------------------------------------- frozen operators

FrozenImplicit::FrozenImplicit(const SpectralField& a, RealArray w) : grid_(a.grid()) {
    auto& tr = transform_for(grid_);
    a_ = tr.to_physical(a);
    if (w.empty()) w.assign(tr.points(), 0.0);
    if (w.size() != tr.points()) throw InvalidArgument("FrozenImplicit: weight array has wrong size");
    w_ = std::move(w);
}

SpectralField FrozenImplicit::apply(const SpectralField& x, double sign) const {
    require_same_grid(grid_, x.grid(), "FrozenImplicit::apply");
    auto& tr = transform_for(grid_);
    PhysicalVector out = convect(a_, tr.gradient(x), sign);
    const PhysicalVector px = tr.to_physical(x);
    for (int j = 0; j < px.dim; ++j)
        for (std::size_t i = 0; i < w_.size(); ++i) out.c[j][i] += w_[i] * px.c[j][i];
    return tr.project(out);
}

FrozenCross::FrozenCross(const SpectralField& b, const SpectralField& c, const SpectralField& e) : grid_(b.grid()) {
    require_same_grid(grid_, c.grid(), "FrozenCross");
    require_same_grid(grid_, e.grid(), "FrozenCross");
    auto& tr = transform_for(grid_);
    grad_b_ = tr.gradient(b);
    c_ = tr.to_physical(c);
    e_ = tr.to_physical(e);
}

SpectralField FrozenCross::apply(const SpectralField& v) const {
    require_same_grid(grid_, v.grid(), "FrozenCross::apply");
    auto& tr = transform_for(grid_);
    const PhysicalVector pv = tr.to_physical(v);
    PhysicalVector out = convect(pv, grad_b_);
    const RealArray cv = dot(c_, pv);
    for (int j = 0; j < pv.dim; ++j)
        for (std::size_t x = 0; x < cv.size(); ++x) out.c[j][x] += cv[x] * e_.c[j][x];
    return tr.project(out);
}

SpectralField FrozenCross::apply_transpose(const SpectralField& q) const {
    require_same_grid(grid_, q.grid(), "FrozenCross::apply_transpose");
    auto& tr = transform_for(grid_);
    const PhysicalVector pq = tr.to_physical(q);
    const int d = pq.dim;
    PhysicalVector out = zero_vector(d, tr.points());
    const RealArray eq = dot(e_, pq);
    for (int i = 0; i < d; ++i) {
        auto& o = out.c[i];
        for (int j = 0; j < d; ++j) {
            const auto& g = grad_b_.g[i][j];
            const auto& qj = pq.c[j];
            for (std::size_t x = 0; x < o.size(); ++x) o[x] += qj[x] * g[x];
        }
        for (std::size_t x = 0; x < o.size(); ++x) o[x] += eq[x] * c_.c[i][x];
    }
    return tr.project(out);
}

}  // namespace cbf
