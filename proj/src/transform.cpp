#include "cbf/transform.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "cbf/errors.hpp"

namespace cbf {

namespace {

// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
    static std::mutex mu;
    return mu;
}

}  // namespace

Transform& transform_for(const Grid& grid) {
    thread_local std::map<std::pair<int, int>, std::unique_ptr<Transform>> cache;
    auto& slot = cache[{grid.dim(), grid.n()}];
    if (!slot) slot = std::make_unique<Transform>(grid);
    return *slot;
}

Transform::Transform(const Grid& grid) : grid_(grid), m_(grid.padded()) {
    const int d = grid.dim();
    points_ = 1;
    for (int a = 0; a < d; ++a) points_ *= static_cast<std::size_t>(m_);
    half_points_ = points_ / m_ * (m_ / 2 + 1);
    weight_ = grid.volume() / static_cast<double>(points_);

    pad_index_.assign(grid.modes(), -1);
    for (std::size_t idx : grid.active()) {
        const Wavevector k = grid.wavevector(idx);
        if (k[d - 1] < 0) continue;
        long p = 0;
        for (int a = 0; a < d - 1; ++a) p = p * m_ + ((k[a] % m_) + m_) % m_;
        p = p * (m_ / 2 + 1) + k[d - 1];
        pad_index_[idx] = p;
    }

    real_buf_ = fftw_alloc_real(points_);
    auto* cbuf = fftw_alloc_complex(half_points_);
    cplx_buf_ = cbuf;
    if (!real_buf_ || !cbuf) throw Error("Transform: FFTW allocation failed");

    std::array<int, 3> dims{m_, m_, m_};
    std::lock_guard lock(planner_mutex());
    plan_c2r_ = fftw_plan_dft_c2r(d, dims.data(), cbuf, real_buf_, FFTW_ESTIMATE);
    plan_r2c_ = fftw_plan_dft_r2c(d, dims.data(), real_buf_, cbuf, FFTW_ESTIMATE);
    if (!plan_c2r_ || !plan_r2c_) throw Error("Transform: FFTW planning failed");
}

Transform::~Transform() {
    std::lock_guard lock(planner_mutex());
    if (plan_c2r_) fftw_destroy_plan(static_cast<fftw_plan>(plan_c2r_));
    if (plan_r2c_) fftw_destroy_plan(static_cast<fftw_plan>(plan_r2c_));
    fftw_free(real_buf_);
    fftw_free(cplx_buf_);
}

void Transform::inverse(const Complex* coeffs, int axis, RealArray& out) {
    auto* buf = static_cast<fftw_complex*>(cplx_buf_);
    std::fill(reinterpret_cast<double*>(buf), reinterpret_cast<double*>(buf) + 2 * half_points_, 0.0);
    for (std::size_t idx : grid_.active()) {
        const long p = pad_index_[idx];
        if (p < 0) continue;
        Complex c = coeffs[idx];
        if (axis >= 0) c *= Complex(0.0, grid_.wavevector(idx)[axis]);
        buf[p][0] = c.real();
        buf[p][1] = c.imag();
    }
    fftw_execute(static_cast<fftw_plan>(plan_c2r_));
    out.assign(real_buf_, real_buf_ + points_);
}

void Transform::to_physical(const SpectralField& u, int j, int axis, RealArray& out) {
    require_same_grid(grid_, u.grid(), "Transform::to_physical");
    inverse(u.component(j).data(), axis, out);
}

PhysicalVector Transform::to_physical(const SpectralField& u) {
    require_same_grid(grid_, u.grid(), "Transform::to_physical");
    PhysicalVector p;
    p.dim = grid_.dim();
    for (int j = 0; j < p.dim; ++j) inverse(u.component(j).data(), -1, p.c[j]);
    return p;
}

PhysicalGradient Transform::gradient(const SpectralField& u) {
    require_same_grid(grid_, u.grid(), "Transform::gradient");
    PhysicalGradient g;
    g.dim = grid_.dim();
    for (int i = 0; i < g.dim; ++i)
        for (int j = 0; j < g.dim; ++j) inverse(u.component(j).data(), i, g.g[i][j]);
    return g;
}

RawCoefficients Transform::to_spectral(const PhysicalVector& v) {
    if (v.dim != grid_.dim()) throw InvalidArgument("Transform::to_spectral: dimension mismatch");
    RawCoefficients out(grid_);
    const auto* buf = static_cast<const fftw_complex*>(cplx_buf_);
    const double scale = 1.0 / static_cast<double>(points_);
    for (int j = 0; j < v.dim; ++j) {
        if (v.c[j].size() != points_) throw InvalidArgument("Transform::to_spectral: wrong array size");
        std::copy(v.c[j].begin(), v.c[j].end(), real_buf_);
        fftw_execute(static_cast<fftw_plan>(plan_r2c_));
        for (std::size_t idx : grid_.active()) {
            const long p = pad_index_[idx];
            if (p < 0) continue;
            const Complex c(buf[p][0] * scale, buf[p][1] * scale);
            out.at(j, idx) = c;
            out.at(j, grid_.mirror(idx)) = std::conj(c);
        }
    }
    return out;
}

SpectralField Transform::project(const PhysicalVector& v) { return leray_project(to_spectral(v)); }

double Transform::integrate(const RealArray& f) const {
    double s = 0.0;
    for (double x : f) s += x;
    return weight_ * s;
}

RealArray dot(const PhysicalVector& a, const PhysicalVector& b) {
    RealArray out(a.c[0].size(), 0.0);
    for (int j = 0; j < a.dim; ++j)
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += a.c[j][i] * b.c[j][i];
    return out;
}

RealArray squared_magnitude(const PhysicalVector& a) { return dot(a, a); }

PhysicalVector add(const PhysicalVector& a, const PhysicalVector& b) {
    PhysicalVector out;
    out.dim = a.dim;
    for (int j = 0; j < a.dim; ++j) {
        out.c[j].resize(a.c[j].size());
        for (std::size_t i = 0; i < a.c[j].size(); ++i) out.c[j][i] = a.c[j][i] + b.c[j][i];
    }
    return out;
}

}  // namespace cbf
