#pragma once

// Pseudo-spectral machinery: transforms between truncated coefficients and
// point values on the padded (2n per axis) quadrature grid.  Products up to
// fourth order of retained modes are alias-free on this grid, so quadrature
// of cubic and quartic integrands is exact up to round-off.

#include <array>
#include <vector>

#include "cbf/fields.hpp"

namespace cbf {

using RealArray = std::vector<double>;

/// Point values of a d-vector field on the padded grid.
struct PhysicalVector {
    int dim = 0;
    std::array<RealArray, 3> c;
};

/// grad[i][j] = d u_j / d x_i on the padded grid.
struct PhysicalGradient {
    int dim = 0;
    std::array<std::array<RealArray, 3>, 3> g;
};

class Transform;

/// Per-thread transform workspace for the given grid.  Plans are created
/// lazily; the returned reference is valid for the lifetime of the thread.
Transform& transform_for(const Grid& grid);

class Transform {
public:
    explicit Transform(const Grid& grid);
    ~Transform();
    Transform(const Transform&) = delete;
    Transform& operator=(const Transform&) = delete;

    const Grid& grid() const noexcept { return grid_; }
    std::size_t points() const noexcept { return points_; }
    /// Quadrature weight (2 pi)^d / points.
    double weight() const noexcept { return weight_; }

    /// Component j of u; if axis >= 0 the derivative d/dx_axis is taken first.
    void to_physical(const SpectralField& u, int j, int axis, RealArray& out);
    PhysicalVector to_physical(const SpectralField& u);
    PhysicalGradient gradient(const SpectralField& u);

    /// Truncating forward transform (no projection).
    RawCoefficients to_spectral(const PhysicalVector& v);
    /// Forward transform followed by Leray projection.
    SpectralField project(const PhysicalVector& v);

    double integrate(const RealArray& f) const;

private:
    void inverse(const Complex* coeffs, int axis, RealArray& out);

    Grid grid_;
    int m_ = 0;
    std::size_t points_ = 0;
    std::size_t half_points_ = 0;
    double weight_ = 0.0;
    /// padded half-complex index for each retained coefficient with k_last >= 0, else -1
    std::vector<long> pad_index_;
    void* plan_c2r_ = nullptr;
    void* plan_r2c_ = nullptr;
    double* real_buf_ = nullptr;
    void* cplx_buf_ = nullptr;
};

// Pointwise helpers on padded-grid arrays.
RealArray dot(const PhysicalVector& a, const PhysicalVector& b);
RealArray squared_magnitude(const PhysicalVector& a);
PhysicalVector add(const PhysicalVector& a, const PhysicalVector& b);

}  // namespace cbf
