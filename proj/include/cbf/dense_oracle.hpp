#pragma once

// Brute-force Galerkin reference for tiny grids.  Fields are expanded in a
// real L2-orthonormal divergence-free basis (cos and sin of each retained
// wave pair times the unit directions orthogonal to k).  Nonlinear terms are
// evaluated by direct convolution of Fourier coefficients and projected by
// taking basis coordinates, so nothing is shared with the FFT path.

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "cbf/fields.hpp"
#include "cbf/operators.hpp"

namespace cbf {

/// Fourier coefficients of a scalar function on a box [-K, K]^d.
class Series {
public:
    Series() = default;
    Series(int d, int K);

    int dim() const noexcept { return d_; }
    int reach() const noexcept { return K_; }
    std::size_t size() const noexcept { return data_.size(); }
    Wavevector wavevector(std::size_t i) const;
    Complex& at(const Wavevector& k) { return data_[index(k)]; }
    Complex at(const Wavevector& k) const;
    Complex operator[](std::size_t i) const { return data_[i]; }
    Complex& operator[](std::size_t i) { return data_[i]; }

    friend Series operator*(const Series& a, const Series& b);
    friend Series operator+(const Series& a, const Series& b);
    Series derivative(int axis) const;
    /// int a b dx over the box (2 pi)^d.
    friend double integral(const Series& a, const Series& b);

private:
    std::size_t index(const Wavevector& k) const;
    int d_ = 0;
    int K_ = 0;
    std::vector<Complex> data_;
};

using VectorSeries = std::vector<Series>;

class DenseSystem {
public:
    static constexpr int max_dim = 64;

    /// Throws InvalidArgument when the basis would exceed max_dim.
    DenseSystem(const Grid& grid, const OperatorParams& params);

    int dim() const noexcept { return D_; }
    const Grid& grid() const noexcept { return grid_; }
    const OperatorParams& params() const noexcept { return params_; }

    Eigen::VectorXd coords(const SpectralField& u) const;
    Eigen::VectorXd coords(const VectorSeries& u) const;
    SpectralField field(const Eigen::VectorXd& y) const;
    VectorSeries series(const Eigen::VectorXd& y) const;

    /// Diagonal |k|^2 in this basis.
    const Eigen::MatrixXd& stokes() const noexcept { return A_; }

    double trilinear(const Eigen::VectorXd& p, const Eigen::VectorXd& q, const Eigen::VectorXd& r) const;
    Eigen::VectorXd convection(const Eigen::VectorXd& p, const Eigen::VectorXd& q) const;
    Eigen::VectorXd forchheimer(const Eigen::VectorXd& p) const;
    /// Coordinates of P[ sum_j q_j grad m_j ].
    Eigen::VectorXd transport(const Eigen::VectorXd& m, const Eigen::VectorXd& q) const;

    /// Difference-slab matrices at (m1_n, m2_n, m1_{n+1}, m2_{n+1}).
    Eigen::MatrixXd slab_M(const Eigen::VectorXd& m1_lo, const Eigen::VectorXd& m2_lo, double dt) const;
    Eigen::MatrixXd slab_N(const Eigen::VectorXd& m1_lo, const Eigen::VectorXd& m2_lo, const Eigen::VectorXd& m1_hi,
                           const Eigen::VectorXd& m2_hi, double dt) const;

    /// One state step solved with a dense LU factorization.
    Eigen::VectorXd step_state(const Eigen::VectorXd& m, const Eigen::VectorXd& f, double dt) const;

    /// dm/dt = f - mu A m - B(m, m) - alpha m - beta C(m)
    Eigen::VectorXd state_rate(const Eigen::VectorXd& m, const Eigen::VectorXd& f) const;
    /// dq/dt = mu A q + alpha q - B(m1, q) + T(m2, q) + F(m1, m2) q + delta C(q) - h
    Eigen::VectorXd adjoint_rate(const Eigen::VectorXd& q, const Eigen::VectorXd& m1, const Eigen::VectorXd& m2,
                                 const Eigen::VectorXd& h, double delta) const;

private:
    Grid grid_;
    OperatorParams params_;
    int D_ = 0;
    std::vector<VectorSeries> basis_;
    Eigen::MatrixXd A_;
};

/// Samples of a coordinate trajectory at t_i = i T / nt plus the fine path.
struct DensePath {
    double t_end = 0.0;
    int nt = 0;
    std::vector<Eigen::VectorXd> coarse;
    std::vector<Eigen::VectorXd> fine;  ///< nt * substeps + 1 points

    /// Linear interpolation on the fine path.
    Eigen::VectorXd at(double t) const;
};

using TimeFunction = std::function<Eigen::VectorXd(double)>;

/// Classical RK4 with nt * substeps steps.
DensePath reference_state(const DenseSystem& sys, const Eigen::VectorXd& m0, const TimeFunction& f, double t_end,
                          int nt, int substeps = 64);
/// Backward RK4 from q(T) = 0 with coefficients interpolated on the fine paths.
DensePath reference_adjoint(const DenseSystem& sys, const DensePath& m1, const DensePath& m2, const TimeFunction& h,
                            double delta, int substeps = 64);

/// max_i ||a_i - b_i|| over coordinate samples.
double max_distance(const std::vector<Eigen::VectorXd>& a, const std::vector<Eigen::VectorXd>& b);
std::vector<Eigen::VectorXd> coords(const DenseSystem& sys, const Trajectory& traj);

}  // namespace cbf
