#pragma once

// Divergence-free, mean-zero, real velocity fields on the periodic box
// [0, 2*pi)^d stored as truncated Fourier coefficients.
//
// Coefficient layout: component-major, then wavenumber index in
// lexicographic order (axis 0 slowest).  Axis index i in [0, n) carries
// wavenumber i for i < n/2 and i - n otherwise (FFT order).  Only modes
// with every |k_a| <= n/3 are retained (2/3 rule); all others are zero.
//
// The physical field is u(x) = sum_k c(k) exp(i k.x), so a single pair
// c(k) = a, c(-k) = conj(a) represents 2 Re(a exp(i k.x)).

#include <array>
#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace cbf {

using Complex = std::complex<double>;
using Wavevector = std::array<int, 3>;

struct GridTables;

/// Periodic grid description: spatial dimension d in {2, 3}, n modes per axis.
class Grid {
public:
    Grid() = default;
    Grid(int d, int n);

    int dim() const noexcept { return d_; }
    int n() const noexcept { return n_; }
    /// Largest retained |k_a| (2/3 rule).
    int kmax() const noexcept { return n_ / 3; }
    /// Points per axis of the quadrature grid used for nonlinear products.
    int padded() const noexcept { return 2 * n_; }
    /// Number of wavenumbers, n^d.
    std::size_t modes() const noexcept { return modes_; }
    /// Number of stored coefficients, d * n^d.
    std::size_t size() const noexcept { return static_cast<std::size_t>(d_) * modes_; }
    /// Box volume (2*pi)^d.
    double volume() const noexcept;

    Wavevector wavevector(std::size_t idx) const;
    double k2(std::size_t idx) const;
    bool retained(std::size_t idx) const;
    /// Index of -k.
    std::size_t mirror(std::size_t idx) const;
    /// Index of wavevector k; every component must lie in (-n/2, n/2].
    std::size_t index_of(const Wavevector& k) const;
    /// Indices of all retained nonzero wavenumbers, ascending.
    std::span<const std::size_t> active() const;

    bool valid() const noexcept { return d_ != 0; }
    const GridTables& tables() const { return *tables_; }

    friend bool operator==(const Grid& a, const Grid& b) noexcept { return a.d_ == b.d_ && a.n_ == b.n_; }

private:
    int d_ = 0;
    int n_ = 0;
    std::size_t modes_ = 0;
    std::shared_ptr<const GridTables> tables_;
};

struct GridTables {
    std::vector<Wavevector> k;
    std::vector<double> k2;
    std::vector<char> retained;
    std::vector<std::size_t> mirror;
    std::vector<std::size_t> active;
};

/// Mutable coefficient array without the divergence-free guarantee.
struct RawCoefficients {
    Grid grid;
    std::vector<Complex> data;

    explicit RawCoefficients(const Grid& g) : grid(g), data(g.size()) {}

    Complex& at(int component, std::size_t idx) { return data[component * grid.modes() + idx]; }
    Complex at(int component, std::size_t idx) const { return data[component * grid.modes() + idx]; }
};

class SpectralField;
SpectralField leray_project(const RawCoefficients& u);

/// Immutable divergence-free field.  Construct through make_field,
/// leray_project, zero(), or arithmetic on existing fields.
class SpectralField {
public:
    SpectralField() = default;

    static SpectralField zero(const Grid& grid);

    const Grid& grid() const noexcept { return grid_; }
    std::span<const Complex> coeffs() const noexcept { return coeffs_; }
    std::span<const Complex> component(int j) const noexcept {
        return {coeffs_.data() + j * grid_.modes(), grid_.modes()};
    }
    Complex at(int j, std::size_t idx) const { return coeffs_[j * grid_.modes() + idx]; }
    bool empty() const noexcept { return coeffs_.empty(); }
    RawCoefficients raw() const;

    /// Largest |coefficient|.
    double max_abs() const;

    friend SpectralField operator+(const SpectralField& a, const SpectralField& b);
    friend SpectralField operator-(const SpectralField& a, const SpectralField& b);
    friend SpectralField operator*(double s, const SpectralField& a);
    friend SpectralField operator-(const SpectralField& a) { return -1.0 * a; }
    /// a + s * b
    friend SpectralField axpy(const SpectralField& a, double s, const SpectralField& b);

    /// Wraps coefficients already known to satisfy every invariant.
    static SpectralField trusted(const Grid& grid, std::vector<Complex> coeffs);

private:
    SpectralField(const Grid& grid, std::vector<Complex> coeffs) : grid_(grid), coeffs_(std::move(coeffs)) {}

    Grid grid_;
    std::vector<Complex> coeffs_;
};

struct ModeAmplitude {
    Wavevector k;
    std::array<Complex, 3> amplitude;
};

/// Builds a field from a list of (k, amplitude) pairs.  Mirror entries are
/// filled by conjugation and the result is Leray-projected.
/// Throws InvalidArgument for k = 0 or k outside the retained range.
SpectralField make_field(const Grid& grid, std::span<const ModeAmplitude> modes);

struct FieldNorms {
    double l2 = 0.0;  ///< ||u||_2
    double v = 0.0;   ///< ||grad u||_2
    double l4 = 0.0;  ///< ||u||_4, by quadrature on the padded grid
};

FieldNorms norms(const SpectralField& u);
double norm_l2(const SpectralField& u);
double norm_v(const SpectralField& u);
double norm_l4(const SpectralField& u);
/// ||u||_{V'} = sup_w (u, w) / ||grad w||_2, exact in Fourier space.
double norm_v_dual(const SpectralField& u);

/// L2 inner product on the box.  Throws GridMismatch.
double inner_product(const SpectralField& u, const SpectralField& w);

/// Largest relative divergence |k . c(k)| / (|k| |c(k)|) over retained modes.
double divergence_defect(const SpectralField& u);
/// Largest |c(-k) - conj(c(k))|.
double hermitian_defect(const SpectralField& u);

/// Random smooth field with Gaussian spectral envelope exp(-|k|^2 / (2 width^2)),
/// rescaled to the requested L2 norm.
SpectralField random_field(const Grid& grid, std::mt19937_64& rng, double l2_norm, double width = 2.5);

void require_same_grid(const Grid& a, const Grid& b, const char* where);

/// Uniformly sampled field-valued function of time on [0, t_end].
class Trajectory {
public:
    Trajectory() = default;
    Trajectory(double t_end, std::vector<SpectralField> samples);

    static Trajectory constant(const SpectralField& u, double t_end, int nt);
    static Trajectory zero(const Grid& grid, double t_end, int nt);
    static Trajectory sample(const Grid& grid, double t_end, int nt,
                             const std::function<SpectralField(double)>& fn);

    const Grid& grid() const { return samples_.front().grid(); }
    double t_end() const noexcept { return t_end_; }
    int nt() const noexcept { return static_cast<int>(samples_.size()) - 1; }
    double dt() const noexcept { return t_end_ / nt(); }
    double time(int i) const noexcept { return t_end_ * i / nt(); }
    const SpectralField& operator[](int i) const { return samples_[i]; }
    const std::vector<SpectralField>& samples() const noexcept { return samples_; }

    friend Trajectory operator+(const Trajectory& a, const Trajectory& b);
    friend Trajectory operator-(const Trajectory& a, const Trajectory& b);
    friend Trajectory operator*(double s, const Trajectory& a);
    friend Trajectory axpy(const Trajectory& a, double s, const Trajectory& b);

private:
    double t_end_ = 0.0;
    std::vector<SpectralField> samples_;
};

/// Throws GridMismatch unless both trajectories share grid, t_end and nt.
void require_aligned(const Trajectory& a, const Trajectory& b, const char* where);

/// Samples reversed: result[i] = traj[nt - i].
Trajectory time_reverse(const Trajectory& traj);

/// Smooth random trajectory a + b cos(w t) + c sin(w t) with random fields
/// a, b, c and w in [1, 4], rescaled to the given discrete L2(0,T;H) norm.
Trajectory random_trajectory(const Grid& grid, double t_end, int nt, std::mt19937_64& rng, double l2_time,
                             double width = 2.5);

/// Linear interpolation of a trajectory onto a different uniform time grid
/// over the same interval.
Trajectory resample(const Trajectory& traj, int nt);

/// Sum over samples [first, last] of dt * (a_i, b_i).
double time_pairing(const Trajectory& a, const Trajectory& b, int first, int last);
/// Left-endpoint discrete L2(0,T;H) inner product, samples 0..nt-1.
double l2_time_inner(const Trajectory& a, const Trajectory& b);
double l2_time_norm(const Trajectory& a);
/// max_i ||traj_i||_2
double linf_time_l2(const Trajectory& a);

}  // namespace cbf
