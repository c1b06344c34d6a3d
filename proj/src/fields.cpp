#include "cbf/fields.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>

#include "cbf/errors.hpp"
#include "cbf/transform.hpp"

namespace cbf {

namespace {

std::shared_ptr<const GridTables> build_tables(int d, int n) {
    auto t = std::make_shared<GridTables>();
    std::size_t modes = 1;
    for (int a = 0; a < d; ++a) modes *= static_cast<std::size_t>(n);
    t->k.resize(modes);
    t->k2.resize(modes);
    t->retained.resize(modes);
    t->mirror.resize(modes);
    const int kmax = n / 3;
    auto wave = [n](int i) { return i < n / 2 ? i : i - n; };
    for (std::size_t idx = 0; idx < modes; ++idx) {
        Wavevector k{0, 0, 0};
        std::size_t rest = idx;
        for (int a = d - 1; a >= 0; --a) {
            k[a] = wave(static_cast<int>(rest % n));
            rest /= n;
        }
        t->k[idx] = k;
        double k2 = 0.0;
        bool keep = true;
        bool zero = true;
        for (int a = 0; a < d; ++a) {
            k2 += double(k[a]) * k[a];
            keep = keep && std::abs(k[a]) <= kmax;
            zero = zero && k[a] == 0;
        }
        t->k2[idx] = k2;
        t->retained[idx] = keep && !zero;
        std::size_t m = 0;
        for (int a = 0; a < d; ++a) m = m * n + static_cast<std::size_t>(((-k[a]) % n + n) % n);
        t->mirror[idx] = m;
        if (t->retained[idx]) t->active.push_back(idx);
    }
    return t;
}

std::shared_ptr<const GridTables> tables_for(int d, int n) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::shared_ptr<const GridTables>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[{d, n}];
    if (!slot) slot = build_tables(d, n);
    return slot;
}

}  // namespace

Grid::Grid(int d, int n) : d_(d), n_(n) {
    if (d != 2 && d != 3) throw InvalidArgument("Grid: dimension must be 2 or 3");
    if (n < 4 || n % 2 != 0) throw InvalidArgument("Grid: n must be even and >= 4");
    modes_ = 1;
    for (int a = 0; a < d; ++a) modes_ *= static_cast<std::size_t>(n);
    tables_ = tables_for(d, n);
}

double Grid::volume() const noexcept { return std::pow(2.0 * std::numbers::pi, d_); }
Wavevector Grid::wavevector(std::size_t idx) const { return tables_->k[idx]; }
double Grid::k2(std::size_t idx) const { return tables_->k2[idx]; }
bool Grid::retained(std::size_t idx) const { return tables_->retained[idx] != 0; }
std::size_t Grid::mirror(std::size_t idx) const { return tables_->mirror[idx]; }
std::span<const std::size_t> Grid::active() const { return tables_->active; }

std::size_t Grid::index_of(const Wavevector& k) const {
    std::size_t idx = 0;
    for (int a = 0; a < d_; ++a) {
        if (k[a] <= -n_ / 2 || k[a] > n_ / 2) throw InvalidArgument("Grid::index_of: wavenumber out of range");
        idx = idx * n_ + static_cast<std::size_t>((k[a] + n_) % n_);
    }
    return idx;
}

void require_same_grid(const Grid& a, const Grid& b, const char* where) {
    if (!(a == b)) {
        std::ostringstream os;
        os << where << ": grid mismatch (d=" << a.dim() << ", n=" << a.n() << ") vs (d=" << b.dim()
           << ", n=" << b.n() << ")";
        throw GridMismatch(os.str());
    }
}

// ---------------------------------------------------------------- SpectralField

SpectralField SpectralField::zero(const Grid& grid) { return SpectralField(grid, std::vector<Complex>(grid.size())); }

SpectralField SpectralField::trusted(const Grid& grid, std::vector<Complex> coeffs) {
    return SpectralField(grid, std::move(coeffs));
}

RawCoefficients SpectralField::raw() const {
    RawCoefficients r(grid_);
    r.data = coeffs_;
    return r;
}

double SpectralField::max_abs() const {
    double m = 0.0;
    for (const auto& c : coeffs_) m = std::max(m, std::abs(c));
    return m;
}

SpectralField operator+(const SpectralField& a, const SpectralField& b) {
    require_same_grid(a.grid_, b.grid_, "operator+");
    std::vector<Complex> out(a.coeffs_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.coeffs_[i] + b.coeffs_[i];
    return SpectralField(a.grid_, std::move(out));
}

SpectralField operator-(const SpectralField& a, const SpectralField& b) {
    require_same_grid(a.grid_, b.grid_, "operator-");
    std::vector<Complex> out(a.coeffs_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.coeffs_[i] - b.coeffs_[i];
    return SpectralField(a.grid_, std::move(out));
}

SpectralField operator*(double s, const SpectralField& a) {
    std::vector<Complex> out(a.coeffs_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * a.coeffs_[i];
    return SpectralField(a.grid_, std::move(out));
}

SpectralField axpy(const SpectralField& a, double s, const SpectralField& b) {
    require_same_grid(a.grid_, b.grid_, "axpy");
    std::vector<Complex> out(a.coeffs_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.coeffs_[i] + s * b.coeffs_[i];
    return SpectralField(a.grid_, std::move(out));
}

SpectralField leray_project(const RawCoefficients& u) {
    const Grid& g = u.grid;
    const int d = g.dim();
    const std::size_t modes = g.modes();
    std::vector<Complex> out(g.size());
    for (std::size_t idx : g.active()) {
        const Wavevector k = g.wavevector(idx);
        const std::size_t mir = g.mirror(idx);
        std::array<Complex, 3> c{};
        Complex kc = 0.0;
        for (int j = 0; j < d; ++j) {
            // symmetrize so the stored field is exactly real-valued
            c[j] = 0.5 * (u.data[j * modes + idx] + std::conj(u.data[j * modes + mir]));
            kc += double(k[j]) * c[j];
        }
        const double inv_k2 = 1.0 / g.k2(idx);
        for (int j = 0; j < d; ++j) out[j * modes + idx] = c[j] - double(k[j]) * kc * inv_k2;
    }
    return SpectralField::trusted(g, std::move(out));
}

SpectralField make_field(const Grid& grid, std::span<const ModeAmplitude> modes) {
    RawCoefficients raw(grid);
    for (const auto& m : modes) {
        bool zero = true;
        for (int a = 0; a < grid.dim(); ++a) {
            zero = zero && m.k[a] == 0;
            if (std::abs(m.k[a]) > grid.kmax())
                throw InvalidArgument("make_field: wavenumber outside the dealiased range |k_i| <= n/3");
        }
        if (zero) throw InvalidArgument("make_field: k = 0 is not allowed (fields have zero mean)");
        const std::size_t idx = grid.index_of(m.k);
        const std::size_t mir = grid.mirror(idx);
        for (int j = 0; j < grid.dim(); ++j) {
            raw.at(j, idx) += m.amplitude[j];
            raw.at(j, mir) += std::conj(m.amplitude[j]);
        }
    }
    return leray_project(raw);
}

// ---------------------------------------------------------------- norms

double inner_product(const SpectralField& u, const SpectralField& w) {
    require_same_grid(u.grid(), w.grid(), "inner_product");
    const auto a = u.coeffs();
    const auto b = w.coeffs();
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
    return u.grid().volume() * s;
}

double norm_l2(const SpectralField& u) {
    double s = 0.0;
    for (const auto& c : u.coeffs()) s += std::norm(c);
    return std::sqrt(u.grid().volume() * s);
}

namespace {
double weighted_sum(const SpectralField& u, double power) {
    const Grid& g = u.grid();
    double s = 0.0;
    for (int j = 0; j < g.dim(); ++j) {
        const auto comp = u.component(j);
        for (std::size_t idx : g.active()) s += std::pow(g.k2(idx), power) * std::norm(comp[idx]);
    }
    return g.volume() * s;
}
}  // namespace

double norm_v(const SpectralField& u) { return std::sqrt(weighted_sum(u, 1.0)); }
double norm_v_dual(const SpectralField& u) { return std::sqrt(weighted_sum(u, -1.0)); }

double norm_l4(const SpectralField& u) {
    auto& tr = transform_for(u.grid());
    const PhysicalVector p = tr.to_physical(u);
    RealArray q = squared_magnitude(p);
    for (auto& x : q) x *= x;
    return std::pow(std::max(tr.integrate(q), 0.0), 0.25);
}

FieldNorms norms(const SpectralField& u) { return {norm_l2(u), norm_v(u), norm_l4(u)}; }

double divergence_defect(const SpectralField& u) {
    const Grid& g = u.grid();
    double worst = 0.0;
    for (std::size_t idx : g.active()) {
        const Wavevector k = g.wavevector(idx);
        Complex kc = 0.0;
        double mag = 0.0;
        for (int j = 0; j < g.dim(); ++j) {
            kc += double(k[j]) * u.at(j, idx);
            mag += std::norm(u.at(j, idx));
        }
        if (mag > 0.0) worst = std::max(worst, std::abs(kc) / (std::sqrt(g.k2(idx)) * std::sqrt(mag)));
    }
    return worst;
}

double hermitian_defect(const SpectralField& u) {
    const Grid& g = u.grid();
    double worst = 0.0;
    for (int j = 0; j < g.dim(); ++j)
        for (std::size_t idx = 0; idx < g.modes(); ++idx)
            worst = std::max(worst, std::abs(u.at(j, g.mirror(idx)) - std::conj(u.at(j, idx))));
    return worst;
}

SpectralField random_field(const Grid& grid, std::mt19937_64& rng, double l2_norm, double width) {
    std::normal_distribution<double> normal(0.0, 1.0);
    RawCoefficients raw(grid);
    for (std::size_t idx : grid.active()) {
        const double env = std::exp(-grid.k2(idx) / (2.0 * width * width));
        for (int j = 0; j < grid.dim(); ++j) {
            const double re = normal(rng);
            const double im = normal(rng);
            raw.at(j, idx) = env * Complex(re, im);
        }
    }
    // leray_project symmetrizes, which makes the field real
    SpectralField u = leray_project(raw);
    const double nrm = norm_l2(u);
    if (nrm == 0.0) return u;
    return (l2_norm / nrm) * u;
}

// ---------------------------------------------------------------- Trajectory

Trajectory::Trajectory(double t_end, std::vector<SpectralField> samples) : t_end_(t_end), samples_(std::move(samples)) {
    if (samples_.size() < 2) throw InvalidArgument("Trajectory: need nt >= 1 (at least two samples)");
    if (!(t_end_ > 0.0)) throw InvalidArgument("Trajectory: t_end must be positive");
    for (const auto& s : samples_) require_same_grid(samples_.front().grid(), s.grid(), "Trajectory");
}

Trajectory Trajectory::constant(const SpectralField& u, double t_end, int nt) {
    return Trajectory(t_end, std::vector<SpectralField>(static_cast<std::size_t>(nt) + 1, u));
}

Trajectory Trajectory::zero(const Grid& grid, double t_end, int nt) {
    return constant(SpectralField::zero(grid), t_end, nt);
}

Trajectory Trajectory::sample(const Grid& grid, double t_end, int nt, const std::function<SpectralField(double)>& fn) {
    if (nt < 1) throw InvalidArgument("Trajectory::sample: nt must be >= 1");
    std::vector<SpectralField> s;
    s.reserve(static_cast<std::size_t>(nt) + 1);
    for (int i = 0; i <= nt; ++i) {
        s.push_back(fn(t_end * i / nt));
        require_same_grid(grid, s.back().grid(), "Trajectory::sample");
    }
    return Trajectory(t_end, std::move(s));
}

void require_aligned(const Trajectory& a, const Trajectory& b, const char* where) {
    require_same_grid(a.grid(), b.grid(), where);
    if (a.nt() != b.nt() || a.t_end() != b.t_end()) {
        std::ostringstream os;
        os << where << ": time grids differ (nt " << a.nt() << " vs " << b.nt() << ", T " << a.t_end() << " vs "
           << b.t_end() << ")";
        throw GridMismatch(os.str());
    }
}

namespace {
template <class Op>
Trajectory zip(const Trajectory& a, const Trajectory& b, const char* where, Op op) {
    require_aligned(a, b, where);
    std::vector<SpectralField> s;
    s.reserve(a.samples().size());
    for (int i = 0; i <= a.nt(); ++i) s.push_back(op(a[i], b[i]));
    return Trajectory(a.t_end(), std::move(s));
}
}  // namespace

Trajectory operator+(const Trajectory& a, const Trajectory& b) {
    return zip(a, b, "Trajectory +", [](const auto& x, const auto& y) { return x + y; });
}
Trajectory operator-(const Trajectory& a, const Trajectory& b) {
    return zip(a, b, "Trajectory -", [](const auto& x, const auto& y) { return x - y; });
}
Trajectory axpy(const Trajectory& a, double s, const Trajectory& b) {
    return zip(a, b, "Trajectory axpy", [s](const auto& x, const auto& y) { return axpy(x, s, y); });
}
Trajectory operator*(double s, const Trajectory& a) {
    std::vector<SpectralField> out;
    out.reserve(a.samples().size());
    for (const auto& x : a.samples()) out.push_back(s * x);
    return Trajectory(a.t_end(), std::move(out));
}

Trajectory time_reverse(const Trajectory& traj) {
    std::vector<SpectralField> s(traj.samples().rbegin(), traj.samples().rend());
    return Trajectory(traj.t_end(), std::move(s));
}

Trajectory resample(const Trajectory& traj, int nt) {
    if (nt == traj.nt()) return traj;
    return Trajectory::sample(traj.grid(), traj.t_end(), nt, [&](double t) {
        const double x = t / traj.dt();
        const int i = std::clamp(static_cast<int>(std::floor(x)), 0, traj.nt() - 1);
        const double w = std::clamp(x - i, 0.0, 1.0);
        return axpy((1.0 - w) * traj[i], w, traj[i + 1]);
    });
}

Trajectory random_trajectory(const Grid& grid, double t_end, int nt, std::mt19937_64& rng, double l2_time,
                             double width) {
    const SpectralField a = random_field(grid, rng, 1.0, width);
    const SpectralField b = random_field(grid, rng, 1.0, width);
    const SpectralField c = random_field(grid, rng, 1.0, width);
    const double w = std::uniform_real_distribution<double>(1.0, 4.0)(rng);
    Trajectory traj = Trajectory::sample(grid, t_end, nt, [&](double t) {
        return axpy(axpy(a, std::cos(w * t), b), std::sin(w * t), c);
    });
    const double nrm = l2_time_norm(traj);
    return nrm > 0.0 ? (l2_time / nrm) * traj : traj;
}

double time_pairing(const Trajectory& a, const Trajectory& b, int first, int last) {
    require_aligned(a, b, "time_pairing");
    double s = 0.0;
    for (int i = first; i <= last; ++i) s += inner_product(a[i], b[i]);
    return a.dt() * s;
}

double l2_time_inner(const Trajectory& a, const Trajectory& b) { return time_pairing(a, b, 0, a.nt() - 1); }
double l2_time_norm(const Trajectory& a) { return std::sqrt(std::max(l2_time_inner(a, a), 0.0)); }

double linf_time_l2(const Trajectory& a) {
    double m = 0.0;
    for (const auto& s : a.samples()) m = std::max(m, norm_l2(s));
    return m;
}

}  // namespace cbf
