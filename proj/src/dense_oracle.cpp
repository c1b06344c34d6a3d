#include "cbf/dense_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cbf/errors.hpp"

namespace cbf {

Series::Series(int d, int K) : d_(d), K_(K) {
    std::size_t n = 1;
    for (int a = 0; a < d; ++a) n *= static_cast<std::size_t>(2 * K + 1);
    data_.assign(n, Complex{});
}

std::size_t Series::index(const Wavevector& k) const {
    std::size_t idx = 0;
    for (int a = 0; a < d_; ++a) {
        if (std::abs(k[a]) > K_) throw InvalidArgument("Series: wavevector outside the box");
        idx = idx * (2 * K_ + 1) + static_cast<std::size_t>(k[a] + K_);
    }
    return idx;
}

Complex Series::at(const Wavevector& k) const {
    for (int a = 0; a < d_; ++a)
        if (std::abs(k[a]) > K_) return {};
    return data_[index(k)];
}

Wavevector Series::wavevector(std::size_t i) const {
    Wavevector k{0, 0, 0};
    for (int a = d_ - 1; a >= 0; --a) {
        k[a] = static_cast<int>(i % (2 * K_ + 1)) - K_;
        i /= (2 * K_ + 1);
    }
    return k;
}

Series operator*(const Series& a, const Series& b) {
    Series out(a.d_, a.K_ + b.K_);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.data_[i] == Complex{}) continue;
        const Wavevector ka = a.wavevector(i);
        for (std::size_t j = 0; j < b.size(); ++j) {
            if (b.data_[j] == Complex{}) continue;
            const Wavevector kb = b.wavevector(j);
            out.at({ka[0] + kb[0], ka[1] + kb[1], ka[2] + kb[2]}) += a.data_[i] * b.data_[j];
        }
    }
    return out;
}

Series operator+(const Series& a, const Series& b) {
    Series out(a.d_, std::max(a.K_, b.K_));
    for (std::size_t i = 0; i < a.size(); ++i) out.at(a.wavevector(i)) += a.data_[i];
    for (std::size_t i = 0; i < b.size(); ++i) out.at(b.wavevector(i)) += b.data_[i];
    return out;
}

Series Series::derivative(int axis) const {
    Series out = *this;
    for (std::size_t i = 0; i < size(); ++i) out.data_[i] *= Complex(0.0, wavevector(i)[axis]);
    return out;
}

double integral(const Series& a, const Series& b) {
    Complex s{};
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.data_[i] == Complex{}) continue;
        const Wavevector k = a.wavevector(i);
        s += a.data_[i] * b.at({-k[0], -k[1], -k[2]});
    }
    return std::pow(2.0 * std::numbers::pi, a.d_) * s.real();
}

namespace {

VectorSeries zero_series(int d, int K) { return VectorSeries(d, Series(d, K)); }

Series dot(const VectorSeries& a, const VectorSeries& b) {
    Series s = a[0] * b[0];
    for (std::size_t j = 1; j < a.size(); ++j) s = s + a[j] * b[j];
    return s;
}

VectorSeries scale(const Series& w, const VectorSeries& x) {
    VectorSeries out;
    for (const auto& c : x) out.push_back(w * c);
    return out;
}

}  // namespace

DenseSystem::DenseSystem(const Grid& grid, const OperatorParams& params) : grid_(grid), params_(params) {
    params_.validate();
    const int d = grid.dim();
    const int K = grid.kmax();
    const double s = std::sqrt(2.0 / grid.volume());
    std::vector<double> k2;
    for (std::size_t idx : grid.active()) {
        const Wavevector k = grid.wavevector(idx);
        int first = 0;
        while (first < d && k[first] == 0) ++first;
        if (k[first] < 0) continue;  // the pair is generated from +k
        std::vector<std::array<double, 3>> dirs;
        const double kn = std::sqrt(grid.k2(idx));
        if (d == 2) {
            dirs.push_back({-k[1] / kn, k[0] / kn, 0.0});
        } else {
            int a = 0;
            for (int i = 1; i < 3; ++i)
                if (std::abs(k[i]) < std::abs(k[a])) a = i;
            std::array<double, 3> ax{0, 0, 0};
            ax[a] = 1.0;
            auto cross = [](const std::array<double, 3>& u, const std::array<double, 3>& v) {
                return std::array<double, 3>{u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2],
                                             u[0] * v[1] - u[1] * v[0]};
            };
            const std::array<double, 3> kk{double(k[0]), double(k[1]), double(k[2])};
            auto e1 = cross(kk, ax);
            const double n1 = std::sqrt(e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]);
            for (auto& c : e1) c /= n1;
            auto e2 = cross(kk, e1);
            for (auto& c : e2) c /= kn;
            dirs = {e1, e2};
        }
        for (const auto& e : dirs)
            for (int sine = 0; sine < 2; ++sine) {
                VectorSeries phi = zero_series(d, K);
                const Complex c = sine ? Complex(0.0, -0.5 * s) : Complex(0.5 * s, 0.0);
                for (int j = 0; j < d; ++j) {
                    phi[j].at(k) = c * e[j];
                    phi[j].at({-k[0], -k[1], -k[2]}) = std::conj(c) * e[j];
                }
                basis_.push_back(std::move(phi));
                k2.push_back(grid.k2(idx));
            }
        if (static_cast<int>(basis_.size()) > max_dim)
            throw InvalidArgument("DenseSystem: basis dimension exceeds " + std::to_string(max_dim));
    }
    D_ = static_cast<int>(basis_.size());
    A_ = Eigen::MatrixXd::Zero(D_, D_);
    for (int i = 0; i < D_; ++i) A_(i, i) = k2[i];
}

Eigen::VectorXd DenseSystem::coords(const VectorSeries& u) const {
    Eigen::VectorXd y(D_);
    for (int i = 0; i < D_; ++i) {
        double s = 0.0;
        for (int j = 0; j < grid_.dim(); ++j) s += integral(basis_[i][j], u[j]);
        y[i] = s;
    }
    return y;
}

Eigen::VectorXd DenseSystem::coords(const SpectralField& u) const {
    require_same_grid(grid_, u.grid(), "DenseSystem::coords");
    const int K = grid_.kmax();
    VectorSeries s = zero_series(grid_.dim(), K);
    for (std::size_t idx : grid_.active()) {
        const Wavevector k = grid_.wavevector(idx);
        for (int j = 0; j < grid_.dim(); ++j) s[j].at(k) = u.at(j, idx);
    }
    return coords(s);
}

VectorSeries DenseSystem::series(const Eigen::VectorXd& y) const {
    if (y.size() != D_) throw InvalidArgument("DenseSystem: coordinate vector has the wrong size");
    VectorSeries out = zero_series(grid_.dim(), grid_.kmax());
    for (int i = 0; i < D_; ++i)
        for (int j = 0; j < grid_.dim(); ++j)
            for (std::size_t m = 0; m < out[j].size(); ++m) out[j][m] += y[i] * basis_[i][j][m];
    return out;
}

SpectralField DenseSystem::field(const Eigen::VectorXd& y) const {
    const VectorSeries s = series(y);
    std::vector<Complex> coeffs(grid_.size());
    for (std::size_t idx : grid_.active())
        for (int j = 0; j < grid_.dim(); ++j) coeffs[j * grid_.modes() + idx] = s[j].at(grid_.wavevector(idx));
    return SpectralField::trusted(grid_, std::move(coeffs));
}

double DenseSystem::trilinear(const Eigen::VectorXd& p, const Eigen::VectorXd& q, const Eigen::VectorXd& r) const {
    const VectorSeries P = series(p), Q = series(q), R = series(r);
    double s = 0.0;
    for (int j = 0; j < grid_.dim(); ++j)
        for (int a = 0; a < grid_.dim(); ++a) s += integral(P[a] * Q[j].derivative(a), R[j]);
    return s;
}

Eigen::VectorXd DenseSystem::convection(const Eigen::VectorXd& p, const Eigen::VectorXd& q) const {
    const VectorSeries P = series(p), Q = series(q);
    VectorSeries u;
    for (int j = 0; j < grid_.dim(); ++j) {
        Series s = P[0] * Q[j].derivative(0);
        for (int a = 1; a < grid_.dim(); ++a) s = s + P[a] * Q[j].derivative(a);
        u.push_back(std::move(s));
    }
    return coords(u);
}

Eigen::VectorXd DenseSystem::forchheimer(const Eigen::VectorXd& p) const {
    const VectorSeries P = series(p);
    return coords(scale(dot(P, P), P));
}

Eigen::VectorXd DenseSystem::transport(const Eigen::VectorXd& m, const Eigen::VectorXd& q) const {
    const VectorSeries M = series(m), Q = series(q);
    VectorSeries u;
    for (int a = 0; a < grid_.dim(); ++a) {
        Series s = Q[0] * M[0].derivative(a);
        for (int j = 1; j < grid_.dim(); ++j) s = s + Q[j] * M[j].derivative(a);
        u.push_back(std::move(s));
    }
    return coords(u);
}

Eigen::MatrixXd DenseSystem::slab_M(const Eigen::VectorXd& m1_lo, const Eigen::VectorXd& m2_lo, double dt) const {
    const VectorSeries M1 = series(m1_lo), M2 = series(m2_lo);
    const Series w = dot(M1, M1) + dot(M2, M2);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(D_, D_);
    Eigen::MatrixXd M = I + dt * (params_.mu * A_ + params_.alpha * I);
    for (int c = 0; c < D_; ++c) {
        const Eigen::VectorXd x = I.col(c);
        M.col(c) += dt * convection(m1_lo, x) + dt * 0.5 * params_.beta * coords(scale(w, series(x)));
    }
    return M;
}

Eigen::MatrixXd DenseSystem::slab_N(const Eigen::VectorXd& m1_lo, const Eigen::VectorXd& m2_lo,
                                    const Eigen::VectorXd& m1_hi, const Eigen::VectorXd& m2_hi, double dt) const {
    const VectorSeries s_lo = series(m1_lo + m2_lo), s_hi = series(m1_hi + m2_hi);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(D_, D_);
    Eigen::MatrixXd N = I;
    for (int c = 0; c < D_; ++c) {
        const Eigen::VectorXd x = I.col(c);
        N.col(c) -= dt * convection(x, m2_hi) + dt * 0.5 * params_.beta * coords(scale(dot(s_lo, series(x)), s_hi));
    }
    return N;
}

Eigen::VectorXd DenseSystem::step_state(const Eigen::VectorXd& m, const Eigen::VectorXd& f, double dt) const {
    const VectorSeries S = series(m);
    const Series w = dot(S, S);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(D_, D_);
    Eigen::MatrixXd L = I + dt * (params_.mu * A_ + params_.alpha * I);
    for (int c = 0; c < D_; ++c) {
        const Eigen::VectorXd x = I.col(c);
        L.col(c) += dt * convection(m, x) + dt * params_.beta * coords(scale(w, series(x)));
    }
    return L.partialPivLu().solve(m + dt * f);
}

Eigen::VectorXd DenseSystem::state_rate(const Eigen::VectorXd& m, const Eigen::VectorXd& f) const {
    return f - params_.mu * (A_ * m) - convection(m, m) - params_.alpha * m - params_.beta * forchheimer(m);
}

Eigen::VectorXd DenseSystem::adjoint_rate(const Eigen::VectorXd& q, const Eigen::VectorXd& m1,
                                          const Eigen::VectorXd& m2, const Eigen::VectorXd& h, double delta) const {
    const VectorSeries M1 = series(m1), M2 = series(m2), Q = series(q);
    const VectorSeries S = series(m1 + m2);
    const double b2 = 0.5 * params_.beta;
    Eigen::VectorXd r = params_.mu * (A_ * q) + params_.alpha * q - convection(m1, q) + transport(m2, q);
    r += b2 * coords(scale(dot(M1, M1) + dot(M2, M2), Q)) + b2 * coords(scale(dot(S, Q), S));
    if (delta > 0.0) r += delta * forchheimer(q);
    return r - h;
}

Eigen::VectorXd DensePath::at(double t) const {
    const int steps = static_cast<int>(fine.size()) - 1;
    const double pos = std::clamp(t / t_end, 0.0, 1.0) * steps;
    const int i = std::min(static_cast<int>(pos), steps - 1);
    const double w = pos - i;
    return (1.0 - w) * fine[i] + w * fine[i + 1];
}

DensePath reference_state(const DenseSystem& sys, const Eigen::VectorXd& m0, const TimeFunction& f, double t_end,
                          int nt, int substeps) {
    if (nt < 1 || substeps < 1 || !(t_end > 0.0)) throw InvalidArgument("reference_state: bad time grid");
    DensePath path{t_end, nt, {m0}, {m0}};
    const double h = t_end / (static_cast<double>(nt) * substeps);
    Eigen::VectorXd y = m0;
    for (int n = 0; n < nt; ++n) {
        for (int s = 0; s < substeps; ++s) {
            const double t = (static_cast<double>(n) * substeps + s) * h;
            const Eigen::VectorXd k1 = sys.state_rate(y, f(t));
            const Eigen::VectorXd k2 = sys.state_rate(y + 0.5 * h * k1, f(t + 0.5 * h));
            const Eigen::VectorXd k3 = sys.state_rate(y + 0.5 * h * k2, f(t + 0.5 * h));
            const Eigen::VectorXd k4 = sys.state_rate(y + h * k3, f(t + h));
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            path.fine.push_back(y);
        }
        path.coarse.push_back(y);
    }
    return path;
}

DensePath reference_adjoint(const DenseSystem& sys, const DensePath& m1, const DensePath& m2, const TimeFunction& h,
                            double delta, int substeps) {
    const double T = m1.t_end;
    const int nt = m1.nt;
    if (m2.nt != nt || m2.t_end != T) throw InvalidArgument("reference_adjoint: coefficient paths differ in time");
    const double tau = T / (static_cast<double>(nt) * substeps);
    auto rate = [&](const Eigen::VectorXd& q, double t) -> Eigen::VectorXd {
        return -sys.adjoint_rate(q, m1.at(t), m2.at(t), h(t), delta);
    };
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(sys.dim());
    std::vector<Eigen::VectorXd> fine{zero}, coarse{zero};
    Eigen::VectorXd q = zero;
    for (int n = nt; n > 0; --n) {
        for (int s = 0; s < substeps; ++s) {
            const double t = T - ((static_cast<double>(nt - n) * substeps + s) * tau);
            const Eigen::VectorXd k1 = rate(q, t);
            const Eigen::VectorXd k2 = rate(q + 0.5 * tau * k1, t - 0.5 * tau);
            const Eigen::VectorXd k3 = rate(q + 0.5 * tau * k2, t - 0.5 * tau);
            const Eigen::VectorXd k4 = rate(q + tau * k3, t - tau);
            q += tau / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            fine.push_back(q);
        }
        coarse.push_back(q);
    }
    std::reverse(fine.begin(), fine.end());
    std::reverse(coarse.begin(), coarse.end());
    return {T, nt, std::move(coarse), std::move(fine)};
}

double max_distance(const std::vector<Eigen::VectorXd>& a, const std::vector<Eigen::VectorXd>& b) {
    if (a.size() != b.size()) throw InvalidArgument("max_distance: sample counts differ");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, (a[i] - b[i]).norm());
    return m;
}

std::vector<Eigen::VectorXd> coords(const DenseSystem& sys, const Trajectory& traj) {
    std::vector<Eigen::VectorXd> out;
    for (const auto& s : traj.samples()) out.push_back(sys.coords(s));
    return out;
}

}  // namespace cbf
