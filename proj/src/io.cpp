#include "cbf/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "cbf/errors.hpp"

namespace cbf {

namespace {

template <class T>
void put(std::ostream& out, T value) {
    std::array<char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    out.write(bytes.data(), sizeof(T));
}

template <class T>
T get(std::istream& in) {
    std::array<char, sizeof(T)> bytes;
    if (!in.read(bytes.data(), sizeof(T))) throw InvalidArgument("trajectory file is truncated");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, mode);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace

void write_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
    std::ofstream out = open_out(path, std::ios::out | std::ios::binary);
    const Grid& g = traj.grid();
    out.write("CBFT", 4);
    put<std::uint32_t>(out, 1);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(g.dim()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(g.n()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(traj.nt()));
    put<double>(out, traj.t_end());
    for (const auto& s : traj.samples())
        for (const Complex& c : s.coeffs()) {
            put<double>(out, c.real());
            put<double>(out, c.imag());
        }
    if (!out) throw Error("write failed for " + path.string());
}

Trajectory read_trajectory(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open trajectory file " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "CBFT", 4) != 0)
        throw InvalidArgument(path.string() + " is not a CBFT file");
    const auto version = get<std::uint32_t>(in);
    if (version != 1) throw InvalidArgument("unsupported CBFT version " + std::to_string(version));
    const auto d = get<std::uint32_t>(in);
    const auto n = get<std::uint32_t>(in);
    const auto nt = get<std::uint32_t>(in);
    const double t_end = get<double>(in);
    if ((d != 2 && d != 3) || n < 4 || n % 2 != 0 || n > 1024 || nt < 1 || !(t_end > 0.0))
        throw InvalidArgument("CBFT header out of range");
    const Grid grid(static_cast<int>(d), static_cast<int>(n));

    std::vector<SpectralField> samples;
    samples.reserve(nt + 1);
    for (std::uint32_t s = 0; s <= nt; ++s) {
        std::vector<Complex> coeffs(grid.size());
        for (auto& c : coeffs) {
            const double re = get<double>(in);
            const double im = get<double>(in);
            c = {re, im};
        }
        for (int j = 0; j < grid.dim(); ++j)
            for (std::size_t idx = 0; idx < grid.modes(); ++idx)
                if (!grid.retained(idx) && coeffs[j * grid.modes() + idx] != Complex{})
                    throw InvalidArgument("CBFT sample " + std::to_string(s) + " has energy outside the retained modes");
        SpectralField f = SpectralField::trusted(grid, std::move(coeffs));
        const double tol = 1e-12 * std::max(1.0, f.max_abs());
        if (hermitian_defect(f) > tol)
            throw InvalidArgument("CBFT sample " + std::to_string(s) + " is not Hermitian-symmetric");
        if (divergence_defect(f) > 1e-10)
            throw InvalidArgument("CBFT sample " + std::to_string(s) + " is not divergence-free");
        samples.push_back(std::move(f));
    }
    return Trajectory(t_end, std::move(samples));
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
    std::ofstream out = open_out(path);
    for (std::size_t i = 0; i < table.header.size(); ++i) out << (i ? "," : "") << table.header[i];
    out << '\n';
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size()) throw InvalidArgument("CSV row width does not match header");
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << fmt(row[i]);
        out << '\n';
    }
}

CsvTable norm_table(const std::vector<double>& t, const std::vector<FieldNorms>& norms) {
    if (t.size() != norms.size()) throw InvalidArgument("norm_table: size mismatch");
    CsvTable tab{{"t", "l2", "v_norm", "l4"}, {}};
    for (std::size_t i = 0; i < t.size(); ++i) tab.rows.push_back({t[i], norms[i].l2, norms[i].v, norms[i].l4});
    return tab;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out = open_out(path);
    out << j.dump(2) << '\n';
}

std::string render_svg(const PlotSpec& spec, const std::vector<PlotSeries>& series) {
    constexpr double W = 640, H = 400, L = 70, R = 20, T = 40, B = 50;
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};
    auto ty = [&](double y) { return spec.log_y ? std::log10(y) : y; };
    auto usable = [&](double y) { return std::isfinite(y) && (!spec.log_y || y > 0.0); };

    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series)
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!usable(s.y[i]) || !std::isfinite(s.x[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, ty(s.y[i]));
            y1 = std::max(y1, ty(s.y[i]));
        }
    if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y0 -= 0.5, y1 += 0.5;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

    std::ostringstream os;
    os << std::setprecision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
       << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << spec.title << "</text>\n";
    os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
       << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = x0 + (x1 - x0) * i / 4.0;
        const double yv = y0 + (y1 - y0) * i / 4.0;
        os << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << xv << "</text>\n";
        os << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">"
           << (spec.log_y ? std::pow(10.0, yv) : yv) << "</text>\n";
        os << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << py(yv) << "\" y2=\"" << py(yv)
           << "\" stroke=\"#ddd\"/>\n";
    }
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << spec.xlabel
       << "</text>\n";
    os << "<text transform=\"translate(16," << (T + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
       << spec.ylabel << (spec.log_y ? " (log)" : "") << "</text>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = palette[s % std::size(palette)];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        const auto& ser = series[s];
        for (std::size_t i = 0; i < std::min(ser.x.size(), ser.y.size()); ++i)
            if (usable(ser.y[i]) && std::isfinite(ser.x[i])) os << px(ser.x[i]) << ',' << py(ty(ser.y[i])) << ' ';
        os << "\"/>\n";
        os << "<text x=\"" << W - R - 6 << "\" y=\"" << T + 14 + 14 * s << "\" text-anchor=\"end\" fill=\"" << color
           << "\">" << ser.name << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

void write_svg(const std::filesystem::path& path, const PlotSpec& spec, const std::vector<PlotSeries>& series) {
    std::ofstream out = open_out(path);
    out << render_svg(spec, series);
}

}  // namespace cbf
