#pragma once

// Result export: CBFT trajectory files, CSV tables, JSON summaries and
// standalone SVG line charts.
//
// CBFT layout (little-endian): "CBFT", u32 version = 1, u32 d, u32 n, u32 nt,
// f64 t_end, then for each of the nt+1 samples d * n^d (re, im) f64 pairs,
// component-major, wavenumbers in the lexicographic FFT order of fields.hpp.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cbf/fields.hpp"

namespace cbf {

void write_trajectory(const std::filesystem::path& path, const Trajectory& traj);
/// Throws InvalidArgument on a malformed file or coefficients that break
/// the field invariants.
Trajectory read_trajectory(const std::filesystem::path& path);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

void write_csv(const std::filesystem::path& path, const CsvTable& table);
/// Columns t, l2, v_norm, l4.
CsvTable norm_table(const std::vector<double>& t, const std::vector<FieldNorms>& norms);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);

struct PlotSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotSpec {
    std::string title;
    std::string xlabel;
    std::string ylabel;
    bool log_y = false;
};

std::string render_svg(const PlotSpec& spec, const std::vector<PlotSeries>& series);
void write_svg(const std::filesystem::path& path, const PlotSpec& spec, const std::vector<PlotSeries>& series);

}  // namespace cbf
