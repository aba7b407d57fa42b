#pragma once

// Sweep artifacts: long-format CSV, graymap heatmaps and the mean-field curve.
//
// CSV header: sigma_w_sq,sigma_b_sq,seed,layer,entropy,cutoff,accuracy,wall_time_s
// One row per (cell, seed, layer). Numbers use the shortest representation
// that round-trips. `accuracy` is empty unless the cell was validated (it is
// attached to seed 0); `wall_time_s` is empty unless timings were requested,
// so that fixed-seed runs write identical files. Failed seeds have one row
// with empty layer/entropy/cutoff.

#include "edgescout/entropy.hpp"
#include "edgescout/error.hpp"
#include "edgescout/image.hpp"
#include "edgescout/meanfield.hpp"
#include "edgescout/sweep.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace edgescout {

inline constexpr const char* kCsvHeader = "sigma_w_sq,sigma_b_sq,seed,layer,entropy,cutoff,accuracy,wall_time_s";
inline constexpr const char* kMeanFieldCsvHeader = "sigma_w_sq,sigma_b_sq,seed,layer,xi_c,cutoff,accuracy,wall_time_s";

inline std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

inline double parse_double(const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size()) throw DataError(DataErrorKind::io, "bad number '" + s + "'");
    return v;
}

struct CsvRow {
    double sigma_w_sq = 0.0;
    double sigma_b_sq = 0.0;
    std::optional<std::size_t> seed;
    std::optional<std::size_t> layer;
    std::optional<double> value;  // entropy, or xi_c for mean-field files
    std::optional<std::size_t> cutoff;
    std::optional<double> accuracy;
    std::optional<double> wall_time_s;
};

inline std::vector<CsvRow> grid_rows(const PhaseGrid& grid, bool with_timings) {
    std::vector<CsvRow> rows;
    for (const auto& cell : grid.cells) {
        for (const auto& s : cell.seeds) {
            CsvRow base;
            base.sigma_w_sq = cell.sigma_w_sq;
            base.sigma_b_sq = cell.sigma_b_sq;
            base.seed = s.seed_index;
            base.accuracy = s.accuracy;
            if (with_timings) base.wall_time_s = s.wall_time_s;
            if (!s.error.empty()) {
                rows.push_back(base);
                continue;
            }
            for (std::size_t k = 0; k < s.curve.size(); ++k) {
                CsvRow r = base;
                r.layer = k + 1;
                r.value = s.curve[k];
                r.cutoff = s.cutoff;
                rows.push_back(r);
            }
        }
    }
    return rows;
}

inline void write_csv(const std::filesystem::path& path, const char* header, const std::vector<CsvRow>& rows) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(DataErrorKind::io, "cannot write " + path.string());
    out << header << '\n';
    auto opt_d = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    auto opt_u = [](const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : std::string(); };
    for (const auto& r : rows)
        out << format_double(r.sigma_w_sq) << ',' << format_double(r.sigma_b_sq) << ',' << opt_u(r.seed) << ','
            << opt_u(r.layer) << ',' << opt_d(r.value) << ',' << opt_u(r.cutoff) << ',' << opt_d(r.accuracy) << ','
            << opt_d(r.wall_time_s) << '\n';
    if (!out) throw DataError(DataErrorKind::io, "short write to " + path.string());
}

inline void export_csv(const PhaseGrid& grid, const std::filesystem::path& path, bool with_timings = false) {
    write_csv(path, kCsvHeader, grid_rows(grid, with_timings));
}

inline std::vector<CsvRow> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError(DataErrorKind::not_found, "cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError(DataErrorKind::truncated, path.string() + " is empty");
    if (line != kCsvHeader && line != kMeanFieldCsvHeader)
        throw DataError(DataErrorKind::bad_magic, path.string() + ": unexpected header");
    std::vector<CsvRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) f.push_back(field);
        if (!line.empty() && line.back() == ',') f.emplace_back();
        if (f.size() != 8) throw DataError(DataErrorKind::count_mismatch, "expected 8 fields: " + line);
        auto opt_d = [](const std::string& s) { return s.empty() ? std::nullopt : std::optional(parse_double(s)); };
        auto opt_u = [](const std::string& s) {
            return s.empty() ? std::nullopt : std::optional<std::size_t>(std::stoull(s));
        };
        rows.push_back({parse_double(f[0]), parse_double(f[1]), opt_u(f[2]), opt_u(f[3]), opt_d(f[4]), opt_u(f[5]),
                        opt_d(f[6]), opt_d(f[7])});
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Heatmaps: value -> round(255 (v - min) / (max - min)) with min/max taken over
// the finite values of the map (after clipping); non-finite values map to 0.
// The header comment carries min, max and clip so values can be recovered.

struct Heatmap {
    GrayImage image;
    double min = 0.0;
    double max = 0.0;
};

inline Heatmap render_heatmap(std::size_t width, std::size_t height, const std::vector<double>& values,
                              std::optional<double> clip_below, const std::string& label) {
    if (values.size() != width * height) throw ArgumentError("heatmap values do not match its size");
    std::vector<double> v = values;
    if (clip_below)
        for (auto& x : v)
            if (std::isfinite(x)) x = std::max(x, *clip_below);
    Heatmap h;
    bool any = false;
    for (double x : v) {
        if (!std::isfinite(x)) continue;
        h.min = any ? std::min(h.min, x) : x;
        h.max = any ? std::max(h.max, x) : x;
        any = true;
    }
    const double span = h.max - h.min;
    h.image.width = width;
    h.image.height = height;
    h.image.pixels.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i]) || !(span > 0.0)) {
            h.image.pixels[i] = 0;
            continue;
        }
        h.image.pixels[i] = static_cast<std::uint8_t>(std::lround(255.0 * (v[i] - h.min) / span));
    }
    h.image.comments.push_back(label);
    h.image.comments.push_back("value = min + (max - min) * pixel / 255; min=" + format_double(h.min) +
                               " max=" + format_double(h.max) +
                               " clip=" + (clip_below ? format_double(*clip_below) : std::string("none")));
    return h;
}

// One pixel per cell: columns follow sigma_w^2, rows follow sigma_b^2.
inline Heatmap cutoff_heatmap(const PhaseGrid& grid) {
    std::vector<double> v(grid.rows() * grid.cols());
    for (std::size_t w = 0; w < grid.rows(); ++w)
        for (std::size_t b = 0; b < grid.cols(); ++b) v[b * grid.rows() + w] = grid.at(w, b).mean_cutoff;
    return render_heatmap(grid.rows(), grid.cols(), v, std::nullopt,
                          "mean cutoff; x = sigma_w^2 index, y = sigma_b^2 index");
}

// One pixel per (cell, layer): columns are cells in grid order, row 0 is layer 1.
inline Heatmap entropy_heatmap(const PhaseGrid& grid) {
    const std::size_t width = grid.cells.size();
    const std::size_t height = grid.spec.depth;
    std::vector<double> v(width * height, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t c = 0; c < width; ++c) {
        const auto& curve = grid.cells[c].mean_curve;
        for (std::size_t l = 0; l < std::min(height, curve.size()); ++l) v[l * width + c] = curve[l];
    }
    const auto clip = grid.spec.entropy == EntropyKind::differential ? std::optional(kDifferentialDisplayClip)
                                                                     : std::nullopt;
    return render_heatmap(width, height, v, clip,
                          std::string("mean ") + std::string(to_string(grid.spec.entropy)) +
                              " entropy; x = cell index, y = layer - 1");
}

inline void export_heatmaps(const PhaseGrid& grid, const std::filesystem::path& cutoff_path,
                            const std::filesystem::path& entropy_path) {
    write_pgm(cutoff_path, cutoff_heatmap(grid).image);
    write_pgm(entropy_path, entropy_heatmap(grid).image);
}

// ---------------------------------------------------------------------------

inline std::vector<CsvRow> mean_field_rows(const std::vector<MeanFieldPoint>& points, double scale) {
    std::vector<CsvRow> rows;
    for (const auto& p : points) {
        CsvRow r;
        r.sigma_w_sq = p.sigma_w_sq;
        r.sigma_b_sq = p.sigma_b_sq;
        r.value = std::isinf(p.xi_c) ? p.xi_c : scale * p.xi_c;
        rows.push_back(r);
    }
    return rows;
}

inline void export_mean_field_csv(const std::vector<MeanFieldPoint>& points, const std::filesystem::path& path,
                                  double scale = 1.0) {
    write_csv(path, kMeanFieldCsvHeader, mean_field_rows(points, scale));
}

}  // namespace edgescout
