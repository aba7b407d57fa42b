#pragma once

// Binary portable graymap (P5) and pixmap (P6) files.

#include "edgescout/data.hpp"
#include "edgescout/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace edgescout {

struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;  // row-major
    std::vector<std::string> comments;
};

inline void write_pnm(const std::filesystem::path& path, const char* magic, std::size_t width, std::size_t height,
                      std::span<const std::uint8_t> bytes, std::span<const std::string> comments) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(DataErrorKind::io, "cannot write " + path.string());
    out << magic << '\n';
    for (const auto& c : comments) out << "# " << c << '\n';
    out << width << ' ' << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError(DataErrorKind::io, "short write to " + path.string());
}

inline void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
    if (img.pixels.size() != img.width * img.height) throw ArgumentError("graymap size does not match its pixels");
    write_pnm(path, "P5", img.width, img.height, img.pixels, img.comments);
}

inline GrayImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(DataErrorKind::not_found, "cannot open " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P5") throw DataError(DataErrorKind::bad_magic, path.string() + " is not a binary graymap");
    GrayImage img;
    std::size_t fields[3] = {0, 0, 0};
    for (int k = 0; k < 3;) {
        in >> std::ws;
        if (in.peek() == '#') {
            std::string line;
            std::getline(in, line);
            img.comments.push_back(line.size() > 2 ? line.substr(2) : std::string());
            continue;
        }
        if (!(in >> fields[k++])) throw DataError(DataErrorKind::truncated, path.string() + ": bad graymap header");
    }
    if (fields[2] != 255) throw DataError(DataErrorKind::bad_magic, path.string() + ": only 8-bit graymaps are read");
    in.get();
    img.width = fields[0];
    img.height = fields[1];
    img.pixels.resize(img.width * img.height);
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
        throw DataError(DataErrorKind::truncated, path.string() + ": pixel data truncated");
    return img;
}

inline std::uint8_t to_byte(double v) {
    if (!(v > 0.0)) return 0;
    if (v >= 1.0) return 255;
    return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

// A reconstruction or input row as an image. Values are clamped to [0, 1].
// Three-channel rows are stored channel-major (all R, all G, all B) and become
// a P6 pixmap; everything else is a P5 graymap.
inline void write_image(const std::filesystem::path& path, const Eigen::Ref<const RowVector>& row, const ImageShape& shape) {
    if (static_cast<std::size_t>(row.size()) != shape.pixels()) throw ArgumentError("image row does not match its shape");
    const std::size_t plane = shape.height * shape.width;
    std::vector<std::uint8_t> bytes(shape.pixels());
    if (shape.channels == 3) {
        for (std::size_t p = 0; p < plane; ++p)
            for (std::size_t ch = 0; ch < 3; ++ch)
                bytes[3 * p + ch] = to_byte(row[static_cast<Eigen::Index>(ch * plane + p)]);
        write_pnm(path, "P6", shape.width, shape.height, bytes, {});
        return;
    }
    if (shape.channels != 1) throw ArgumentError("only 1- or 3-channel images can be written");
    for (std::size_t p = 0; p < plane; ++p) bytes[p] = to_byte(row[static_cast<Eigen::Index>(p)]);
    write_pnm(path, "P5", shape.width, shape.height, bytes, {});
}

}  // namespace edgescout
