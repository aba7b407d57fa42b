#pragma once

// Dataset loaders (MNIST IDX, CIFAR-10 binary batches, white noise) and the
// conversion of images into probability mass functions.

#include "edgescout/error.hpp"
#include "edgescout/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace edgescout {

struct ImageShape {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 1;

    std::size_t pixels() const { return height * width * channels; }
};

struct Dataset {
    Matrix images;  // one vectorized image per row, values in [0, 1]
    std::vector<int> labels;
    std::string name;
    ImageShape shape;
    std::size_t classes = 10;

    std::size_t size() const { return static_cast<std::size_t>(images.rows()); }
    std::size_t pixels() const { return static_cast<std::size_t>(images.cols()); }

    Dataset head(std::size_t count) const { return slice(0, std::min(count, size())); }

    Dataset slice(std::size_t begin, std::size_t count) const {
        if (begin + count > size()) throw ArgumentError("dataset slice out of range");
        Dataset d;
        d.images = images.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count));
        d.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin),
                        labels.begin() + static_cast<std::ptrdiff_t>(begin + count));
        d.name = name;
        d.shape = shape;
        d.classes = classes;
        return d;
    }
};

struct DatasetSplits {
    Dataset train;
    Dataset test;
};

namespace detail {

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::exists(path, ec))
        throw DataError(DataErrorKind::not_found, "file not found: " + path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(DataErrorKind::io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t offset) {
    return (std::uint32_t{b[offset]} << 24) | (std::uint32_t{b[offset + 1]} << 16) |
           (std::uint32_t{b[offset + 2]} << 8) | std::uint32_t{b[offset + 3]};
}

inline void write_be32(std::ofstream& out, std::uint32_t v) {
    const char bytes[] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                          static_cast<char>(v >> 8), static_cast<char>(v)};
    out.write(bytes, 4);
}

}  // namespace detail

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

inline Dataset load_mnist_idx(const std::filesystem::path& images_path,
                              const std::filesystem::path& labels_path) {
    const auto img = detail::read_file(images_path);
    const auto lab = detail::read_file(labels_path);
    if (img.size() < 16) throw DataError(DataErrorKind::truncated, "truncated file: " + images_path.string());
    if (lab.size() < 8) throw DataError(DataErrorKind::truncated, "truncated file: " + labels_path.string());
    if (detail::read_be32(img, 0) != kIdxImageMagic)
        throw DataError(DataErrorKind::bad_magic, "bad magic number in " + images_path.string());
    if (detail::read_be32(lab, 0) != kIdxLabelMagic)
        throw DataError(DataErrorKind::bad_magic, "bad magic number in " + labels_path.string());

    const std::size_t count = detail::read_be32(img, 4);
    const std::size_t rows = detail::read_be32(img, 8);
    const std::size_t cols = detail::read_be32(img, 12);
    const std::size_t label_count = detail::read_be32(lab, 4);
    if (img.size() < 16 + count * rows * cols)
        throw DataError(DataErrorKind::truncated, "truncated file: " + images_path.string());
    if (lab.size() < 8 + label_count)
        throw DataError(DataErrorKind::truncated, "truncated file: " + labels_path.string());
    if (count != label_count)
        throw DataError(DataErrorKind::count_mismatch,
                        "image count " + std::to_string(count) + " does not match label count " +
                            std::to_string(label_count));

    Dataset d;
    d.name = "mnist";
    d.shape = {rows, cols, 1};
    d.classes = 10;
    const std::size_t n = rows * cols;
    d.images.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(n));
    double* out = d.images.data();
    for (std::size_t i = 0; i < count * n; ++i) out[i] = img[16 + i] / 255.0;
    d.labels.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        d.labels[i] = lab[8 + i];
        if (d.labels[i] >= 10) d.classes = static_cast<std::size_t>(d.labels[i]) + 1;
    }
    return d;
}

// Pixels are rounded to bytes; exact for images produced by load_mnist_idx.
inline void write_mnist_idx(const Dataset& d, const std::filesystem::path& images_path,
                            const std::filesystem::path& labels_path) {
    std::ofstream img(images_path, std::ios::binary);
    std::ofstream lab(labels_path, std::ios::binary);
    if (!img || !lab) throw DataError(DataErrorKind::io, "cannot write IDX files");
    detail::write_be32(img, kIdxImageMagic);
    detail::write_be32(img, static_cast<std::uint32_t>(d.size()));
    detail::write_be32(img, static_cast<std::uint32_t>(d.shape.height));
    detail::write_be32(img, static_cast<std::uint32_t>(d.shape.width));
    const double* p = d.images.data();
    for (Eigen::Index i = 0; i < d.images.size(); ++i) {
        const double v = std::clamp(p[i], 0.0, 1.0);
        img.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
    detail::write_be32(lab, kIdxLabelMagic);
    detail::write_be32(lab, static_cast<std::uint32_t>(d.labels.size()));
    for (int l : d.labels) lab.put(static_cast<char>(l));
}

inline constexpr std::size_t kCifarRecordBytes = 3073;

// Records are 1 label byte followed by 1024 R, 1024 G, 1024 B bytes; rows keep
// that channel-major order.
inline Dataset load_cifar10(std::span<const std::filesystem::path> batch_paths) {
    std::vector<std::vector<unsigned char>> blobs;
    std::size_t total = 0;
    for (const auto& p : batch_paths) {
        auto blob = detail::read_file(p);
        if (blob.size() % kCifarRecordBytes != 0)
            throw DataError(DataErrorKind::bad_length,
                            p.string() + ": length " + std::to_string(blob.size()) +
                                " is not a multiple of 3073");
        total += blob.size() / kCifarRecordBytes;
        blobs.push_back(std::move(blob));
    }
    Dataset d;
    d.name = "cifar10";
    d.shape = {32, 32, 3};
    d.classes = 10;
    d.images.resize(static_cast<Eigen::Index>(total), 3072);
    d.labels.reserve(total);
    Eigen::Index row = 0;
    for (const auto& blob : blobs) {
        for (std::size_t r = 0; r < blob.size() / kCifarRecordBytes; ++r, ++row) {
            const unsigned char* rec = blob.data() + r * kCifarRecordBytes;
            d.labels.push_back(rec[0]);
            for (Eigen::Index k = 0; k < 3072; ++k) d.images(row, k) = rec[1 + k] / 255.0;
        }
    }
    return d;
}

inline Dataset white_noise(std::size_t count, std::size_t n_pixels, std::uint64_t seed) {
    if (count == 0 || n_pixels == 0) throw ArgumentError("white noise needs count and pixels >= 1");
    Dataset d;
    d.name = "noise";
    const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(n_pixels))));
    d.shape = side * side == n_pixels ? ImageShape{side, side, 1} : ImageShape{1, n_pixels, 1};
    d.classes = 1;
    d.images.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(n_pixels));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double* p = d.images.data();
    for (std::size_t i = 0; i < count * n_pixels; ++i) p[i] = u(rng);
    d.labels.assign(count, 0);
    return d;
}

// Default dataset root: explicit argument, then $EDGESCOUT_DATA_DIR, then ./data.
inline std::filesystem::path resolve_data_dir(const std::optional<std::filesystem::path>& explicit_dir) {
    if (explicit_dir && !explicit_dir->empty()) return *explicit_dir;
    if (const char* env = std::getenv("EDGESCOUT_DATA_DIR"); env && *env) return env;
    return "data";
}

// Accepts either <dir>/train-images-idx3-ubyte or <dir>/mnist/train-images-idx3-ubyte.
inline DatasetSplits load_mnist(const std::filesystem::path& dir) {
    std::filesystem::path base = dir;
    if (!std::filesystem::exists(base / "train-images-idx3-ubyte") && std::filesystem::exists(dir / "mnist"))
        base = dir / "mnist";
    DatasetSplits s;
    s.train = load_mnist_idx(base / "train-images-idx3-ubyte", base / "train-labels-idx1-ubyte");
    s.test = load_mnist_idx(base / "t10k-images-idx3-ubyte", base / "t10k-labels-idx1-ubyte");
    return s;
}

// Accepts <dir>, <dir>/cifar-10-batches-bin or <dir>/cifar10.
inline DatasetSplits load_cifar10_dir(const std::filesystem::path& dir) {
    std::filesystem::path base = dir;
    for (const char* sub : {"cifar-10-batches-bin", "cifar10"})
        if (!std::filesystem::exists(base / "test_batch.bin") && std::filesystem::exists(dir / sub))
            base = dir / sub;
    std::vector<std::filesystem::path> train_paths;
    for (int i = 1; i <= 5; ++i) train_paths.push_back(base / ("data_batch_" + std::to_string(i) + ".bin"));
    const std::filesystem::path test_path = base / "test_batch.bin";
    DatasetSplits s;
    s.train = load_cifar10(train_paths);
    s.test = load_cifar10(std::span(&test_path, 1));
    return s;
}

// ---------------------------------------------------------------------------

inline constexpr double kPmfSmoothing = 1e-8;

class Pmf {
public:
    const Vector& masses() const { return masses_; }
    std::size_t size() const { return static_cast<std::size_t>(masses_.size()); }
    double operator[](std::size_t i) const { return masses_[static_cast<Eigen::Index>(i)]; }

    friend Pmf to_pmf(const Eigen::Ref<const RowVector>& v);

private:
    Vector masses_;
};

// Clamp at zero, add kPmfSmoothing to every entry, normalize.
inline Pmf to_pmf(const Eigen::Ref<const RowVector>& v) {
    if (v.size() == 0) throw ArgumentError("cannot build a pmf from an empty vector");
    if (!v.allFinite()) throw ArgumentError("pmf input contains non-finite values");
    Pmf p;
    p.masses_ = (v.transpose().array().max(0.0) + kPmfSmoothing).matrix();
    p.masses_ /= p.masses_.sum();
    return p;
}

inline Pmf to_pmf(std::span<const double> v) {
    return to_pmf(Eigen::Map<const RowVector>(v.data(), static_cast<Eigen::Index>(v.size())));
}

}  // namespace edgescout
