#pragma once

// Per-layer decoders c^l : R^{N_l} -> R^{N_{l-1}} trained against a frozen
// network, and the cascades C^l = c^1 o ... o c^l built from them.

#include "edgescout/error.hpp"
#include "edgescout/nn.hpp"
#include "edgescout/optimizer.hpp"
#include "edgescout/parallel.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace edgescout {

struct DecoderOptions {
    double learning_rate = 1e-3;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    // Decoder initialization (fan-in scaled, like the network itself).
    double init_sigma_w_sq = 1.0;
    double init_sigma_b_sq = 0.0;
};

struct DecoderLayer {
    std::size_t layer_index = 0;  // l in [1, L]; reconstructs z^{l-1} from z^l
    DenseLayer inner;
    double final_training_loss = 0.0;
};

// c^1 emits raw pixels, deeper decoders emit tanh activations.
inline Activation decoder_activation(std::size_t layer_index) {
    return layer_index == 1 ? Activation::linear : Activation::tanh;
}

inline std::uint64_t decoder_seed(std::uint64_t base, std::size_t layer_index) {
    return derive_seed(base, 0xdec0de00ULL + layer_index);
}

// One epoch of Adam on the MSE between c(source) and target.
inline DecoderLayer fit_decoder(std::size_t layer_index, const Matrix& source, const Matrix& target,
                                const DecoderOptions& options) {
    if (layer_index == 0) throw ArgumentError("decoder layer index must be >= 1");
    if (source.rows() != target.rows()) throw ArgumentError("decoder source/target batch sizes differ");
    if (source.rows() == 0) throw ArgumentError("decoder training set is empty");
    if (options.batch_size == 0) throw ArgumentError("batch size must be positive");

    std::mt19937_64 rng(decoder_seed(options.seed, layer_index));
    DecoderLayer dec;
    dec.layer_index = layer_index;
    dec.inner = gaussian_layer(static_cast<std::size_t>(source.cols()), static_cast<std::size_t>(target.cols()),
                               options.init_sigma_w_sq, options.init_sigma_b_sq,
                               decoder_activation(layer_index), rng);

    const auto n = static_cast<std::size_t>(source.rows());
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::shuffle(order.begin(), order.end(), rng);

    OptimizerState opt({OptimizerKind::adam, options.learning_rate});
    double loss_sum = 0.0;
    Matrix xb, yb;
    for (std::size_t start = 0; start < n; start += options.batch_size) {
        const std::size_t count = std::min(options.batch_size, n - start);
        const std::vector<Eigen::Index> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                            order.begin() + static_cast<std::ptrdiff_t>(start + count));
        xb = source(idx, Eigen::all);
        yb = target(idx, Eigen::all);
        const LayerGradients g = backprop_mse(dec.inner, xb, yb);
        if (!std::isfinite(g.loss))
            throw NumericalError("decoder " + std::to_string(layer_index) + " diverged", layer_index);
        optimizer_step(dec.inner, g, opt);
        loss_sum += g.loss * static_cast<double>(count);
    }
    dec.final_training_loss = loss_sum / static_cast<double>(n);
    return dec;
}

// The network is only read; its parameters are never touched.
inline DecoderLayer train_decoder(const Mlp& dnn, std::size_t layer_index, const Matrix& train_inputs,
                                  const DecoderOptions& options) {
    if (layer_index == 0 || layer_index > dnn.depth())
        throw ArgumentError("decoder layer index must lie in [1, " + std::to_string(dnn.depth()) + "]");
    const Matrix below = forward_to(dnn, train_inputs, layer_index - 1);
    const Matrix above = dnn.layers[layer_index - 1].forward(below);
    return fit_decoder(layer_index, above, below, options);
}

// Trains c^1..c^L. Activations are produced layer by layer and handed out in
// waves of `workers` decoders, so at most workers + 1 activation matrices are
// alive at once. Each decoder depends only on its own seed and the frozen
// network, so the result does not depend on `workers`.
inline std::vector<DecoderLayer> train_all_decoders(const Mlp& dnn, const Matrix& train_inputs,
                                                    const DecoderOptions& options, std::size_t workers = 1) {
    check_input(dnn, train_inputs);
    const std::size_t depth = dnn.depth();
    workers = std::max<std::size_t>(workers, 1);
    std::vector<DecoderLayer> decoders(depth);
    std::vector<std::string> failures(depth);

    std::vector<Matrix> wave;
    wave.reserve(workers + 1);
    wave.push_back(train_inputs);
    std::size_t first = 1;  // layer index of the first decoder in the wave
    while (first <= depth) {
        const std::size_t count = std::min(workers, depth - first + 1);
        for (std::size_t k = 0; k < count; ++k)
            wave.push_back(dnn.layers[first - 1 + k].forward(wave.back()));
        parallel_for(count, workers, [&](std::size_t k) {
            const std::size_t l = first + k;
            try {
                decoders[l - 1] = fit_decoder(l, wave[k + 1], wave[k], options);
            } catch (const Error& e) {
                failures[l - 1] = e.what();
            }
        });
        Matrix last = std::move(wave.back());
        wave.clear();
        wave.push_back(std::move(last));
        first += count;
    }

    std::string summary;
    std::size_t first_failed = 0;
    for (std::size_t l = 0; l < depth; ++l) {
        if (failures[l].empty()) continue;
        if (first_failed == 0) first_failed = l + 1;
        summary += (summary.empty() ? "" : "; ") + std::string("layer ") + std::to_string(l + 1) + ": " +
                   failures[l];
    }
    if (!summary.empty()) throw NumericalError("decoder training failed: " + summary, first_failed);
    return decoders;
}

// ---------------------------------------------------------------------------

namespace detail {

// Forward-mode derivative of one dense layer: returns J(points) * directions
// row by row and replaces `points` by the layer output.
inline Matrix layer_jvp(const DenseLayer& layer, Matrix& points, const Matrix& directions) {
    if (directions.rows() != points.rows() || directions.cols() != points.cols())
        throw ArgumentError("direction shape does not match the evaluation point");
    Matrix tangent(directions.rows(), layer.weights.rows());
    tangent.noalias() = directions * layer.weights.transpose();
    points = layer.forward(points);
    return detail::activation_backward(layer.activation, points, tangent);
}

}  // namespace detail

class Cascade {
public:
    Cascade() = default;

    explicit Cascade(std::vector<DecoderLayer> decoders) : decoders_(std::move(decoders)) {
        for (std::size_t m = 0; m < decoders_.size(); ++m) {
            if (decoders_[m].layer_index != m + 1)
                throw ArgumentError("cascade decoders must be ordered c^1..c^l");
            if (m + 1 < decoders_.size() && decoders_[m + 1].inner.out_width() != decoders_[m].inner.in_width())
                throw ArgumentError("decoder c^" + std::to_string(m + 2) + " output width does not chain into c^" +
                                    std::to_string(m + 1));
        }
    }

    std::size_t depth() const { return decoders_.size(); }
    const std::vector<DecoderLayer>& decoders() const { return decoders_; }
    const DecoderLayer& decoder(std::size_t layer_index) const { return decoders_.at(layer_index - 1); }

    // Applies c^layer, then c^{layer-1}, ..., then c^1. layer == 0 is the identity.
    Matrix reconstruct(std::size_t layer, const Matrix& z_layer) const {
        if (layer > depth())
            throw ArgumentError("cascade has " + std::to_string(depth()) + " decoders, requested depth " +
                                std::to_string(layer));
        Matrix x = z_layer;
        for (std::size_t m = layer; m >= 1; --m) x = decoders_[m - 1].inner.forward(x);
        return x;
    }

    // d C^layer (points) * directions, one row per point.
    Matrix jacobian_vector_product(std::size_t layer, const Matrix& points, const Matrix& directions) const {
        if (layer > depth()) throw ArgumentError("cascade depth exceeded");
        Matrix x = points;
        Matrix t = directions;
        if (t.rows() != x.rows() || t.cols() != x.cols())
            throw ArgumentError("direction shape does not match the evaluation point");
        for (std::size_t m = layer; m >= 1; --m) t = detail::layer_jvp(decoders_[m - 1].inner, x, t);
        return t;
    }

private:
    std::vector<DecoderLayer> decoders_;
};

inline Matrix reconstruct(const Cascade& cascade, std::size_t layer, const Matrix& z_layer) {
    return cascade.reconstruct(layer, z_layer);
}

inline Matrix jacobian_vector_product(const DenseLayer& decoder, const Matrix& points, const Matrix& directions) {
    Matrix x = points;
    if (static_cast<std::size_t>(x.cols()) != decoder.in_width())
        throw ArgumentError("evaluation point width does not match decoder input");
    return detail::layer_jvp(decoder, x, directions);
}

inline Matrix jacobian_vector_product(const Cascade& cascade, std::size_t layer, const Matrix& points,
                                      const Matrix& directions) {
    return cascade.jacobian_vector_product(layer, points, directions);
}

// Pushes a synthetic output vector back through the whole cascade.
inline RowVector reconstruct_from_output(const Cascade& cascade, const Mlp& dnn, const RowVector& output) {
    if (cascade.depth() != dnn.depth())
        throw ArgumentError("missing decoders: cascade has " + std::to_string(cascade.depth()) +
                            " of " + std::to_string(dnn.depth()));
    if (static_cast<std::size_t>(output.size()) != dnn.output_width())
        throw ArgumentError("output template width does not match the network output");
    Matrix z = output;
    return cascade.reconstruct(cascade.depth(), z).row(0);
}

// ---------------------------------------------------------------------------
// Checkpoints (little-endian):
//   char[4] "ESDC", u32 version (=1), u32 count, then per decoder:
//   u32 layer_index, u32 activation, u32 out, u32 in, f64 final_training_loss,
//   f64 weights[out*in] (row-major), f64 bias[out]

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T>
void put(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in, const std::filesystem::path& path) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T)))
        throw DataError(DataErrorKind::truncated, "truncated checkpoint: " + path.string());
    return v;
}

}  // namespace detail

inline void save_decoders(const std::filesystem::path& path, const std::vector<DecoderLayer>& decoders) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(DataErrorKind::io, "cannot write " + path.string());
    out.write("ESDC", 4);
    detail::put(out, kCheckpointVersion);
    detail::put(out, static_cast<std::uint32_t>(decoders.size()));
    for (const auto& d : decoders) {
        detail::put(out, static_cast<std::uint32_t>(d.layer_index));
        detail::put(out, static_cast<std::uint32_t>(d.inner.activation));
        detail::put(out, static_cast<std::uint32_t>(d.inner.out_width()));
        detail::put(out, static_cast<std::uint32_t>(d.inner.in_width()));
        detail::put(out, d.final_training_loss);
        out.write(reinterpret_cast<const char*>(d.inner.weights.data()),
                  static_cast<std::streamsize>(d.inner.weights.size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(d.inner.bias.data()),
                  static_cast<std::streamsize>(d.inner.bias.size() * sizeof(double)));
    }
    if (!out) throw DataError(DataErrorKind::io, "failed writing " + path.string());
}

inline std::vector<DecoderLayer> load_decoders(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(DataErrorKind::not_found, "cannot open " + path.string());
    char magic[4] = {};
    if (!in.read(magic, 4) || std::string(magic, 4) != "ESDC")
        throw DataError(DataErrorKind::bad_magic, "not a decoder checkpoint: " + path.string());
    if (detail::get<std::uint32_t>(in, path) != kCheckpointVersion)
        throw DataError(DataErrorKind::bad_magic, "unsupported checkpoint version in " + path.string());
    const auto count = detail::get<std::uint32_t>(in, path);
    std::vector<DecoderLayer> decoders;
    decoders.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        DecoderLayer d;
        d.layer_index = detail::get<std::uint32_t>(in, path);
        const auto act = detail::get<std::uint32_t>(in, path);
        if (act > static_cast<std::uint32_t>(Activation::softmax))
            throw DataError(DataErrorKind::bad_magic, "unknown activation in " + path.string());
        d.inner.activation = static_cast<Activation>(act);
        const auto out = detail::get<std::uint32_t>(in, path);
        const auto inw = detail::get<std::uint32_t>(in, path);
        d.final_training_loss = detail::get<double>(in, path);
        d.inner.weights.resize(out, inw);
        d.inner.bias.resize(out);
        if (!in.read(reinterpret_cast<char*>(d.inner.weights.data()),
                     static_cast<std::streamsize>(d.inner.weights.size() * sizeof(double))) ||
            !in.read(reinterpret_cast<char*>(d.inner.bias.data()),
                     static_cast<std::streamsize>(d.inner.bias.size() * sizeof(double))))
            throw DataError(DataErrorKind::truncated, "truncated checkpoint: " + path.string());
        decoders.push_back(std::move(d));
    }
    return decoders;
}

}  // namespace edgescout
