#pragma once

// Dense feedforward primitives: Gaussian initialization, recorded forward
// passes and the single-layer MSE gradient used by the decoders.

#include "edgescout/error.hpp"
#include "edgescout/types.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace edgescout {

struct NetworkConfig {
    std::size_t depth = 0;
    std::vector<std::size_t> widths;  // depth + 1 entries, widths[0] is the input
    double sigma_w_sq = 1.0;
    double sigma_b_sq = 0.0;
    Activation activation = Activation::tanh;
    std::uint64_t seed = 0;

    static NetworkConfig uniform(std::size_t depth, std::size_t width, double sigma_w_sq,
                                 double sigma_b_sq, std::uint64_t seed,
                                 Activation activation = Activation::tanh) {
        NetworkConfig c;
        c.depth = depth;
        c.widths.assign(depth + 1, width);
        c.sigma_w_sq = sigma_w_sq;
        c.sigma_b_sq = sigma_b_sq;
        c.activation = activation;
        c.seed = seed;
        return c;
    }

    void validate() const {
        if (depth == 0) throw ArgumentError("network depth must be positive");
        if (widths.size() != depth + 1)
            throw ArgumentError("expected " + std::to_string(depth + 1) + " widths, got " +
                                std::to_string(widths.size()));
        for (auto w : widths)
            if (w == 0) throw ArgumentError("layer widths must be positive");
        if (!(sigma_w_sq >= 0.0) || !std::isfinite(sigma_w_sq))
            throw ArgumentError("sigma_w^2 must be a finite nonnegative number");
        if (!(sigma_b_sq >= 0.0) || !std::isfinite(sigma_b_sq))
            throw ArgumentError("sigma_b^2 must be a finite nonnegative number");
        if (activation == Activation::softmax)
            throw ArgumentError("hidden layers support tanh or linear activation only");
    }
};

namespace detail {

// Largest double below 1; keeps tanh outputs strictly inside (-1, 1).
inline constexpr double kTanhBound = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;

inline void activate_inplace(Activation a, Matrix& m) {
    switch (a) {
        case Activation::linear:
            return;
        case Activation::tanh:
            // 1 - 2/(e^{2x}+1) vectorizes; absolute error stays within a few ulp of 1.
            m = (1.0 - 2.0 / ((2.0 * m.array()).exp() + 1.0)).cwiseMin(kTanhBound).cwiseMax(-kTanhBound);
            return;
        case Activation::softmax:
            for (Eigen::Index r = 0; r < m.rows(); ++r) {
                auto row = m.row(r);
                row.array() -= row.maxCoeff();
                row = row.array().exp();
                row /= row.sum();
            }
            return;
    }
}

// Pull a gradient with respect to the layer output back to the preactivation.
inline Matrix activation_backward(Activation a, const Matrix& output, const Matrix& grad_output) {
    switch (a) {
        case Activation::linear:
            return grad_output;
        case Activation::tanh:
            return grad_output.array() * (1.0 - output.array().square());
        case Activation::softmax: {
            Vector dots = (grad_output.array() * output.array()).rowwise().sum();
            Matrix g = grad_output;
            g.colwise() -= dots;
            return g.array() * output.array();
        }
    }
    return grad_output;
}

}  // namespace detail

struct DenseLayer {
    Matrix weights;  // out x in
    Vector bias;     // out
    Activation activation = Activation::tanh;

    std::size_t in_width() const { return static_cast<std::size_t>(weights.cols()); }
    std::size_t out_width() const { return static_cast<std::size_t>(weights.rows()); }

    Matrix preactivation(const Matrix& input) const {
        if (static_cast<std::size_t>(input.cols()) != in_width())
            throw ArgumentError("layer expects input width " + std::to_string(in_width()) +
                                ", got " + std::to_string(input.cols()));
        Matrix a(input.rows(), weights.rows());
        a.noalias() = input * weights.transpose();
        a.rowwise() += bias.transpose();
        return a;
    }

    Matrix forward(const Matrix& input) const {
        Matrix a = preactivation(input);
        detail::activate_inplace(activation, a);
        return a;
    }

    bool all_finite() const { return weights.allFinite() && bias.allFinite(); }
};

// Draws W ~ N(0, sigma_w^2 / fan_in) then b ~ N(0, sigma_b^2), row-major.
inline DenseLayer gaussian_layer(std::size_t in, std::size_t out, double sigma_w_sq,
                                 double sigma_b_sq, Activation activation, std::mt19937_64& rng) {
    DenseLayer layer;
    layer.activation = activation;
    layer.weights.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    layer.bias.resize(static_cast<Eigen::Index>(out));
    const double w_std = std::sqrt(sigma_w_sq / static_cast<double>(in));
    const double b_std = std::sqrt(sigma_b_sq);
    std::normal_distribution<double> normal(0.0, 1.0);
    double* w = layer.weights.data();
    for (std::size_t i = 0; i < in * out; ++i) w[i] = w_std * normal(rng);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = b_std * normal(rng);
    return layer;
}

struct Mlp {
    NetworkConfig config;
    std::vector<DenseLayer> layers;

    std::size_t depth() const { return layers.size(); }
    std::size_t input_width() const { return layers.empty() ? 0 : layers.front().in_width(); }
    std::size_t output_width() const { return layers.empty() ? 0 : layers.back().out_width(); }

    // FNV-1a over the raw parameter bytes.
    std::uint64_t checksum() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        auto feed = [&h](const double* p, Eigen::Index n) {
            const auto* bytes = reinterpret_cast<const unsigned char*>(p);
            for (std::size_t i = 0; i < static_cast<std::size_t>(n) * sizeof(double); ++i) {
                h ^= bytes[i];
                h *= 0x100000001b3ULL;
            }
        };
        for (const auto& l : layers) {
            feed(l.weights.data(), l.weights.size());
            feed(l.bias.data(), l.bias.size());
        }
        return h;
    }
};

inline Mlp init_random(const NetworkConfig& config) {
    config.validate();
    Mlp mlp;
    mlp.config = config;
    mlp.layers.reserve(config.depth);
    std::mt19937_64 rng(config.seed);
    for (std::size_t l = 0; l < config.depth; ++l)
        mlp.layers.push_back(gaussian_layer(config.widths[l], config.widths[l + 1], config.sigma_w_sq,
                                            config.sigma_b_sq, config.activation, rng));
    return mlp;
}

// Activations z^0..z^L; activations[0] is a copy of the input.
struct ActivationTrace {
    std::vector<Matrix> activations;

    std::size_t batch_size() const {
        return activations.empty() ? 0 : static_cast<std::size_t>(activations.front().rows());
    }
    std::size_t depth() const { return activations.empty() ? 0 : activations.size() - 1; }
    const Matrix& at(std::size_t layer) const { return activations.at(layer); }
};

inline void check_input(const Mlp& mlp, const Matrix& input) {
    if (static_cast<std::size_t>(input.cols()) != mlp.input_width())
        throw ArgumentError("input width " + std::to_string(input.cols()) +
                            " does not match network input width " +
                            std::to_string(mlp.input_width()));
    if (!input.allFinite()) throw ArgumentError("input contains non-finite values");
}

inline ActivationTrace forward_record(const Mlp& mlp, const Matrix& input) {
    check_input(mlp, input);
    ActivationTrace trace;
    trace.activations.reserve(mlp.depth() + 1);
    trace.activations.push_back(input);
    for (const auto& layer : mlp.layers) trace.activations.push_back(layer.forward(trace.activations.back()));
    return trace;
}

// z^layer only, without keeping the intermediate activations.
inline Matrix forward_to(const Mlp& mlp, const Matrix& input, std::size_t layer) {
    check_input(mlp, input);
    if (layer > mlp.depth()) throw ArgumentError("layer index beyond network depth");
    Matrix z = input;
    for (std::size_t l = 0; l < layer; ++l) z = mlp.layers[l].forward(z);
    return z;
}

struct LayerGradients {
    Matrix weights;
    Vector bias;
    double loss = 0.0;
};

// Mean squared error over batch and output dimension, differentiated
// through the layer's activation.
inline LayerGradients backprop_mse(const DenseLayer& layer, const Matrix& input, const Matrix& target) {
    if (input.rows() != target.rows())
        throw ArgumentError("input and target batch sizes differ");
    if (static_cast<std::size_t>(target.cols()) != layer.out_width())
        throw ArgumentError("target width does not match layer output width");
    const Matrix output = layer.forward(input);
    const Matrix diff = output - target;
    const double scale = 1.0 / static_cast<double>(diff.size());
    LayerGradients g;
    g.loss = diff.squaredNorm() * scale;
    const Matrix grad_pre = detail::activation_backward(layer.activation, output, (2.0 * scale) * diff);
    g.weights.noalias() = grad_pre.transpose() * input;
    g.bias = grad_pre.colwise().sum().transpose();
    return g;
}

}  // namespace edgescout
