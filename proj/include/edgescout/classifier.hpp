#pragma once

// Validation-only training of the full network: the hidden stack plus a
// linear readout and softmax cross-entropy, optimized by mini-batch SGD.

#include "edgescout/data.hpp"
#include "edgescout/error.hpp"
#include "edgescout/nn.hpp"
#include "edgescout/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace edgescout {

struct Classifier {
    Mlp body;
    DenseLayer readout;  // linear, classes x N_L

    Matrix logits(const Matrix& input) const {
        Matrix z = input;
        for (const auto& l : body.layers) z = l.forward(z);
        return readout.forward(z);
    }

    std::vector<int> predict(const Matrix& input) const {
        const Matrix s = logits(input);
        std::vector<int> out(static_cast<std::size_t>(s.rows()));
        for (Eigen::Index r = 0; r < s.rows(); ++r) {
            Eigen::Index arg = 0;
            s.row(r).maxCoeff(&arg);
            out[static_cast<std::size_t>(r)] = static_cast<int>(arg);
        }
        return out;
    }
};

// Readout weights ~ N(0, 1/N_L), zero bias.
inline Classifier make_classifier(Mlp body, std::size_t classes, std::uint64_t seed) {
    if (classes == 0) throw ArgumentError("classifier needs at least one class");
    Classifier c;
    std::mt19937_64 rng(derive_seed(seed, 0x5eadULL));
    c.readout = gaussian_layer(body.output_width(), classes, 1.0, 0.0, Activation::linear, rng);
    c.body = std::move(body);
    return c;
}

// The trained classifier as a plain network whose last layer emits softmax
// probabilities; used to decode from the output layer.
inline Mlp as_network(const Classifier& c) {
    Mlp m = c.body;
    m.layers.push_back(c.readout);
    m.layers.back().activation = Activation::softmax;
    m.config.depth = m.layers.size();
    m.config.widths.push_back(c.readout.out_width());
    return m;
}

struct ClassifierGradients {
    std::vector<Matrix> weights;  // body layers, then readout
    std::vector<Vector> biases;
    double loss = 0.0;
};

// Mean softmax cross-entropy over the batch and its exact gradient.
inline ClassifierGradients classifier_gradients(const Classifier& c, const Matrix& input,
                                                std::span<const int> labels) {
    if (static_cast<std::size_t>(input.rows()) != labels.size())
        throw ArgumentError("label count does not match batch size");
    const std::size_t depth = c.body.depth();
    std::vector<Matrix> z;
    z.reserve(depth + 1);
    z.push_back(input);
    for (const auto& l : c.body.layers) z.push_back(l.forward(z.back()));
    Matrix probs = c.readout.forward(z.back());
    detail::activate_inplace(Activation::softmax, probs);

    const auto batch = static_cast<double>(input.rows());
    ClassifierGradients g;
    g.weights.resize(depth + 1);
    g.biases.resize(depth + 1);
    Matrix grad = probs;
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
        const auto label = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(r)]);
        if (label < 0 || label >= probs.cols()) throw ArgumentError("label outside the readout range");
        g.loss -= std::log(std::max(probs(r, label), 1e-300));
        grad(r, label) -= 1.0;
    }
    g.loss /= batch;
    grad /= batch;

    g.weights[depth].noalias() = grad.transpose() * z[depth];
    g.biases[depth] = grad.colwise().sum().transpose();
    Matrix upstream = grad * c.readout.weights;
    for (std::size_t l = depth; l >= 1; --l) {
        const DenseLayer& layer = c.body.layers[l - 1];
        const Matrix pre = detail::activation_backward(layer.activation, z[l], upstream);
        g.weights[l - 1].noalias() = pre.transpose() * z[l - 1];
        g.biases[l - 1] = pre.colwise().sum().transpose();
        if (l > 1) upstream = pre * layer.weights;
    }
    return g;
}

inline double evaluate_accuracy(const Classifier& c, const Dataset& data, std::size_t chunk = 1000) {
    if (data.size() == 0) return 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < data.size(); start += chunk) {
        const std::size_t count = std::min(chunk, data.size() - start);
        const auto pred = c.predict(data.images.middleRows(static_cast<Eigen::Index>(start),
                                                           static_cast<Eigen::Index>(count)));
        for (std::size_t i = 0; i < count; ++i) correct += pred[i] == data.labels[start + i] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

struct ClassifierOptions {
    std::size_t epochs = 1;
    double learning_rate = 1e-3;
    std::size_t batch_size = 64;
    std::uint64_t shuffle_seed = 0;
};

// Returns the test accuracy after every epoch. Throws NumericalError with the
// epoch index (1-based) when the loss stops being finite.
inline std::vector<double> train_classifier(Classifier& c, const Dataset& train, const Dataset& test,
                                            const ClassifierOptions& options) {
    if (options.batch_size == 0) throw ArgumentError("batch size must be positive");
    if (train.pixels() != c.body.input_width()) throw ArgumentError("dataset width does not match network input");
    if (train.classes > c.readout.out_width()) throw ArgumentError("readout narrower than the class count");
    OptimizerState opt({OptimizerKind::sgd, options.learning_rate});
    std::mt19937_64 rng(derive_seed(options.shuffle_seed, 0x7a11ULL));
    std::vector<Eigen::Index> order(train.size());
    std::iota(order.begin(), order.end(), Eigen::Index{0});

    std::vector<double> history;
    Matrix xb;
    std::vector<int> yb;
    for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
            const std::size_t count = std::min(options.batch_size, order.size() - start);
            const std::vector<Eigen::Index> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                order.begin() + static_cast<std::ptrdiff_t>(start + count));
            xb = train.images(idx, Eigen::all);
            yb.resize(count);
            for (std::size_t i = 0; i < count; ++i) yb[i] = train.labels[static_cast<std::size_t>(idx[i])];
            ClassifierGradients g = classifier_gradients(c, xb, yb);
            if (!std::isfinite(g.loss))
                throw NumericalError("classifier training diverged in epoch " + std::to_string(epoch), epoch);
            std::vector<ParamSpan> params;
            std::vector<GradSpan> grads;
            for (std::size_t l = 0; l < c.body.depth(); ++l) {
                params.push_back(as_span(c.body.layers[l].weights));
                params.push_back(as_span(c.body.layers[l].bias));
                grads.push_back(as_span(std::as_const(g.weights[l])));
                grads.push_back(as_span(std::as_const(g.biases[l])));
            }
            params.push_back(as_span(c.readout.weights));
            params.push_back(as_span(c.readout.bias));
            grads.push_back(as_span(std::as_const(g.weights.back())));
            grads.push_back(as_span(std::as_const(g.biases.back())));
            try {
                opt.step(params, grads);
            } catch (const NumericalError&) {
                throw NumericalError("classifier training diverged in epoch " + std::to_string(epoch), epoch);
            }
        }
        history.push_back(evaluate_accuracy(c, test));
    }
    return history;
}

}  // namespace edgescout
