#pragma once

#include "edgescout/error.hpp"
#include "edgescout/nn.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace edgescout {

enum class OptimizerKind { sgd, adam };

struct OptimizerSettings {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

using ParamSpan = std::span<double>;
using GradSpan = std::span<const double>;

inline ParamSpan as_span(Matrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
inline ParamSpan as_span(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
inline GradSpan as_span(const Matrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
inline GradSpan as_span(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

// First/second moments are allocated on the first step and are tied to the
// parameter shapes seen then.
class OptimizerState {
public:
    explicit OptimizerState(OptimizerSettings settings = {}) : settings_(settings) {
        if (!(settings_.learning_rate > 0.0) || !std::isfinite(settings_.learning_rate))
            throw ArgumentError("learning rate must be positive");
    }

    const OptimizerSettings& settings() const { return settings_; }
    std::size_t step_count() const { return steps_; }
    const std::vector<Vector>& first_moments() const { return first_; }
    const std::vector<Vector>& second_moments() const { return second_; }

    // Throws NumericalError (and leaves everything untouched) when a gradient
    // is not finite.
    void step(std::span<const ParamSpan> params, std::span<const GradSpan> grads) {
        if (params.size() != grads.size())
            throw ArgumentError("parameter and gradient lists differ in length");
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (params[i].size() != grads[i].size())
                throw ArgumentError("parameter and gradient shapes differ");
            for (double g : grads[i])
                if (!std::isfinite(g))
                    throw NumericalError("non-finite gradient; optimizer step aborted", steps_);
        }
        if (settings_.kind == OptimizerKind::adam) {
            if (first_.empty()) {
                for (const auto& p : params) {
                    first_.push_back(Vector::Zero(static_cast<Eigen::Index>(p.size())));
                    second_.push_back(Vector::Zero(static_cast<Eigen::Index>(p.size())));
                }
            } else if (first_.size() != params.size()) {
                throw ArgumentError("parameter list changed between optimizer steps");
            }
            for (std::size_t i = 0; i < params.size(); ++i)
                if (static_cast<std::size_t>(first_[i].size()) != params[i].size())
                    throw ArgumentError("parameter shape changed between optimizer steps");
        }
        ++steps_;
        const double lr = settings_.learning_rate;
        if (settings_.kind == OptimizerKind::sgd) {
            for (std::size_t i = 0; i < params.size(); ++i) {
                Eigen::Map<Eigen::ArrayXd> p(params[i].data(), static_cast<Eigen::Index>(params[i].size()));
                Eigen::Map<const Eigen::ArrayXd> g(grads[i].data(), static_cast<Eigen::Index>(grads[i].size()));
                p -= lr * g;
            }
            return;
        }
        const double b1 = settings_.beta1, b2 = settings_.beta2;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
        const double step_size = lr / c1;
        const double inv_sqrt_c2 = 1.0 / std::sqrt(c2);
        for (std::size_t i = 0; i < params.size(); ++i) {
            Eigen::Map<Eigen::ArrayXd> p(params[i].data(), static_cast<Eigen::Index>(params[i].size()));
            Eigen::Map<const Eigen::ArrayXd> g(grads[i].data(), static_cast<Eigen::Index>(grads[i].size()));
            auto m = first_[i].array();
            auto v = second_[i].array();
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g.square();
            p -= step_size * m / (v.sqrt() * inv_sqrt_c2 + settings_.epsilon);
        }
    }

private:
    OptimizerSettings settings_;
    std::vector<Vector> first_;
    std::vector<Vector> second_;
    std::size_t steps_ = 0;
};

inline void optimizer_step(std::span<const ParamSpan> params, std::span<const GradSpan> grads,
                           OptimizerState& state) {
    state.step(params, grads);
}

inline void optimizer_step(DenseLayer& layer, const LayerGradients& grads, OptimizerState& state) {
    const ParamSpan params[] = {as_span(layer.weights), as_span(layer.bias)};
    const GradSpan g[] = {as_span(grads.weights), as_span(grads.bias)};
    state.step(params, g);
}

}  // namespace edgescout
