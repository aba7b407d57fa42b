#pragma once

// Reconstruction entropy: relative entropy between an input and its
// reconstruction, and the per-pixel Gaussian differential entropy over a set
// of reconstructions.

#include "edgescout/cascade.hpp"
#include "edgescout/data.hpp"
#include "edgescout/error.hpp"
#include "edgescout/nn.hpp"
#include "edgescout/parallel.hpp"

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace edgescout {

enum class EntropyKind { relative, differential };

inline std::string_view to_string(EntropyKind k) {
    return k == EntropyKind::relative ? "relative" : "differential";
}

struct EntropyCurve {
    EntropyKind kind = EntropyKind::relative;
    std::vector<double> values;  // values[l - 1] belongs to layer l
    std::size_t sample_size = 0;
    double sigma_w_sq = 0.0;
    double sigma_b_sq = 0.0;

    std::size_t depth() const { return values.size(); }
    double at_layer(std::size_t layer) const { return values.at(layer - 1); }
};

// Sum p ln(p/q) with 0 ln(0/q) = 0.
inline double kl_divergence(const Pmf& p, const Pmf& q) {
    if (p.size() != q.size())
        throw ArgumentError("pmf lengths differ: " + std::to_string(p.size()) + " vs " + std::to_string(q.size()));
    const Vector& a = p.masses();
    const Vector& b = q.masses();
    double d = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i)
        if (a[i] > 0.0) d += a[i] * std::log(a[i] / b[i]);
    return d;
}

// Lower clip on per-pixel variances. A variance at this level is below the
// resolution of single-precision activations (values of order 0.1 stored with
// a relative error of 1.2e-7), so reconstructions that agree to this level
// are treated as identical.
inline constexpr double kVarianceFloor = 1e-16;

// Display clip for differential entropy maps.
inline constexpr double kDifferentialDisplayClip = -10.0;

inline double gaussian_entropy(double variance) {
    return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * variance);
}

// Mean over pixels of 1/2 ln(2 pi e sigma_ij^2), with sigma_ij^2 the unbiased
// sample variance of pixel ij across the M rows, floored at variance_floor.
inline double pixel_differential_entropy(const Matrix& recon_set, double variance_floor = kVarianceFloor) {
    if (recon_set.rows() < 2) throw ArgumentError("differential entropy needs at least two reconstructions");
    if (!(variance_floor > 0.0)) throw ArgumentError("variance floor must be positive");
    const double m = static_cast<double>(recon_set.rows());
    const RowVector mean = recon_set.colwise().mean();
    const RowVector var = (recon_set.rowwise() - mean).array().square().colwise().sum() / (m - 1.0);
    double s = 0.0;
    for (Eigen::Index j = 0; j < var.size(); ++j) s += gaussian_entropy(std::max(var[j], variance_floor));
    return s / static_cast<double>(var.size());
}

namespace detail {

template <class PerLayer>
EntropyCurve entropy_curve(EntropyKind kind, const Mlp& dnn, const Cascade& cascade, const Matrix& inputs,
                           std::size_t workers, PerLayer&& per_layer) {
    if (cascade.depth() < dnn.depth())
        throw ArgumentError("missing decoders: cascade has " + std::to_string(cascade.depth()) + " of " +
                            std::to_string(dnn.depth()));
    const ActivationTrace trace = forward_record(dnn, inputs);
    EntropyCurve curve;
    curve.kind = kind;
    curve.sample_size = static_cast<std::size_t>(inputs.rows());
    curve.sigma_w_sq = dnn.config.sigma_w_sq;
    curve.sigma_b_sq = dnn.config.sigma_b_sq;
    curve.values.assign(dnn.depth(), 0.0);
    parallel_for(dnn.depth(), workers, [&](std::size_t k) {
        const std::size_t layer = k + 1;
        curve.values[k] = per_layer(cascade.reconstruct(layer, trace.at(layer)));
    });
    for (std::size_t k = 0; k < curve.values.size(); ++k)
        if (!std::isfinite(curve.values[k]))
            throw NumericalError("non-finite entropy at layer " + std::to_string(k + 1), k + 1);
    return curve;
}

}  // namespace detail

// Batch-averaged D(input || reconstruction) for every layer.
inline EntropyCurve relative_entropy_curve(const Mlp& dnn, const Cascade& cascade, const Matrix& inputs,
                                           std::size_t workers = 1) {
    if (inputs.rows() == 0) throw ArgumentError("relative entropy needs a nonempty batch");
    std::vector<Pmf> references;
    references.reserve(static_cast<std::size_t>(inputs.rows()));
    for (Eigen::Index r = 0; r < inputs.rows(); ++r) references.push_back(to_pmf(inputs.row(r)));
    return detail::entropy_curve(EntropyKind::relative, dnn, cascade, inputs, workers, [&](const Matrix& recon) {
        double sum = 0.0;
        for (Eigen::Index r = 0; r < recon.rows(); ++r)
            sum += kl_divergence(references[static_cast<std::size_t>(r)], to_pmf(recon.row(r)));
        return sum / static_cast<double>(recon.rows());
    });
}

inline EntropyCurve differential_entropy_curve(const Mlp& dnn, const Cascade& cascade, const Matrix& sample,
                                               std::size_t workers = 1,
                                               double variance_floor = kVarianceFloor) {
    if (sample.rows() < 2) throw ArgumentError("differential entropy needs at least two inputs");
    return detail::entropy_curve(EntropyKind::differential, dnn, cascade, sample, workers,
                                 [&](const Matrix& recon) { return pixel_differential_entropy(recon, variance_floor); });
}

inline EntropyCurve entropy_curve(EntropyKind kind, const Mlp& dnn, const Cascade& cascade, const Matrix& inputs,
                                  std::size_t workers = 1) {
    return kind == EntropyKind::relative ? relative_entropy_curve(dnn, cascade, inputs, workers)
                                         : differential_entropy_curve(dnn, cascade, inputs, workers);
}

// ---------------------------------------------------------------------------

struct PixelMoments {
    std::size_t pixel = 0;
    double mean = 0.0;
    double variance = 0.0;         // unbiased
    double skewness = 0.0;         // g1 = m3 / m2^{3/2}
    double excess_kurtosis = 0.0;  // g2 = m4 / m2^2 - 3
    bool zero_variance = false;
    double histogram_min = 0.0;
    double histogram_max = 0.0;
    std::vector<std::size_t> histogram;
};

inline std::vector<PixelMoments> gaussianity_report(const Matrix& recon_set, std::span<const std::size_t> pixels,
                                                    std::size_t bins = 20) {
    if (recon_set.rows() < 2) throw ArgumentError("gaussianity report needs at least two samples");
    if (bins == 0) throw ArgumentError("histogram needs at least one bin");
    const auto m = static_cast<double>(recon_set.rows());
    std::vector<PixelMoments> out;
    for (std::size_t pixel : pixels) {
        if (pixel >= static_cast<std::size_t>(recon_set.cols())) throw ArgumentError("pixel index out of range");
        const auto col = recon_set.col(static_cast<Eigen::Index>(pixel)).array();
        PixelMoments pm;
        pm.pixel = pixel;
        pm.mean = col.mean();
        const Eigen::ArrayXd d = col - pm.mean;
        const double m2 = d.square().mean();
        const double m3 = d.cube().mean();
        const double m4 = d.square().square().mean();
        pm.variance = m2 * m / (m - 1.0);
        pm.zero_variance = !(m2 > 1e-300) || m2 <= 1e-24 * (pm.mean * pm.mean);
        if (!pm.zero_variance) {
            pm.skewness = m3 / std::pow(m2, 1.5);
            pm.excess_kurtosis = m4 / (m2 * m2) - 3.0;
        }
        pm.histogram_min = col.minCoeff();
        pm.histogram_max = col.maxCoeff();
        pm.histogram.assign(bins, 0);
        const double width = pm.histogram_max - pm.histogram_min;
        for (Eigen::Index i = 0; i < col.size(); ++i) {
            std::size_t b = 0;
            if (width > 0.0)
                b = std::min(bins - 1, static_cast<std::size_t>((col[i] - pm.histogram_min) / width *
                                                                static_cast<double>(bins)));
            ++pm.histogram[b];
        }
        out.push_back(std::move(pm));
    }
    return out;
}

}  // namespace edgescout
