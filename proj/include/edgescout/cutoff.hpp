#pragma once

#include "edgescout/entropy.hpp"
#include "edgescout/error.hpp"

#include <cmath>
#include <span>

namespace edgescout {

inline constexpr double kDefaultRelativeEta = 0.005;
inline constexpr double kDefaultDifferentialEta = 0.5;

inline double default_eta(EntropyKind kind) {
    return kind == EntropyKind::relative ? kDefaultRelativeEta : kDefaultDifferentialEta;
}

struct CutoffResult {
    std::size_t cutoff = 1;  // l* in [1, L]
    double eta = 0.0;
    bool saturated = false;  // l* < L
    EntropyKind curve_kind = EntropyKind::relative;
};

// Walks down from layer L-1 and stops at the first layer whose value differs
// from the layer-L value by strictly more than eta; l* is the layer above it.
// A curve that never leaves the eta band has l* = 1.
inline std::size_t find_cutoff(std::span<const double> values, double eta) {
    if (values.empty()) throw ArgumentError("cannot detect a cutoff on an empty curve");
    if (!(eta > 0.0)) throw ArgumentError("eta must be positive");
    const std::size_t depth = values.size();
    const double reference = values[depth - 1];
    for (std::size_t layer = depth - 1; layer >= 1; --layer)
        if (std::abs(reference - values[layer - 1]) > eta) return layer + 1;
    return 1;
}

inline CutoffResult detect_cutoff(const EntropyCurve& curve, double eta) {
    CutoffResult r;
    r.cutoff = find_cutoff(curve.values, eta);
    r.eta = eta;
    r.saturated = r.cutoff < curve.depth();
    r.curve_kind = curve.kind;
    return r;
}

}  // namespace edgescout
