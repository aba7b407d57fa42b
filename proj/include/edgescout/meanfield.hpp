#pragma once

// Infinite-width signal propagation for tanh networks with fan-in scaled
// Gaussian weights: the length map q -> sigma_w^2 E[tanh^2(sqrt(q) Z)] + sigma_b^2,
// its fixed point q*, the slope chi_1 = sigma_w^2 E[tanh'(sqrt(q*) Z)^2], and
// the correlation depth xi_c = -1 / ln chi_c.

#include "edgescout/error.hpp"
#include "edgescout/types.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace edgescout {

// Nodes and weights with E[f(Z)] ~= sum_i weights[i] f(nodes[i]), Z ~ N(0, 1).
struct GaussHermiteRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    template <class F>
    double expect(F&& f) const {
        double s = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * f(nodes[i]);
        return s;
    }
};

// Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
inline GaussHermiteRule gauss_hermite(std::size_t order) {
    if (order == 0) throw ArgumentError("quadrature order must be positive");
    const auto n = static_cast<Eigen::Index>(order);
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index k = 1; k < n; ++k) jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
    GaussHermiteRule rule;
    rule.nodes.resize(order);
    rule.weights.resize(order);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        rule.nodes[static_cast<std::size_t>(i)] = eig.eigenvalues()[i];
        const double v = eig.eigenvectors()(0, i);
        rule.weights[static_cast<std::size_t>(i)] = v * v;
        total += v * v;
    }
    for (auto& w : rule.weights) w /= total;
    return rule;
}

inline constexpr std::size_t kDefaultQuadratureOrder = 256;
inline constexpr double kFixedPointTolerance = 1e-10;
inline constexpr std::size_t kFixedPointMaxIterations = 10000;
inline constexpr double kCriticalChiTolerance = 1e-6;

inline double variance_map(double q, double sigma_w_sq, double sigma_b_sq, const GaussHermiteRule& rule) {
    const double s = std::sqrt(std::max(q, 0.0));
    return sigma_w_sq * rule.expect([s](double z) {
        const double t = std::tanh(s * z);
        return t * t;
    }) + sigma_b_sq;
}

inline double variance_fixed_point(double sigma_w_sq, double sigma_b_sq, const GaussHermiteRule& rule,
                                   std::size_t max_iterations = kFixedPointMaxIterations) {
    if (!(sigma_w_sq >= 0.0) || !(sigma_b_sq >= 0.0)) throw ArgumentError("variances must be nonnegative");
    double q = sigma_w_sq + sigma_b_sq;
    for (std::size_t it = 0; it < max_iterations; ++it) {
        const double next = variance_map(q, sigma_w_sq, sigma_b_sq, rule);
        if (std::abs(next - q) < kFixedPointTolerance) return next;
        q = next;
    }
    throw NumericalError("variance map did not converge at sigma_w^2=" + std::to_string(sigma_w_sq) +
                             ", sigma_b^2=" + std::to_string(sigma_b_sq),
                         max_iterations);
}

inline double variance_fixed_point(double sigma_w_sq, double sigma_b_sq,
                                   std::size_t order = kDefaultQuadratureOrder) {
    return variance_fixed_point(sigma_w_sq, sigma_b_sq, gauss_hermite(order));
}

// sigma_w^2 E[tanh'(sqrt(q) Z)^2]
inline double chi_one(double q, double sigma_w_sq, const GaussHermiteRule& rule) {
    const double s = std::sqrt(std::max(q, 0.0));
    return sigma_w_sq * rule.expect([s](double z) {
        const double t = std::tanh(s * z);
        const double d = 1.0 - t * t;
        return d * d;
    });
}

struct MeanFieldPoint {
    double sigma_w_sq = 0.0;
    double sigma_b_sq = 0.0;
    double q_star = 0.0;
    double chi = 0.0;     // chi_1 at q*
    double c_star = 1.0;  // correlation fixed point (1 in the ordered phase)
    double chi_c = 0.0;   // slope of the correlation map at c*
    double xi_c = 0.0;    // +infinity when |chi_c - 1| < kCriticalChiTolerance

    bool critical() const { return std::isinf(xi_c); }
};

namespace detail {

// E over (Z1, Z2) of f(u1) g(u2), u1 = sqrt(q) Z1, u2 = sqrt(q) (c Z1 + sqrt(1 - c^2) Z2).
template <class F, class G>
double pair_expectation(double q, double c, const GaussHermiteRule& rule, F&& f, G&& g) {
    const double s = std::sqrt(q);
    const double r = std::sqrt(std::max(0.0, 1.0 - c * c));
    double total = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double z1 = rule.nodes[i];
        const double fu = f(s * z1);
        double inner = 0.0;
        for (std::size_t j = 0; j < rule.nodes.size(); ++j) inner += rule.weights[j] * g(s * (c * z1 + r * rule.nodes[j]));
        total += rule.weights[i] * fu * inner;
    }
    return total;
}

}  // namespace detail

inline MeanFieldPoint mean_field_point(double sigma_w_sq, double sigma_b_sq, const GaussHermiteRule& rule) {
    MeanFieldPoint p;
    p.sigma_w_sq = sigma_w_sq;
    p.sigma_b_sq = sigma_b_sq;
    p.q_star = variance_fixed_point(sigma_w_sq, sigma_b_sq, rule);
    p.chi = chi_one(p.q_star, sigma_w_sq, rule);
    p.c_star = 1.0;
    p.chi_c = p.chi;
    if (p.chi > 1.0 && p.q_star > 0.0) {
        // Chaotic phase: c = 1 is unstable and the correlation map settles at c* < 1.
        auto tanh_f = [](double u) { return std::tanh(u); };
        auto dtanh = [](double u) {
            const double t = std::tanh(u);
            return 1.0 - t * t;
        };
        double c = 0.0;
        for (std::size_t it = 0; it < kFixedPointMaxIterations; ++it) {
            const double next =
                (sigma_w_sq * detail::pair_expectation(p.q_star, c, rule, tanh_f, tanh_f) + sigma_b_sq) / p.q_star;
            const bool done = std::abs(next - c) < 1e-12;
            c = std::min(next, 1.0);
            if (done) break;
        }
        p.c_star = c;
        p.chi_c = sigma_w_sq * detail::pair_expectation(p.q_star, c, rule, dtanh, dtanh);
    }
    if (!(p.chi_c > 0.0))
        p.xi_c = 0.0;
    else if (std::abs(p.chi_c - 1.0) < kCriticalChiTolerance)
        p.xi_c = std::numeric_limits<double>::infinity();
    else
        p.xi_c = -1.0 / std::log(p.chi_c);
    return p;
}

inline MeanFieldPoint mean_field_point(double sigma_w_sq, double sigma_b_sq,
                                       std::size_t order = kDefaultQuadratureOrder) {
    return mean_field_point(sigma_w_sq, sigma_b_sq, gauss_hermite(order));
}

inline double correlation_depth(double sigma_w_sq, double sigma_b_sq, std::size_t order = kDefaultQuadratureOrder) {
    return mean_field_point(sigma_w_sq, sigma_b_sq, order).xi_c;
}

// sigma_w^2 at which chi_1(q*) crosses 1, by bisection on [lo, hi].
inline double critical_sigma_w_sq(double sigma_b_sq, double lo = 0.1, double hi = 10.0,
                                  std::size_t order = kDefaultQuadratureOrder) {
    const GaussHermiteRule rule = gauss_hermite(order);
    auto excess = [&](double sw) { return chi_one(variance_fixed_point(sw, sigma_b_sq, rule), sw, rule) - 1.0; };
    double f_lo = excess(lo);
    if (f_lo > 0.0 || excess(hi) < 0.0) throw NumericalError("chi_1 = 1 is not bracketed");
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double f_mid = excess(mid);
        if ((f_mid > 0.0) == (f_lo > 0.0)) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace edgescout
