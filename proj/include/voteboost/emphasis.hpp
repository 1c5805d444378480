#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "voteboost/dataset.hpp"

namespace voteboost {

/// log Gamma(x) for x > 0 (Lanczos, g = 671/128, 14 terms; ~1e-15 relative).
///
/// Returns exact zeros at x = 1 and x = 2 so that the uniform beta density
/// evaluates to exactly 1.
inline double log_gamma(double x) {
    if (!(x > 0.0)) throw DomainError("log_gamma: argument must be positive");
    if (x == 1.0 || x == 2.0) return 0.0;
    static constexpr std::array<double, 14> c = {
        57.1562356658629235,     -59.5979603554754912,    14.1360979747417471,     -0.491913816097620199,
        .339946499848118887e-4,  .465236289270485756e-4,  -.983744753048795646e-4, .158088703224912494e-3,
        -.210264441724104883e-3, .217439618115212643e-3,  -.164318106536763890e-3, .844182239838527433e-4,
        -.261908384015814087e-4, .368991826595316234e-5};
    const double t = x + 671.0 / 128.0;
    double sum = 0.999999999999997092;
    for (std::size_t i = 0; i < c.size(); ++i) sum += c[i] / (x + static_cast<double>(i + 1));
    return (x + 0.5) * std::log(t) - t + std::log(2.5066282746310005 * sum / x);
}

/// Laplace-corrected positive-vote fraction (t_plus + 1) / (t + 2).
inline double laplace_fraction(std::size_t t_plus, std::size_t t) {
    if (t_plus > t) throw DomainError("laplace_fraction: t_plus exceeds t");
    return static_cast<double>(t_plus + 1) / static_cast<double>(t + 2);
}

/// Shape parameters of the beta emphasis density.
struct BetaParams {
    double a = 1.0;
    double b = 1.0;

    BetaParams() = default;
    BetaParams(double a_, double b_) : a(a_), b(b_) {
        if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
            throw DomainError("beta shape parameters must be positive and finite");
    }
    static BetaParams symmetric(double s) { return {s, s}; }

    friend bool operator==(const BetaParams&, const BetaParams&) = default;
};

namespace detail {
inline void check_shape(const BetaParams& p) {
    if (!(p.a > 0.0) || !(p.b > 0.0)) throw DomainError("beta shape parameters must be positive");
}
}  // namespace detail

inline double log_beta_fn(double a, double b) { return log_gamma(a) + log_gamma(b) - log_gamma(a + b); }

/// log of the beta density on the open interval (0, 1).
inline double beta_log_pdf(double p, const BetaParams& params) {
    detail::check_shape(params);
    if (!(p > 0.0 && p < 1.0))
        throw DomainError("beta_pdf: p must lie strictly inside (0, 1); Laplace-correct vote fractions first");
    double out = -log_beta_fn(params.a, params.b);
    if (params.a != 1.0) out += (params.a - 1.0) * std::log(p);
    if (params.b != 1.0) out += (params.b - 1.0) * std::log1p(-p);
    return out;
}

inline double beta_pdf(double p, const BetaParams& params) { return std::exp(beta_log_pdf(p, params)); }

namespace detail {

// Continued fraction for the incomplete beta function, modified Lentz.
inline double beta_continued_fraction(double a, double b, double x) {
    constexpr int max_iter = 10000;
    constexpr double eps = 1e-16;
    constexpr double tiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) return h;
    }
    throw InternalError("incomplete beta continued fraction did not converge");
}

}  // namespace detail

/// Regularized incomplete beta function I_p(a, b).
inline double beta_cdf(double p, const BetaParams& params) {
    detail::check_shape(params);
    if (std::isnan(p)) throw DomainError("beta_cdf: p is NaN");
    if (p <= 0.0) return 0.0;
    if (p >= 1.0) return 1.0;
    const double a = params.a, b = params.b;
    const double log_front = a * std::log(p) + b * std::log1p(-p) - log_beta_fn(a, b);
    const double front = std::exp(log_front);
    // the fraction converges fastest below the mean; reflect otherwise
    if (p < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, p) / a;
    return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - p) / b;
}

/// Positive-vote counts per training instance after t rounds.
struct VoteTally {
    std::size_t t = 0;
    std::vector<std::size_t> t_plus;

    explicit VoteTally(std::size_t n = 0) : t_plus(n, 0) {}
    VoteTally(std::size_t rounds, std::vector<std::size_t> plus) : t(rounds), t_plus(std::move(plus)) {
        for (auto v : t_plus)
            if (v > t) throw DomainError("VoteTally: positive votes exceed ensemble size");
    }

    std::size_t size() const { return t_plus.size(); }

    /// Adds one member's predictions (one label per instance).
    void add(std::span<const Label> predictions) {
        if (predictions.size() != t_plus.size()) throw DomainError("VoteTally: prediction count mismatch");
        ++t;
        for (std::size_t i = 0; i < t_plus.size(); ++i)
            if (predictions[i] > 0) ++t_plus[i];
    }

    friend bool operator==(const VoteTally&, const VoteTally&) = default;
};

/// Weights proportional to exp(log_g(pi_+)) at the Laplace-corrected fractions.
///
/// `log_g` is the log of any nonnegative emphasis function on (0, 1).
template <class LogEmphasis>
WeightVector compute_weights_with(const VoteTally& tally, LogEmphasis&& log_g) {
    const std::size_t n = tally.size();
    if (n == 0) throw DomainError("compute_weights: empty tally");
    std::vector<double> logs(n);
    for (std::size_t i = 0; i < n; ++i) logs[i] = log_g(laplace_fraction(tally.t_plus[i], tally.t));
    const double top = *std::max_element(logs.begin(), logs.end());
    if (!std::isfinite(top)) throw InternalError("compute_weights: emphasis is zero or infinite everywhere");
    std::vector<double> mass(n);
    for (std::size_t i = 0; i < n; ++i) mass[i] = std::exp(logs[i] - top);
    return WeightVector::from_masses(std::move(mass));
}

inline WeightVector compute_weights(const VoteTally& tally, const BetaParams& params) {
    return compute_weights_with(tally, [&](double p) { return beta_log_pdf(p, params); });
}

/// Per-instance cost c(F) = 2 [G(1/2) - G((1+F)/2)] with G the beta CDF.
inline double instance_cost(double f, const BetaParams& params) {
    if (!(f >= -1.0 && f <= 1.0)) throw DomainError("cost: ensemble output must lie in [-1, 1]");
    return 2.0 * (beta_cdf(0.5, params) - beta_cdf(0.5 * (1.0 + f), params));
}

/// Mean of y_i c(F_i). Diagnostic: monitored, not optimized.
inline double cost_functional(std::span<const double> f_values, std::span<const Label> labels,
                              const BetaParams& params) {
    if (f_values.size() != labels.size()) throw DomainError("cost_functional: length mismatch");
    if (f_values.empty()) throw DomainError("cost_functional: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < f_values.size(); ++i) acc += labels[i] * instance_cost(f_values[i], params);
    return acc / static_cast<double>(f_values.size());
}

}  // namespace voteboost
