#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "voteboost/dataset.hpp"
#include "voteboost/emphasis.hpp"

namespace voteboost {

inline double mean(std::span<const double> v) {
    if (v.empty()) throw DomainError("mean of an empty vector");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1 denominator); 0 for a single value.
inline double stddev(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

/// Per-replicate errors of one method on one dataset.
struct ErrorReport {
    std::vector<double> errors;

    explicit ErrorReport(std::vector<double> e = {}) : errors(std::move(e)) {
        for (double x : errors)
            if (!(x >= 0.0 && x <= 1.0)) throw DomainError("error rates must lie in [0, 1]");
    }
    double mean() const { return voteboost::mean(errors); }
    double sd() const { return stddev(errors); }
    std::size_t replicates() const { return errors.size(); }
};

/// Two-sided P(|T| > |t|) for Student's t with nu degrees of freedom.
inline double student_t_two_sided_p(double t, double nu) {
    if (!(nu > 0.0)) throw DomainError("degrees of freedom must be positive");
    if (std::isinf(t)) return 0.0;
    return beta_cdf(nu / (nu + t * t), BetaParams(0.5 * nu, 0.5));
}

struct TTestResult {
    double t_stat;
    double p_value;
    bool significant;
};

/// Two-sided paired t-test on a - b.
///
/// Zero variance of the differences: an all-zero difference gives p = 1;
/// a nonzero constant difference gives t = +-inf, p = 0.
inline TTestResult paired_t_test(std::span<const double> a, std::span<const double> b, double alpha) {
    if (a.size() != b.size()) throw DomainError("paired_t_test: vectors differ in length");
    if (a.size() < 2) throw DomainError("paired_t_test: need at least two pairs");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    const double m = mean(d);
    const double s = stddev(d);
    const auto n = static_cast<double>(d.size());
    if (s == 0.0) {
        if (m == 0.0) return {0.0, 1.0, false};
        return {std::copysign(std::numeric_limits<double>::infinity(), m), 0.0, true};
    }
    const double t = m / (s / std::sqrt(n));
    const double p = student_t_two_sided_p(t, n - 1.0);
    return {t, p, p < alpha};
}

struct WinDrawLoss {
    std::size_t wins = 0, draws = 0, losses = 0;
    friend bool operator==(const WinDrawLoss&, const WinDrawLoss&) = default;
};

/// Replicate errors of methods A and B on one dataset.
struct PairedReports {
    ErrorReport a;
    ErrorReport b;
};

/// A wins when the paired test is significant and A's mean error is lower.
inline WinDrawLoss win_draw_loss(std::span<const PairedReports> reports, double alpha) {
    WinDrawLoss out;
    for (const auto& r : reports) {
        const auto test = paired_t_test(r.a.errors, r.b.errors, alpha);
        if (!test.significant)
            ++out.draws;
        else if (r.a.mean() < r.b.mean())
            ++out.wins;
        else if (r.a.mean() > r.b.mean())
            ++out.losses;
        else
            ++out.draws;
    }
    return out;
}

/// Ranks 1..n (1 = smallest); ties share their average rank.
inline std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> rank(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
        i = j + 1;
    }
    return rank;
}

/// Pearson correlation of the (tie-averaged) ranks.
inline double spearman_rho(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw DomainError("spearman_rho: need two equal-length vectors of size >= 2");
    const auto rx = average_ranks(x), ry = average_ranks(y);
    const double mx = mean(rx), my = mean(ry);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

/// Critical value q_alpha of the Studentized range statistic divided by
/// sqrt(2), as tabulated for the Nemenyi test (Demsar 2006, Table 5).
inline double nemenyi_q(std::size_t k, double alpha) {
    static constexpr double q05[] = {1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164};
    static constexpr double q10[] = {1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920};
    if (k < 2 || k > 10) throw DomainError("Nemenyi table covers 2 to 10 methods");
    if (std::abs(alpha - 0.05) < 1e-12) return q05[k - 2];
    if (std::abs(alpha - 0.10) < 1e-12) return q10[k - 2];
    throw DomainError("Nemenyi table covers alpha = 0.05 and 0.10 only");
}

inline double nemenyi_critical_difference(std::size_t k, std::size_t n_datasets, double alpha) {
    const auto kd = static_cast<double>(k);
    return nemenyi_q(k, alpha) * std::sqrt(kd * (kd + 1.0) / (6.0 * static_cast<double>(n_datasets)));
}

struct RankComparison {
    std::vector<double> avg_ranks;                // per method
    double critical_difference;
    std::vector<std::vector<std::size_t>> groups;  // maximal sets within CD, ordered by rank
};

/// error_matrix[m][d]: mean error of method m on dataset d.
inline RankComparison average_ranks_nemenyi(const std::vector<std::vector<double>>& error_matrix, double alpha) {
    const std::size_t k = error_matrix.size();
    if (k < 2) throw DomainError("need at least two methods");
    const std::size_t n = error_matrix.front().size();
    if (n < 2) throw DomainError("need at least two datasets");
    for (const auto& row : error_matrix)
        if (row.size() != n) throw DomainError("error matrix rows differ in length");

    RankComparison out{std::vector<double>(k, 0.0), nemenyi_critical_difference(k, n, alpha), {}};
    std::vector<double> column(k);
    for (std::size_t d = 0; d < n; ++d) {
        for (std::size_t m = 0; m < k; ++m) column[m] = error_matrix[m][d];
        const auto r = average_ranks(column);
        for (std::size_t m = 0; m < k; ++m) out.avg_ranks[m] += r[m];
    }
    for (auto& r : out.avg_ranks) r /= static_cast<double>(n);

    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return out.avg_ranks[a] < out.avg_ranks[b]; });
    std::size_t last_end = 0;
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i;
        while (j + 1 < k && out.avg_ranks[order[j + 1]] - out.avg_ranks[order[i]] <= out.critical_difference) ++j;
        if (j + 1 > last_end && j > i) {
            out.groups.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(j + 1));
            last_end = j + 1;
        }
    }
    return out;
}

}  // namespace voteboost
