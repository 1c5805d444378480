#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "voteboost/dataset.hpp"
#include "voteboost/random.hpp"

namespace voteboost {

// ---------------------------------------------------------------------------
// CSV ingestion

using ColumnSelector = std::variant<std::string, std::size_t>;

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        auto pos = line.find(',', start);
        out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline bool parse_real(std::string_view s, double& out) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace detail

/// Reads a comma-separated file whose first row is a header.
///
/// The value equal to `positive_label` maps to +1 and the other value to -1.
/// With an empty `positive_label` the label column must hold exactly the
/// values {0, 1}, and 1 maps to +1. Line numbers in errors are 1-based and
/// count the header.
inline Dataset load_csv(std::istream& in, const ColumnSelector& label_column,
                        const std::string& positive_label) {
    std::string line;
    if (!std::getline(in, line)) throw IngestionError("empty file: missing header row", 1, "");
    auto header = detail::split_csv_line(line);

    std::size_t label_idx = 0;
    if (auto* name = std::get_if<std::string>(&label_column)) {
        auto it = std::find(header.begin(), header.end(), *name);
        if (it == header.end()) throw DomainError("label column '" + *name + "' not found in header");
        label_idx = static_cast<std::size_t>(it - header.begin());
    } else {
        label_idx = std::get<std::size_t>(label_column);
        if (label_idx >= header.size()) throw DomainError("label column index out of range");
    }

    std::vector<std::string> names;
    for (std::size_t j = 0; j < header.size(); ++j)
        if (j != label_idx) names.push_back(header[j]);
    const std::size_t d = names.size();
    if (d == 0) throw DomainError("no attribute columns besides the label");

    std::vector<double> x;
    std::vector<std::string> raw_labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw IngestionError("line " + std::to_string(line_no) + ": expected " +
                                     std::to_string(header.size()) + " cells, found " +
                                     std::to_string(cells.size()),
                                 line_no, "");
        for (std::size_t j = 0; j < cells.size(); ++j) {
            if (j == label_idx) {
                if (cells[j].empty())
                    throw IngestionError("line " + std::to_string(line_no) + ", column '" + header[j] +
                                             "': missing label",
                                         line_no, header[j]);
                raw_labels.push_back(cells[j]);
                continue;
            }
            double v = 0.0;
            if (!detail::parse_real(cells[j], v))
                throw IngestionError("line " + std::to_string(line_no) + ", column '" + header[j] +
                                         "': cannot parse '" + cells[j] + "' as a real",
                                     line_no, header[j]);
            x.push_back(v);
        }
    }
    if (raw_labels.empty()) throw IngestionError("file has a header but no data rows", line_no, "");

    std::set<std::string> distinct(raw_labels.begin(), raw_labels.end());
    if (distinct.size() > 2)
        throw DomainError("label column has " + std::to_string(distinct.size()) +
                          " distinct values; only binary tasks are supported");

    std::string positive = positive_label;
    if (positive.empty()) {
        for (const auto& v : distinct)
            if (v != "0" && v != "1")
                throw DomainError("label value '" + v + "' is not 0/1; pass the positive label explicitly");
        positive = "1";
    } else if (!distinct.contains(positive)) {
        throw DomainError("positive label '" + positive + "' does not occur in the label column");
    }

    std::vector<Label> y;
    y.reserve(raw_labels.size());
    for (const auto& v : raw_labels) y.push_back(v == positive ? 1 : -1);
    return Dataset(d, std::move(x), std::move(y), std::move(names));
}

inline Dataset load_csv(const std::string& path, const ColumnSelector& label_column,
                        const std::string& positive_label) {
    std::ifstream in(path);
    if (!in) throw IngestionError("cannot open '" + path + "'", 0, "");
    return load_csv(in, label_column, positive_label);
}

// ---------------------------------------------------------------------------
// Synthetic tasks (Breiman's twonorm / threenorm / ringnorm)

enum class SyntheticKind { twonorm, threenorm, ringnorm };

inline std::string to_string(SyntheticKind k) {
    switch (k) {
        case SyntheticKind::twonorm: return "twonorm";
        case SyntheticKind::threenorm: return "threenorm";
        case SyntheticKind::ringnorm: return "ringnorm";
    }
    return "?";
}

inline std::optional<SyntheticKind> parse_synthetic_kind(std::string_view s) {
    if (s == "twonorm") return SyntheticKind::twonorm;
    if (s == "threenorm") return SyntheticKind::threenorm;
    if (s == "ringnorm") return SyntheticKind::ringnorm;
    return std::nullopt;
}

struct SyntheticTask {
    SyntheticKind kind = SyntheticKind::twonorm;
    std::size_t dimension = 20;

    /// Mean offset per coordinate: 2/sqrt(D) for twonorm and threenorm,
    /// 1/sqrt(D) for ringnorm.
    double offset() const {
        const double s = std::sqrt(static_cast<double>(dimension));
        return kind == SyntheticKind::ringnorm ? 1.0 / s : 2.0 / s;
    }
};

/// n i.i.d. draws; the class is a fair coin.
///
///   twonorm:   +1 ~ N(a*1, I),                       -1 ~ N(-a*1, I)
///   threenorm: +1 ~ 1/2 N(a*1, I) + 1/2 N(-a*1, I),  -1 ~ N((a,-a,a,...), I)
///   ringnorm:  +1 ~ N(0, 4I),                        -1 ~ N(a*1, I)
inline Dataset gen_synthetic(const SyntheticTask& task, std::size_t n, RandomSource& rng) {
    if (n == 0) throw DomainError("gen_synthetic: n must be at least 1");
    if (task.dimension == 0) throw DomainError("gen_synthetic: dimension must be at least 1");
    const std::size_t d = task.dimension;
    const double a = task.offset();
    std::vector<double> x;
    std::vector<Label> y;
    x.reserve(n * d);
    y.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Label c = rng.coin() ? 1 : -1;
        y.push_back(c);
        switch (task.kind) {
            case SyntheticKind::twonorm:
                for (std::size_t j = 0; j < d; ++j) x.push_back(c * a + rng.normal());
                break;
            case SyntheticKind::threenorm:
                if (c == 1) {
                    const double m = rng.coin() ? a : -a;
                    for (std::size_t j = 0; j < d; ++j) x.push_back(m + rng.normal());
                } else {
                    for (std::size_t j = 0; j < d; ++j) x.push_back((j % 2 == 0 ? a : -a) + rng.normal());
                }
                break;
            case SyntheticKind::ringnorm:
                if (c == 1) {
                    for (std::size_t j = 0; j < d; ++j) x.push_back(2.0 * rng.normal());
                } else {
                    for (std::size_t j = 0; j < d; ++j) x.push_back(a + rng.normal());
                }
                break;
        }
    }
    return Dataset(d, std::move(x), std::move(y));
}

/// Record of the generator constants, written next to generated data.
inline nlohmann::json generator_manifest(const SyntheticTask& task, std::uint64_t seed) {
    nlohmann::json constants;
    const double a = task.offset();
    switch (task.kind) {
        case SyntheticKind::twonorm:
            constants = {{"a", a}, {"positive_mean", "a*1"}, {"negative_mean", "-a*1"},
                         {"covariance", "I"}, {"reference", "Breiman (1996) twonorm, a = 2/sqrt(D)"}};
            break;
        case SyntheticKind::threenorm:
            constants = {{"a", a},
                         {"positive_mean", "equal mixture of a*1 and -a*1"},
                         {"negative_mean", "(a,-a,a,-a,...)"},
                         {"covariance", "I"},
                         {"reference", "Breiman (1996) threenorm, a = 2/sqrt(D)"}};
            break;
        case SyntheticKind::ringnorm:
            constants = {{"a", a},
                         {"positive_mean", "0"},
                         {"positive_covariance", "4I"},
                         {"negative_mean", "a*1"},
                         {"negative_covariance", "I"},
                         {"reference", "Breiman (1996) ringnorm, a = 1/sqrt(D)"}};
            break;
    }
    return {{"kind", to_string(task.kind)}, {"dimension", task.dimension},
            {"constants", constants}, {"seed", seed}};
}

// ---------------------------------------------------------------------------
// Splitting and resampling

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

inline std::size_t round_half_up(double v) { return static_cast<std::size_t>(std::floor(v + 0.5)); }

/// Per class c, round(train_fraction * n_c) instances go to the training part.
/// Both index lists are returned in ascending order.
inline SplitIndices stratified_split_indices(const Dataset& data, double train_fraction,
                                             RandomSource& rng) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw DomainError("train_fraction must lie in (0, 1)");
    SplitIndices out;
    for (Label c : {-1, 1}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < data.size(); ++i)
            if (data.label(i) == c) members.push_back(i);
        if (members.empty()) throw DomainError("stratified_split: a class has no instances");
        std::shuffle(members.begin(), members.end(), rng.engine());
        const std::size_t n_train = round_half_up(train_fraction * static_cast<double>(members.size()));
        if (n_train == 0) throw DomainError("stratified_split: a class would get no training instances");
        out.train.insert(out.train.end(), members.begin(), members.begin() + std::min(n_train, members.size()));
        if (n_train < members.size()) out.test.insert(out.test.end(), members.begin() + n_train, members.end());
    }
    if (out.test.empty()) throw DomainError("stratified_split: test set would be empty");
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

inline std::pair<Dataset, Dataset> stratified_split(const Dataset& data, double train_fraction,
                                                    RandomSource& rng) {
    auto idx = stratified_split_indices(data, train_fraction, rng);
    return {data.subset(idx.train), data.subset(idx.test)};
}

/// m draws with replacement; index i has probability w[i].
inline std::vector<std::size_t> resample_indices(const WeightVector& w, std::size_t m, RandomSource& rng) {
    if (m == 0) throw DomainError("resample size must be at least 1");
    const std::size_t n = w.size();
    std::vector<double> cdf(n);
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += w[i];
        cdf[i] = acc;
        if (w[i] > 0.0) last_positive = i;
    }
    if (!(acc > 0.0)) throw DomainError("all-zero weight vector");
    std::vector<std::size_t> out(m);
    for (auto& o : out) {
        const double u = rng.uniform() * acc;
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        o = it == cdf.end() ? last_positive : static_cast<std::size_t>(it - cdf.begin());
    }
    return out;
}

inline Dataset weighted_resample(const Dataset& data, const WeightVector& w, std::size_t m,
                                 RandomSource& rng) {
    if (w.size() != data.size()) throw DomainError("weight vector length differs from dataset size");
    auto idx = resample_indices(w, m, rng);
    return data.subset(idx);
}

/// Overload for raw (unnormalized) masses.
inline Dataset weighted_resample(const Dataset& data, std::span<const double> masses, std::size_t m,
                                 RandomSource& rng) {
    return weighted_resample(data, WeightVector::from_masses({masses.begin(), masses.end()}), m, rng);
}

// ---------------------------------------------------------------------------
// Label noise

struct NoisyDataset {
    Dataset data;
    std::vector<std::size_t> flipped;  // ascending
};

/// Negates the labels of exactly round(rate * N) distinct, uniformly chosen instances.
inline NoisyDataset inject_label_noise(const Dataset& data, double rate, RandomSource& rng) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw DomainError("noise rate must lie in [0, 1]");
    const std::size_t n = data.size();
    const std::size_t k = std::min(n, round_half_up(rate * static_cast<double>(n)));
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + rng.below(n - i);
        std::swap(perm[i], perm[j]);
    }
    std::vector<std::size_t> flipped(perm.begin(), perm.begin() + k);
    std::sort(flipped.begin(), flipped.end());
    auto y = data.labels();
    for (auto i : flipped) y[i] = -y[i];
    return {data.with_labels(std::move(y)), std::move(flipped)};
}

}  // namespace voteboost
