#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "voteboost/data.hpp"
#include "voteboost/ensembles.hpp"
#include "voteboost/stats.hpp"

namespace voteboost {

/// Fraction of instances whose ensemble label differs from the true label.
inline double test_error(const Ensemble& ens, const Dataset& data) {
    if (data.size() == 0) throw DomainError("test_error: empty dataset");
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < data.size(); ++i) wrong += predict_ensemble(ens, data.row(i)).label != data.label(i);
    return static_cast<double>(wrong) / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------
// Shape selection by cross-validation

/// Symmetric shape values a = b, strictly increasing and positive.
class ShapeGrid {
public:
    ShapeGrid() : ShapeGrid(std::vector<double>{0.25, 0.5, 0.75, 1, 1.25, 1.5, 2.5, 5, 10, 20, 40}) {}
    explicit ShapeGrid(std::vector<double> values) : values_(std::move(values)) {
        if (values_.empty()) throw DomainError("shape grid must be nonempty");
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!(values_[i] > 0.0) || !std::isfinite(values_[i])) throw DomainError("shape values must be positive");
            if (i > 0 && !(values_[i] > values_[i - 1])) throw DomainError("shape grid must be strictly increasing");
        }
    }
    const std::vector<double>& values() const { return values_; }
    std::size_t size() const { return values_.size(); }

private:
    std::vector<double> values_;
};

/// Stratified fold labels: each class is shuffled and dealt round-robin.
inline std::vector<std::size_t> stratified_folds(const Dataset& data, std::size_t folds, RandomSource& rng) {
    if (folds < 2) throw DomainError("need at least two folds");
    std::vector<std::size_t> fold(data.size());
    for (Label c : {-1, 1}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < data.size(); ++i)
            if (data.label(i) == c) members.push_back(i);
        if (members.size() < folds) throw DomainError("a class has fewer instances than folds; cannot stratify");
        std::shuffle(members.begin(), members.end(), rng.engine());
        for (std::size_t k = 0; k < members.size(); ++k) fold[members[k]] = k % folds;
    }
    return fold;
}

struct ShapeSelection {
    BetaParams params;
    std::vector<double> cv_errors;  // mean validation error per grid value
};

/// Called once per (fold, grid index) with the rows used for training and validation.
using FoldObserver = std::function<void(std::size_t fold, std::size_t grid_index, const std::vector<std::size_t>& train,
                                        const std::vector<std::size_t>& validation)>;

/// k-fold stratified CV of vote-boosting over the grid; ties go to the
/// smallest value. Fold assignment draws from cfg.rng.derive(0); the
/// ensembles of fold f use cfg.rng.derive(f + 1) for every grid value.
inline ShapeSelection cv_select_shape(const Dataset& data, const ShapeGrid& grid, std::size_t folds,
                                      const TrainConfig& cfg, const FoldObserver& observer = {}) {
    if (grid.size() == 1) return {BetaParams::symmetric(grid.values()[0]), {}};
    RandomSource assign = cfg.rng.derive(0);
    const auto fold = stratified_folds(data, folds, assign);

    std::vector<double> cv(grid.size(), 0.0);
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::size_t> tr, va;
        for (std::size_t i = 0; i < data.size(); ++i) (fold[i] == f ? va : tr).push_back(i);
        const Dataset train = data.subset(tr), valid = data.subset(va);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            if (observer) observer(f, g, tr, va);
            TrainConfig c = cfg;
            c.emphasis = BetaParams::symmetric(grid.values()[g]);
            c.rng = cfg.rng.derive(f + 1);
            cv[g] += test_error(train_vote_boost(train, c), valid);
        }
    }
    for (auto& e : cv) e /= static_cast<double>(folds);
    std::size_t best = 0;
    for (std::size_t g = 1; g < grid.size(); ++g)
        if (cv[g] < cv[best] - 1e-12) best = g;
    return {BetaParams::symmetric(grid.values()[best]), std::move(cv)};
}

// ---------------------------------------------------------------------------
// Prefix evaluation

namespace detail {

// predictions[tau][i] for every member on every instance
inline std::vector<std::vector<Label>> member_predictions(const Ensemble& ens, const Dataset& data) {
    std::vector<std::vector<Label>> out;
    out.reserve(ens.size());
    for (const auto& m : ens.members) out.push_back(tree_predict_all(m, data));
    return out;
}

// Labels of the k-member prefix, using exactly the arithmetic of predict_ensemble.
inline std::vector<Label> prefix_labels(const Ensemble& ens, const std::vector<std::vector<Label>>& pred, std::size_t k) {
    const std::size_t n = pred.front().size();
    std::vector<Label> out(n);
    if (ens.uniform_vote()) {
        for (std::size_t i = 0; i < n; ++i) {
            long plus = 0;
            for (std::size_t t = 0; t < k; ++t) plus += pred[t][i] > 0;
            out[i] = 2 * plus - static_cast<long>(k) >= 0 ? 1 : -1;
        }
        return out;
    }
    const Ensemble p = k == ens.size() ? ens : prefix(ens, k);
    for (std::size_t i = 0; i < n; ++i) {
        double score = 0.0;
        for (std::size_t t = 0; t < k; ++t) score += p.member_weights[t] * pred[t][i];
        out[i] = score >= 0.0 ? 1 : -1;
    }
    return out;
}

inline double error_of(const std::vector<Label>& labels, const Dataset& data) {
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < data.size(); ++i) wrong += labels[i] != data.label(i);
    return static_cast<double>(wrong) / static_cast<double>(data.size());
}

inline void check_checkpoints(const std::vector<std::size_t>& checkpoints, std::size_t T) {
    if (checkpoints.empty()) throw DomainError("need at least one checkpoint");
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
        if (checkpoints[i] < 1 || checkpoints[i] > T) throw DomainError("checkpoints must lie in [1, T]");
        if (i > 0 && checkpoints[i] <= checkpoints[i - 1]) throw DomainError("checkpoints must be strictly increasing");
    }
}

}  // namespace detail

struct CurvePoint {
    std::size_t size;
    double train_error;
    double test_error;
};

/// Errors of the prefix ensembles of an already trained ensemble.
inline std::vector<CurvePoint> prefix_curve(const Ensemble& ens, const Dataset& train, const Dataset& test,
                                            const std::vector<std::size_t>& checkpoints) {
    detail::check_checkpoints(checkpoints, ens.size());
    const auto ptr = detail::member_predictions(ens, train);
    const auto pte = detail::member_predictions(ens, test);
    std::vector<CurvePoint> out;
    for (auto k : checkpoints)
        out.push_back({k, detail::error_of(detail::prefix_labels(ens, ptr, k), train),
                       detail::error_of(detail::prefix_labels(ens, pte, k), test)});
    return out;
}

/// Trains once to the largest checkpoint and records prefix errors.
inline std::vector<CurvePoint> learning_curve(EnsembleKind kind, const TrainConfig& cfg, const Dataset& train,
                                              const Dataset& test, const std::vector<std::size_t>& checkpoints) {
    detail::check_checkpoints(checkpoints, cfg.T);
    TrainConfig c = cfg;
    c.T = checkpoints.back();
    return prefix_curve(train_ensemble(kind, train, c), train, test, checkpoints);
}

// ---------------------------------------------------------------------------
// Vote-fraction histograms

struct HistogramRow {
    std::size_t checkpoint;
    double bin_low;
    double bin_high;
    std::size_t correct;
    std::size_t incorrect;
};

/// Raw vote fractions of every prefix, binned on [0, 1] (last bin closed)
/// and split by whether that prefix classifies the instance correctly.
inline std::vector<HistogramRow> vote_histogram(const Ensemble& ens, const std::vector<std::size_t>& checkpoints,
                                                const Dataset& data, std::size_t bins) {
    if (bins < 2) throw DomainError("need at least two bins");
    detail::check_checkpoints(checkpoints, ens.size());
    const auto pred = detail::member_predictions(ens, data);
    std::vector<HistogramRow> out;
    for (auto k : checkpoints) {
        const auto labels = detail::prefix_labels(ens, pred, k);
        std::vector<std::size_t> good(bins, 0), bad(bins, 0);
        for (std::size_t i = 0; i < data.size(); ++i) {
            std::size_t plus = 0;
            for (std::size_t t = 0; t < k; ++t) plus += pred[t][i] > 0;
            const double frac = static_cast<double>(plus) / static_cast<double>(k);
            const auto b = std::min(bins - 1, static_cast<std::size_t>(frac * static_cast<double>(bins)));
            (labels[i] == data.label(i) ? good : bad)[b]++;
        }
        for (std::size_t b = 0; b < bins; ++b)
            out.push_back({k, static_cast<double>(b) / static_cast<double>(bins),
                           static_cast<double>(b + 1) / static_cast<double>(bins), good[b], bad[b]});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Weight-rank comparison with AdaBoost

/// Ranks 1..n by ascending value; ties are ordered by a random permutation.
inline std::vector<std::size_t> randomized_ranks(std::span<const double> v, RandomSource& rng) {
    std::vector<std::size_t> key(v.size());
    std::iota(key.begin(), key.end(), std::size_t{0});
    std::shuffle(key.begin(), key.end(), rng.engine());
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return v[a] < v[b] || (v[a] == v[b] && key[a] < key[b]);
    });
    std::vector<std::size_t> rank(v.size());
    for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r + 1;
    return rank;
}

struct WeightRankRow {
    std::size_t instance;
    std::size_t vb_rank;
    std::size_t ada_rank;
    bool flipped;
};

struct ShapeWeightRanks {
    double shape;
    std::vector<WeightRankRow> rows;
    double rho;
    std::vector<double> vb_weights;
};

struct WeightRankResult {
    std::vector<double> ada_weights;
    std::vector<ShapeWeightRanks> shapes;
};

/// Final instance weights of AdaBoost (stumps) and of vote-boosting (stumps)
/// for each shape a = b, ranked with randomized tie-breaking, plus the
/// Spearman correlation of the two rankings per shape.
///
/// Streams: AdaBoost uses rng.derive(0), shape s uses rng.derive(s + 1) for
/// training and rng.derive({s + 1, 1}) for its tie-breaking; AdaBoost ranks
/// break ties with rng.derive({0, 1}).
inline WeightRankResult weight_rank_experiment(const Dataset& data, const std::vector<double>& shapes, std::size_t T,
                                               const RandomSource& rng, const std::vector<std::size_t>& flipped = {}) {
    if (shapes.empty()) throw DomainError("weight_rank_experiment: need at least one shape");
    std::vector<bool> is_flipped(data.size(), false);
    for (auto i : flipped) {
        if (i >= data.size()) throw DomainError("flipped index out of range");
        is_flipped[i] = true;
    }
    TrainConfig cfg;
    cfg.T = T;
    cfg.base_spec.kind = LearnerKind::stump;

    WeightRankResult out;
    TrainTrace ada_trace;
    cfg.rng = rng.derive(0);
    train_adaboost(data, cfg, &ada_trace);
    out.ada_weights.assign(ada_trace.final_weights->values().begin(), ada_trace.final_weights->values().end());
    RandomSource ada_ties = rng.derive({0, 1});
    const auto ada_rank = randomized_ranks(out.ada_weights, ada_ties);

    for (std::size_t s = 0; s < shapes.size(); ++s) {
        TrainTrace trace;
        cfg.rng = rng.derive(s + 1);
        cfg.emphasis = BetaParams::symmetric(shapes[s]);
        train_vote_boost(data, cfg, &trace);
        ShapeWeightRanks sr;
        sr.shape = shapes[s];
        sr.vb_weights.assign(trace.final_weights->values().begin(), trace.final_weights->values().end());
        RandomSource ties = rng.derive({s + 1, 1});
        const auto vb_rank = randomized_ranks(sr.vb_weights, ties);
        std::vector<double> xr(data.size()), yr(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            sr.rows.push_back({i, vb_rank[i], ada_rank[i], is_flipped[i]});
            xr[i] = static_cast<double>(vb_rank[i]);
            yr[i] = static_cast<double>(ada_rank[i]);
        }
        sr.rho = spearman_rho(xr, yr);
        out.shapes.push_back(std::move(sr));
    }
    return out;
}

}  // namespace voteboost
