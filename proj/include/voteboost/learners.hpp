#pragma once

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "voteboost/dataset.hpp"
#include "voteboost/random.hpp"
#include "voteboost/tree.hpp"

namespace voteboost {

enum class LearnerKind { stump, cart_pruned, cart_unpruned, random_tree };

inline std::string to_string(LearnerKind k) {
    switch (k) {
        case LearnerKind::stump: return "stump";
        case LearnerKind::cart_pruned: return "cart_pruned";
        case LearnerKind::cart_unpruned: return "cart_unpruned";
        case LearnerKind::random_tree: return "random_tree";
    }
    return "?";
}

inline std::optional<LearnerKind> parse_learner_kind(std::string_view s) {
    if (s == "stump") return LearnerKind::stump;
    if (s == "cart_pruned") return LearnerKind::cart_pruned;
    if (s == "cart_unpruned") return LearnerKind::cart_unpruned;
    if (s == "random_tree") return LearnerKind::random_tree;
    return std::nullopt;
}

struct LearnerSpec {
    LearnerKind kind = LearnerKind::cart_unpruned;
    std::size_t min_split = 2;
    std::size_t k_features = 0;  // random_tree only; 0 means ceil(sqrt(D))
    std::size_t prune_folds = 10;

    std::size_t features_for(std::size_t dim) const {
        std::size_t k = k_features;
        if (k == 0) k = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(dim))));
        if (k < 1 || k > dim) throw DomainError("k_features must lie in [1, D]");
        return k;
    }

    void validate() const {
        if (min_split < 2) throw DomainError("min_split must be at least 2");
        if (kind == LearnerKind::cart_pruned && prune_folds < 2) throw DomainError("prune_folds must be at least 2");
    }

    friend bool operator==(const LearnerSpec&, const LearnerSpec&) = default;
};

/// Row order of every feature column, sorted by (value, row).
/// Computed once per training set and shared by all trees grown on it.
class ColumnOrder {
public:
    explicit ColumnOrder(const Dataset& data) : order_(data.dim()) {
        for (std::size_t f = 0; f < data.dim(); ++f) {
            auto& o = order_[f];
            o.resize(data.size());
            std::iota(o.begin(), o.end(), std::uint32_t{0});
            std::sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) {
                const double xa = data.at(a, f), xb = data.at(b, f);
                return xa < xb || (xa == xb && a < b);
            });
        }
    }
    std::span<const std::uint32_t> column(std::size_t f) const { return order_[f]; }

private:
    std::vector<std::vector<std::uint32_t>> order_;
};

/// Per-row training mass and instance multiplicity.
///
/// Training on a resample is expressed as training on the original rows with
/// their draw counts as both weight and multiplicity; multiplicity is what
/// min_split counts. Rows with zero weight are ignored.
struct TrainingView {
    std::span<const double> weights;
    std::span<const std::uint32_t> multiplicity;  // empty: one per row
    const ColumnOrder* order = nullptr;           // optional presorted columns

    std::uint32_t count(std::size_t i) const { return multiplicity.empty() ? 1u : multiplicity[i]; }
};

namespace detail {

// Weighted majority; near-equal masses count as a tie and go to +1.
inline Label majority(double pos, double neg) {
    return pos >= neg || std::abs(pos - neg) <= 1e-12 * (pos + neg) ? 1 : -1;
}

// Weighted Gini impurity scaled by node weight: W - (P^2 + N^2) / W.
inline double scaled_gini(double pos, double neg) {
    const double w = pos + neg;
    return w > 0.0 ? w - (pos * pos + neg * neg) / w : 0.0;
}

inline void check_weights(const Dataset& data, const WeightVector& w) {
    if (w.size() != data.size()) throw DomainError("weight vector length differs from dataset size");
}

inline void check_view(const Dataset& data, const TrainingView& v) {
    if (v.weights.size() != data.size()) throw DomainError("weight vector length differs from dataset size");
    if (!v.multiplicity.empty() && v.multiplicity.size() != data.size())
        throw DomainError("multiplicity length differs from dataset size");
}

/// Recursive Gini tree grower shared by CART and random trees.
/// `choose` returns the ascending list of features searched at a node.
///
/// Every feature column is sorted once; a node owns the same index range in
/// all columns and splitting stably partitions that range.
template <class FeatureChooser>
class GiniGrower {
public:
    GiniGrower(const Dataset& data, const TrainingView& view, std::size_t min_split, FeatureChooser& choose)
        : data_(data), view_(view), w_(view.weights), min_split_(min_split), choose_(choose) {}

    TreeModel grow() {
        const std::size_t d = data_.dim();
        cols_.assign(d, {});
        if (view_.order) {
            for (std::size_t f = 0; f < d; ++f) {
                auto& c = cols_[f];
                for (auto r : view_.order->column(f))
                    if (w_[r] > 0.0) c.push_back({data_.at(r, f), r});
            }
        } else {
            for (std::size_t f = 0; f < d; ++f) {
                auto& c = cols_[f];
                for (std::size_t i = 0; i < data_.size(); ++i)
                    if (w_[i] > 0.0) c.push_back({data_.at(i, f), static_cast<std::uint32_t>(i)});
                std::sort(c.begin(), c.end(), [](const Entry& a, const Entry& b) { return a.x < b.x || (a.x == b.x && a.row < b.row); });
            }
        }
        if (cols_[0].empty()) throw DomainError("cannot grow a tree with all-zero weights");
        goes_left_.assign(data_.size(), 0);
        tmp_.resize(cols_[0].size());
        build(0, cols_[0].size());
        return TreeModel(d, std::move(nodes_));
    }

    static double midpoint(double lo, double hi) {
        const double m = lo + 0.5 * (hi - lo);
        return m < hi ? m : lo;
    }

private:
    struct Entry {
        double x;
        std::uint32_t row;
    };

    int build(std::size_t begin, std::size_t end) {
        double pos = 0.0, neg = 0.0;
        std::size_t instances = 0;
        for (std::size_t k = begin; k < end; ++k) {
            const auto r = cols_[0][k].row;
            (data_.label(r) > 0 ? pos : neg) += w_[r];
            instances += view_.count(r);
        }
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back(TreeNode{-1, 0.0, -1, -1, majority(pos, neg)});
        if (pos == 0.0 || neg == 0.0 || instances < min_split_) return id;

        const auto features = choose_(static_cast<std::size_t>(id), data_.dim());
        const double parent = scaled_gini(pos, neg);
        const double tol = 1e-12 * (pos + neg);
        double best = -std::numeric_limits<double>::infinity();
        int best_feature = -1;
        std::size_t best_cut = 0;  // last index going left

        for (std::size_t f : features) {
            const auto& c = cols_[f];
            if (!(c[begin].x < c[end - 1].x)) continue;
            double lp = 0.0, ln = 0.0;
            for (std::size_t k = begin; k + 1 < end; ++k) {
                const auto r = c[k].row;
                (data_.label(r) > 0 ? lp : ln) += w_[r];
                if (!(c[k].x < c[k + 1].x)) continue;
                const double dec = parent - scaled_gini(lp, ln) - scaled_gini(pos - lp, neg - ln);
                if (dec > best + tol) {
                    best = dec;
                    best_feature = static_cast<int>(f);
                    best_cut = k;
                }
            }
        }
        if (best_feature < 0) return id;

        const auto& bc = cols_[static_cast<std::size_t>(best_feature)];
        const double threshold = midpoint(bc[best_cut].x, bc[best_cut + 1].x);
        for (std::size_t k = begin; k < end; ++k) goes_left_[bc[k].row] = k <= best_cut;
        for (std::size_t f = 0; f < cols_.size(); ++f) {
            if (f == static_cast<std::size_t>(best_feature)) continue;
            auto& c = cols_[f];
            std::size_t l = begin, r = 0;
            for (std::size_t k = begin; k < end; ++k) {
                if (goes_left_[c[k].row])
                    c[l++] = c[k];
                else
                    tmp_[r++] = c[k];
            }
            std::copy(tmp_.begin(), tmp_.begin() + static_cast<std::ptrdiff_t>(r), c.begin() + static_cast<std::ptrdiff_t>(l));
        }
        const std::size_t mid = best_cut + 1;
        nodes_[static_cast<std::size_t>(id)].feature = best_feature;
        nodes_[static_cast<std::size_t>(id)].threshold = threshold;
        const int left = build(begin, mid);
        nodes_[static_cast<std::size_t>(id)].left = left;
        const int right = build(mid, end);
        nodes_[static_cast<std::size_t>(id)].right = right;
        return id;
    }

    const Dataset& data_;
    const TrainingView& view_;
    std::span<const double> w_;
    std::size_t min_split_;
    FeatureChooser& choose_;
    std::vector<TreeNode> nodes_;
    std::vector<std::vector<Entry>> cols_;
    std::vector<char> goes_left_;
    std::vector<Entry> tmp_;
};

struct AllFeatures {
    std::vector<std::size_t> operator()(std::size_t, std::size_t dim) const {
        std::vector<std::size_t> f(dim);
        std::iota(f.begin(), f.end(), std::size_t{0});
        return f;
    }
};

inline TreeModel stump(const Dataset& data, std::span<const double> w, const ColumnOrder* order);
inline TreeModel cart(const Dataset& data, const TrainingView& view, const LearnerSpec& spec) {
    spec.validate();
    AllFeatures all;
    return GiniGrower<AllFeatures>(data, view, spec.min_split, all).grow();
}

inline TreeModel random_tree(const Dataset& data, const TrainingView& view, const LearnerSpec& spec, RandomSource& rng,
                             std::vector<std::vector<std::size_t>>* sampled) {
    spec.validate();
    const std::size_t k = spec.features_for(data.dim());
    std::vector<std::size_t> pool(data.dim());
    auto choose = [&](std::size_t node, std::size_t dim) {
        std::iota(pool.begin(), pool.end(), std::size_t{0});
        for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng.below(dim - i)]);
        std::vector<std::size_t> subset(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
        std::sort(subset.begin(), subset.end());
        if (sampled) {
            if (sampled->size() <= node) sampled->resize(node + 1);
            (*sampled)[node] = subset;
        }
        return subset;
    };
    return GiniGrower<decltype(choose)>(data, view, spec.min_split, choose).grow();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Decision stump

namespace detail {

inline TreeModel stump(const Dataset& data, std::span<const double> w, const ColumnOrder* order) {
    double pos = 0.0, neg = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) (data.label(i) > 0 ? pos : neg) += w[i];
    const Label constant = majority(pos, neg);
    double best = constant > 0 ? neg : pos;
    const double tol = 1e-12 * (pos + neg);

    int best_feature = -1;
    double best_threshold = 0.0;
    Label best_left = constant;

    std::vector<std::uint32_t> sorted;
    for (std::size_t f = 0; f < data.dim(); ++f) {
        std::span<const std::uint32_t> col;
        if (order) {
            col = order->column(f);
        } else {
            sorted.resize(data.size());
            std::iota(sorted.begin(), sorted.end(), std::uint32_t{0});
            std::sort(sorted.begin(), sorted.end(), [&](std::uint32_t a, std::uint32_t b) {
                const double xa = data.at(a, f), xb = data.at(b, f);
                return xa < xb || (xa == xb && a < b);
            });
            col = sorted;
        }
        double lp = 0.0, ln = 0.0;
        std::size_t prev = col.size();  // last row with positive weight
        for (auto r : col) {
            if (!(w[r] > 0.0)) continue;
            if (prev != col.size()) {
                const double x0 = data.at(prev, f), x1 = data.at(r, f);
                if (x0 < x1) {
                    // left -1 / right +1 misclassifies left positives and right negatives
                    const double err_neg_left = lp + (neg - ln);
                    const double err_pos_left = ln + (pos - lp);
                    for (Label left : {-1, 1}) {
                        const double err = left < 0 ? err_neg_left : err_pos_left;
                        if (err < best - tol) {
                            best = err;
                            best_feature = static_cast<int>(f);
                            best_threshold = GiniGrower<AllFeatures>::midpoint(x0, x1);
                            best_left = left;
                        }
                    }
                }
            }
            (data.label(r) > 0 ? lp : ln) += w[r];
            prev = r;
        }
    }
    if (best_feature < 0) return TreeModel::leaf(data.dim(), constant);
    return TreeModel(data.dim(), {TreeNode{best_feature, best_threshold, 1, 2, constant}, TreeNode{-1, 0.0, -1, -1, best_left},
                                  TreeNode{-1, 0.0, -1, -1, static_cast<Label>(-best_left)}});
}

}  // namespace detail

/// Depth-one tree minimizing weighted 0/1 training error.
///
/// Candidates are the constant majority leaf and every (feature, midpoint
/// threshold, orientation) split with opposite leaf labels. A split replaces
/// the incumbent only when strictly better, so ties go to the constant model,
/// then the lowest feature, then the lowest threshold, then left = -1.
inline TreeModel train_stump(const Dataset& data, const WeightVector& w) {
    detail::check_weights(data, w);
    return detail::stump(data, w.values(), nullptr);
}

// ---------------------------------------------------------------------------
// CART

/// Recursive binary splitting by the largest weighted Gini decrease.
///
/// A node becomes a leaf when it is pure, holds fewer than min_split
/// instances with positive weight, or no threshold separates its instances.
/// Leaf label is the weighted majority with ties to +1.
inline TreeModel train_cart(const Dataset& data, const WeightVector& w, const LearnerSpec& spec) {
    detail::check_weights(data, w);
    return detail::cart(data, TrainingView{w.values(), {}, nullptr}, spec);
}

/// Like train_cart, but each node searches only k features drawn without
/// replacement. When `sampled` is given it receives the subset used at each
/// node index.
inline TreeModel train_random_tree(const Dataset& data, const WeightVector& w, const LearnerSpec& spec,
                                   RandomSource& rng,
                                   std::vector<std::vector<std::size_t>>* sampled = nullptr) {
    detail::check_weights(data, w);
    return detail::random_tree(data, TrainingView{w.values(), {}, nullptr}, spec, rng, sampled);
}

// ---------------------------------------------------------------------------
// Minimal cost-complexity pruning

/// Keeps the nodes of `tree` reachable without passing a collapsed node;
/// collapsed nodes become leaves with their stored majority label.
inline TreeModel collapse(const TreeModel& tree, const std::vector<bool>& collapsed) {
    std::vector<TreeNode> out;
    auto copy = [&](auto&& self, std::size_t i) -> int {
        const auto& n = tree.node(i);
        const int id = static_cast<int>(out.size());
        if (n.is_leaf() || collapsed[i]) {
            out.push_back(TreeNode{-1, 0.0, -1, -1, n.label});
            return id;
        }
        out.push_back(n);
        const int l = self(self, static_cast<std::size_t>(n.left));
        out[static_cast<std::size_t>(id)].left = l;
        const int r = self(self, static_cast<std::size_t>(n.right));
        out[static_cast<std::size_t>(id)].right = r;
        return id;
    };
    copy(copy, 0);
    return TreeModel(tree.dim(), std::move(out));
}

struct PruneStep {
    double alpha;
    TreeModel tree;
};

namespace detail {

// Routes (data, w) through the tree: per-node positive/negative weight.
inline std::pair<std::vector<double>, std::vector<double>> node_masses(const TreeModel& tree, const Dataset& data,
                                                                      std::span<const double> w) {
    std::vector<double> pos(tree.size(), 0.0), neg(tree.size(), 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!(w[i] > 0.0)) continue;
        auto x = data.row(i);
        std::size_t k = 0;
        for (;;) {
            (data.label(i) > 0 ? pos[k] : neg[k]) += w[i];
            const auto& n = tree.node(k);
            if (n.is_leaf()) break;
            k = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
        }
    }
    return {pos, neg};
}

// Relabels every node with the weighted majority of its training mass.
inline TreeModel relabel(const TreeModel& tree, const std::vector<double>& pos, const std::vector<double>& neg) {
    auto nodes = tree.nodes();
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (pos[i] + neg[i] > 0.0) nodes[i].label = majority(pos[i], neg[i]);
    return TreeModel(tree.dim(), std::move(nodes));
}

inline std::vector<PruneStep> weakest_link_sequence(const TreeModel& input, const Dataset& data, std::span<const double> w) {
    auto [pos, neg] = node_masses(input, data, w);
    const TreeModel tree = relabel(input, pos, neg);
    const std::size_t n = tree.size();
    std::vector<double> node_risk(n);
    for (std::size_t i = 0; i < n; ++i) node_risk[i] = tree.node(i).label > 0 ? neg[i] : pos[i];
    double total = 0.0;
    for (double v : w) total += v;
    const double tol = 1e-12 * total;

    std::vector<bool> collapsed(n, false);
    std::vector<PruneStep> seq{{0.0, tree}};
    std::vector<double> sub_risk(n), leaves(n), g(n);
    std::vector<bool> live(n);
    for (;;) {
        // bottom-up: children have larger indices than parents
        for (std::size_t i = n; i-- > 0;) {
            const auto& nd = tree.node(i);
            if (nd.is_leaf() || collapsed[i]) {
                sub_risk[i] = node_risk[i];
                leaves[i] = 1;
                g[i] = std::numeric_limits<double>::infinity();
                continue;
            }
            const auto l = static_cast<std::size_t>(nd.left), r = static_cast<std::size_t>(nd.right);
            sub_risk[i] = sub_risk[l] + sub_risk[r];
            leaves[i] = leaves[l] + leaves[r];
            g[i] = (node_risk[i] - sub_risk[i]) / (leaves[i] - 1.0);
        }
        std::fill(live.begin(), live.end(), false);
        live[0] = true;
        for (std::size_t i = 0; i < n; ++i) {
            if (!live[i] || collapsed[i] || tree.node(i).is_leaf()) continue;
            live[static_cast<std::size_t>(tree.node(i).left)] = true;
            live[static_cast<std::size_t>(tree.node(i).right)] = true;
        }
        double min_g = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i)
            if (live[i]) min_g = std::min(min_g, g[i]);
        if (!std::isfinite(min_g)) break;
        for (std::size_t i = 0; i < n; ++i)
            if (live[i] && g[i] <= min_g + tol) collapsed[i] = true;
        seq.push_back({std::max(0.0, min_g), collapse(tree, collapsed)});
    }
    return seq;
}

inline std::size_t subtree_index(const std::vector<PruneStep>& seq, double alpha, double tol) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < seq.size(); ++i)
        if (seq[i].alpha <= alpha + tol) k = i;
    return k;
}

inline TreeModel prune(const TreeModel& tree, const Dataset& data, const TrainingView& view, const LearnerSpec& spec) {
    const auto w = view.weights;
    const auto seq = weakest_link_sequence(tree, data, w);
    if (seq.size() == 1) return seq.front().tree;
    double total = 0.0;
    for (double v : w) total += v;
    const double tol = 1e-12 * total;

    std::vector<double> penalty(seq.size());
    for (std::size_t k = 0; k + 1 < seq.size(); ++k) penalty[k] = std::sqrt(seq[k].alpha * seq[k + 1].alpha);
    penalty.back() = std::numeric_limits<double>::infinity();

    std::size_t n_pos = 0;
    for (double v : w) n_pos += v > 0.0;
    const std::size_t folds = std::min(spec.prune_folds, n_pos);
    if (folds < 2) return seq.front().tree;
    std::vector<int> fold(w.size(), -1);
    for (std::size_t i = 0, j = 0; i < w.size(); ++i)
        if (w[i] > 0.0) fold[i] = static_cast<int>(j++ % folds);

    std::vector<double> cv_error(seq.size(), 0.0);
    std::vector<double> wf(w.size());
    for (std::size_t f = 0; f < folds; ++f) {
        for (std::size_t i = 0; i < w.size(); ++i) wf[i] = fold[i] == static_cast<int>(f) ? 0.0 : w[i];
        const TrainingView fold_view{wf, view.multiplicity, view.order};
        const auto fold_seq = weakest_link_sequence(cart(data, fold_view, spec), data, wf);
        for (std::size_t k = 0; k < seq.size(); ++k) {
            const auto& sub = fold_seq[subtree_index(fold_seq, penalty[k], tol)].tree;
            for (std::size_t i = 0; i < w.size(); ++i)
                if (fold[i] == static_cast<int>(f) && sub.predict(data.row(i)) != data.label(i)) cv_error[k] += w[i];
        }
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < seq.size(); ++k)
        if (cv_error[k] <= cv_error[best] + tol) best = k;
    return seq[best].tree;
}

inline TreeModel learner(const Dataset& data, const TrainingView& view, const LearnerSpec& spec, RandomSource& rng) {
    switch (spec.kind) {
        case LearnerKind::stump: return stump(data, view.weights, view.order);
        case LearnerKind::cart_unpruned: return cart(data, view, spec);
        case LearnerKind::cart_pruned: return prune(cart(data, view, spec), data, view, spec);
        case LearnerKind::random_tree: return random_tree(data, view, spec, rng, nullptr);
    }
    throw InternalError("unknown learner kind");
}

}  // namespace detail

/// Nested subtree sequence by weakest-link cutting.
///
/// Element 0 is the input tree at alpha = 0. Each following element prunes
/// every internal node whose link strength
///   g(t) = (R(t) - R(T_t)) / (|leaves(T_t)| - 1)
/// equals the current minimum; its alpha is that minimum. The last element is
/// the root leaf. R is the misclassified training weight.
inline std::vector<PruneStep> cost_complexity_sequence(const TreeModel& tree, const Dataset& data, const WeightVector& w) {
    detail::check_weights(data, w);
    return detail::weakest_link_sequence(tree, data, w.values());
}

/// Sequence element selected for penalty alpha (last one with alpha_k <= alpha).
inline std::size_t subtree_for_alpha(const std::vector<PruneStep>& seq, double alpha) {
    return detail::subtree_index(seq, alpha, 1e-12);
}

/// Cross-validated minimal cost-complexity pruning.
///
/// Builds the weakest-link sequence on (data, w); for every element k the
/// penalty sqrt(alpha_k alpha_{k+1}) (infinity for the last) is applied to
/// trees grown on each fold complement, and their misclassified held-out
/// weight is summed. The j-th instance with positive weight belongs to fold
/// j mod prune_folds. Returns the element with the least cross-validated
/// error, preferring the smaller subtree on ties.
inline TreeModel prune_cart(const TreeModel& tree, const Dataset& data, const WeightVector& w, const LearnerSpec& spec) {
    detail::check_weights(data, w);
    spec.validate();
    return detail::prune(tree, data, TrainingView{w.values(), {}, nullptr}, spec);
}

/// Trains the base learner named by spec.kind.
inline TreeModel train_learner(const Dataset& data, const WeightVector& w, const LearnerSpec& spec, RandomSource& rng) {
    detail::check_weights(data, w);
    return detail::learner(data, TrainingView{w.values(), {}, nullptr}, spec, rng);
}

/// Trains on the resample described by per-row draw counts, without
/// materializing it. Equivalent to training on the expanded sample.
inline TreeModel train_learner_on_counts(const Dataset& data, std::span<const std::uint32_t> counts, const LearnerSpec& spec,
                                         RandomSource& rng, const ColumnOrder* order = nullptr) {
    if (counts.size() != data.size()) throw DomainError("count vector length differs from dataset size");
    std::vector<double> w(counts.begin(), counts.end());
    return detail::learner(data, TrainingView{w, counts, order}, spec, rng);
}

}  // namespace voteboost
