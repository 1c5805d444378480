#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <json.hpp>

#include "voteboost/dataset.hpp"

namespace voteboost {

/// One node of a binary decision tree. `feature < 0` marks a leaf.
/// Internal nodes also carry the weighted-majority label of their training
/// instances, which pruning uses when collapsing them.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    Label label = 1;

    bool is_leaf() const { return feature < 0; }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Axis-aligned binary classification tree; node 0 is the root and
/// an instance goes left when x[feature] <= threshold.
class TreeModel {
public:
    TreeModel() = default;
    TreeModel(std::size_t dim, std::vector<TreeNode> nodes) : dim_(dim), nodes_(std::move(nodes)) {
        validate();
    }

    static TreeModel leaf(std::size_t dim, Label label) { return TreeModel(dim, {TreeNode{-1, 0.0, -1, -1, label}}); }

    std::size_t dim() const { return dim_; }
    const std::vector<TreeNode>& nodes() const { return nodes_; }
    const TreeNode& node(std::size_t i) const { return nodes_[i]; }
    std::size_t size() const { return nodes_.size(); }

    std::size_t leaf_count() const {
        return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
    }

    std::size_t depth() const { return depth_from(0); }

    /// Index of the leaf reached by x.
    std::size_t route(std::span<const double> x) const {
        if (x.size() != dim_) throw DomainError("tree_predict: attribute vector has wrong dimension");
        std::size_t i = 0;
        while (!nodes_[i].is_leaf()) {
            const auto& n = nodes_[i];
            i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
        }
        return i;
    }

    Label predict(std::span<const double> x) const { return nodes_[route(x)].label; }

    friend bool operator==(const TreeModel&, const TreeModel&) = default;

private:
    std::size_t depth_from(std::size_t i) const {
        const auto& n = nodes_[i];
        if (n.is_leaf()) return 0;
        return 1 + std::max(depth_from(static_cast<std::size_t>(n.left)), depth_from(static_cast<std::size_t>(n.right)));
    }

    void validate() const {
        if (nodes_.empty()) throw DomainError("tree needs at least one node");
        std::vector<int> parents(nodes_.size(), 0);
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const auto& n = nodes_[i];
            if (n.label != 1 && n.label != -1) throw DomainError("tree node label must be -1 or +1");
            if (n.is_leaf()) continue;
            if (static_cast<std::size_t>(n.feature) >= dim_) throw DomainError("tree split feature out of range");
            if (!std::isfinite(n.threshold)) throw DomainError("tree threshold must be finite");
            for (int c : {n.left, n.right}) {
                if (c <= static_cast<int>(i) || static_cast<std::size_t>(c) >= nodes_.size())
                    throw DomainError("tree child links must point forward to existing nodes");
                ++parents[static_cast<std::size_t>(c)];
            }
        }
        if (parents[0] != 0) throw DomainError("tree root must have no parent");
        for (std::size_t i = 1; i < nodes_.size(); ++i)
            if (parents[i] != 1) throw DomainError("every non-root tree node needs exactly one parent");
    }

    std::size_t dim_ = 0;
    std::vector<TreeNode> nodes_;
};

inline Label tree_predict(const TreeModel& tree, std::span<const double> x) { return tree.predict(x); }

inline std::vector<Label> tree_predict_all(const TreeModel& tree, const Dataset& data) {
    std::vector<Label> out(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out[i] = tree.predict(data.row(i));
    return out;
}

/// JSON array of nodes linked by index.
inline nlohmann::json to_json(const TreeModel& tree) {
    auto out = nlohmann::json::array();
    for (const auto& n : tree.nodes()) {
        if (n.is_leaf())
            out.push_back({{"leaf", n.label}});
        else
            out.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left},
                           {"right", n.right}, {"label", n.label}});
    }
    return out;
}

inline TreeModel tree_from_json(const nlohmann::json& j, std::size_t dim) {
    if (!j.is_array()) throw DomainError("tree JSON must be an array of nodes");
    std::vector<TreeNode> nodes;
    nodes.reserve(j.size());
    for (const auto& e : j) {
        TreeNode n;
        if (e.contains("leaf")) {
            n.label = e.at("leaf").get<int>();
        } else {
            n.feature = e.at("feature").get<int>();
            n.threshold = e.at("threshold").get<double>();
            n.left = e.at("left").get<int>();
            n.right = e.at("right").get<int>();
            n.label = e.at("label").get<int>();
        }
        nodes.push_back(n);
    }
    return TreeModel(dim, std::move(nodes));
}

}  // namespace voteboost
