#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "voteboost/data.hpp"
#include "voteboost/dataset.hpp"
#include "voteboost/emphasis.hpp"
#include "voteboost/learners.hpp"
#include "voteboost/random.hpp"
#include "voteboost/tree.hpp"

namespace voteboost {

enum class EnsembleKind { vote_boost, bagging, random_forest, adaboost };

inline std::string to_string(EnsembleKind k) {
    switch (k) {
        case EnsembleKind::vote_boost: return "vote_boost";
        case EnsembleKind::bagging: return "bagging";
        case EnsembleKind::random_forest: return "random_forest";
        case EnsembleKind::adaboost: return "adaboost";
    }
    return "?";
}

/// Accepts the canonical names plus the short forms vb, bag, rf, ada.
inline std::optional<EnsembleKind> parse_ensemble_kind(std::string_view s) {
    if (s == "vote_boost" || s == "vb") return EnsembleKind::vote_boost;
    if (s == "bagging" || s == "bag") return EnsembleKind::bagging;
    if (s == "random_forest" || s == "rf") return EnsembleKind::random_forest;
    if (s == "adaboost" || s == "ada") return EnsembleKind::adaboost;
    return std::nullopt;
}

/// Trained ensemble; member_weights are the normalized alphas.
struct Ensemble {
    EnsembleKind kind = EnsembleKind::bagging;
    std::size_t dim = 0;
    LearnerSpec base_spec;
    std::optional<BetaParams> emphasis;
    std::vector<double> member_weights;
    std::vector<TreeModel> members;

    std::size_t size() const { return members.size(); }

    /// Majority-vote ensembles combine members with equal weight.
    bool uniform_vote() const { return kind != EnsembleKind::adaboost; }

    friend bool operator==(const Ensemble&, const Ensemble&) = default;
};

struct TrainConfig {
    std::size_t T = 501;
    LearnerSpec base_spec;
    std::optional<BetaParams> emphasis;
    RandomSource rng;
};

/// Optional diagnostics filled by the trainers.
struct TrainTrace {
    bool record_history = false;
    std::vector<WeightVector> weight_history;  // w^[t+1] after each accepted round
    std::optional<WeightVector> final_weights;
    std::optional<VoteTally> tally;
    std::vector<double> epsilons;  // AdaBoost weighted errors, accepted rounds
    std::size_t resets = 0;
};

namespace detail {

inline void check_config(const Dataset& data, const TrainConfig& cfg) {
    if (cfg.T < 1) throw DomainError("ensemble size T must be at least 1");
    cfg.base_spec.validate();
    if (cfg.base_spec.kind == LearnerKind::random_tree) (void)cfg.base_spec.features_for(data.dim());
}

// One member: draw an N-instance weighted resample from the member's own
// stream, then train on it (as draw counts over the original rows).
inline TreeModel fit_member(const Dataset& data, const WeightVector& w, const LearnerSpec& spec, RandomSource rng,
                            const ColumnOrder& order) {
    const auto idx = resample_indices(w, data.size(), rng);
    std::vector<std::uint32_t> counts(data.size(), 0);
    for (auto i : idx) ++counts[i];
    return train_learner_on_counts(data, counts, spec, rng, &order);
}

inline std::vector<double> uniform_member_weights(std::size_t t) {
    return std::vector<double>(t, 1.0 / static_cast<double>(t));
}

}  // namespace detail

/// Vote-boosting with resampling.
///
/// Round t trains on a weighted resample drawn from stream cfg.rng.derive(t);
/// the positive-vote tally is updated from the new member's predictions on
/// the original training set, and the next weights are recomputed from the
/// whole tally as beta densities of the Laplace-corrected vote fractions.
inline Ensemble train_vote_boost(const Dataset& data, const TrainConfig& cfg, TrainTrace* trace = nullptr) {
    detail::check_config(data, cfg);
    if (!cfg.emphasis) throw DomainError("vote-boosting needs emphasis shape parameters");
    Ensemble ens{EnsembleKind::vote_boost, data.dim(), cfg.base_spec, cfg.emphasis, {}, {}};
    ens.members.reserve(cfg.T);
    const ColumnOrder order(data);
    WeightVector w = WeightVector::uniform(data.size());
    VoteTally tally(data.size());
    for (std::size_t t = 0; t < cfg.T; ++t) {
        ens.members.push_back(detail::fit_member(data, w, cfg.base_spec, cfg.rng.derive(t), order));
        tally.add(tree_predict_all(ens.members.back(), data));
        w = compute_weights(tally, *cfg.emphasis);
        if (trace && trace->record_history) trace->weight_history.push_back(w);
    }
    ens.member_weights = detail::uniform_member_weights(cfg.T);
    if (trace) {
        trace->final_weights = w;
        trace->tally = std::move(tally);
    }
    return ens;
}

/// Bootstrap aggregation: member t is trained on a uniform resample drawn
/// from stream cfg.rng.derive(t).
inline Ensemble train_bagging(const Dataset& data, const TrainConfig& cfg, TrainTrace* trace = nullptr) {
    detail::check_config(data, cfg);
    Ensemble ens{EnsembleKind::bagging, data.dim(), cfg.base_spec, std::nullopt, {}, {}};
    ens.members.reserve(cfg.T);
    const ColumnOrder order(data);
    const WeightVector w = WeightVector::uniform(data.size());
    for (std::size_t t = 0; t < cfg.T; ++t) ens.members.push_back(detail::fit_member(data, w, cfg.base_spec, cfg.rng.derive(t), order));
    ens.member_weights = detail::uniform_member_weights(cfg.T);
    if (trace) trace->final_weights = w;
    return ens;
}

/// Bagging of random trees.
inline Ensemble train_random_forest(const Dataset& data, const TrainConfig& cfg, TrainTrace* trace = nullptr) {
    if (cfg.base_spec.kind != LearnerKind::random_tree) throw DomainError("random forest needs random_tree base learners");
    Ensemble ens = train_bagging(data, cfg, trace);
    ens.kind = EnsembleKind::random_forest;
    return ens;
}

/// Member weight 1/2 ln((1 - eps) / eps), with eps clamped below at 1e-10.
inline double adaboost_alpha(double eps) {
    if (!(eps >= 0.0 && eps < 0.5)) throw DomainError("AdaBoost weighted error must lie in [0, 1/2)");
    const double e = std::max(eps, 1e-10);
    return 0.5 * std::log((1.0 - e) / e);
}

/// Discrete AdaBoost with weighted resampling.
///
/// A round whose weighted error on the original set is >= 1/2 is discarded,
/// the weights are reset to uniform and the round is retried; 25 consecutive
/// resets abort training. A zero error is clamped to 1e-10.
inline Ensemble train_adaboost(const Dataset& data, const TrainConfig& cfg, TrainTrace* trace = nullptr) {
    detail::check_config(data, cfg);
    if (cfg.base_spec.kind != LearnerKind::cart_pruned && cfg.base_spec.kind != LearnerKind::stump)
        throw DomainError("AdaBoost needs stump or cart_pruned base learners");
    constexpr std::size_t max_consecutive_resets = 25;

    const std::size_t n = data.size();
    Ensemble ens{EnsembleKind::adaboost, data.dim(), cfg.base_spec, std::nullopt, {}, {}};
    std::vector<double> alphas;
    const ColumnOrder order(data);
    WeightVector w = WeightVector::uniform(n);
    std::size_t consecutive = 0, attempt = 0;
    while (ens.members.size() < cfg.T) {
        const std::size_t t = ens.members.size();
        TreeModel f = detail::fit_member(data, w, cfg.base_spec, cfg.rng.derive({t, attempt++}), order);
        const auto pred = tree_predict_all(f, data);
        double eps = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (pred[i] != data.label(i)) eps += w[i];
        if (eps >= 0.5) {
            if (trace) ++trace->resets;
            if (++consecutive >= max_consecutive_resets)
                throw DomainError("AdaBoost: weighted error stayed at or above 1/2 for 25 consecutive resets");
            w = WeightVector::uniform(n);
            continue;
        }
        consecutive = 0;
        attempt = 0;
        const double alpha = adaboost_alpha(eps);
        std::vector<double> mass(n);
        for (std::size_t i = 0; i < n; ++i) mass[i] = w[i] * std::exp(-alpha * data.label(i) * pred[i]);
        w = WeightVector::from_masses(std::move(mass));
        ens.members.push_back(std::move(f));
        alphas.push_back(alpha);
        if (trace) {
            trace->epsilons.push_back(eps);
            if (trace->record_history) trace->weight_history.push_back(w);
        }
    }
    const auto normalized = WeightVector::from_masses(std::move(alphas));
    ens.member_weights.assign(normalized.values().begin(), normalized.values().end());
    if (trace) trace->final_weights = w;
    return ens;
}

inline Ensemble train_ensemble(EnsembleKind kind, const Dataset& data, const TrainConfig& cfg, TrainTrace* trace = nullptr) {
    switch (kind) {
        case EnsembleKind::vote_boost: return train_vote_boost(data, cfg, trace);
        case EnsembleKind::bagging: return train_bagging(data, cfg, trace);
        case EnsembleKind::random_forest: return train_random_forest(data, cfg, trace);
        case EnsembleKind::adaboost: return train_adaboost(data, cfg, trace);
    }
    throw InternalError("unknown ensemble kind");
}

// ---------------------------------------------------------------------------
// Aggregation

struct Prediction {
    Label label;
    double score;  // in [-1, 1]
};

/// score = sum_tau alpha_tau f_tau(x); label = sign(score) with sign(0) = +1.
/// Majority-vote ensembles compute the score from integer vote counts so
/// that even splits are exact ties.
inline Prediction predict_ensemble(const Ensemble& ens, std::span<const double> x) {
    if (x.size() != ens.dim) throw DomainError("predict_ensemble: attribute vector has wrong dimension");
    if (ens.members.empty()) throw DomainError("predict_ensemble: empty ensemble");
    double score = 0.0;
    if (ens.uniform_vote()) {
        long plus = 0;
        for (const auto& m : ens.members) plus += m.predict(x) > 0;
        const auto t = static_cast<long>(ens.members.size());
        score = static_cast<double>(2 * plus - t) / static_cast<double>(t);
    } else {
        for (std::size_t k = 0; k < ens.members.size(); ++k) score += ens.member_weights[k] * ens.members[k].predict(x);
    }
    return {score >= 0.0 ? 1 : -1, score};
}

inline double margin(const Ensemble& ens, std::span<const double> x, Label y) {
    return y * predict_ensemble(ens, x).score;
}

/// Per-instance fraction of members voting +1: t_+/t, or (t_+ + 1)/(t + 2) when corrected.
inline std::vector<double> vote_fraction_profile(const Ensemble& ens, const Dataset& data, bool corrected) {
    std::vector<double> out(data.size());
    const std::size_t t = ens.members.size();
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::size_t plus = 0;
        for (const auto& m : ens.members) plus += m.predict(data.row(i)) > 0;
        out[i] = corrected ? laplace_fraction(plus, t) : static_cast<double>(plus) / static_cast<double>(t);
    }
    return out;
}

/// First k members with renormalized weights.
inline Ensemble prefix(const Ensemble& ens, std::size_t k) {
    if (k < 1 || k > ens.size()) throw DomainError("prefix size must lie in [1, T]");
    Ensemble out = ens;
    out.members.resize(k);
    out.member_weights.resize(k);
    if (ens.uniform_vote()) {
        out.member_weights = detail::uniform_member_weights(k);
    } else {
        auto w = WeightVector::from_masses(out.member_weights);
        out.member_weights.assign(w.values().begin(), w.values().end());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const LearnerSpec& s) {
    return {{"kind", to_string(s.kind)}, {"min_split", s.min_split}, {"k_features", s.k_features}, {"prune_folds", s.prune_folds}};
}

inline LearnerSpec learner_spec_from_json(const nlohmann::json& j) {
    LearnerSpec s;
    auto kind = parse_learner_kind(j.at("kind").get<std::string>());
    if (!kind) throw DomainError("unknown learner kind in JSON");
    s.kind = *kind;
    s.min_split = j.at("min_split").get<std::size_t>();
    s.k_features = j.at("k_features").get<std::size_t>();
    s.prune_folds = j.value("prune_folds", std::size_t{10});
    return s;
}

inline nlohmann::json to_json(const Ensemble& ens) {
    nlohmann::json members = nlohmann::json::array();
    for (const auto& m : ens.members) members.push_back(to_json(m));
    nlohmann::json emphasis = nullptr;
    if (ens.emphasis) emphasis = {{"a", ens.emphasis->a}, {"b", ens.emphasis->b}};
    return {{"kind", to_string(ens.kind)}, {"dimension", ens.dim},          {"base_spec", to_json(ens.base_spec)},
            {"emphasis", emphasis},        {"member_weights", ens.member_weights}, {"members", members}};
}

inline Ensemble ensemble_from_json(const nlohmann::json& j) {
    Ensemble ens;
    auto kind = parse_ensemble_kind(j.at("kind").get<std::string>());
    if (!kind) throw DomainError("unknown ensemble kind in JSON");
    ens.kind = *kind;
    ens.dim = j.at("dimension").get<std::size_t>();
    ens.base_spec = learner_spec_from_json(j.at("base_spec"));
    if (!j.at("emphasis").is_null()) ens.emphasis = BetaParams(j["emphasis"].at("a").get<double>(), j["emphasis"].at("b").get<double>());
    ens.member_weights = j.at("member_weights").get<std::vector<double>>();
    for (const auto& m : j.at("members")) ens.members.push_back(tree_from_json(m, ens.dim));
    if (ens.members.empty() || ens.members.size() != ens.member_weights.size())
        throw DomainError("ensemble JSON: member and weight counts differ");
    if (ens.emphasis.has_value() != (ens.kind == EnsembleKind::vote_boost))
        throw DomainError("ensemble JSON: emphasis must be present exactly for vote_boost");
    return ens;
}

}  // namespace voteboost
