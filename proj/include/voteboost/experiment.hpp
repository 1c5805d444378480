#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "voteboost/voteboost.hpp"

namespace voteboost {

inline constexpr const char* kVersion = "1.0.0";

/// Bad command line or config file.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Locale-independent, 6 significant digits.
inline std::string fmt6(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 6);
    if (ec != std::errc()) throw InternalError("number formatting failed");
    return {buf, ptr};
}

enum class Mode { benchmark, curves, weightrank, histogram, select_shape };

inline std::string to_string(Mode m) {
    switch (m) {
        case Mode::benchmark: return "benchmark";
        case Mode::curves: return "curves";
        case Mode::weightrank: return "weightrank";
        case Mode::histogram: return "histogram";
        case Mode::select_shape: return "select-shape";
    }
    return "?";
}

inline std::optional<Mode> parse_mode(std::string_view s) {
    if (s == "benchmark") return Mode::benchmark;
    if (s == "curves") return Mode::curves;
    if (s == "weightrank") return Mode::weightrank;
    if (s == "histogram") return Mode::histogram;
    if (s == "select-shape") return Mode::select_shape;
    return std::nullopt;
}

struct ExperimentConfig {
    Mode mode = Mode::benchmark;
    std::vector<std::string> datasets;  // synthetic task names or CSV paths
    std::string label_column;           // CSV: name, or empty for the last column
    std::string positive_label;         // CSV: empty means numeric 0/1 labels
    std::vector<EnsembleKind> methods{EnsembleKind::vote_boost, EnsembleKind::bagging, EnsembleKind::adaboost,
                                      EnsembleKind::random_forest};
    std::optional<LearnerKind> base;  // overrides each method's default base learner
    std::size_t T = 501;
    std::size_t cv_T = 0;  // ensemble size inside shape selection; 0 means T
    ShapeGrid grid;
    std::size_t folds = 10;
    std::size_t replicates = 100;
    double noise_rate = 0.0;
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    double train_fraction = 2.0 / 3.0;
    std::size_t n_train = 300;
    std::size_t n_test = 2000;
    std::size_t dimension = 20;
    std::size_t min_split = 2;
    std::size_t k_features = 0;
    std::vector<double> shapes;              // weightrank / curves shape list
    std::optional<double> shape;             // histogram: fixed vote-boost shape
    std::vector<std::size_t> checkpoints;    // curves / histogram
    std::size_t bins = 20;
    double alpha = 0.05;
    std::size_t jobs = 0;                    // 0: available parallelism

    std::size_t effective_cv_T() const { return cv_T == 0 ? T : cv_T; }

    std::vector<std::size_t> effective_checkpoints() const {
        if (!checkpoints.empty()) return checkpoints;
        std::vector<std::size_t> out;
        for (std::size_t c : {1, 3, 5, 11, 25, 51, 101, 251, 501, 1001})
            if (c < T) out.push_back(c);
        out.push_back(T);
        return out;
    }

    void validate() const {
        if (datasets.empty()) throw UsageError("--dataset is required");
        if (methods.empty()) throw UsageError("--methods must name at least one method");
        if (replicates < 1) throw UsageError("--replicates must be at least 1");
        if (T < 1) throw UsageError("--T must be at least 1");
        if (folds < 2) throw UsageError("--folds must be at least 2");
        if (!(noise_rate >= 0.0 && noise_rate <= 1.0)) throw UsageError("--noise must lie in [0, 1]");
        if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw UsageError("--train-fraction must lie in (0, 1)");
        if (n_train < 2 || n_test < 1) throw UsageError("--n-train must be >= 2 and --n-test >= 1");
        if (min_split < 2) throw UsageError("--min-split must be at least 2");
        if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("--alpha must lie in (0, 1)");
        if (mode == Mode::weightrank && shapes.empty()) throw UsageError("weightrank needs --shapes");
        if (mode == Mode::histogram) {
            if (bins < 2) throw UsageError("--bins must be at least 2");
            if (methods.size() != 1) throw UsageError("histogram takes exactly one method");
            if (methods[0] == EnsembleKind::vote_boost && !shape) throw UsageError("histogram with vote_boost needs --shape");
        }
        if (shape && !(*shape > 0.0)) throw UsageError("--shape must be positive");
        for (double s : shapes)
            if (!(s > 0.0)) throw UsageError("--shapes values must be positive");
        if (mode == Mode::curves || mode == Mode::histogram) {
            const auto cps = effective_checkpoints();
            for (std::size_t i = 0; i < cps.size(); ++i) {
                if (cps[i] < 1 || cps[i] > T) throw UsageError("checkpoints must lie in [1, T]");
                if (i > 0 && cps[i] <= cps[i - 1]) throw UsageError("checkpoints must be strictly increasing");
            }
        }
        if (base && *base != LearnerKind::random_tree)
            for (auto m : methods)
                if (m == EnsembleKind::random_forest) throw UsageError("random_forest requires --base random_tree");
        if (base && *base != LearnerKind::stump && *base != LearnerKind::cart_pruned)
            for (auto m : methods)
                if (m == EnsembleKind::adaboost && mode != Mode::weightrank)
                    throw UsageError("adaboost requires --base stump or cart_pruned");
    }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
    std::vector<std::string> methods;
    for (auto m : c.methods) methods.push_back(to_string(m));
    nlohmann::json j = {{"mode", to_string(c.mode)},
                        {"datasets", c.datasets},
                        {"label_column", c.label_column},
                        {"positive_label", c.positive_label},
                        {"methods", methods},
                        {"base", c.base ? nlohmann::json(to_string(*c.base)) : nlohmann::json(nullptr)},
                        {"T", c.T},
                        {"cv_T", c.effective_cv_T()},
                        {"grid", c.grid.values()},
                        {"folds", c.folds},
                        {"replicates", c.replicates},
                        {"noise_rate", c.noise_rate},
                        {"seed", c.seed},
                        {"output_dir", c.output_dir},
                        {"train_fraction", c.train_fraction},
                        {"n_train", c.n_train},
                        {"n_test", c.n_test},
                        {"dimension", c.dimension},
                        {"min_split", c.min_split},
                        {"k_features", c.k_features},
                        {"shapes", c.shapes},
                        {"shape", c.shape ? nlohmann::json(*c.shape) : nlohmann::json(nullptr)},
                        {"checkpoints", c.effective_checkpoints()},
                        {"bins", c.bins},
                        {"alpha", c.alpha}};
    return j;
}

inline std::vector<EnsembleKind> parse_methods(const std::vector<std::string>& names) {
    std::vector<EnsembleKind> out;
    for (const auto& n : names) {
        auto k = parse_ensemble_kind(n);
        if (!k) throw UsageError("unknown method '" + n + "' (expected vb, bagging, adaboost, rf)");
        if (std::find(out.begin(), out.end(), *k) != out.end()) throw UsageError("method '" + n + "' listed twice");
        out.push_back(*k);
    }
    return out;
}

/// Applies a JSON object mirroring ExperimentConfig; unknown keys are rejected.
inline void apply_json(ExperimentConfig& c, const nlohmann::json& j) {
    if (!j.is_object()) throw UsageError("config file must hold a JSON object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "mode") {
                auto m = parse_mode(v.get<std::string>());
                if (!m) throw UsageError("config: unknown mode '" + v.get<std::string>() + "'");
                if (*m != c.mode) throw UsageError("config file mode '" + v.get<std::string>() + "' conflicts with subcommand '" + to_string(c.mode) + "'");
            } else if (key == "datasets") {
                c.datasets = v.get<std::vector<std::string>>();
            } else if (key == "dataset") {
                c.datasets = {v.get<std::string>()};
            } else if (key == "label_column") {
                c.label_column = v.get<std::string>();
            } else if (key == "positive_label") {
                c.positive_label = v.get<std::string>();
            } else if (key == "methods") {
                c.methods = parse_methods(v.get<std::vector<std::string>>());
            } else if (key == "base") {
                if (v.is_null()) {
                    c.base.reset();
                } else {
                    auto b = parse_learner_kind(v.get<std::string>());
                    if (!b) throw UsageError("config: unknown base learner");
                    c.base = *b;
                }
            } else if (key == "T") {
                c.T = v.get<std::size_t>();
            } else if (key == "cv_T") {
                c.cv_T = v.get<std::size_t>();
            } else if (key == "grid") {
                c.grid = ShapeGrid(v.get<std::vector<double>>());
            } else if (key == "folds") {
                c.folds = v.get<std::size_t>();
            } else if (key == "replicates") {
                c.replicates = v.get<std::size_t>();
            } else if (key == "noise_rate") {
                c.noise_rate = v.get<double>();
            } else if (key == "seed") {
                c.seed = v.get<std::uint64_t>();
            } else if (key == "output_dir") {
                c.output_dir = v.get<std::string>();
            } else if (key == "train_fraction") {
                c.train_fraction = v.get<double>();
            } else if (key == "n_train") {
                c.n_train = v.get<std::size_t>();
            } else if (key == "n_test") {
                c.n_test = v.get<std::size_t>();
            } else if (key == "dimension") {
                c.dimension = v.get<std::size_t>();
            } else if (key == "min_split") {
                c.min_split = v.get<std::size_t>();
            } else if (key == "k_features") {
                c.k_features = v.get<std::size_t>();
            } else if (key == "shapes") {
                c.shapes = v.get<std::vector<double>>();
            } else if (key == "shape") {
                if (v.is_null()) c.shape.reset(); else c.shape = v.get<double>();
            } else if (key == "checkpoints") {
                c.checkpoints = v.get<std::vector<std::size_t>>();
            } else if (key == "bins") {
                c.bins = v.get<std::size_t>();
            } else if (key == "alpha") {
                c.alpha = v.get<double>();
            } else if (key == "jobs") {
                c.jobs = v.get<std::size_t>();
            } else {
                throw UsageError("config: unknown key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("config: ") + e.what());
    } catch (const DomainError& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
}

inline ExperimentConfig defaults_for(Mode mode) {
    ExperimentConfig c;
    c.mode = mode;
    if (mode == Mode::weightrank) {
        c.T = 100;
        c.n_train = 500;
        c.methods = {EnsembleKind::vote_boost, EnsembleKind::adaboost};
    }
    if (mode == Mode::histogram) c.methods = {EnsembleKind::vote_boost};
    if (mode == Mode::select_shape) c.methods = {EnsembleKind::vote_boost};
    return c;
}

// ---------------------------------------------------------------------------
// Replicate construction

struct ReplicateData {
    Dataset train;
    Dataset test;
    std::vector<std::size_t> flipped;
};

/// Resolves dataset names: synthetic task names generate data, anything
/// else is read as a CSV file once and re-split per replicate.
class DatasetSource {
public:
    DatasetSource(const std::string& name, const ExperimentConfig& cfg) : name_(name) {
        if (auto k = parse_synthetic_kind(name)) {
            task_ = SyntheticTask{*k, cfg.dimension};
        } else {
            ColumnSelector col;
            if (cfg.label_column.empty()) {
                std::ifstream in(name);
                if (!in) throw IngestionError("cannot open dataset '" + name + "'", 0, "");
                std::string header;
                std::getline(in, header);
                col = static_cast<std::size_t>(std::count(header.begin(), header.end(), ','));
            } else {
                col = cfg.label_column;
            }
            file_ = load_csv(name, col, cfg.positive_label);
        }
    }

    const std::string& name() const { return name_; }
    bool synthetic() const { return task_.has_value(); }

    /// Fresh draws for synthetic tasks; a stratified re-split for files.
    ReplicateData make(const ExperimentConfig& cfg, RandomSource rng) const {
        std::optional<Dataset> train, test;
        if (task_) {
            train = gen_synthetic(*task_, cfg.n_train, rng);
            test = gen_synthetic(*task_, cfg.n_test, rng);
        } else {
            auto [tr, te] = stratified_split(*file_, cfg.train_fraction, rng);
            train = std::move(tr);
            test = std::move(te);
        }
        ReplicateData out{*train, *test, {}};
        if (cfg.noise_rate > 0.0) {
            auto noisy = inject_label_noise(out.train, cfg.noise_rate, rng);
            out.train = std::move(noisy.data);
            out.flipped = std::move(noisy.flipped);
        }
        return out;
    }

private:
    std::string name_;
    std::optional<SyntheticTask> task_;
    std::optional<Dataset> file_;
};

/// Base learner used for each method: random trees for vote-boosting and
/// random forests, unpruned CART for bagging, pruned CART for AdaBoost.
inline LearnerSpec base_spec_for(EnsembleKind kind, const ExperimentConfig& cfg) {
    LearnerSpec s;
    s.min_split = cfg.min_split;
    s.k_features = cfg.k_features;
    switch (kind) {
        case EnsembleKind::vote_boost:
        case EnsembleKind::random_forest: s.kind = LearnerKind::random_tree; break;
        case EnsembleKind::bagging: s.kind = LearnerKind::cart_unpruned; break;
        case EnsembleKind::adaboost: s.kind = LearnerKind::cart_pruned; break;
    }
    if (cfg.base) s.kind = *cfg.base;
    return s;
}

/// Stream layout: root(seed) -> {dataset, replicate, purpose, method}.
/// Purpose 0 draws data, 1 trains methods, 2 breaks ties.
inline RandomSource data_stream(const ExperimentConfig& cfg, std::size_t d, std::size_t r) {
    return RandomSource(cfg.seed, 0).derive({d, r, 0});
}
inline RandomSource method_stream(const ExperimentConfig& cfg, std::size_t d, std::size_t r, EnsembleKind k) {
    return RandomSource(cfg.seed, 0).derive({d, r, 1, static_cast<std::uint64_t>(k)});
}

struct MethodOutcome {
    double error = 0.0;
    std::optional<double> selected_shape;
    std::vector<double> cv_errors;
};

/// Trains one method on one replicate and measures its test error.
/// Vote-boosting first selects a = b by cross-validation on the training part.
inline MethodOutcome run_method(EnsembleKind kind, const ReplicateData& rep, const ExperimentConfig& cfg, const RandomSource& rng) {
    TrainConfig tc;
    tc.T = cfg.T;
    tc.base_spec = base_spec_for(kind, cfg);
    MethodOutcome out;
    if (kind == EnsembleKind::vote_boost) {
        TrainConfig cv = tc;
        cv.T = cfg.effective_cv_T();
        cv.rng = rng.derive(0);
        auto sel = cv_select_shape(rep.train, cfg.grid, cfg.folds, cv);
        tc.emphasis = sel.params;
        out.selected_shape = sel.params.a;
        out.cv_errors = std::move(sel.cv_errors);
    }
    tc.rng = rng.derive(1);
    out.error = test_error(train_ensemble(kind, rep.train, tc), rep.test);
    return out;
}

// ---------------------------------------------------------------------------
// Output

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
    void add(std::vector<std::string> row) {
        if (row.size() != header_.size()) throw InternalError("CSV row width differs from header");
        rows_.push_back(std::move(row));
    }
    std::string str() const {
        std::string out;
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                if (i) out += ',';
                out += cells[i];
            }
            out += '\n';
        };
        line(header_);
        for (const auto& r : rows_) line(r);
        return out;
    }
    std::size_t rows() const { return rows_.size(); }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

/// Runs work(i) for i in [0, n) on up to `jobs` threads; results stay indexed.
/// The first failure (lowest index) is rethrown after all workers finish.
template <class Result, class Work>
std::vector<Result> parallel_map(std::size_t n, std::size_t jobs, Work work) {
    std::vector<std::optional<Result>> results(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next++) < n;) {
            try {
                results[i] = work(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min(jobs, n);
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    std::vector<Result> out;
    out.reserve(n);
    for (auto& r : results) out.push_back(std::move(*r));
    return out;
}

namespace detail {

// Adds dataset/replicate context to data errors.
template <class F>
auto with_context(const std::string& dataset, std::size_t replicate, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const DomainError& e) {
        throw DomainError("dataset '" + dataset + "', replicate " + std::to_string(replicate) + ": " + e.what());
    }
}

inline std::string shape_tag(double s) { return "a" + fmt6(s); }

}  // namespace detail

struct ExperimentOutput {
    std::vector<std::pair<std::string, std::string>> files;  // name, contents
};

inline ExperimentOutput run_benchmark(const ExperimentConfig& cfg, const std::vector<DatasetSource>& sources) {
    CsvTable errors({"replicate", "method", "dataset", "error"});
    CsvTable summary({"method", "dataset", "mean", "sd", "replicates"});
    CsvTable shapes({"dataset", "replicate", "selected_shape"});
    CsvTable comparisons({"dataset", "method", "vote_boost_mean", "method_mean", "t_stat", "p_value", "outcome"});
    CsvTable wdl({"method", "wins", "draws", "losses"});
    const bool has_vb = std::find(cfg.methods.begin(), cfg.methods.end(), EnsembleKind::vote_boost) != cfg.methods.end();

    // err[m][d] = per-replicate errors
    std::vector<std::vector<std::vector<double>>> err(cfg.methods.size(), std::vector<std::vector<double>>(sources.size()));
    for (std::size_t d = 0; d < sources.size(); ++d) {
        const auto& src = sources[d];
        auto results = parallel_map<std::vector<MethodOutcome>>(cfg.replicates, cfg.jobs, [&](std::size_t r) {
            return detail::with_context(src.name(), r, [&] {
                const auto rep = src.make(cfg, data_stream(cfg, d, r));
                std::vector<MethodOutcome> outs;
                for (auto m : cfg.methods) outs.push_back(run_method(m, rep, cfg, method_stream(cfg, d, r, m)));
                return outs;
            });
        });
        for (std::size_t r = 0; r < cfg.replicates; ++r) {
            for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
                const auto& o = results[r][m];
                errors.add({std::to_string(r), to_string(cfg.methods[m]), src.name(), fmt6(o.error)});
                err[m][d].push_back(o.error);
                if (o.selected_shape) shapes.add({src.name(), std::to_string(r), fmt6(*o.selected_shape)});
            }
        }
        for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
            ErrorReport rep(err[m][d]);
            summary.add({to_string(cfg.methods[m]), src.name(), fmt6(rep.mean()), fmt6(rep.sd()), std::to_string(rep.replicates())});
        }
    }

    ExperimentOutput out;
    out.files.push_back({"errors.csv", errors.str()});
    out.files.push_back({"summary.csv", summary.str()});
    if (has_vb) {
        out.files.push_back({"shapes.csv", shapes.str()});
        const auto vb = static_cast<std::size_t>(std::find(cfg.methods.begin(), cfg.methods.end(), EnsembleKind::vote_boost) - cfg.methods.begin());
        if (cfg.replicates >= 2 && cfg.methods.size() >= 2) {
            for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
                if (m == vb) continue;
                std::vector<PairedReports> pairs;
                for (std::size_t d = 0; d < sources.size(); ++d) {
                    pairs.push_back({ErrorReport(err[vb][d]), ErrorReport(err[m][d])});
                    const auto t = paired_t_test(err[vb][d], err[m][d], cfg.alpha);
                    const double a = pairs.back().a.mean(), b = pairs.back().b.mean();
                    const std::string outcome = !t.significant ? "draw" : (a < b ? "win" : (a > b ? "loss" : "draw"));
                    comparisons.add({sources[d].name(), to_string(cfg.methods[m]), fmt6(a), fmt6(b), fmt6(t.t_stat), fmt6(t.p_value), outcome});
                }
                const auto tally = win_draw_loss(pairs, cfg.alpha);
                wdl.add({to_string(cfg.methods[m]), std::to_string(tally.wins), std::to_string(tally.draws), std::to_string(tally.losses)});
            }
            out.files.push_back({"comparisons.csv", comparisons.str()});
            out.files.push_back({"win_draw_loss.csv", wdl.str()});
        }
    }
    if (sources.size() >= 2 && cfg.methods.size() >= 2 && cfg.methods.size() <= 10) {
        std::vector<std::vector<double>> matrix(cfg.methods.size(), std::vector<double>(sources.size()));
        for (std::size_t m = 0; m < cfg.methods.size(); ++m)
            for (std::size_t d = 0; d < sources.size(); ++d) matrix[m][d] = mean(err[m][d]);
        const auto rc = average_ranks_nemenyi(matrix, cfg.alpha);
        CsvTable ranks({"method", "average_rank", "critical_difference", "groups"});
        for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
            std::string groups;
            for (std::size_t g = 0; g < rc.groups.size(); ++g)
                if (std::find(rc.groups[g].begin(), rc.groups[g].end(), m) != rc.groups[g].end())
                    groups += (groups.empty() ? "" : ";") + std::to_string(g);
            ranks.add({to_string(cfg.methods[m]), fmt6(rc.avg_ranks[m]), fmt6(rc.critical_difference), groups});
        }
        out.files.push_back({"ranks.csv", ranks.str()});
    }
    return out;
}

inline std::vector<double> curve_shapes(const ExperimentConfig& cfg) {
    return cfg.shapes.empty() ? cfg.grid.values() : cfg.shapes;
}

inline ExperimentOutput run_curves(const ExperimentConfig& cfg, const std::vector<DatasetSource>& sources) {
    CsvTable curves({"dataset", "method", "shape", "replicate", "size", "split", "error"});
    CsvTable summary({"dataset", "method", "shape", "size", "split", "mean_error"});
    const auto cps = cfg.effective_checkpoints();
    struct Run {
        EnsembleKind kind;
        std::optional<double> shape;
    };
    std::vector<Run> runs;
    for (auto m : cfg.methods) {
        if (m == EnsembleKind::vote_boost)
            for (double s : curve_shapes(cfg)) runs.push_back({m, s});
        else
            runs.push_back({m, std::nullopt});
    }
    for (std::size_t d = 0; d < sources.size(); ++d) {
        const auto& src = sources[d];
        auto results = parallel_map<std::vector<std::vector<CurvePoint>>>(cfg.replicates, cfg.jobs, [&](std::size_t r) {
            return detail::with_context(src.name(), r, [&] {
                const auto rep = src.make(cfg, data_stream(cfg, d, r));
                std::vector<std::vector<CurvePoint>> out;
                for (std::size_t k = 0; k < runs.size(); ++k) {
                    TrainConfig tc;
                    tc.T = cfg.T;
                    tc.base_spec = base_spec_for(runs[k].kind, cfg);
                    if (runs[k].shape) tc.emphasis = BetaParams::symmetric(*runs[k].shape);
                    // every shape shares the method stream, so a = b = 1 replays bagging's draws
                    tc.rng = method_stream(cfg, d, r, runs[k].kind == EnsembleKind::vote_boost ? EnsembleKind::bagging : runs[k].kind);
                    out.push_back(learning_curve(runs[k].kind, tc, rep.train, rep.test, cps));
                }
                return out;
            });
        });
        for (std::size_t k = 0; k < runs.size(); ++k) {
            const std::string method = to_string(runs[k].kind);
            const std::string shape = runs[k].shape ? fmt6(*runs[k].shape) : "";
            std::vector<double> tr(cps.size(), 0.0), te(cps.size(), 0.0);
            for (std::size_t r = 0; r < cfg.replicates; ++r) {
                for (std::size_t c = 0; c < cps.size(); ++c) {
                    const auto& p = results[r][k][c];
                    curves.add({src.name(), method, shape, std::to_string(r), std::to_string(p.size), "train", fmt6(p.train_error)});
                    curves.add({src.name(), method, shape, std::to_string(r), std::to_string(p.size), "test", fmt6(p.test_error)});
                    tr[c] += p.train_error;
                    te[c] += p.test_error;
                }
            }
            const auto reps = static_cast<double>(cfg.replicates);
            for (std::size_t c = 0; c < cps.size(); ++c) {
                summary.add({src.name(), method, shape, std::to_string(cps[c]), "train", fmt6(tr[c] / reps)});
                summary.add({src.name(), method, shape, std::to_string(cps[c]), "test", fmt6(te[c] / reps)});
            }
        }
    }
    return {{{"curves.csv", curves.str()}, {"curves_summary.csv", summary.str()}}};
}

inline ExperimentOutput run_weightrank(const ExperimentConfig& cfg, const std::vector<DatasetSource>& sources) {
    std::vector<CsvTable> tables;
    for (std::size_t s = 0; s < cfg.shapes.size(); ++s)
        tables.emplace_back(std::vector<std::string>{"dataset", "replicate", "instance", "vb_rank", "ada_rank", "flipped"});
    CsvTable rho({"dataset", "replicate", "shape", "rho"});
    CsvTable emphasis({"dataset", "replicate", "method", "shape", "flipped_mean_weight", "clean_mean_weight", "ratio"});
    for (std::size_t d = 0; d < sources.size(); ++d) {
        const auto& src = sources[d];
        auto results = parallel_map<std::pair<ReplicateData, WeightRankResult>>(cfg.replicates, cfg.jobs, [&](std::size_t r) {
            return detail::with_context(src.name(), r, [&] {
                auto rep = src.make(cfg, data_stream(cfg, d, r));
                auto res = weight_rank_experiment(rep.train, cfg.shapes, cfg.T, method_stream(cfg, d, r, EnsembleKind::adaboost), rep.flipped);
                return std::pair{std::move(rep), std::move(res)};
            });
        });
        for (std::size_t r = 0; r < cfg.replicates; ++r) {
            const auto& [rep, res] = results[r];
            std::vector<bool> flipped(rep.train.size(), false);
            for (auto i : rep.flipped) flipped[i] = true;
            auto split_means = [&](const std::vector<double>& w) {
                double f = 0.0, c = 0.0;
                std::size_t nf = 0, nc = 0;
                for (std::size_t i = 0; i < w.size(); ++i) (flipped[i] ? (++nf, f) : (++nc, c)) += w[i];
                return std::pair{nf ? f / static_cast<double>(nf) : 0.0, nc ? c / static_cast<double>(nc) : 0.0};
            };
            auto add_emphasis = [&](const std::string& method, const std::string& shape, const std::vector<double>& w) {
                if (rep.flipped.empty()) return;
                const auto [f, c] = split_means(w);
                emphasis.add({src.name(), std::to_string(r), method, shape, fmt6(f), fmt6(c), fmt6(c > 0.0 ? f / c : 0.0)});
            };
            add_emphasis("adaboost", "", res.ada_weights);
            for (std::size_t s = 0; s < res.shapes.size(); ++s) {
                const auto& sr = res.shapes[s];
                for (const auto& row : sr.rows)
                    tables[s].add({src.name(), std::to_string(r), std::to_string(row.instance), std::to_string(row.vb_rank),
                                   std::to_string(row.ada_rank), row.flipped ? "1" : "0"});
                rho.add({src.name(), std::to_string(r), fmt6(sr.shape), fmt6(sr.rho)});
                add_emphasis("vote_boost", fmt6(sr.shape), sr.vb_weights);
            }
        }
    }
    ExperimentOutput out;
    for (std::size_t s = 0; s < cfg.shapes.size(); ++s)
        out.files.push_back({"ranks_" + detail::shape_tag(cfg.shapes[s]) + ".csv", tables[s].str()});
    out.files.push_back({"rho.csv", rho.str()});
    if (cfg.noise_rate > 0.0) out.files.push_back({"noise_emphasis.csv", emphasis.str()});
    return out;
}

inline ExperimentOutput run_histogram(const ExperimentConfig& cfg, const std::vector<DatasetSource>& sources) {
    CsvTable hist({"dataset", "replicate", "split", "checkpoint", "bin_low", "bin_high", "correct_count", "incorrect_count"});
    const auto cps = cfg.effective_checkpoints();
    const auto kind = cfg.methods.front();
    for (std::size_t d = 0; d < sources.size(); ++d) {
        const auto& src = sources[d];
        using Pair = std::pair<std::vector<HistogramRow>, std::vector<HistogramRow>>;
        auto results = parallel_map<Pair>(cfg.replicates, cfg.jobs, [&](std::size_t r) {
            return detail::with_context(src.name(), r, [&] {
                const auto rep = src.make(cfg, data_stream(cfg, d, r));
                TrainConfig tc;
                tc.T = cps.back();
                tc.base_spec = base_spec_for(kind, cfg);
                if (kind == EnsembleKind::vote_boost) tc.emphasis = BetaParams::symmetric(*cfg.shape);
                tc.rng = method_stream(cfg, d, r, kind);
                const auto ens = train_ensemble(kind, rep.train, tc);
                return Pair{vote_histogram(ens, cps, rep.train, cfg.bins), vote_histogram(ens, cps, rep.test, cfg.bins)};
            });
        });
        for (std::size_t r = 0; r < cfg.replicates; ++r) {
            for (const auto& [split, rows] : {std::pair{"train", &results[r].first}, std::pair{"test", &results[r].second}})
                for (const auto& h : *rows)
                    hist.add({src.name(), std::to_string(r), split, std::to_string(h.checkpoint), fmt6(h.bin_low), fmt6(h.bin_high),
                              std::to_string(h.correct), std::to_string(h.incorrect)});
        }
    }
    return {{{"histogram.csv", hist.str()}}};
}

inline ExperimentOutput run_select_shape(const ExperimentConfig& cfg, const std::vector<DatasetSource>& sources) {
    CsvTable cv({"dataset", "replicate", "shape", "cv_error"});
    CsvTable selected({"dataset", "replicate", "selected_shape"});
    for (std::size_t d = 0; d < sources.size(); ++d) {
        const auto& src = sources[d];
        auto results = parallel_map<ShapeSelection>(cfg.replicates, cfg.jobs, [&](std::size_t r) {
            return detail::with_context(src.name(), r, [&] {
                const auto rep = src.make(cfg, data_stream(cfg, d, r));
                TrainConfig tc;
                tc.T = cfg.effective_cv_T();
                tc.base_spec = base_spec_for(EnsembleKind::vote_boost, cfg);
                tc.rng = method_stream(cfg, d, r, EnsembleKind::vote_boost).derive(0);
                return cv_select_shape(rep.train, cfg.grid, cfg.folds, tc);
            });
        });
        for (std::size_t r = 0; r < cfg.replicates; ++r) {
            for (std::size_t g = 0; g < results[r].cv_errors.size(); ++g)
                cv.add({src.name(), std::to_string(r), fmt6(cfg.grid.values()[g]), fmt6(results[r].cv_errors[g])});
            selected.add({src.name(), std::to_string(r), fmt6(results[r].params.a)});
        }
    }
    return {{{"cv_errors.csv", cv.str()}, {"selected.csv", selected.str()}}};
}

/// Executes the configured mode and writes its CSV tables plus manifest.json
/// into cfg.output_dir. Files written before a failure are removed.
inline void run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<DatasetSource> sources;
    for (const auto& name : cfg.datasets) sources.emplace_back(name, cfg);

    ExperimentOutput out;
    switch (cfg.mode) {
        case Mode::benchmark: out = run_benchmark(cfg, sources); break;
        case Mode::curves: out = run_curves(cfg, sources); break;
        case Mode::weightrank: out = run_weightrank(cfg, sources); break;
        case Mode::histogram: out = run_histogram(cfg, sources); break;
        case Mode::select_shape: out = run_select_shape(cfg, sources); break;
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    namespace fs = std::filesystem;
    const fs::path dir(cfg.output_dir);
    std::vector<fs::path> written;
    try {
        fs::create_directories(dir);
        nlohmann::json generators = nlohmann::json::array();
        for (const auto& s : sources)
            if (auto k = parse_synthetic_kind(s.name())) generators.push_back(generator_manifest({*k, cfg.dimension}, cfg.seed));
        std::vector<std::string> names;
        for (const auto& [name, contents] : out.files) {
            const auto path = dir / name;
            std::ofstream f(path, std::ios::binary);
            if (!f) throw IngestionError("cannot write '" + path.string() + "'", 0, "");
            written.push_back(path);
            f << contents;
            if (!f) throw IngestionError("failed writing '" + path.string() + "'", 0, "");
            names.push_back(name);
        }
        names.push_back("manifest.json");
        nlohmann::json manifest = {{"config", to_json(cfg)},     {"seed", cfg.seed},
                                   {"version", kVersion},       {"wall_time_seconds", wall},
                                   {"generators", generators},  {"files", names}};
        const auto mpath = dir / "manifest.json";
        std::ofstream m(mpath, std::ios::binary);
        written.push_back(mpath);
        m << manifest.dump(2) << '\n';
        if (!m) throw IngestionError("failed writing manifest", 0, "");
    } catch (...) {
        std::error_code ec;
        for (const auto& p : written) fs::remove(p, ec);
        throw;
    }
}

}  // namespace voteboost
