#pragma once

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "voteboost/experiment.hpp"

namespace voteboost {

namespace detail {

struct FlagValues {
    std::string config;
    std::vector<std::string> datasets;
    std::string label_column, positive_label;
    std::vector<std::string> methods;
    std::string base;
    std::size_t T = 0, cv_T = 0, folds = 0, replicates = 0, n_train = 0, n_test = 0, dimension = 0;
    std::size_t min_split = 0, k_features = 0, bins = 0, jobs = 0;
    std::uint64_t seed = 0;
    double noise = 0.0, train_fraction = 0.0, alpha = 0.0, shape = 0.0;
    std::vector<double> grid, shapes;
    std::vector<std::size_t> checkpoints;
    std::string output;
};

inline void add_common(CLI::App& sub, FlagValues& f) {
    sub.add_option("--config", f.config, "JSON file mirroring the experiment config; flags override it");
    sub.add_option("-d,--dataset", f.datasets, "twonorm, threenorm, ringnorm, or a CSV path (repeatable)")->delimiter(',');
    sub.add_option("--label-column", f.label_column, "CSV label column name (default: last column)");
    sub.add_option("--positive-label", f.positive_label, "CSV label value mapped to +1 (default: numeric 0/1)");
    sub.add_option("--methods", f.methods, "comma list of vb, bagging, adaboost, rf")->delimiter(',');
    sub.add_option("--base", f.base, "override base learner: stump, cart_pruned, cart_unpruned, random_tree");
    sub.add_option("--T", f.T, "ensemble size");
    sub.add_option("--cv-T", f.cv_T, "ensemble size during shape selection (default: T)");
    sub.add_option("--grid", f.grid, "shape grid for a = b")->delimiter(',');
    sub.add_option("--folds", f.folds, "cross-validation folds");
    sub.add_option("--replicates", f.replicates, "train/test realizations");
    sub.add_option("--noise", f.noise, "fraction of training labels flipped");
    sub.add_option("--seed", f.seed, "master seed");
    sub.add_option("-o,--output", f.output, "output directory");
    sub.add_option("--train-fraction", f.train_fraction, "training share for file datasets");
    sub.add_option("--n-train", f.n_train, "synthetic training size");
    sub.add_option("--n-test", f.n_test, "synthetic test size");
    sub.add_option("--dimension", f.dimension, "synthetic dimension");
    sub.add_option("--min-split", f.min_split, "minimum instances to split a tree node");
    sub.add_option("--k-features", f.k_features, "random-tree features per node (0: ceil(sqrt(D)))");
    sub.add_option("--alpha", f.alpha, "significance level");
    sub.add_option("--jobs", f.jobs, "worker threads (default: available parallelism)");
}

template <class T>
void override_if(const CLI::App& sub, const char* name, T& target, const T& value) {
    if (sub.count(name) > 0) target = value;
}

}  // namespace detail

/// Parses `args` (without the program name). Returns nullopt when help was printed.
inline std::optional<ExperimentConfig> parse_config(const std::vector<std::string>& args, std::ostream& out = std::cout) {
    CLI::App app{"Vote-boosting ensemble experiments", "voteboost"};
    app.require_subcommand(1);
    detail::FlagValues f;
    const std::vector<std::pair<Mode, std::string>> modes = {
        {Mode::benchmark, "test-error benchmark with paired comparisons and ranks"},
        {Mode::curves, "train/test error against ensemble size"},
        {Mode::weightrank, "emphasis weight ranks against AdaBoost"},
        {Mode::histogram, "vote-fraction histograms by correctness"},
        {Mode::select_shape, "cross-validated shape selection only"}};
    std::vector<CLI::App*> subs;
    for (const auto& [mode, help] : modes) {
        auto* sub = app.add_subcommand(to_string(mode), help);
        detail::add_common(*sub, f);
        if (mode == Mode::curves || mode == Mode::weightrank)
            sub->add_option("--shapes", f.shapes, "vote-boost shapes a = b")->delimiter(',');
        if (mode == Mode::curves || mode == Mode::histogram)
            sub->add_option("--checkpoints", f.checkpoints, "ensemble sizes to evaluate")->delimiter(',');
        if (mode == Mode::histogram) {
            sub->add_option("--shape", f.shape, "vote-boost shape a = b");
            sub->add_option("--bins", f.bins, "histogram bins");
        }
        subs.push_back(sub);
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return std::nullopt;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return std::nullopt;
    } catch (const CLI::ParseError& e) {
        throw UsageError(e.what());
    }

    std::size_t which = 0;
    while (!subs[which]->parsed()) ++which;
    const CLI::App& sub = *subs[which];
    ExperimentConfig c = defaults_for(modes[which].first);

    if (!f.config.empty()) {
        std::ifstream in(f.config);
        if (!in) throw UsageError("cannot read config file '" + f.config + "'");
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw UsageError("config file '" + f.config + "': " + e.what());
        }
        apply_json(c, j);
    }

    using detail::override_if;
    override_if(sub, "--dataset", c.datasets, f.datasets);
    override_if(sub, "--label-column", c.label_column, f.label_column);
    override_if(sub, "--positive-label", c.positive_label, f.positive_label);
    if (sub.count("--methods")) c.methods = parse_methods(f.methods);
    if (sub.count("--base")) {
        auto b = parse_learner_kind(f.base);
        if (!b) throw UsageError("unknown base learner '" + f.base + "'");
        c.base = *b;
    }
    override_if(sub, "--T", c.T, f.T);
    override_if(sub, "--cv-T", c.cv_T, f.cv_T);
    if (sub.count("--grid")) {
        try {
            c.grid = ShapeGrid(f.grid);
        } catch (const DomainError& e) {
            throw UsageError(std::string("--grid: ") + e.what());
        }
    }
    override_if(sub, "--folds", c.folds, f.folds);
    override_if(sub, "--replicates", c.replicates, f.replicates);
    override_if(sub, "--noise", c.noise_rate, f.noise);
    override_if(sub, "--seed", c.seed, f.seed);
    override_if(sub, "--output", c.output_dir, f.output);
    override_if(sub, "--train-fraction", c.train_fraction, f.train_fraction);
    override_if(sub, "--n-train", c.n_train, f.n_train);
    override_if(sub, "--n-test", c.n_test, f.n_test);
    override_if(sub, "--dimension", c.dimension, f.dimension);
    override_if(sub, "--min-split", c.min_split, f.min_split);
    override_if(sub, "--k-features", c.k_features, f.k_features);
    override_if(sub, "--alpha", c.alpha, f.alpha);
    override_if(sub, "--jobs", c.jobs, f.jobs);
    if (sub.get_option_no_throw("--shapes")) override_if(sub, "--shapes", c.shapes, f.shapes);
    if (sub.get_option_no_throw("--checkpoints")) override_if(sub, "--checkpoints", c.checkpoints, f.checkpoints);
    if (sub.get_option_no_throw("--bins")) override_if(sub, "--bins", c.bins, f.bins);
    if (sub.get_option_no_throw("--shape") && sub.count("--shape")) c.shape = f.shape;

    // Keys irrelevant to the chosen mode are conflicts, whether they came from flags or the file.
    if (c.mode != Mode::curves && c.mode != Mode::weightrank && !c.shapes.empty())
        throw UsageError("shapes is only valid for curves and weightrank");
    if (c.mode != Mode::curves && c.mode != Mode::histogram && !c.checkpoints.empty())
        throw UsageError("checkpoints is only valid for curves and histogram");
    if (c.mode != Mode::histogram && c.shape) throw UsageError("shape is only valid for histogram");

    c.validate();
    return c;
}

/// Full command-line entry point; returns the process exit code.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    try {
        auto cfg = parse_config(args, out);
        if (!cfg) return 0;
        run_experiment(*cfg);
        out << "wrote results to " << cfg->output_dir << '\n';
        return 0;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\nrun with --help for options\n";
        return 2;
    } catch (const IngestionError& e) {
        err << "data error: " << e.what() << '\n';
        return 3;
    } catch (const DomainError& e) {
        err << "data error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return 4;
    }
}

}  // namespace voteboost
