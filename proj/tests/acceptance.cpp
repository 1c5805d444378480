// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   acceptance [--replicates N] [--only 1,4,5] [--jobs J]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <boost/math/distributions/binomial.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "voteboost/cli.hpp"
#include "oracles.hpp"

using namespace voteboost;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

std::string pct(double v) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(2);
    s << 100.0 * v << '%';
    return s.str();
}

std::string within(const std::string& name, double v, double lo, double hi, bool& ok) {
    const bool in = v >= lo && v <= hi;
    ok = ok && in;
    return name + " " + pct(v) + (in ? " in " : " NOT in ") + "[" + pct(lo) + ", " + pct(hi) + "]";
}

// ---- criteria 1-3: synthetic benchmark ---------------------------------------

struct BenchRun {
    std::vector<EnsembleKind> methods;
    std::vector<std::vector<double>> errors;  // [method][replicate]
    std::vector<double> shapes;
};

BenchRun benchmark(const std::string& dataset, std::vector<EnsembleKind> methods, std::size_t replicates, std::size_t jobs) {
    ExperimentConfig cfg;
    cfg.datasets = {dataset};
    cfg.methods = methods;
    cfg.replicates = replicates;
    cfg.T = 501;
    cfg.cv_T = 101;
    cfg.seed = 20170101;
    cfg.jobs = jobs;
    const DatasetSource src(dataset, cfg);
    const auto t0 = std::chrono::steady_clock::now();
    auto per_rep = parallel_map<std::vector<MethodOutcome>>(replicates, jobs, [&](std::size_t r) {
        const auto rep = src.make(cfg, data_stream(cfg, 0, r));
        std::vector<MethodOutcome> out;
        for (auto m : methods) out.push_back(run_method(m, rep, cfg, method_stream(cfg, 0, r, m)));
        return out;
    });
    BenchRun run{methods, std::vector<std::vector<double>>(methods.size()), {}};
    for (const auto& rep : per_rep)
        for (std::size_t m = 0; m < methods.size(); ++m) {
            run.errors[m].push_back(rep[m].error);
            if (rep[m].selected_shape) run.shapes.push_back(*rep[m].selected_shape);
        }
    std::cerr << "  " << dataset << ": " << replicates << " replicates in "
              << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s\n";
    return run;
}

std::string shape_summary(const std::vector<double>& shapes) {
    auto s = shapes;
    std::sort(s.begin(), s.end());
    return "median selected a=b " + fmt6(s[s.size() / 2]);
}

Outcome criterion1(std::size_t reps, std::size_t jobs) {
    const auto run = benchmark("twonorm", {EnsembleKind::vote_boost, EnsembleKind::random_forest, EnsembleKind::bagging}, reps, jobs);
    bool ok = true;
    std::string d = within("vote-boost", mean(run.errors[0]), 0.027, 0.047, ok) + "; " +
                    within("random forest", mean(run.errors[1]), 0.029, 0.049, ok) + "; " +
                    within("bagging", mean(run.errors[2]), 0.049, 0.079, ok) + "; " + shape_summary(run.shapes);
    return {ok, d};
}

Outcome criterion2(std::size_t reps, std::size_t jobs) {
    const auto run = benchmark("ringnorm", {EnsembleKind::vote_boost, EnsembleKind::adaboost, EnsembleKind::bagging}, reps, jobs);
    bool ok = true;
    std::string d = within("vote-boost", mean(run.errors[0]), 0.030, 0.058, ok) + "; " +
                    within("AdaBoost", mean(run.errors[1]), 0.028, 0.058, ok) + "; " +
                    within("bagging", mean(run.errors[2]), 0.071, 0.107, ok) + "; " + shape_summary(run.shapes);
    return {ok, d};
}

Outcome criterion3(std::size_t reps, std::size_t jobs) {
    const auto run = benchmark("threenorm", {EnsembleKind::vote_boost, EnsembleKind::bagging}, reps, jobs);
    bool ok = true;
    std::string d = within("vote-boost", mean(run.errors[0]), 0.144, 0.184, ok);
    // replicate-averaged runs: consecutive blocks of 5 replicates
    const std::size_t block = 5, blocks = reps / block;
    std::size_t holds = 0;
    for (std::size_t b = 0; b < blocks; ++b) {
        double vb = 0, bag = 0;
        for (std::size_t r = b * block; r < (b + 1) * block; ++r) {
            vb += run.errors[0][r];
            bag += run.errors[1][r];
        }
        holds += vb <= bag;
    }
    const bool order_ok = blocks > 0 && holds * 10 >= blocks * 9;
    ok = ok && order_ok;
    d += "; bagging " + pct(mean(run.errors[1])) + "; vote-boost <= bagging in " + std::to_string(holds) + "/" +
         std::to_string(blocks) + " runs of 5 replicates (need >= 90%)";
    return {ok, d};
}

// ---- criterion 4 ----------------------------------------------------------------

Outcome criterion4() {
    const double cd = nemenyi_critical_difference(4, 20, 0.05);
    return {std::abs(cd - 1.0487) <= 0.005, "CD(k=4, N=20, alpha=0.05) = " + fmt6(cd) + " (target 1.0487 +- 0.005)"};
}

// ---- criterion 5 ----------------------------------------------------------------

Outcome criterion5() {
    std::size_t same_bag = 0, same_rf = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        RandomSource rng(seed, 77);
        const auto kind = static_cast<SyntheticKind>(seed % 3);
        const auto d = gen_synthetic({kind, 2 + seed % 9}, 40 + 10 * (seed % 7), rng);
        TrainConfig c;
        c.T = 5 + seed % 11;
        c.rng = RandomSource(seed, 1);
        auto members = [](const Ensemble& e) { return to_json(e)["members"].dump() + to_json(e)["member_weights"].dump(); };

        c.base_spec.kind = LearnerKind::cart_unpruned;
        const auto bag = train_bagging(d, c);
        c.emphasis = BetaParams{1, 1};
        same_bag += members(train_vote_boost(d, c)) == members(bag);

        c.base_spec.kind = LearnerKind::random_tree;
        const auto vb_rt = train_vote_boost(d, c);
        c.emphasis.reset();
        same_rf += members(vb_rt) == members(train_random_forest(d, c));
    }
    return {same_bag == 20 && same_rf == 20, "vote-boost(a=b=1) serialized members identical to bagging in " + std::to_string(same_bag) +
                                                 "/20 seeds and to random forest in " + std::to_string(same_rf) + "/20 seeds"};
}

// ---- criterion 6 ----------------------------------------------------------------

Outcome criterion6() {
    const std::vector<double> grid{0.25, 0.75, 1, 1.5, 2.5, 5, 10, 20, 40};
    boost::math::quadrature::tanh_sinh<double> quad;
    double worst_norm = 0, worst_fd = 0, worst_grad = 0;
    for (double s : grid) {
        const BetaParams p{s, s};
        // symmetric density: integrate the half with the representable singular endpoint
        worst_norm = std::max(worst_norm, std::abs(2.0 * quad.integrate([&](double x) { return beta_pdf(x, p); }, 0.0, 0.5) - 1.0));
        for (int k = 1; k <= 9; ++k) {
            const double x = k / 10.0, h = 1e-5;
            const double fd = (beta_cdf(x + h, p) - beta_cdf(x - h, p)) / (2 * h);
            const double g = beta_pdf(x, p);
            worst_fd = std::max(worst_fd, std::abs(fd - g) / std::max(1.0, g));
        }
    }
    RandomSource rng(6, 6);
    std::size_t compared = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 5 + rng.below(30), t = 1 + rng.below(100);
        VoteTally tally(n);
        tally.t = t;
        for (auto& c : tally.t_plus) c = rng.below(t + 1);
        const double s = 0.25 + 39.75 * rng.uniform();
        const BetaParams params{s, s};
        std::vector<double> f(n);
        std::vector<Label> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            f[i] = 2.0 * laplace_fraction(tally.t_plus[i], t) - 1.0;
            y[i] = rng.coin() ? 1 : -1;
        }
        std::vector<double> slope(n);
        double total = 0;
        const double h = 1e-4;
        for (std::size_t i = 0; i < n; ++i) {
            auto at = [&](double step) {
                auto g = f;
                g[i] += step;
                return cost_functional(g, y, params);
            };
            slope[i] = -static_cast<double>(n) * y[i] * (at(-2 * h) - 8 * at(-h) + 8 * at(h) - at(2 * h)) / (12 * h);
            total += slope[i];
        }
        const auto w = compute_weights(tally, params);
        for (std::size_t i = 0; i < n; ++i) {
            if (w[i] < 1e-8) continue;  // finite differences of O(1) costs cannot resolve these
            worst_grad = std::max(worst_grad, std::abs(w[i] - slope[i] / total) / w[i]);
            ++compared;
        }
    }
    const bool ok = worst_norm <= 1e-6 && worst_fd <= 1e-4 && worst_grad <= 1e-4;
    return {ok, "max |integral - 1| = " + fmt6(worst_norm) + " (<= 1e-6); max cdf/pdf finite-difference gap = " + fmt6(worst_fd) +
                    " (<= 1e-4); max gradient-identity relative gap = " + fmt6(worst_grad) + " over " + std::to_string(compared) +
                    " weights (<= 1e-4)"};
}

// ---- criterion 7 ----------------------------------------------------------------

Outcome criterion7() {
    RandomSource rng(7, 7);
    std::size_t stump_ok = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto d = oracle::random_small(rng, 3 + rng.below(15), 1 + rng.below(3), 6);
        std::vector<double> m(d.size());
        for (auto& v : m) v = rng.uniform() + 0.01;
        const auto w = WeightVector::from_masses(m);
        stump_ok += std::abs(oracle::weighted_error(train_stump(d, w), d, w.values()) - oracle::best_stump_error(d, w.values())) <= 1e-12;
    }
    LearnerSpec spec;
    spec.kind = LearnerKind::cart_pruned;
    std::size_t prune_ok = 0, prune_checked = 0;
    for (int trial = 0; prune_checked < 100 && trial < 5000; ++trial) {
        const auto d = oracle::random_small(rng, 8 + rng.below(12), 1 + rng.below(2), 8);
        std::vector<double> m(d.size());
        for (auto& v : m) v = rng.uniform() < 0.5 ? 1.0 : rng.uniform() + 0.1;
        const auto w = WeightVector::from_masses(m);
        const auto tree = train_cart(d, w, spec);
        if (tree.leaf_count() > 10 || tree.leaf_count() < 2) continue;
        ++prune_checked;
        prune_ok += to_json(prune_cart(tree, d, w, spec)) == to_json(oracle::oracle_prune(tree, d, w.values(), spec));
    }
    return {stump_ok == 200 && prune_ok == prune_checked && prune_checked == 100,
            "stump matches exhaustive search on " + std::to_string(stump_ok) + "/200 datasets; pruned tree matches exhaustive subtree CV on " +
                std::to_string(prune_ok) + "/" + std::to_string(prune_checked) + " trees with <= 10 leaves"};
}

// ---- criterion 8 ----------------------------------------------------------------

Outcome criterion8() {
    double worst = 0;
    std::size_t rounds = 0, zero_error_rounds = 0;
    for (std::uint64_t run = 0; run < 20; ++run) {
        RandomSource rng(8, run);
        const auto clean = gen_synthetic({SyntheticKind::twonorm, 5 + run % 16}, 100 + 20 * run, rng);
        const auto d = inject_label_noise(clean, 0.1 + 0.01 * static_cast<double>(run), rng).data;
        TrainConfig c;
        c.T = 40;
        c.base_spec.kind = run % 4 == 3 ? LearnerKind::cart_pruned : LearnerKind::stump;
        c.rng = RandomSource(8, 100 + run);
        TrainTrace trace;
        trace.record_history = true;
        const auto ens = train_adaboost(d, c, &trace);
        for (std::size_t t = 0; t < ens.size(); ++t) {
            if (trace.epsilons[t] == 0.0) {
                ++zero_error_rounds;
                continue;
            }
            double e = 0;
            for (std::size_t i = 0; i < d.size(); ++i)
                if (ens.members[t].predict(d.row(i)) != d.label(i)) e += trace.weight_history[t][i];
            worst = std::max(worst, std::abs(e - 0.5));
            ++rounds;
        }
    }
    return {worst <= 1e-10 && rounds > 0, "max |weighted error under updated weights - 0.5| = " + fmt6(worst) + " over " +
                                              std::to_string(rounds) + " accepted rounds in 20 runs (" +
                                              std::to_string(zero_error_rounds) + " zero-error rounds excluded)"};
}

// ---- criteria 9-10 ----------------------------------------------------------------

struct RankRuns {
    std::vector<WeightRankResult> results;
    std::vector<std::vector<std::size_t>> flipped;
};

RankRuns weight_rank_runs(double noise, const std::vector<double>& shapes, std::size_t jobs, std::uint64_t seed) {
    RankRuns out;
    auto per = parallel_map<std::pair<WeightRankResult, std::vector<std::size_t>>>(20, jobs, [&](std::size_t r) {
        RandomSource rng(seed, r);
        auto d = gen_synthetic({SyntheticKind::twonorm, 20}, 500, rng);
        std::vector<std::size_t> flipped;
        if (noise > 0) {
            auto n = inject_label_noise(d, noise, rng);
            d = std::move(n.data);
            flipped = std::move(n.flipped);
        }
        return std::pair{weight_rank_experiment(d, shapes, 100, RandomSource(seed, 1000 + r), flipped), flipped};
    });
    for (auto& [res, fl] : per) {
        out.results.push_back(std::move(res));
        out.flipped.push_back(std::move(fl));
    }
    return out;
}

std::pair<double, double> split_means(const std::vector<double>& w, const std::vector<std::size_t>& flipped) {
    std::vector<bool> is(w.size(), false);
    for (auto i : flipped) is[i] = true;
    double f = 0, c = 0;
    std::size_t nf = 0, nc = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (is[i]) {
            f += w[i];
            ++nf;
        } else {
            c += w[i];
            ++nc;
        }
    }
    return {f / static_cast<double>(nf), c / static_cast<double>(nc)};
}

Outcome criterion9(std::size_t jobs) {
    const auto runs = weight_rank_runs(0.3, {2.0}, jobs, 9);
    std::size_t ada_higher = 0, vb_lower_ratio = 0;
    double ada_ratio_sum = 0, vb_ratio_sum = 0;
    for (std::size_t r = 0; r < 20; ++r) {
        const auto [af, ac] = split_means(runs.results[r].ada_weights, runs.flipped[r]);
        const auto [vf, vc] = split_means(runs.results[r].shapes[0].vb_weights, runs.flipped[r]);
        ada_higher += af > ac;
        vb_lower_ratio += vf / vc < af / ac;
        ada_ratio_sum += af / ac;
        vb_ratio_sum += vf / vc;
    }
    // one-sided sign test: P(X >= k), X ~ Binomial(20, 1/2)
    const boost::math::binomial binom(20, 0.5);
    const double p = ada_higher == 0 ? 1.0 : boost::math::cdf(boost::math::complement(binom, static_cast<double>(ada_higher) - 1.0));
    const bool ok = p < 0.01 && vb_lower_ratio >= 16;
    return {ok, "AdaBoost flipped > clean mean weight in " + std::to_string(ada_higher) + "/20 (sign test p = " + fmt6(p) +
                    ", need < 0.01); vote-boost(a=b=2) flipped/clean ratio below AdaBoost's in " + std::to_string(vb_lower_ratio) +
                    "/20 (need >= 16); mean ratios " + fmt6(vb_ratio_sum / 20) + " vs " + fmt6(ada_ratio_sum / 20)};
}

Outcome criterion10(std::size_t jobs) {
    const auto runs = weight_rank_runs(0.0, {1.0, 2.0, 30.0}, jobs, 10);
    std::size_t ordered = 0;
    double max_abs_rho1 = 0, sum1 = 0, sum2 = 0, sum30 = 0;
    for (const auto& res : runs.results) {
        const double r1 = res.shapes[0].rho, r2 = res.shapes[1].rho, r30 = res.shapes[2].rho;
        max_abs_rho1 = std::max(max_abs_rho1, std::abs(r1));
        ordered += r30 > r2 && r2 > r1;
        sum1 += r1;
        sum2 += r2;
        sum30 += r30;
    }
    const bool ok = max_abs_rho1 <= 0.15 && ordered >= 16;
    return {ok, "max |rho(a=b=1)| = " + fmt6(max_abs_rho1) + " (<= 0.15); rho(30) > rho(2) > rho(1) in " + std::to_string(ordered) +
                    "/20 (need >= 16); mean rho " + fmt6(sum1 / 20) + ", " + fmt6(sum2 / 20) + ", " + fmt6(sum30 / 20)};
}

// ---- criterion 11 ---------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome criterion11() {
    const std::vector<std::vector<std::string>> experiments{
        {"benchmark", "-d", "twonorm,ringnorm", "--methods", "vb,bagging,adaboost,rf", "--T", "11", "--cv-T", "5", "--grid", "1,5,20",
         "--folds", "3", "--replicates", "3", "--n-train", "80", "--n-test", "200"},
        {"curves", "-d", "threenorm", "--methods", "vb,rf", "--shapes", "1,10", "--T", "9", "--checkpoints", "1,5,9", "--replicates", "2",
         "--n-train", "60", "--n-test", "100"},
        {"weightrank", "-d", "twonorm", "--shapes", "1,2,30", "--T", "20", "--noise", "0.3", "--n-train", "100", "--replicates", "2"},
        {"histogram", "-d", "ringnorm", "--shape", "5", "--T", "9", "--checkpoints", "1,9", "--bins", "5", "--replicates", "2",
         "--n-train", "60", "--n-test", "100"},
        {"select-shape", "-d", "twonorm", "--grid", "1,2,5", "--T", "5", "--folds", "3", "--replicates", "2", "--n-train", "60"}};
    const auto root = fs::temp_directory_path() / "voteboost_acceptance_determinism";
    fs::remove_all(root);
    std::size_t identical = 0, files = 0;
    std::string failures;
    for (std::size_t e = 0; e < experiments.size(); ++e) {
        fs::path dirs[2];
        for (int k = 0; k < 2; ++k) {
            dirs[k] = root / (std::to_string(e) + "_" + std::to_string(k));
            auto args = experiments[e];
            args.insert(args.end(), {"--seed", "99", "--jobs", k == 0 ? "1" : "2", "-o", dirs[k].string()});
            std::ostringstream out, err;
            if (run_cli(args, out, err) != 0) failures += " [" + experiments[e][0] + " failed: " + err.str() + "]";
        }
        for (const auto& entry : fs::directory_iterator(dirs[0])) {
            const auto name = entry.path().filename();
            ++files;
            std::string a = slurp(entry.path()), b = slurp(dirs[1] / name);
            if (name == "manifest.json") {
                // wall time legitimately differs; every other field must match
                auto ja = nlohmann::json::parse(a), jb = nlohmann::json::parse(b);
                ja.erase("wall_time_seconds");
                jb.erase("wall_time_seconds");
                ja["config"].erase("output_dir");
                jb["config"].erase("output_dir");
                a = ja.dump();
                b = jb.dump();
            }
            if (a == b) ++identical;
            else failures += " " + experiments[e][0] + "/" + name.string();
        }
    }
    fs::remove_all(root);
    return {failures.empty() && identical == files && files > 0,
            std::to_string(identical) + "/" + std::to_string(files) + " output files identical across reruns of 5 CLI modes" +
                (failures.empty() ? "" : "; differing:" + failures)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"voteboost acceptance runner"};
    std::size_t replicates = 50, jobs = 0;
    std::vector<int> only;
    app.add_option("--replicates", replicates, "replicates for criteria 1-3 (>= 50 for acceptance)");
    app.add_option("--jobs", jobs, "worker threads (default: available parallelism)");
    app.add_option("--only", only, "subset of criteria to run")->delimiter(',');
    CLI11_PARSE(app, argc, argv);
    auto wanted = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };

    const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
        {1, [&] { return criterion1(replicates, jobs); }},
        {2, [&] { return criterion2(replicates, jobs); }},
        {3, [&] { return criterion3(replicates, jobs); }},
        {4, criterion4},
        {5, criterion5},
        {6, criterion6},
        {7, criterion7},
        {8, criterion8},
        {9, [&] { return criterion9(jobs); }},
        {10, [&] { return criterion10(jobs); }},
        {11, criterion11}};

    int failed = 0;
    for (const auto& [id, check] : criteria) {
        if (!wanted(id)) continue;
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << o.detail << std::endl;
    }
    if (replicates < 50 && (wanted(1) || wanted(2) || wanted(3))) {
        std::cout << "NOTE criteria 1-3 ran with " << replicates << " replicates; acceptance requires >= 50" << std::endl;
        failed += 1;
    }
    return failed == 0 ? 0 : 1;
}
