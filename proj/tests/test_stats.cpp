#include <gtest/gtest.h>

#include <cmath>

#include <boost/math/distributions/students_t.hpp>

#include "voteboost/stats.hpp"

using namespace voteboost;

TEST(Summary, MeanAndSampleSd) {
    const std::vector<double> v{0.1, 0.2, 0.3, 0.4};
    EXPECT_DOUBLE_EQ(mean(v), 0.25);
    EXPECT_NEAR(stddev(v), std::sqrt(0.05 / 3.0), 1e-15);
    const ErrorReport r(v);
    EXPECT_EQ(r.replicates(), 4u);
    EXPECT_DOUBLE_EQ(r.mean(), 0.25);
    EXPECT_THROW(ErrorReport({0.1, 1.5}), DomainError);
}

TEST(PairedT, IdenticalVectors) {
    const std::vector<double> a{0.1, 0.2, 0.3};
    const auto r = paired_t_test(a, a, 0.05);
    EXPECT_EQ(r.p_value, 1.0);
    EXPECT_FALSE(r.significant);
}

TEST(PairedT, ConstantNonzeroDifference) {
    const std::vector<double> a{2, 3, 4, 5}, b{1, 2, 3, 4};
    const auto r = paired_t_test(a, b, 0.05);
    EXPECT_TRUE(std::isinf(r.t_stat));
    EXPECT_GT(r.t_stat, 0);
    EXPECT_EQ(r.p_value, 0.0);
    EXPECT_TRUE(r.significant);
}

TEST(PairedT, HandExample) {
    const std::vector<double> a{0.01, 0.03, 0.02, 0.00, 0.04}, b(5, 0.0);
    const auto r = paired_t_test(a, b, 0.05);
    EXPECT_NEAR(r.t_stat, 2.828427, 1e-5);
    const boost::math::students_t dist(4);
    EXPECT_NEAR(r.p_value, 2 * boost::math::cdf(boost::math::complement(dist, r.t_stat)), 1e-12);
    EXPECT_NEAR(r.p_value, 0.047, 0.001);
    EXPECT_TRUE(r.significant);
}

TEST(PairedT, MatchesBoostAcrossDegreesOfFreedom) {
    for (double nu : {1.0, 2.0, 7.0, 30.0, 99.0})
        for (double t : {0.1, 0.9, 2.0, 4.5}) {
            const boost::math::students_t dist(nu);
            EXPECT_NEAR(student_t_two_sided_p(t, nu), 2 * boost::math::cdf(boost::math::complement(dist, t)), 1e-12);
            EXPECT_NEAR(student_t_two_sided_p(-t, nu), student_t_two_sided_p(t, nu), 1e-15);
        }
}

TEST(PairedT, LengthMismatchRejected) {
    EXPECT_THROW(paired_t_test(std::vector<double>{1, 2}, std::vector<double>{1}, 0.05), DomainError);
}

TEST(WinDrawLoss, AllIdenticalAreDraws) {
    std::vector<PairedReports> reps(4, {ErrorReport({0.1, 0.2, 0.15}), ErrorReport({0.1, 0.2, 0.15})});
    EXPECT_EQ(win_draw_loss(reps, 0.05), (WinDrawLoss{0, 4, 0}));
}

TEST(WinDrawLoss, LargeMarginIsWin) {
    std::vector<double> a, b;
    for (int i = 0; i < 100; ++i) {
        a.push_back(0.05 + 0.001 * (i % 7));
        b.push_back(0.20 + 0.001 * (i % 5));
    }
    std::vector<PairedReports> reps{{ErrorReport(a), ErrorReport(b)}};
    EXPECT_EQ(win_draw_loss(reps, 0.05), (WinDrawLoss{1, 0, 0}));
    std::vector<PairedReports> flipped{{ErrorReport(b), ErrorReport(a)}};
    EXPECT_EQ(win_draw_loss(flipped, 0.05), (WinDrawLoss{0, 0, 1}));
}

TEST(WinDrawLoss, AgreesWithPerDatasetTests) {
    const std::vector<PairedReports> reps{
        {ErrorReport({0.10, 0.12, 0.11, 0.13, 0.10}), ErrorReport({0.14, 0.15, 0.16, 0.15, 0.17})},
        {ErrorReport({0.10, 0.30, 0.20, 0.25, 0.15}), ErrorReport({0.11, 0.28, 0.22, 0.24, 0.16})},
        {ErrorReport({0.30, 0.31, 0.33, 0.32, 0.35}), ErrorReport({0.20, 0.22, 0.21, 0.24, 0.20})}};
    WinDrawLoss want;
    for (const auto& r : reps) {
        const auto t = paired_t_test(r.a.errors, r.b.errors, 0.05);
        if (!t.significant) ++want.draws;
        else if (r.a.mean() < r.b.mean()) ++want.wins;
        else ++want.losses;
    }
    EXPECT_EQ(win_draw_loss(reps, 0.05), want);
    EXPECT_EQ(want, (WinDrawLoss{1, 1, 1}));
}

TEST(Ranks, TiesAveraged) {
    const std::vector<double> v{0.3, 0.1, 0.3, 0.2};
    EXPECT_EQ(average_ranks(v), (std::vector<double>{3.5, 1, 3.5, 2}));
}

TEST(Ranks, SpearmanIdentityAndReversal) {
    const std::vector<double> x{1, 5, 3, 2, 4}, rev{5, 1, 3, 4, 2};
    EXPECT_DOUBLE_EQ(spearman_rho(x, x), 1.0);
    EXPECT_DOUBLE_EQ(spearman_rho(x, rev), -1.0);
}

TEST(Nemenyi, CriticalDifference) {
    EXPECT_NEAR(nemenyi_critical_difference(4, 20, 0.05), 2.569 * std::sqrt(20.0 / 120.0), 1e-12);
    EXPECT_NEAR(nemenyi_critical_difference(4, 20, 0.05), 1.0487, 0.0005);
    EXPECT_THROW(nemenyi_q(11, 0.05), DomainError);
    EXPECT_THROW(nemenyi_q(4, 0.01), DomainError);
}

TEST(Nemenyi, BestEverywhereRanksFirst) {
    std::vector<std::vector<double>> m{{0.1, 0.2, 0.05}, {0.2, 0.3, 0.1}, {0.3, 0.25, 0.2}};
    const auto rc = average_ranks_nemenyi(m, 0.05);
    EXPECT_EQ(rc.avg_ranks[0], 1.0);
    EXPECT_NEAR(rc.critical_difference, nemenyi_critical_difference(3, 3, 0.05), 1e-15);
}

TEST(Nemenyi, IdenticalMethodsShareRank) {
    std::vector<std::vector<double>> m{{0.1, 0.2}, {0.1, 0.2}, {0.3, 0.4}};
    const auto rc = average_ranks_nemenyi(m, 0.05);
    EXPECT_EQ(rc.avg_ranks[0], 1.5);
    EXPECT_EQ(rc.avg_ranks[1], 1.5);
    EXPECT_EQ(rc.avg_ranks[2], 3.0);
    ASSERT_FALSE(rc.groups.empty());
}
