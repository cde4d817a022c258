#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "mclust/grouptests.hpp"
#include "mclust/util/rng.hpp"
#include "oracles.hpp"

using namespace mclust;

namespace {

std::vector<double> normal(std::uint64_t seed, std::size_t n, double mu = 0.0) {
    auto gen = make_engine(seed, "group-normal");
    std::normal_distribution<double> d(mu, 1.0);
    std::vector<double> x(n);
    for (auto& v : x) v = d(gen);
    return x;
}

std::vector<int> poisson(std::uint64_t seed, std::size_t n, double mean) {
    auto gen = make_engine(seed, "group-poisson");
    std::poisson_distribution<int> d(mean);
    std::vector<int> x(n);
    for (auto& v : x) v = d(gen);
    return x;
}

std::vector<SecurityScore> scored(const std::vector<double>& values) {
    std::vector<SecurityScore> out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "S%03zu", i);
        out.push_back({id, values[i]});
    }
    return out;
}

InstabilityReport report(std::string id, double kurtosis, int outliers) {
    InstabilityReport r;
    r.security_id = std::move(id);
    r.window = "2013";
    r.kurtosis = kurtosis;
    r.mad = kurtosis;
    r.variance = kurtosis;
    r.skewness = kurtosis;
    r.hill_pos = kurtosis;
    r.hill_neg = kurtosis;
    r.outliers_pos = outliers;
    r.outliers_neg = outliers;
    return r;
}

}  // namespace

TEST(Terciles, ExactThirds) {
    const auto g = assign_terciles(scored({5, 3, 1, 9, 7, 2, 8, 4, 6}), "2013");
    EXPECT_EQ(g.members(Group::low), (std::vector<std::string>{"S001", "S002", "S005"}));
    EXPECT_EQ(g.members(Group::high), (std::vector<std::string>{"S003", "S004", "S006"}));
    EXPECT_EQ(g.low_cutoff, 3.0);
    EXPECT_EQ(g.high_cutoff, 7.0);
    EXPECT_THROW(assign_terciles(scored({1, 2, 3, 4, 5, 6, 7, 8})), InsufficientDataError);
}

TEST(Terciles, TiesBreakById) {
    const auto g = assign_terciles(scored(std::vector<double>(10, 0.0)));
    EXPECT_EQ(g.members(Group::low), (std::vector<std::string>{"S000", "S001", "S002"}));
    EXPECT_EQ(g.members(Group::high), (std::vector<std::string>{"S007", "S008", "S009"}));
}

TEST(Terciles, MatchSortOracleAndIgnoreInputOrder) {
    auto gen = make_engine(1, "terciles");
    std::uniform_int_distribution<int> coarse(0, 20);
    std::vector<double> values(100);
    for (auto& v : values) v = coarse(gen) / 4.0;
    auto input = scored(values);
    std::vector<std::pair<double, std::string>> pairs;
    for (const auto& s : input) pairs.emplace_back(s.score, s.security_id);
    const auto want = oracle::terciles(pairs);
    const auto g = assign_terciles(input);
    for (const auto& [id, grp] : want)
        EXPECT_EQ(g.groups.at(id), grp < 0 ? Group::low : (grp > 0 ? Group::high : Group::middle));
    std::shuffle(input.begin(), input.end(), gen);
    EXPECT_EQ(assign_terciles(input).groups, g.groups);
    for (const auto& s : input) {
        if (g.groups.at(s.security_id) == Group::low) EXPECT_LE(s.score, g.low_cutoff);
        if (g.groups.at(s.security_id) == Group::high) EXPECT_GE(s.score, g.high_cutoff);
    }
}

TEST(Terciles, ClusteringScoresAndWindowMeans) {
    std::vector<ClusteringScore> monthly;
    for (int m = 1; m <= 2; ++m)
        for (int i = 0; i < 10; ++i) {
            ClusteringScore c;
            c.security_id = "S" + std::to_string(i);
            c.month = {2013, m};
            c.score = i * m;
            monthly.push_back(c);
        }
    monthly[3].status = ScoreStatus::degenerate_no_expectation;
    monthly[3].score.reset();
    const auto w = window_scores(monthly, {{2013, 1}, {2013, 2}});
    ASSERT_EQ(w.size(), 10u);
    const auto s3 = std::find_if(w.begin(), w.end(), [](auto& s) { return s.security_id == "S3"; });
    EXPECT_DOUBLE_EQ(s3->score, 6.0);
    const auto s4 = std::find_if(w.begin(), w.end(), [](auto& s) { return s.security_id == "S4"; });
    EXPECT_DOUBLE_EQ(s4->score, 6.0);
    const std::vector<ClusteringScore> january(monthly.begin(), monthly.begin() + 10);
    EXPECT_EQ(assign_terciles(january).groups.size(), 9u);
}

TEST(Ks, Examples) {
    const auto a = normal(1, 50);
    const auto same = ks_two_sample(a, a);
    EXPECT_EQ(same.statistic, 0.0);
    EXPECT_EQ(same.p_value, 1.0);
    std::vector<double> b(a);
    for (double& v : b) v += 100;
    const auto apart = ks_two_sample(a, b);
    EXPECT_EQ(apart.statistic, 1.0);
    EXPECT_LT(apart.p_value, 1e-10);
    EXPECT_EQ(apart.direction, 1);
    EXPECT_THROW(ks_two_sample(std::vector<double>{1, 2, 3}, a), InsufficientDataError);
}

TEST(Ks, StatisticMatchesDefinition) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto a = normal(seed, 30 + seed), b = normal(seed + 100, 45, 0.3);
        for (double& v : a) v = std::round(v * 4) / 4;  // ties
        EXPECT_NEAR(ks_two_sample(a, b).statistic, oracle::ks_statistic(a, b), 1e-15);
    }
}

TEST(Ks, PermutationAgreement) {
    const auto a = normal(2, 200), b = normal(3, 200, 0.5);
    const auto r = ks_two_sample(a, b);
    EXPECT_NEAR(r.p_value, oracle::PermutationOracle(a, b).ks_p(b, 20000, 7), 0.01);
    const auto c = normal(4, 120), d = normal(5, 150, 0.2);
    EXPECT_NEAR(ks_two_sample(c, d).p_value, oracle::PermutationOracle(c, d).ks_p(d, 20000, 8), 0.01);
}

TEST(Mww, Examples) {
    const auto a = normal(6, 50);
    const auto same = mww_test(a, a);
    EXPECT_NEAR(same.p_value, 1.0, 1e-12);
    EXPECT_EQ(signed_verdict(same, 0.025), "=");
    std::vector<double> b(a);
    for (double& v : b) v += 10;
    const auto shifted = mww_test(a, b);
    EXPECT_LT(shifted.p_value, 1e-10);
    EXPECT_EQ(shifted.direction, 1);
    EXPECT_EQ(signed_verdict(shifted, 0.025), "+");
}

TEST(Mww, HeavyTiesAgainstPermutation) {
    const auto ia = poisson(1, 60, 1.0), ib = poisson(2, 70, 1.4);
    std::vector<double> a(ia.begin(), ia.end()), b(ib.begin(), ib.end());
    EXPECT_NEAR(mww_test(a, b).p_value, oracle::PermutationOracle(a, b).mww_p(b, 20000, 9), 0.01);
}

TEST(TwoSample, SymmetryAndMonotoneTransform) {
    const auto a = normal(10, 80), b = normal(11, 90, 0.3);
    for (auto test : {&ks_two_sample, &mww_test}) {
        const auto ab = test(a, b), ba = test(b, a);
        EXPECT_NEAR(ab.p_value, ba.p_value, 1e-12);
        EXPECT_EQ(ab.direction, -ba.direction);
    }
    auto ta = a, tb = b;
    for (double& v : ta) v = std::exp(v);
    for (double& v : tb) v = std::exp(v);
    EXPECT_EQ(ks_two_sample(ta, tb).statistic, ks_two_sample(a, b).statistic);
    EXPECT_NEAR(mww_test(ta, tb).p_value, mww_test(a, b).p_value, 1e-14);
}

TEST(TwoSample, SizeUnderNull) {
    const double alpha = 0.05;
    const double se = std::sqrt(alpha * (1 - alpha) / 1000.0);
    int ks = 0, mww = 0, chi = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const auto a = normal(5000 + seed, 100), b = normal(9000 + seed, 100);
        ks += ks_two_sample(a, b).p_value < alpha;
        mww += mww_test(a, b).p_value < alpha;
        chi += chi2_binned(poisson(seed, 200, 1.0), poisson(seed + 7000, 200, 1.0)).p_value < alpha;
    }
    EXPECT_NEAR(ks / 1000.0, alpha, 2 * se);
    EXPECT_NEAR(mww / 1000.0, alpha, 2 * se);
    EXPECT_NEAR(chi / 1000.0, alpha, 2 * se);
}

TEST(Chi2, Examples) {
    const std::vector<int> a{0, 0, 1, 1, 2, 3, 0, 1, 0, 2, 0, 1, 0, 0, 1, 4, 0, 1, 2, 0};
    const auto same = chi2_binned(a, a);
    EXPECT_EQ(same.statistic, 0.0);
    EXPECT_NEAR(same.p_value, 1.0, 1e-12);
    const std::vector<int> zeros(100, 0), fives(100, 5);
    const auto apart = chi2_binned(zeros, fives);
    EXPECT_LT(apart.p_value, 1e-10);
    EXPECT_EQ(apart.bins, 2u);
    const auto one_bin = chi2_binned(std::vector<int>(20, 1), std::vector<int>(20, 1));
    EXPECT_TRUE(one_bin.degenerate);
}

TEST(Chi2, MergesRightmostSparseBins) {
    // Outcomes 0..3 with the sparse tail folded into bin 1.
    std::vector<int> a, b;
    for (int i = 0; i < 30; ++i) a.push_back(0), b.push_back(0);
    for (int i = 0; i < 10; ++i) a.push_back(1), b.push_back(1);
    a.push_back(2);
    b.push_back(3);
    const auto r = chi2_binned(a, b);
    EXPECT_EQ(r.bins, 2u);
    EXPECT_NEAR(r.statistic, 0.0, 1e-12);
}

TEST(Verdicts, DominanceAndEquality) {
    std::vector<InstabilityReport> reports;
    std::vector<SecurityScore> scores;
    for (int i = 0; i < 60; ++i) {
        const std::string id = "S" + std::to_string(100 + i);
        scores.push_back({id, static_cast<double>(i)});
        const bool high = i >= 40;
        reports.push_back(report(id, (high ? 10.0 : 3.0) + 0.01 * i, high ? i % 6 + 3 : i % 2));
    }
    const auto g = assign_terciles(scores, "2013");
    const auto v = verdict_table(reports, g, CriticalValues::annual());
    ASSERT_EQ(v.size(), standard_measures().size());
    for (const auto& t : v) {
        EXPECT_EQ(t.n_low, 20u);
        EXPECT_EQ(t.n_high, 20u);
        if (t.test1 == "KS") EXPECT_EQ(t.test1_sign, "+") << t.measure;
        else EXPECT_EQ(t.test1_sign, "\xE2\x89\xA0") << t.measure;
        EXPECT_EQ(t.test2_sign, "+") << t.measure;
        EXPECT_GE(t.test1_p, 0.0);
        EXPECT_LE(t.test2_p, 1.0);
    }
    std::vector<InstabilityReport> flat;
    for (int i = 0; i < 60; ++i) flat.push_back(report("S" + std::to_string(100 + i), (i * 7) % 13, (i * 5) % 3));
    for (const auto& t : verdict_table(flat, g, CriticalValues::annual())) {
        EXPECT_EQ(t.test1_sign, "=") << t.measure;
        EXPECT_EQ(t.test2_sign, "=") << t.measure;
    }
}

TEST(Verdicts, MissingValuesAreCounted) {
    std::vector<InstabilityReport> reports;
    std::vector<SecurityScore> scores;
    for (int i = 0; i < 30; ++i) {
        const std::string id = "S" + std::to_string(10 + i);
        scores.push_back({id, static_cast<double>(i)});
        auto r = report(id, i, 0);
        if (i % 4 == 0) r.kurtosis.reset();
        if (i != 29) reports.push_back(r);
    }
    const auto g = assign_terciles(scores, "2013");
    const auto v = verdict_table(reports, g, CriticalValues::two_month());
    const auto k = std::find_if(v.begin(), v.end(), [](auto& t) { return t.measure == "kurtosis"; });
    // Low S10..S19 loses S10, S14, S18; high S30..S39 loses S30, S34, S38 and the absent S39.
    EXPECT_EQ(k->dropped, 7u);
    EXPECT_EQ(k->n_low, 7u);
    EXPECT_EQ(k->n_high, 6u);
    EXPECT_EQ(k->test1_critical, 0.05);
    std::ostringstream out;
    write_verdicts(out, v);
    EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "measure,window,test1_sign,test1_p,test2_sign,test2_p");
}

TEST(Cdf, CurvesMatchEcdfOracle) {
    const auto a = normal(20, 40), b = normal(21, 55, 0.4);
    const auto pts = cdf_curves(a, b);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        EXPECT_NEAR(pts[i].f_low, oracle::ecdf(a, pts[i].x), 1e-15);
        EXPECT_NEAR(pts[i].f_high, oracle::ecdf(b, pts[i].x), 1e-15);
        if (i) EXPECT_LT(pts[i - 1].x, pts[i].x);
    }
    EXPECT_EQ(pts.size(), 95u);
    for (const auto& p : cdf_curves(a, a)) EXPECT_EQ(p.sign, 0);
    std::vector<double> shifted(a);
    for (double& v : shifted) v += 20;
    const double top_a = *std::max_element(a.begin(), a.end());
    const double low_s = *std::min_element(shifted.begin(), shifted.end());
    for (const auto& p : cdf_curves(a, shifted))
        if (p.x >= *std::min_element(a.begin(), a.end()) && p.x < low_s) EXPECT_EQ(p.sign, -1);
    EXPECT_LT(top_a, low_s);
    std::ostringstream out;
    write_cdf(out, pts);
    EXPECT_EQ(out.str().substr(0, 17), "x,F_low,F_high,si");
}
