#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "mclust/ensemble_enumeration.hpp"
#include "mclust/scenario.hpp"
#include "mclust/synth.hpp"

using namespace mclust;
using namespace mclust::synth;

namespace {

std::vector<std::uint8_t> key_of(const Matrix<std::uint8_t>& m) { return {m.data().begin(), m.data().end()}; }

// All binary matrices with the given margins.
std::set<std::vector<std::uint8_t>> same_margins(const BipartiteSnapshot& snap) {
    std::set<std::vector<std::uint8_t>> out;
    const std::size_t ns = snap.n_securities(), nf = snap.n_firms(), cells = ns * nf;
    for (std::uint32_t mask = 0; mask < (1U << cells); ++mask) {
        Matrix<std::uint8_t> adj(ns, nf, 0);
        std::vector<int> df(nf, 0), ds(ns, 0);
        for (std::size_t c = 0; c < cells; ++c)
            if ((mask >> c) & 1U) {
                adj(c / nf, c % nf) = 1;
                ++df[c % nf];
                ++ds[c / nf];
            }
        if (df == snap.firm_degrees && ds == snap.security_degrees) out.insert(key_of(adj));
    }
    return out;
}

double kurtosis_of(const std::vector<PricePoint>& points) {
    std::vector<double> r;
    for (std::size_t i = 1; i < points.size(); ++i) r.push_back(std::log(points[i].close / points[i - 1].close));
    return *moments(r).kurtosis;
}

}  // namespace

TEST(Generate, PlantedBlocksAreBlockDiagonal) {
    GeneratorSpec spec;
    spec.blocks = 3;
    spec.firms_per_block = 3;
    spec.securities_per_block = 3;
    const auto g = generate(spec);
    ASSERT_EQ(g.snapshot.n_firms(), 9u);
    ASSERT_EQ(g.snapshot.n_securities(), 9u);
    for (std::size_t s = 0; s < 9; ++s)
        for (std::size_t f = 0; f < 9; ++f) EXPECT_EQ(g.snapshot.linked(s, f), s / 3 == f / 3);
    EXPECT_EQ(g.security_label, (std::vector<int>{0, 0, 0, 1, 1, 1, 2, 2, 2}));
}

TEST(Generate, SparsePlantedBlocksHaveNoIsolatedNodes) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        GeneratorSpec spec;
        spec.within_density = 0.4;
        spec.seed = seed;
        const auto g = generate(spec);
        EXPECT_EQ(g.snapshot.n_firms(), 12u);
        EXPECT_EQ(g.snapshot.n_securities(), 15u);
        EXPECT_EQ(generate(spec).snapshot, g.snapshot);
    }
    GeneratorSpec bad;
    bad.blocks = 0;
    EXPECT_THROW(generate(bad), UsageError);
}

TEST(Generate, RewiringKeepsDegrees) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto ref = fixtures::random_snapshot(seed, 30, 12, 0.3);
        GeneratorSpec spec;
        spec.kind = GeneratorKind::random_degree_matched;
        spec.reference = ref;
        spec.seed = seed;
        const auto g = generate(spec).snapshot;
        EXPECT_EQ(g.firm_degrees, ref.firm_degrees);
        EXPECT_EQ(g.security_degrees, ref.security_degrees);
        EXPECT_NE(g.adjacency, ref.adjacency);
    }
    GeneratorSpec missing;
    missing.kind = GeneratorKind::random_degree_matched;
    EXPECT_THROW(generate(missing), UsageError);
}

TEST(Generate, BridgeJoinsTwoDisjointClusters) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        GeneratorSpec spec;
        spec.kind = GeneratorKind::bridge_security;
        spec.seed = seed;
        const auto g = generate(spec);
        const auto& snap = g.snapshot;
        int bridges = 0;
        for (std::size_t s = 0; s < snap.n_securities(); ++s) {
            std::set<int> sides;
            for (std::size_t f = 0; f < snap.n_firms(); ++f)
                if (snap.linked(s, f)) sides.insert(g.firm_label[f]);
            if (g.security_label[s] == 2) {
                EXPECT_EQ(sides, (std::set<int>{0, 1}));
                ++bridges;
            } else {
                EXPECT_EQ(sides, (std::set<int>{g.security_label[s]}));
            }
        }
        EXPECT_EQ(bridges, 1);
    }
}

TEST(Generate, PartialClusterLevels) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        GeneratorSpec spec;
        spec.kind = GeneratorKind::partial_cluster;
        spec.seed = seed;
        const auto g = generate(spec);
        for (std::size_t s = 0; s < g.snapshot.n_securities(); ++s) {
            int core = 0;
            for (std::size_t f = 0; f < g.snapshot.n_firms(); ++f) core += g.snapshot.linked(s, f) && g.firm_label[f];
            EXPECT_EQ(core, g.security_label[s]);
            EXPECT_EQ(g.snapshot.security_degrees[s], 3);
        }
    }
    EXPECT_THROW(parse_generator_kind("nope"), UsageError);
}

TEST(EdgeSwap, ReachesTheWholeDegreeClass) {
    std::size_t classes = 0;
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const auto ref = fixtures::random_snapshot(200 + seed, 4, 4, 0.5);
        if (ref.n_firms() != 4 || ref.n_securities() != 4) continue;
        const auto all = same_margins(ref);
        EdgeSwapper swapper(ref.adjacency);
        auto gen = make_engine(seed, "reach");
        std::set<std::vector<std::uint8_t>> seen{key_of(ref.adjacency)};
        for (int i = 0; i < 10000; ++i) {
            swapper.attempt(gen, 1);
            seen.insert(key_of(swapper.adjacency()));
        }
        EXPECT_GE(static_cast<double>(seen.size()), 0.99 * static_cast<double>(all.size()));
        for (const auto& k : seen) EXPECT_TRUE(all.contains(k));
        ++classes;
    }
    EXPECT_GE(classes, 4u);
}

TEST(Enumeration, DistributionInvariants) {
    for (const auto& rows : std::vector<std::vector<std::string>>{{"1100", "0111", "1010"}, {"110", "011", "111", "100"}}) {
        const auto snap = fixtures::snapshot_of(rows);
        const auto e = enumerate_ensemble(snap);
        double total = 0;
        for (double p : e.probabilities) total += p;
        EXPECT_NEAR(total, 1.0, 1e-12);
        for (std::size_t f = 0; f < snap.n_firms(); ++f) {
            double sum = 0;
            for (std::size_t s = 0; s < snap.n_securities(); ++s) sum += e.marginals(s, f);
            EXPECT_NEAR(sum, snap.firm_degrees[f], 1e-10);
        }
        for (std::size_t s = 0; s < snap.n_securities(); ++s) {
            double sum = 0;
            for (std::size_t f = 0; f < snap.n_firms(); ++f) sum += e.marginals(s, f);
            EXPECT_NEAR(sum, snap.security_degrees[s], 1e-10);
        }
        double entropy = 0;
        for (double p : e.probabilities)
            if (p > 0) entropy -= p * std::log(p);
        EXPECT_NEAR(e.entropy, entropy, 1e-10);
    }
}

TEST(SampleNull, DegenerateModels) {
    NullModel zero;
    zero.link_prob = Matrix<double>(3, 4, 0.0);
    const auto z = sample_null(zero, 50, 1);
    for (double m : z.mean_motifs) EXPECT_EQ(m, 0.0);
    NullModel one;
    one.link_prob = Matrix<double>(3, 4, 1.0);
    const auto o = sample_null(one, 50, 1);
    for (std::size_t s = 0; s < 3; ++s) {
        EXPECT_EQ(o.mean_motifs[s], 6.0 * 2.0);  // C(4,2) pairs x 2 other securities
        EXPECT_EQ(o.stderr_motifs[s], 0.0);
    }
}

TEST(SampleNull, MonteCarloMatchesExpectation) {
    const auto snap = fixtures::snapshot_of({"1101", "0110", "1011"});
    const auto m = solve_null_model(snap);
    const auto expected = expected_clustering(m);
    const auto a = sample_null(m, 10000, 3), b = sample_null(m, 10000, 3);
    EXPECT_EQ(a.mean_motifs, b.mean_motifs);
    for (std::size_t s = 0; s < expected.size(); ++s) {
        EXPECT_LE(std::abs(a.mean_motifs[s] - expected[s]), 4 * a.stderr_motifs[s]);
        EXPECT_NEAR(a.mean_score[s], 0.0, 0.05);
    }
}

TEST(PricePanel, ZeroVolatilityIsConstant) {
    PricePanelSpec spec;
    spec.groups.push_back({"flat", {"A", "B"}, ReturnLaw::normal, 3.0, 0.0});
    const auto panel = generate_price_panel(spec);
    for (const auto& [id, pts] : panel.prices) {
        EXPECT_EQ(pts.size(), business_days(spec.start, spec.end).size());
        for (const auto& p : pts) EXPECT_EQ(p.close, 100.0);
    }
    EXPECT_EQ(panel.group_of.at("B"), "flat");
    EXPECT_EQ(business_days(parse_date("2013-03-01"), parse_date("2013-03-10")).size(), 6u);
}

TEST(PricePanel, HeavyTailsShowInKurtosis) {
    int ordered = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        PricePanelSpec spec;
        spec.seed = seed;
        spec.groups.push_back({"heavy", {"T"}, ReturnLaw::student_t, 3.0, 0.02});
        spec.groups.push_back({"light", {"N"}, ReturnLaw::normal, 3.0, 0.02});
        const auto panel = generate_price_panel(spec);
        ordered += kurtosis_of(panel.prices.at("T")) > kurtosis_of(panel.prices.at("N"));
    }
    EXPECT_GE(ordered, 95);
}

TEST(PricePanel, DeterministicAndStreamStable) {
    PricePanelSpec spec;
    spec.seed = 42;
    spec.groups.push_back({"g", {"A", "B"}, ReturnLaw::student_t, 4.0, 0.01});
    std::ostringstream x, y;
    write_prices(x, generate_price_panel(spec).prices);
    write_prices(y, generate_price_panel(spec).prices);
    EXPECT_EQ(x.str(), y.str());
    auto wider = spec;
    wider.groups[0].securities.push_back("C");
    EXPECT_EQ(generate_price_panel(wider).prices.at("A"), generate_price_panel(spec).prices.at("A"));
    spec.groups[0].dof = 2.0;
    EXPECT_THROW(generate_price_panel(spec), UsageError);
}

TEST(Scenario, LayoutAndCoverage) {
    MarketScenario s;
    s.months = {{2013, 1}, {2013, 2}};
    s.history_months = 2;
    const auto truth = scenario_securities(s);
    ASSERT_EQ(truth.size(), 2 * s.n_per_universe());
    EXPECT_TRUE(truth.front().covered);
    EXPECT_FALSE(truth.back().covered);
    EXPECT_EQ(truth.front().law, ReturnLaw::student_t);
    EXPECT_EQ(truth[s.n_per_universe()].law, ReturnLaw::normal);
    const auto data = generate_scenario(s);
    std::vector<TradeRecord> principal;
    for (const auto& t : data.trades)
        if (t.capacity == Capacity::principal) principal.push_back(t);
    const auto split = coverage_split(principal, data.turnover);
    for (const auto& t : truth) {
        const auto cls = split.classify(t.security_id, 2013);
        if (!cls) continue;
        EXPECT_EQ(*cls, t.covered ? CoverageClass::covered : CoverageClass::control) << t.security_id;
    }
    EXPECT_EQ(data.prices.prices.size(), truth.size());
    EXPECT_EQ(data.market.size(), 4u);
}

TEST(Scenario, JsonValidation) {
    EXPECT_THROW(market_scenario_from_json({{"bogus", 1}}), UsageError);
    EXPECT_THROW(market_scenario_from_json({{"within_density", 0.0}}), UsageError);
    EXPECT_THROW(market_scenario_from_json({{"first_month", "2013-05"}, {"last_month", "2013-01"}}), UsageError);
    const auto s = market_scenario_from_json({{"kind", "market"}, {"seed", 9}, {"control", false}});
    EXPECT_EQ(s.seed, 9u);
    EXPECT_FALSE(s.control);
}
