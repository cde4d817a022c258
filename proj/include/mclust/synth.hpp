#pragma once

// Synthetic trading networks and return panels with known ground truth.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mclust/clustering.hpp"
#include "mclust/entropy_null.hpp"
#include "mclust/instability.hpp"
#include "mclust/market_graph.hpp"
#include "mclust/util/error.hpp"
#include "mclust/util/matrix.hpp"
#include "mclust/util/rng.hpp"

namespace mclust::synth {

inline std::string node_name(char prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%c%04zu", prefix, i);
    return buf;
}

inline std::vector<std::string> node_names(char prefix, std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(node_name(prefix, i));
    return out;
}

// ---------------------------------------------------------------------------
// Degree-preserving randomization

// Checkerboard swaps (s1,f1),(s2,f2) -> (s1,f2),(s2,f1). Each attempt picks two
// edges uniformly; attempts that would create a duplicate edge leave the graph
// unchanged, which keeps the chain aperiodic.
class EdgeSwapper {
public:
    explicit EdgeSwapper(const Matrix<std::uint8_t>& adjacency) : adj_(adjacency) {
        for (std::size_t s = 0; s < adj_.rows(); ++s)
            for (std::size_t f = 0; f < adj_.cols(); ++f)
                if (adj_(s, f)) edges_.emplace_back(s, f);
    }

    std::size_t attempt(Engine& gen, std::size_t attempts) {
        if (edges_.size() < 2) return 0;
        std::uniform_int_distribution<std::size_t> pick(0, edges_.size() - 1);
        std::size_t done = 0;
        while (attempts--) {
            const auto i = pick(gen), j = pick(gen);
            auto [s1, f1] = edges_[i];
            auto [s2, f2] = edges_[j];
            if (s1 == s2 || f1 == f2) continue;
            if (adj_(s1, f2) || adj_(s2, f1)) continue;
            adj_(s1, f1) = adj_(s2, f2) = 0;
            adj_(s1, f2) = adj_(s2, f1) = 1;
            edges_[i] = {s1, f2};
            edges_[j] = {s2, f1};
            ++done;
        }
        return done;
    }

    const Matrix<std::uint8_t>& adjacency() const noexcept { return adj_; }

private:
    Matrix<std::uint8_t> adj_;
    std::vector<std::pair<std::size_t, std::size_t>> edges_;
};

inline BipartiteSnapshot rewire(const BipartiteSnapshot& reference, std::uint64_t seed, std::size_t swaps_per_edge = 10) {
    EdgeSwapper swapper(reference.adjacency);
    auto gen = make_engine(seed, "edge-swap");
    swapper.attempt(gen, swaps_per_edge * std::max<std::size_t>(reference.edge_count(), 1));
    return make_snapshot(reference.month, reference.firms, reference.securities, swapper.adjacency());
}

// ---------------------------------------------------------------------------
// Graph generators

enum class GeneratorKind : std::uint8_t { random_degree_matched, planted_blocks, bridge_security, partial_cluster };

inline GeneratorKind parse_generator_kind(std::string_view s) {
    if (s == "random_degree_matched") return GeneratorKind::random_degree_matched;
    if (s == "planted_blocks") return GeneratorKind::planted_blocks;
    if (s == "bridge_security") return GeneratorKind::bridge_security;
    if (s == "partial_cluster") return GeneratorKind::partial_cluster;
    throw UsageError("unknown generator kind '" + std::string(s) + "'");
}

struct GeneratorSpec {
    GeneratorKind kind = GeneratorKind::planted_blocks;
    // planted_blocks
    std::size_t blocks = 3;
    std::size_t firms_per_block = 4;
    std::size_t securities_per_block = 5;
    double within_density = 1.0;
    // random_degree_matched
    std::optional<BipartiteSnapshot> reference;
    std::size_t swaps_per_edge = 10;
    std::uint64_t seed = 0;
    YearMonth month{2000, 1};
    std::size_t max_retries = 100;
};

// Ground-truth labels, aligned with the snapshot's node order.
//   planted_blocks:  block index per security
//   bridge_security: 0 / 1 for the two clusters, 2 for the bridge
//   partial_cluster: number of core firms trading the security (1..3)
struct GeneratedGraph {
    BipartiteSnapshot snapshot;
    std::vector<int> security_label;
    std::vector<int> firm_label;
};

namespace detail {

inline bool has_isolated(const Matrix<std::uint8_t>& adj) {
    for (std::size_t s = 0; s < adj.rows(); ++s) {
        bool any = false;
        for (std::size_t f = 0; f < adj.cols() && !any; ++f) any = adj(s, f);
        if (!any) return true;
    }
    for (std::size_t f = 0; f < adj.cols(); ++f) {
        bool any = false;
        for (std::size_t s = 0; s < adj.rows() && !any; ++s) any = adj(s, f);
        if (!any) return true;
    }
    return false;
}

inline GeneratedGraph planted_blocks(const GeneratorSpec& spec) {
    if (spec.blocks == 0 || spec.firms_per_block == 0 || spec.securities_per_block == 0)
        throw UsageError("planted_blocks needs positive block dimensions");
    const std::size_t nf = spec.blocks * spec.firms_per_block, ns = spec.blocks * spec.securities_per_block;
    for (std::size_t attempt = 0; attempt < spec.max_retries; ++attempt) {
        auto gen = make_engine(spec.seed, "planted-blocks", attempt);
        std::bernoulli_distribution keep(spec.within_density);
        Matrix<std::uint8_t> adj(ns, nf, 0);
        for (std::size_t b = 0; b < spec.blocks; ++b)
            for (std::size_t i = 0; i < spec.securities_per_block; ++i)
                for (std::size_t j = 0; j < spec.firms_per_block; ++j)
                    adj(b * spec.securities_per_block + i, b * spec.firms_per_block + j) = keep(gen) ? 1 : 0;
        if (has_isolated(adj)) continue;
        GeneratedGraph g{make_snapshot(spec.month, node_names('F', nf), node_names('S', ns), adj), {}, {}};
        for (std::size_t s = 0; s < ns; ++s) g.security_label.push_back(static_cast<int>(s / spec.securities_per_block));
        for (std::size_t f = 0; f < nf; ++f) g.firm_label.push_back(static_cast<int>(f / spec.firms_per_block));
        return g;
    }
    throw InputError("planted_blocks: could not draw a graph without isolated nodes; raise within_density");
}

// Two clusters of three firms, each trading its own k securities; one bridge
// security traded by two firms from each cluster.
inline GeneratedGraph bridge_security(const GeneratorSpec& spec) {
    auto gen = make_engine(spec.seed, "bridge-security");
    const std::size_t k = std::uniform_int_distribution<std::size_t>(2, 8)(gen);
    const std::size_t k_left = k, k_right = k;
    const std::size_t nf = 6, ns = k_left + k_right + 1;
    Matrix<std::uint8_t> adj(ns, nf, 0);
    for (std::size_t s = 0; s < k_left; ++s)
        for (std::size_t f = 0; f < 3; ++f) adj(s, f) = 1;
    for (std::size_t s = k_left; s < k_left + k_right; ++s)
        for (std::size_t f = 3; f < 6; ++f) adj(s, f) = 1;
    std::vector<std::size_t> left{0, 1, 2}, right{3, 4, 5};
    std::shuffle(left.begin(), left.end(), gen);
    std::shuffle(right.begin(), right.end(), gen);
    for (std::size_t i = 0; i < 2; ++i) adj(ns - 1, left[i]) = 1;
    for (std::size_t i = 0; i < 2; ++i) adj(ns - 1, right[i]) = 1;
    GeneratedGraph g{make_snapshot(spec.month, node_names('F', nf), node_names('S', ns), adj), {}, {0, 0, 0, 1, 1, 1}};
    for (std::size_t s = 0; s < ns; ++s) g.security_label.push_back(s < k_left ? 0 : (s < k_left + k_right ? 1 : 2));
    return g;
}

// Three core firms. Every security is traded by exactly three firms: `level`
// core firms and 3 - level peripheral firms, each peripheral firm trading one
// security only.
inline GeneratedGraph partial_cluster(const GeneratorSpec& spec) {
    auto gen = make_engine(spec.seed, "partial-cluster");
    std::uniform_int_distribution<std::size_t> full_dist(2, 4), part_dist(1, 3);
    const std::size_t n3 = full_dist(gen), n2 = part_dist(gen), n1 = part_dist(gen);
    const std::size_t ns = n3 + n2 + n1, nf = 3 + n2 + 2 * n1;
    Matrix<std::uint8_t> adj(ns, nf, 0);
    std::vector<int> level;
    std::size_t s = 0, next_peripheral = 3;
    std::uniform_int_distribution<std::size_t> core(0, 2);
    for (std::size_t i = 0; i < n3; ++i, ++s) {
        for (std::size_t f = 0; f < 3; ++f) adj(s, f) = 1;
        level.push_back(3);
    }
    for (std::size_t i = 0; i < n2; ++i, ++s) {
        const std::size_t out = core(gen);
        for (std::size_t f = 0; f < 3; ++f)
            if (f != out) adj(s, f) = 1;
        adj(s, next_peripheral++) = 1;
        level.push_back(2);
    }
    for (std::size_t i = 0; i < n1; ++i, ++s) {
        adj(s, core(gen)) = 1;
        adj(s, next_peripheral++) = 1;
        adj(s, next_peripheral++) = 1;
        level.push_back(1);
    }
    std::vector<int> firm_label(nf, 0);
    for (std::size_t f = 0; f < 3; ++f) firm_label[f] = 1;
    return {make_snapshot(spec.month, node_names('F', nf), node_names('S', ns), adj), std::move(level),
            std::move(firm_label)};
}

}  // namespace detail

inline GeneratedGraph generate(const GeneratorSpec& spec) {
    switch (spec.kind) {
        case GeneratorKind::planted_blocks: return detail::planted_blocks(spec);
        case GeneratorKind::bridge_security: return detail::bridge_security(spec);
        case GeneratorKind::partial_cluster: return detail::partial_cluster(spec);
        case GeneratorKind::random_degree_matched: {
            if (!spec.reference) throw UsageError("random_degree_matched needs a reference snapshot");
            return {rewire(*spec.reference, spec.seed, spec.swaps_per_edge), {}, {}};
        }
    }
    throw UsageError("unknown generator kind");
}

// ---------------------------------------------------------------------------
// Sampling from a solved null model

// Calls fn(draw_index, adjacency) for `draws` independent Bernoulli(p_sf)
// graphs. Draw d uses its own stream split from `seed`.
template <typename Fn>
void for_each_null_draw(const NullModel& model, std::size_t draws, std::uint64_t seed, Fn&& fn) {
    const auto& p = model.link_prob;
    Matrix<std::uint8_t> adj(p.rows(), p.cols(), 0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t d = 0; d < draws; ++d) {
        auto gen = make_engine(seed, "null-sample", d);
        for (std::size_t s = 0; s < p.rows(); ++s)
            for (std::size_t f = 0; f < p.cols(); ++f) adj(s, f) = u(gen) < p(s, f) ? 1 : 0;
        fn(d, static_cast<const Matrix<std::uint8_t>&>(adj));
    }
}

struct NullSampleSummary {
    std::size_t draws = 0;
    std::vector<double> mean_motifs;    // per security
    std::vector<double> stderr_motifs;  // standard error of the mean
    std::vector<double> mean_score;     // mean of M_s(draw) / <M_s> - 1; NaN when <M_s> ~ 0
};

inline NullSampleSummary sample_null(const NullModel& model, std::size_t draws, std::uint64_t seed) {
    const std::size_t ns = model.link_prob.rows();
    const auto expected = expected_clustering(model);
    std::vector<double> sum(ns, 0.0), sumsq(ns, 0.0);
    for_each_null_draw(model, draws, seed, [&](std::size_t, const Matrix<std::uint8_t>& adj) {
        const auto m = motif_counts(adj);
        for (std::size_t s = 0; s < ns; ++s) {
            const auto v = static_cast<double>(m[s]);
            sum[s] += v;
            sumsq[s] += v * v;
        }
    });
    NullSampleSummary out;
    out.draws = draws;
    const double n = static_cast<double>(draws);
    for (std::size_t s = 0; s < ns; ++s) {
        const double mean = draws ? sum[s] / n : 0.0;
        const double var = draws > 1 ? std::max(0.0, (sumsq[s] - n * mean * mean) / (n - 1.0)) : 0.0;
        out.mean_motifs.push_back(mean);
        out.stderr_motifs.push_back(draws ? std::sqrt(var / n) : 0.0);
        out.mean_score.push_back(expected[s] > kExpectationEpsilon ? mean / expected[s] - 1.0
                                                                   : std::numeric_limits<double>::quiet_NaN());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Price panels

enum class ReturnLaw : std::uint8_t { normal, student_t };

inline ReturnLaw parse_return_law(std::string_view s) {
    if (s == "normal") return ReturnLaw::normal;
    if (s == "student_t") return ReturnLaw::student_t;
    throw UsageError("return law must be normal or student_t, got '" + std::string(s) + "'");
}

struct ReturnGroup {
    std::string name;
    std::vector<std::string> securities;
    ReturnLaw law = ReturnLaw::normal;
    double dof = 3.0;          // student_t only, > 2
    double daily_vol = 0.02;   // standard deviation of daily log returns
};

struct PricePanelSpec {
    Date start{std::chrono::year{2013}, std::chrono::January, std::chrono::day{1}};
    Date end{std::chrono::year{2013}, std::chrono::December, std::chrono::day{31}};
    std::vector<ReturnGroup> groups;
    double initial_price = 100.0;
    std::uint64_t seed = 0;
};

// Monday to Friday between start and end inclusive.
inline std::vector<Date> business_days(Date start, Date end) {
    using namespace std::chrono;
    std::vector<Date> out;
    for (sys_days d{start}; d <= sys_days{end}; d += days{1}) {
        const weekday wd{d};
        if (wd != Saturday && wd != Sunday) out.emplace_back(d);
    }
    return out;
}

struct PricePanel {
    PriceTable prices;
    std::map<std::string, std::string> group_of;  // ground truth
};

// Daily log returns are i.i.d. normal or unit-variance Student-t scaled to
// `daily_vol`. Each security draws from its own stream, so adding securities
// does not change existing paths.
inline PricePanel generate_price_panel(const PricePanelSpec& spec) {
    const auto days = business_days(spec.start, spec.end);
    PricePanel panel;
    for (const auto& g : spec.groups) {
        if (g.daily_vol < 0) throw UsageError("daily volatility must be nonnegative");
        if (g.law == ReturnLaw::student_t && !(g.dof > 2)) throw UsageError("Student-t degrees of freedom must exceed 2");
        for (const auto& id : g.securities) {
            auto gen = make_engine(spec.seed, "prices", stream_tag(id));
            std::normal_distribution<double> normal(0.0, 1.0);
            std::student_t_distribution<double> student(g.dof);
            const double t_scale = g.law == ReturnLaw::student_t ? std::sqrt((g.dof - 2.0) / g.dof) : 1.0;
            auto& points = panel.prices[id];
            double price = spec.initial_price;
            for (std::size_t i = 0; i < days.size(); ++i) {
                if (i > 0) {
                    const double z = g.law == ReturnLaw::normal ? normal(gen) : student(gen) * t_scale;
                    price *= std::exp(g.daily_vol * z);
                }
                points.push_back({days[i], price});
            }
            panel.group_of[id] = g.name;
        }
    }
    return panel;
}

}  // namespace mclust::synth
