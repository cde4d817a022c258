#pragma once

// Per-security market clustering: the observed co-trading motif count M_s,
// its expectation under the null model, and the score m_s = M_s / <M_s> - 1.

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mclust/entropy_null.hpp"
#include "mclust/market_graph.hpp"
#include "mclust/util/csv.hpp"
#include "mclust/util/error.hpp"
#include "mclust/util/matrix.hpp"

namespace mclust {

// Firm-pair tables shared by every security of a month.
//   shared(f, f')     number of securities both firms trade
//   prob_pairs(f, f') sum over securities of p_sf p_sf'
struct CoTradeTable {
    Matrix<std::int64_t> shared;
    Matrix<double> prob_pairs;
};

inline Matrix<std::int64_t> shared_securities(const Matrix<std::uint8_t>& adj) {
    const std::size_t ns = adj.rows(), nf = adj.cols();
    Matrix<std::int64_t> c(nf, nf, 0);
    std::vector<std::size_t> traders;
    for (std::size_t s = 0; s < ns; ++s) {
        traders.clear();
        for (std::size_t f = 0; f < nf; ++f)
            if (adj(s, f)) traders.push_back(f);
        for (std::size_t i = 0; i < traders.size(); ++i)
            for (std::size_t j = i + 1; j < traders.size(); ++j) ++c(traders[i], traders[j]);
    }
    for (std::size_t f = 0; f < nf; ++f)
        for (std::size_t g = f + 1; g < nf; ++g) c(g, f) = c(f, g);
    return c;
}

inline Matrix<double> pair_probability_sums(const Matrix<double>& p) {
    const std::size_t ns = p.rows(), nf = p.cols();
    Matrix<double> q(nf, nf, 0.0);
    for (std::size_t s = 0; s < ns; ++s) {
        auto row = p.row(s);
        for (std::size_t f = 0; f < nf; ++f) {
            if (row[f] == 0.0) continue;
            for (std::size_t g = f + 1; g < nf; ++g) q(f, g) += row[f] * row[g];
        }
    }
    for (std::size_t f = 0; f < nf; ++f)
        for (std::size_t g = f + 1; g < nf; ++g) q(g, f) = q(f, g);
    return q;
}

// M_s for every row of a binary matrix: over firm pairs both trading s, the
// number of other securities the pair also trades.
inline std::vector<std::int64_t> motif_counts(const Matrix<std::uint8_t>& adj) {
    const auto shared = shared_securities(adj);
    std::vector<std::int64_t> out(adj.rows(), 0);
    std::vector<std::size_t> traders;
    for (std::size_t s = 0; s < adj.rows(); ++s) {
        traders.clear();
        for (std::size_t f = 0; f < adj.cols(); ++f)
            if (adj(s, f)) traders.push_back(f);
        std::int64_t m = 0;
        for (std::size_t i = 0; i < traders.size(); ++i)
            for (std::size_t j = i + 1; j < traders.size(); ++j) m += shared(traders[i], traders[j]) - 1;
        out[s] = m;
    }
    return out;
}

inline std::vector<std::int64_t> observed_clustering(const BipartiteSnapshot& snap) {
    return motif_counts(snap.adjacency);
}

// <M_s> = sum_{f<f'} p_sf p_sf' (q_ff' - p_sf p_sf'); edges are independent
// under the null, so this is the exact expectation of M_s.
inline std::vector<double> expected_motif_counts(const Matrix<double>& p) {
    const auto q = pair_probability_sums(p);
    const std::size_t nf = p.cols();
    std::vector<double> out(p.rows(), 0.0);
    for (std::size_t s = 0; s < p.rows(); ++s) {
        auto row = p.row(s);
        double m = 0.0;
        for (std::size_t f = 0; f < nf; ++f) {
            if (row[f] == 0.0) continue;
            for (std::size_t g = f + 1; g < nf; ++g) {
                const double both = row[f] * row[g];
                m += both * (q(f, g) - both);
            }
        }
        // Cancellation can leave tiny negatives when q is dominated by row s.
        out[s] = m > 0.0 ? m : 0.0;
    }
    return out;
}

inline std::vector<double> expected_clustering(const NullModel& model) {
    return expected_motif_counts(model.link_prob);
}

inline CoTradeTable co_trade_table(const BipartiteSnapshot& snap, const NullModel& model) {
    return {shared_securities(snap.adjacency), pair_probability_sums(model.link_prob)};
}

enum class ScoreStatus : std::uint8_t { ok, degenerate_no_expectation, isolated };

inline std::string_view to_string(ScoreStatus s) {
    switch (s) {
        case ScoreStatus::ok: return "ok";
        case ScoreStatus::degenerate_no_expectation: return "degenerate_no_expectation";
        case ScoreStatus::isolated: return "isolated";
    }
    return "?";
}

inline ScoreStatus parse_score_status(std::string_view s) {
    if (s == "ok") return ScoreStatus::ok;
    if (s == "degenerate_no_expectation") return ScoreStatus::degenerate_no_expectation;
    if (s == "isolated") return ScoreStatus::isolated;
    throw InputError("unknown score status '" + std::string(s) + "'");
}

// Expectations at or below this are treated as zero.
inline constexpr double kExpectationEpsilon = 1e-12;

struct ClusteringScore {
    std::string security_id;
    YearMonth month;
    std::int64_t observed = 0;
    double expected = 0.0;
    std::optional<double> score;  // set iff status == ok
    ScoreStatus status = ScoreStatus::ok;

    // Traders of the security share no other security: score is exactly -1.
    bool no_joint_trading() const noexcept { return status == ScoreStatus::ok && observed == 0; }
    bool operator==(const ClusteringScore&) const = default;
};

inline std::vector<ClusteringScore> clustering_scores(const BipartiteSnapshot& snap, const NullModel& model) {
    if (model.n_firms() != snap.n_firms() || model.n_securities() != snap.n_securities() ||
        model.link_prob.rows() != snap.n_securities() || model.link_prob.cols() != snap.n_firms())
        throw InputError("null model dimensions do not match snapshot");
    const auto observed = observed_clustering(snap);
    const auto expected = expected_clustering(model);
    std::vector<ClusteringScore> out;
    out.reserve(snap.n_securities());
    for (std::size_t s = 0; s < snap.n_securities(); ++s) {
        ClusteringScore c{snap.securities[s], snap.month, observed[s], expected[s], std::nullopt, ScoreStatus::ok};
        if (snap.security_degrees[s] == 0) c.status = ScoreStatus::isolated;
        else if (expected[s] <= kExpectationEpsilon) c.status = ScoreStatus::degenerate_no_expectation;
        else c.score = observed[s] == 0 ? -1.0 : static_cast<double>(observed[s]) / expected[s] - 1.0;
        out.push_back(std::move(c));
    }
    return out;
}

enum class IsolatedPolicy : std::uint8_t { drop, keep_flagged };

// Default policy removes scores of exactly -1 (securities whose traders share
// nothing else); keep_flagged returns the input unchanged, the flag being
// ClusteringScore::no_joint_trading().
inline std::vector<ClusteringScore> drop_isolated_scores(std::vector<ClusteringScore> scores,
                                                         IsolatedPolicy policy = IsolatedPolicy::drop) {
    if (policy == IsolatedPolicy::keep_flagged) return scores;
    std::erase_if(scores, [](const ClusteringScore& c) { return c.score && *c.score == -1.0; });
    return scores;
}

inline void write_scores_header(std::ostream& out) { out << "month,security_id,observed,expected,score,status\n"; }

inline void write_scores(std::ostream& out, const std::vector<ClusteringScore>& scores) {
    for (const auto& c : scores)
        out << c.month.to_string() << ',' << csv::quote(c.security_id) << ',' << c.observed << ','
            << csv::format(c.expected) << ',' << csv::format(c.score) << ',' << to_string(c.status) << '\n';
}

inline std::vector<ClusteringScore> read_scores(std::istream& in) {
    csv::Reader reader(in);
    reader.expect_header({"month", "security_id", "observed", "expected", "score", "status"});
    std::vector<ClusteringScore> out;
    std::vector<std::string> f;
    while (reader.next(f)) {
        const auto where = " at line " + std::to_string(reader.line_number());
        if (f.size() != 6) throw InputError("malformed scores row" + where);
        ClusteringScore c;
        c.month = YearMonth::parse(f[0]);
        c.security_id = f[1];
        auto obs = csv::parse_int(f[2]);
        auto exp = csv::parse_double(f[3]);
        if (!obs || !exp) throw InputError("malformed scores row" + where);
        c.observed = *obs;
        c.expected = *exp;
        if (!f[4].empty()) {
            c.score = csv::parse_double(f[4]);
            if (!c.score) throw InputError("malformed score" + where);
        }
        c.status = parse_score_status(f[5]);
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace mclust
