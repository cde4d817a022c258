#pragma once

// Low/high clustering tercile comparison: two-sample KS, Mann-Whitney-Wilcoxon
// and binned chi-square homogeneity tests, signed verdict tables and CDF curves.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "mclust/clustering.hpp"
#include "mclust/instability.hpp"
#include "mclust/util/csv.hpp"
#include "mclust/util/error.hpp"

namespace mclust {

enum class Group : std::uint8_t { low, middle, high };

struct GroupAssignment {
    std::string window;
    std::map<std::string, Group> groups;
    double low_cutoff = 0.0;   // largest score in L
    double high_cutoff = 0.0;  // smallest score in H

    std::vector<std::string> members(Group g) const {
        std::vector<std::string> out;
        for (const auto& [id, grp] : groups)
            if (grp == g) out.push_back(id);
        return out;
    }
};

struct SecurityScore {
    std::string security_id;
    double score = 0.0;
};

// Bottom floor(N/3) scores form L and the top floor(N/3) form H after a stable
// sort by (score, security_id).
inline GroupAssignment assign_terciles(std::vector<SecurityScore> scores, std::string window = {}) {
    if (scores.size() < 9) throw InsufficientDataError("tercile grouping needs at least 9 scored securities");
    std::sort(scores.begin(), scores.end(), [](const SecurityScore& a, const SecurityScore& b) {
        if (a.score != b.score) return a.score < b.score;
        return a.security_id < b.security_id;
    });
    const std::size_t n = scores.size(), third = n / 3;
    GroupAssignment out;
    out.window = std::move(window);
    for (std::size_t i = 0; i < n; ++i) {
        Group g = i < third ? Group::low : (i >= n - third ? Group::high : Group::middle);
        if (!out.groups.emplace(scores[i].security_id, g).second)
            throw InputError("duplicate security '" + scores[i].security_id + "' in tercile input");
    }
    out.low_cutoff = scores[third - 1].score;
    out.high_cutoff = scores[n - third].score;
    return out;
}

// Only scores with status ok take part.
inline GroupAssignment assign_terciles(const std::vector<ClusteringScore>& scores, std::string window = {}) {
    std::vector<SecurityScore> ok;
    for (const auto& c : scores)
        if (c.status == ScoreStatus::ok && c.score) ok.push_back({c.security_id, *c.score});
    return assign_terciles(std::move(ok), std::move(window));
}

// Per-window score of each security: mean of its usable monthly scores.
inline std::vector<SecurityScore> window_scores(const std::vector<ClusteringScore>& monthly, const MonthRange& months) {
    std::map<std::string, std::pair<double, int>> acc;
    for (const auto& c : monthly)
        if (c.status == ScoreStatus::ok && c.score && months.contains(c.month)) {
            auto& [sum, n] = acc[c.security_id];
            sum += *c.score;
            ++n;
        }
    std::vector<SecurityScore> out;
    for (const auto& [id, sn] : acc) out.push_back({id, sn.first / sn.second});
    return out;
}

// ---------------------------------------------------------------------------
// Tests. Every direction is +1 when `b` is stochastically larger than `a`.

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    int direction = 0;
};

// Kolmogorov limiting survival function Q(lambda) = P(K > lambda).
inline double kolmogorov_survival(double lambda) {
    if (lambda <= 0) return 1.0;
    if (lambda < 1.18) {
        // Jacobi theta form, accurate for small lambda.
        const double y = std::exp(-std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda));
        double sum = 0.0;
        for (int j = 1; j <= 7; ++j) sum += std::pow(y, (2 * j - 1) * (2 * j - 1));
        return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * sum, 0.0, 1.0);
    }
    double sum = 0.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = std::exp(-2.0 * j * j * lambda * lambda);
        sum += (j % 2 ? term : -term);
        if (term < 1e-18) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

// D = sup |F_a - F_b| with the asymptotic p-value at the effective sample size
// n_e = n_a n_b / (n_a + n_b), corrected as lambda = (sqrt(n_e) + 0.12 + 0.11/sqrt(n_e)) D.
// Direction is the sign of F_a - F_b at the first point attaining D.
inline TestResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 5 || b.size() < 5) throw InsufficientDataError("KS test needs at least 5 observations per sample");
    std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
    std::size_t i = 0, j = 0;
    double d = 0.0, signed_d = 0.0;
    while (i < sa.size() || j < sb.size()) {
        double x;
        if (j >= sb.size() || (i < sa.size() && sa[i] <= sb[j])) x = sa[i];
        else x = sb[j];
        while (i < sa.size() && sa[i] == x) ++i;
        while (j < sb.size() && sb[j] == x) ++j;
        const double diff = static_cast<double>(i) / na - static_cast<double>(j) / nb;
        if (std::abs(diff) > d + 1e-15) {
            d = std::abs(diff);
            signed_d = diff;
        }
    }
    const double en = std::sqrt(na * nb / (na + nb));
    TestResult r;
    r.statistic = d;
    r.p_value = kolmogorov_survival((en + 0.12 + 0.11 / en) * d);
    r.direction = d == 0.0 ? 0 : (signed_d > 0 ? 1 : -1);
    return r;
}

// Average ranks (1-based) of the pooled sample; also returns sum of t^3 - t over tie groups.
inline std::pair<std::vector<double>, double> pooled_ranks(std::span<const double> pooled) {
    const std::size_t n = pooled.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return pooled[x] < pooled[y]; });
    std::vector<double> ranks(n);
    double ties = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        const double t = static_cast<double>(j - i + 1);
        ties += t * t * t - t;
        i = j + 1;
    }
    return {std::move(ranks), ties};
}

// Statistic is U of sample b. Two-sided p from the tie-corrected normal
// approximation with continuity correction.
inline TestResult mww_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 5 || b.size() < 5) throw InsufficientDataError("MWW test needs at least 5 observations per sample");
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    auto [ranks, ties] = pooled_ranks(pooled);
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size()), n = na + nb;
    double rb = 0.0;
    for (std::size_t i = a.size(); i < pooled.size(); ++i) rb += ranks[i];
    const double u = rb - nb * (nb + 1.0) / 2.0;
    const double mu = na * nb / 2.0;
    const double var = na * nb / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    TestResult r;
    r.statistic = u;
    if (!(var > 0)) return r;
    const double z = std::max(std::abs(u - mu) - 0.5, 0.0) / std::sqrt(var);
    r.p_value = std::erfc(z / std::numbers::sqrt2);
    r.direction = u > mu ? 1 : (u < mu ? -1 : 0);
    return r;
}

struct ChiSquareResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t bins = 0;
    bool degenerate = false;  // fewer than two bins after merging
};

// Homogeneity test on a 2 x K table of outcome counts. Bins start as the
// distinct outcomes; while a bin has an expected cell below 5, the rightmost
// such bin is merged into its left neighbour (bin 0 merges rightwards).
inline ChiSquareResult chi2_binned(std::span<const int> a, std::span<const int> b) {
    if (a.empty() || b.empty()) throw InsufficientDataError("chi-square test needs nonempty samples");
    std::map<int, std::pair<double, double>> table;
    for (int v : a) table[v].first += 1;
    for (int v : b) table[v].second += 1;
    std::vector<std::pair<double, double>> bins;
    for (const auto& [v, c] : table) bins.push_back(c);
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size()), n = na + nb;
    auto min_expected = [&](const std::pair<double, double>& c) {
        return std::min(na, nb) * (c.first + c.second) / n;
    };
    while (bins.size() > 1) {
        std::optional<std::size_t> worst;
        for (std::size_t i = bins.size(); i-- > 0;)
            if (min_expected(bins[i]) < 5.0) {
                worst = i;
                break;
            }
        if (!worst) break;
        const std::size_t i = *worst, into = i == 0 ? 1 : i - 1;
        bins[into].first += bins[i].first;
        bins[into].second += bins[i].second;
        bins.erase(bins.begin() + static_cast<std::ptrdiff_t>(i));
    }
    ChiSquareResult r;
    r.bins = bins.size();
    if (bins.size() < 2) {
        r.degenerate = true;
        return r;
    }
    double stat = 0.0;
    for (const auto& [ca, cb] : bins) {
        const double col = ca + cb;
        const double ea = na * col / n, eb = nb * col / n;
        stat += (ca - ea) * (ca - ea) / ea + (cb - eb) * (cb - eb) / eb;
    }
    r.statistic = stat;
    r.p_value = boost::math::cdf(boost::math::complement(
        boost::math::chi_squared(static_cast<double>(bins.size() - 1)), stat));
    return r;
}

// ---------------------------------------------------------------------------
// Verdict tables

enum class MeasureKind : std::uint8_t { continuous, count };

struct Measure {
    std::string name;
    MeasureKind kind;
    std::function<std::optional<double>(const InstabilityReport&)> get;
};

inline const std::vector<Measure>& standard_measures() {
    static const std::vector<Measure> m{
        {"mad", MeasureKind::continuous, [](const InstabilityReport& r) -> std::optional<double> { return r.mad; }},
        {"variance", MeasureKind::continuous,
         [](const InstabilityReport& r) -> std::optional<double> { return r.variance; }},
        {"skewness", MeasureKind::continuous, [](const InstabilityReport& r) { return r.skewness; }},
        {"kurtosis", MeasureKind::continuous, [](const InstabilityReport& r) { return r.kurtosis; }},
        {"hill_neg", MeasureKind::continuous, [](const InstabilityReport& r) { return r.hill_neg; }},
        {"hill_pos", MeasureKind::continuous, [](const InstabilityReport& r) { return r.hill_pos; }},
        {"outliers_neg", MeasureKind::count,
         [](const InstabilityReport& r) -> std::optional<double> { return r.outliers_neg; }},
        {"outliers_pos", MeasureKind::count,
         [](const InstabilityReport& r) -> std::optional<double> { return r.outliers_pos; }},
    };
    return m;
}

struct CriticalValues {
    double ks = 0.025;
    double mww = 0.025;
    double chi2 = 0.05;

    static CriticalValues annual() { return {0.025, 0.025, 0.05}; }
    static CriticalValues two_month() { return {0.05, 0.05, 0.05}; }
};

struct TestVerdict {
    std::string measure;
    std::string window;
    std::string test1;  // "KS" or "CHI2"
    std::string test1_sign;
    double test1_p = 1.0;
    std::string test2;  // "MWW"
    std::string test2_sign;
    double test2_p = 1.0;
    double test1_critical = 0.0;
    double test2_critical = 0.0;
    std::size_t n_low = 0;
    std::size_t n_high = 0;
    std::size_t dropped = 0;  // grouped securities without a value for the measure
    bool degenerate = false;
};

inline std::string signed_verdict(const TestResult& r, double critical) {
    if (!(r.p_value < critical) || r.direction == 0) return "=";
    return r.direction > 0 ? "+" : "-";
}

struct GroupSamples {
    std::vector<double> low;
    std::vector<double> high;
    std::size_t dropped = 0;
};

inline GroupSamples split_by_group(const std::vector<InstabilityReport>& reports, const GroupAssignment& assignment,
                                   const Measure& measure) {
    GroupSamples out;
    std::set<std::string> seen;
    for (const auto& r : reports) {
        if (r.window != assignment.window) continue;
        auto it = assignment.groups.find(r.security_id);
        if (it == assignment.groups.end() || it->second == Group::middle) continue;
        seen.insert(r.security_id);
        auto v = measure.get(r);
        if (!v) {
            ++out.dropped;
            continue;
        }
        (it->second == Group::low ? out.low : out.high).push_back(*v);
    }
    for (const auto& [id, g] : assignment.groups)
        if (g != Group::middle && !seen.contains(id)) ++out.dropped;
    return out;
}

// One verdict per measure: KS + MWW for continuous measures, chi-square + MWW
// for outlier counts. '+' means the high-clustering group exceeds the low one.
inline std::vector<TestVerdict> verdict_table(const std::vector<InstabilityReport>& reports,
                                              const GroupAssignment& assignment, const CriticalValues& crit,
                                              const std::vector<Measure>& measures = standard_measures()) {
    std::vector<TestVerdict> out;
    for (const auto& m : measures) {
        auto samples = split_by_group(reports, assignment, m);
        TestVerdict v;
        v.measure = m.name;
        v.window = assignment.window;
        v.n_low = samples.low.size();
        v.n_high = samples.high.size();
        v.dropped = samples.dropped;
        v.test2 = "MWW";
        v.test2_critical = crit.mww;
        if (samples.low.size() < 5 || samples.high.size() < 5) {
            v.test1 = m.kind == MeasureKind::count ? "CHI2" : "KS";
            v.test1_sign = v.test2_sign = "=";
            v.degenerate = true;
            out.push_back(std::move(v));
            continue;
        }
        if (m.kind == MeasureKind::count) {
            std::vector<int> lo, hi;
            for (double x : samples.low) lo.push_back(static_cast<int>(x));
            for (double x : samples.high) hi.push_back(static_cast<int>(x));
            auto c = chi2_binned(lo, hi);
            v.test1 = "CHI2";
            v.test1_p = c.p_value;
            v.test1_critical = crit.chi2;
            v.test1_sign = (!c.degenerate && c.p_value < crit.chi2) ? "\xE2\x89\xA0" : "=";  // U+2260
            v.degenerate = c.degenerate;
        } else {
            auto ks = ks_two_sample(samples.low, samples.high);
            v.test1 = "KS";
            v.test1_p = ks.p_value;
            v.test1_critical = crit.ks;
            v.test1_sign = signed_verdict(ks, crit.ks);
        }
        auto mww = mww_test(samples.low, samples.high);
        v.test2_p = mww.p_value;
        v.test2_sign = signed_verdict(mww, crit.mww);
        out.push_back(std::move(v));
    }
    return out;
}

inline void write_verdicts(std::ostream& out, const std::vector<TestVerdict>& verdicts, bool header = true) {
    if (header) out << "measure,window,test1_sign,test1_p,test2_sign,test2_p\n";
    for (const auto& v : verdicts)
        out << v.measure << ',' << v.window << ',' << v.test1_sign << ',' << csv::format(v.test1_p) << ','
            << v.test2_sign << ',' << csv::format(v.test2_p) << '\n';
}

// ---------------------------------------------------------------------------
// CDF curves

struct CdfPoint {
    double x = 0.0;
    double f_low = 0.0;
    double f_high = 0.0;
    int sign = 0;  // sign(F_high - F_low) on [x, next x)
};

// Empirical CDFs of both samples at every distinct pooled value.
inline std::vector<CdfPoint> cdf_curves(std::span<const double> low, std::span<const double> high) {
    if (low.empty() || high.empty()) throw InsufficientDataError("CDF curves need nonempty samples");
    std::vector<double> sl(low.begin(), low.end()), sh(high.begin(), high.end());
    std::sort(sl.begin(), sl.end());
    std::sort(sh.begin(), sh.end());
    std::vector<double> xs(sl);
    xs.insert(xs.end(), sh.begin(), sh.end());
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    std::vector<CdfPoint> out;
    out.reserve(xs.size());
    std::size_t i = 0, j = 0;
    for (double x : xs) {
        while (i < sl.size() && sl[i] <= x) ++i;
        while (j < sh.size() && sh[j] <= x) ++j;
        CdfPoint p{x, static_cast<double>(i) / static_cast<double>(sl.size()),
                   static_cast<double>(j) / static_cast<double>(sh.size()), 0};
        p.sign = p.f_high > p.f_low ? 1 : (p.f_high < p.f_low ? -1 : 0);
        out.push_back(p);
    }
    return out;
}

inline void write_cdf(std::ostream& out, const std::vector<CdfPoint>& points) {
    out << "x,F_low,F_high,sign\n";
    for (const auto& p : points)
        out << csv::format(p.x) << ',' << csv::format(p.f_low) << ',' << csv::format(p.f_high) << ',' << p.sign
            << '\n';
}

}  // namespace mclust
