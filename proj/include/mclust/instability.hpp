#pragma once

// Price-instability statistics on daily log-return series: normalized moments,
// Hill tail indices, sequential Grubbs outlier counts, and historical VaR/VLuck
// with their month-over-month and cross-sectional dynamics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "mclust/util/calendar.hpp"
#include "mclust/util/csv.hpp"
#include "mclust/util/error.hpp"
#include "mclust/util/rng.hpp"

namespace mclust {

struct ReturnSeries {
    std::string security_id;
    std::vector<Date> dates;
    std::vector<double> log_returns;

    std::size_t size() const noexcept { return log_returns.size(); }

    // Dates strictly increasing, returns finite, sizes match.
    void validate(std::size_t min_length = 2) const {
        if (dates.size() != log_returns.size()) throw InputError(security_id + ": dates and returns differ in length");
        if (log_returns.size() < min_length)
            throw InsufficientDataError(security_id + ": return series shorter than " + std::to_string(min_length));
        for (std::size_t i = 1; i < dates.size(); ++i)
            if (!(dates[i - 1] < dates[i])) throw InputError(security_id + ": return dates not strictly increasing");
        for (double r : log_returns)
            if (!std::isfinite(r)) throw InputError(security_id + ": non-finite return");
    }

    // Subseries with dates inside the inclusive month range.
    ReturnSeries slice(const MonthRange& range) const {
        ReturnSeries out{security_id, {}, {}};
        for (std::size_t i = 0; i < dates.size(); ++i)
            if (range.contains(dates[i])) {
                out.dates.push_back(dates[i]);
                out.log_returns.push_back(log_returns[i]);
            }
        return out;
    }
};

// ---------------------------------------------------------------------------
// Prices

struct PricePoint {
    Date date;
    double close = 0.0;
    bool operator==(const PricePoint&) const = default;
};

using PriceTable = std::map<std::string, std::vector<PricePoint>>;

inline PriceTable read_prices(std::istream& in) {
    csv::Reader reader(in);
    reader.expect_header({"security_id", "date", "close"});
    PriceTable table;
    std::vector<std::string> f;
    while (reader.next(f)) {
        const auto where = " at line " + std::to_string(reader.line_number());
        if (f.size() != 3 || f[0].empty()) throw InputError("malformed price row" + where);
        auto close = csv::parse_double(f[2]);
        if (!close || *close <= 0) throw InputError("close must be a positive number" + where);
        table[f[0]].push_back({parse_date(f[1]), *close});
    }
    for (auto& [id, points] : table) {
        std::stable_sort(points.begin(), points.end(),
                         [](const PricePoint& a, const PricePoint& b) { return a.date < b.date; });
        for (std::size_t i = 1; i < points.size(); ++i)
            if (points[i].date == points[i - 1].date)
                throw InputError("duplicate price for " + id + " on " + format_date(points[i].date));
    }
    return table;
}

inline void write_prices(std::ostream& out, const PriceTable& table) {
    out << "security_id,date,close\n";
    for (const auto& [id, points] : table)
        for (const auto& p : points) out << csv::quote(id) << ',' << format_date(p.date) << ',' << csv::format(p.close) << '\n';
}

// ln(close_t / close_{t-1}) on consecutive available days, dated at t.
inline ReturnSeries log_returns(const std::string& id, const std::vector<PricePoint>& points) {
    ReturnSeries out{id, {}, {}};
    for (std::size_t i = 1; i < points.size(); ++i) {
        out.dates.push_back(points[i].date);
        out.log_returns.push_back(std::log(points[i].close / points[i - 1].close));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Basic statistics

namespace stats {

inline double mean(std::span<const double> x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// n-1 denominator.
inline double sample_sd(std::span<const double> x) {
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

inline double median(std::vector<double> x) {
    const std::size_t n = x.size();
    std::sort(x.begin(), x.end());
    return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

}  // namespace stats

// Divides the returns falling in `year` by their sample standard deviation.
namespace detail {

// Sample sd, or nullopt when the values are constant up to rounding.
inline std::optional<double> scale_of(std::span<const double> x) {
    const double sd = stats::sample_sd(x);
    double peak = 0.0;
    for (double v : x) peak = std::max(peak, std::abs(v));
    if (!(sd > 1e-12 * peak) || !(sd > 0)) return std::nullopt;
    return sd;
}

}  // namespace detail

inline ReturnSeries normalize_returns(const ReturnSeries& series, int year, std::size_t min_obs = 30) {
    auto window = series.slice({{year, 1}, {year, 12}});
    if (window.size() < min_obs)
        throw InsufficientDataError(series.security_id + ": " + std::to_string(window.size()) +
                                    " observations in " + std::to_string(year) + ", need " +
                                    std::to_string(min_obs));
    const auto sd = detail::scale_of(window.log_returns);
    if (!sd) throw InputError(series.security_id + ": zero standard deviation (constant prices)");
    for (double& r : window.log_returns) r /= *sd;
    return window;
}

// Same as above for an arbitrary window of returns.
inline std::vector<double> normalize(std::span<const double> x) {
    if (x.size() < 2) throw InsufficientDataError("need at least two returns to normalize");
    const auto sd = detail::scale_of(x);
    if (!sd) throw InputError("zero standard deviation (constant prices)");
    std::vector<double> out(x.begin(), x.end());
    for (double& r : out) r /= *sd;
    return out;
}

struct Moments {
    double mad = 0.0;                 // median(|x - median(x)|)
    double variance = 0.0;            // n-1 denominator
    std::optional<double> skewness;   // m3 / m2^{3/2}, missing for constant samples
    std::optional<double> kurtosis;   // m4 / m2^2, non-excess
};

inline Moments moments(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 4) throw InsufficientDataError("moments need at least 4 observations");
    Moments out;
    std::vector<double> v(x.begin(), x.end());
    const double med = stats::median(v);
    for (double& d : v) d = std::abs(d - med);
    out.mad = stats::median(std::move(v));
    const double m = stats::mean(x);
    double m2 = 0, m3 = 0, m4 = 0;
    for (double xi : x) {
        const double d = xi - m, d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    out.variance = m2 / static_cast<double>(n - 1);
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if (m2 > 0) {
        out.skewness = m3 / std::pow(m2, 1.5);
        out.kurtosis = m4 / (m2 * m2);
    }
    return out;
}

enum class Tail : std::uint8_t { positive, negative };

struct HillConfig {
    double k_fraction = 0.05;  // k = ceil(k_fraction * n)
    std::size_t k_min = 10;
};

// Hill tail index from the k largest tail magnitudes:
//   gamma = (1/k) sum_{i<=k} ln(x_(i) / x_(k+1)),  index = 1 / gamma.
// The negative tail uses |x| of negative returns. Missing when the tail holds
// fewer than k+1 strictly positive magnitudes.
inline std::optional<double> hill_index(std::span<const double> x, Tail tail, std::size_t k) {
    if (k == 0) return std::nullopt;
    std::vector<double> mags;
    for (double v : x) {
        const double m = tail == Tail::positive ? v : -v;
        if (m > 0) mags.push_back(m);
    }
    if (mags.size() < k + 1) return std::nullopt;
    std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(k), mags.end(), std::greater<>());
    const double threshold = mags[k];
    double gamma = 0.0;
    for (std::size_t i = 0; i < k; ++i) gamma += std::log(mags[i] / threshold);
    gamma /= static_cast<double>(k);
    if (!(gamma > 0)) return std::nullopt;
    return 1.0 / gamma;
}

inline std::size_t hill_k(std::size_t n, const HillConfig& cfg) {
    return std::max(cfg.k_min, static_cast<std::size_t>(std::ceil(cfg.k_fraction * static_cast<double>(n) - 1e-9)));
}

inline std::optional<double> hill_index(std::span<const double> x, Tail tail, const HillConfig& cfg = {}) {
    return hill_index(x, tail, hill_k(x.size(), cfg));
}

struct OutlierTestConfig {
    double alpha = 0.05;         // two-sided
    double max_removals = 0.20;  // fraction of the original sample

    void validate() const {
        if (!(alpha > 0 && alpha < 1)) throw UsageError("outlier alpha must lie in (0,1)");
        if (!(max_removals >= 0 && max_removals <= 1)) throw UsageError("outlier removal cap must lie in [0,1]");
    }
};

// Two-sided Grubbs critical value for sample size n.
inline double grubbs_critical(std::size_t n, double alpha) {
    const double nn = static_cast<double>(n);
    boost::math::students_t dist(nn - 2.0);
    const double t = boost::math::quantile(boost::math::complement(dist, alpha / (2.0 * nn)));
    return (nn - 1.0) / std::sqrt(nn) * std::sqrt(t * t / (nn - 2.0 + t * t));
}

struct OutlierCounts {
    int positive = 0;
    int negative = 0;
    bool operator==(const OutlierCounts&) const = default;
};

// Sequential generalized Grubbs test: remove the most extreme point while it
// exceeds the critical value, counting removals by side of the mean.
inline OutlierCounts outlier_counts(std::span<const double> x, const OutlierTestConfig& cfg = {}) {
    cfg.validate();
    if (x.size() < 10) throw InsufficientDataError("outlier test needs at least 10 observations");
    std::vector<double> v(x.begin(), x.end());
    const auto cap = static_cast<std::size_t>(std::floor(cfg.max_removals * static_cast<double>(x.size())));
    OutlierCounts counts;
    std::size_t removed = 0;
    while (removed < cap && v.size() >= 3) {
        const double m = stats::mean(v);
        const double sd = stats::sample_sd(v);
        if (!(sd > 0)) break;
        std::size_t worst = 0;
        double worst_dev = -1.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double d = std::abs(v[i] - m);
            if (d > worst_dev) {
                worst_dev = d;
                worst = i;
            }
        }
        if (!(worst_dev / sd > grubbs_critical(v.size(), cfg.alpha))) break;
        if (v[worst] > m) ++counts.positive;
        else ++counts.negative;
        v.erase(v.begin() + static_cast<std::ptrdiff_t>(worst));
        ++removed;
    }
    return counts;
}

// ---------------------------------------------------------------------------
// Value-at-Risk

enum class QuantileMethod : std::uint8_t { empirical, bootstrap };

struct RiskConfig {
    double level = 0.05;
    int window_months = 12;
    std::size_t min_obs = 60;
    QuantileMethod method = QuantileMethod::empirical;
    std::size_t bootstrap_draws = 1000;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(level > 0 && level < 0.5)) throw UsageError("VaR level must lie in (0, 0.5)");
        if (window_months < 1) throw UsageError("VaR window must span at least one month");
    }
};

struct RiskWindow {
    double var = 0.0;    // loss magnitude
    double vluck = 0.0;  // gain magnitude
};

// Lower-tail quantile by linear interpolation of the empirical CDF between
// order statistics: h = n p, Q = x_(floor h) + (h - floor h)(x_(floor h + 1) - x_(floor h)),
// 1-based and clamped to the sample. Mass sitting exactly at the quantile is
// returned as is.
inline double lower_quantile(std::vector<double> x, double p) {
    std::sort(x.begin(), x.end());
    const double h = p * static_cast<double>(x.size());
    const auto k = static_cast<std::size_t>(std::floor(h));
    const double frac = h - static_cast<double>(k);
    if (k == 0) return x.front();
    if (k >= x.size()) return x.back();
    return x[k - 1] + frac * (x[k] - x[k - 1]);
}

// VaR = -Q_p(x); VLuck = -Q_p(-x), i.e. the same rule applied to the mirrored
// sample so that a symmetric window gives VaR == VLuck.
inline RiskWindow empirical_risk(std::span<const double> x, double level) {
    std::vector<double> v(x.begin(), x.end());
    RiskWindow w;
    w.var = -lower_quantile(v, level);
    for (double& r : v) r = -r;
    w.vluck = -lower_quantile(std::move(v), level);
    return w;
}

// Mean of `draws` resampled empirical VaR/VLuck figures.
inline RiskWindow bootstrap_risk(std::span<const double> x, double level, std::size_t draws, std::uint64_t seed) {
    auto gen = make_engine(seed, "var-bootstrap");
    std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
    std::vector<double> sample(x.size());
    RiskWindow acc;
    for (std::size_t b = 0; b < draws; ++b) {
        for (auto& v : sample) v = x[pick(gen)];
        auto w = empirical_risk(sample, level);
        acc.var += w.var;
        acc.vluck += w.vluck;
    }
    acc.var /= static_cast<double>(draws);
    acc.vluck /= static_cast<double>(draws);
    return acc;
}

inline MonthRange trailing_months(YearMonth end, int window_months) {
    return {end.plus(-(window_months - 1)), end};
}

// VaR/VLuck over months [t - window + 1, t]. Missing with fewer than min_obs returns.
inline std::optional<RiskWindow> rolling_var(const ReturnSeries& series, YearMonth t, const RiskConfig& cfg = {}) {
    cfg.validate();
    const auto window = series.slice(trailing_months(t, cfg.window_months));
    if (window.size() < cfg.min_obs) return std::nullopt;
    if (cfg.method == QuantileMethod::bootstrap)
        return bootstrap_risk(window.log_returns, cfg.level, cfg.bootstrap_draws,
                              split_seed(cfg.seed, stream_tag(series.security_id) ^ static_cast<unsigned>(t.index())));
    return empirical_risk(window.log_returns, cfg.level);
}

// 100 (current / previous - 1); missing when previous is zero.
inline std::optional<double> percent_change(double current, double previous) {
    if (previous == 0.0) return std::nullopt;
    return 100.0 * (current / previous - 1.0);
}

// 100 (v_s / median(v) - 1) for each entry; all missing with fewer than three
// values or a zero median.
inline std::vector<std::optional<double>> deviation_from_median(std::span<const double> values) {
    std::vector<std::optional<double>> out(values.size());
    if (values.size() < 3) return out;
    const double med = stats::median({values.begin(), values.end()});
    if (med == 0.0) return out;
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = 100.0 * (values[i] / med - 1.0);
    return out;
}

struct MonthlyRisk {
    std::string security_id;
    YearMonth month;
    std::optional<double> var;  // VaR over (t-11, t)
    std::optional<double> vluck;
    std::optional<double> var_chg;
    std::optional<double> var_dev;
    std::optional<double> vluck_chg;
};

// VaR_chg, VaR_dev and VLuck_chg for every security and month in `months`.
inline std::vector<MonthlyRisk> var_dynamics(const std::vector<ReturnSeries>& universe, const MonthRange& months,
                                             const RiskConfig& cfg = {}) {
    std::vector<MonthlyRisk> out;
    for (int ti = months.first.index(); ti <= months.last.index(); ++ti) {
        const auto t = YearMonth::from_index(ti);
        std::vector<MonthlyRisk> rows;
        std::vector<double> cross;
        std::vector<std::size_t> cross_idx;
        for (const auto& series : universe) {
            MonthlyRisk r{series.security_id, t, {}, {}, {}, {}, {}};
            auto cur = rolling_var(series, t, cfg);
            auto prev = rolling_var(series, t.plus(-1), cfg);
            if (cur) {
                r.var = cur->var;
                r.vluck = cur->vluck;
                cross.push_back(cur->var);
                cross_idx.push_back(rows.size());
                if (prev) {
                    r.var_chg = percent_change(cur->var, prev->var);
                    r.vluck_chg = percent_change(cur->vluck, prev->vluck);
                }
            }
            rows.push_back(std::move(r));
        }
        auto dev = deviation_from_median(cross);
        for (std::size_t i = 0; i < cross_idx.size(); ++i) rows[cross_idx[i]].var_dev = dev[i];
        for (auto& r : rows)
            if (r.var) out.push_back(std::move(r));
    }
    return out;
}

inline void write_monthly_risk(std::ostream& out, const std::vector<MonthlyRisk>& rows) {
    out << "security_id,month,var,vluck,var_chg,var_dev,vluck_chg\n";
    for (const auto& r : rows)
        out << csv::quote(r.security_id) << ',' << r.month.to_string() << ',' << csv::format(r.var) << ','
            << csv::format(r.vluck) << ',' << csv::format(r.var_chg) << ',' << csv::format(r.var_dev) << ','
            << csv::format(r.vluck_chg) << '\n';
}

inline std::optional<double> parse_optional(const std::string& cell, const std::string& where) {
    if (cell.empty()) return std::nullopt;
    auto v = csv::parse_double(cell);
    if (!v) throw InputError("malformed number '" + cell + "'" + where);
    return v;
}

inline std::vector<MonthlyRisk> read_monthly_risk(std::istream& in) {
    csv::Reader reader(in);
    reader.expect_header({"security_id", "month", "var", "vluck", "var_chg", "var_dev", "vluck_chg"});
    std::vector<MonthlyRisk> out;
    std::vector<std::string> f;
    while (reader.next(f)) {
        const auto where = " at line " + std::to_string(reader.line_number());
        if (f.size() != 7) throw InputError("malformed risk row" + where);
        out.push_back({f[0], YearMonth::parse(f[1]), parse_optional(f[2], where), parse_optional(f[3], where),
                       parse_optional(f[4], where), parse_optional(f[5], where), parse_optional(f[6], where)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Return-distribution segments

// Returns whose rank r (0-based, ties broken by position) satisfies
// lower/100 * n <= r < upper/100 * n, in original date order. upper = 100
// includes the maximum, so adjacent segments partition the sample.
inline ReturnSeries segment_slice(const ReturnSeries& series, double lower_pct, double upper_pct) {
    if (!(lower_pct >= 0 && lower_pct < upper_pct && upper_pct <= 100))
        throw UsageError("segment bounds must satisfy 0 <= lower < upper <= 100");
    const std::size_t n = series.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return series.log_returns[a] < series.log_returns[b]; });
    const double lo = lower_pct / 100.0 * static_cast<double>(n);
    const double hi = upper_pct / 100.0 * static_cast<double>(n);
    std::vector<bool> keep(n, false);
    for (std::size_t r = 0; r < n; ++r) {
        const auto rr = static_cast<double>(r);
        if (rr >= lo && (rr < hi || upper_pct == 100)) keep[order[r]] = true;
    }
    ReturnSeries out{series.security_id, {}, {}};
    for (std::size_t i = 0; i < n; ++i)
        if (keep[i]) {
            out.dates.push_back(series.dates[i]);
            out.log_returns.push_back(series.log_returns[i]);
        }
    if (out.log_returns.empty()) throw InsufficientDataError(series.security_id + ": empty return segment");
    return out;
}

// ---------------------------------------------------------------------------
// Per-window report

enum class WindowKind : std::uint8_t { annual, two_month };

inline WindowKind parse_window_kind(std::string_view s) {
    if (s == "annual") return WindowKind::annual;
    if (s == "2-month" || s == "two-month") return WindowKind::two_month;
    throw UsageError("window must be 'annual' or '2-month', got '" + std::string(s) + "'");
}

struct Window {
    std::string label;  // "2013" or "2013-03"
    MonthRange months;
    bool operator==(const Window&) const = default;
};

// Calendar-aligned windows intersecting `span`: whole years, or the pairs
// Jan-Feb, Mar-Apr, ... labelled by their first month.
inline std::vector<Window> make_windows(const MonthRange& span, WindowKind kind) {
    std::vector<Window> out;
    if (span.empty()) return out;
    if (kind == WindowKind::annual) {
        for (int y = span.first.year; y <= span.last.year; ++y) out.push_back({std::to_string(y), {{y, 1}, {y, 12}}});
        return out;
    }
    int start = span.first.index() - (span.first.index() % 2);
    for (int i = start; i <= span.last.index(); i += 2) {
        const auto first = YearMonth::from_index(i);
        out.push_back({first.to_string(), {first, first.plus(1)}});
    }
    return out;
}

struct InstabilityConfig {
    std::size_t min_obs = 30;
    HillConfig hill;
    OutlierTestConfig outliers;
    RiskConfig risk;
};

struct InstabilityReport {
    std::string security_id;
    std::string window;
    double mad = 0.0;
    double variance = 0.0;
    std::optional<double> skewness;
    std::optional<double> kurtosis;
    std::optional<double> hill_pos;
    std::optional<double> hill_neg;
    int outliers_pos = 0;
    int outliers_neg = 0;
    std::optional<double> var_chg;
    std::optional<double> var_dev;
    std::optional<double> vluck_chg;
};

// MAD and variance use raw returns; shape and tail statistics use returns
// divided by the window's standard deviation. VaR figures are those of the
// window's last month. Missing when the window is too short or constant.
inline std::optional<InstabilityReport> instability_report(const ReturnSeries& series, const Window& window,
                                                           const InstabilityConfig& cfg,
                                                           const MonthlyRisk* end_of_window_risk = nullptr) {
    const auto in = series.slice(window.months);
    if (in.size() < std::max<std::size_t>(cfg.min_obs, 10)) return std::nullopt;
    const double sd = stats::sample_sd(in.log_returns);
    if (!(sd > 0)) return std::nullopt;
    auto norm = normalize(in.log_returns);
    InstabilityReport r;
    r.security_id = series.security_id;
    r.window = window.label;
    const auto raw = moments(in.log_returns);
    r.mad = raw.mad;
    r.variance = raw.variance;
    const auto shape = moments(norm);
    r.skewness = shape.skewness;
    r.kurtosis = shape.kurtosis;
    r.hill_pos = hill_index(norm, Tail::positive, cfg.hill);
    r.hill_neg = hill_index(norm, Tail::negative, cfg.hill);
    const auto oc = outlier_counts(norm, cfg.outliers);
    r.outliers_pos = oc.positive;
    r.outliers_neg = oc.negative;
    if (end_of_window_risk) {
        r.var_chg = end_of_window_risk->var_chg;
        r.var_dev = end_of_window_risk->var_dev;
        r.vluck_chg = end_of_window_risk->vluck_chg;
    }
    return r;
}

inline const std::vector<std::string>& instability_header() {
    static const std::vector<std::string> h{"security_id", "window",       "mad",          "variance", "skewness",
                                            "kurtosis",    "hill_pos",     "hill_neg",     "outliers_pos",
                                            "outliers_neg", "var_chg",     "var_dev",      "vluck_chg"};
    return h;
}

inline void write_instability(std::ostream& out, const std::vector<InstabilityReport>& rows) {
    const auto& h = instability_header();
    for (std::size_t i = 0; i < h.size(); ++i) out << (i ? "," : "") << h[i];
    out << '\n';
    for (const auto& r : rows)
        out << csv::quote(r.security_id) << ',' << r.window << ',' << csv::format(r.mad) << ','
            << csv::format(r.variance) << ',' << csv::format(r.skewness) << ',' << csv::format(r.kurtosis) << ','
            << csv::format(r.hill_pos) << ',' << csv::format(r.hill_neg) << ',' << r.outliers_pos << ','
            << r.outliers_neg << ',' << csv::format(r.var_chg) << ',' << csv::format(r.var_dev) << ','
            << csv::format(r.vluck_chg) << '\n';
}

inline std::vector<InstabilityReport> read_instability(std::istream& in) {
    csv::Reader reader(in);
    reader.expect_header(instability_header());
    std::vector<InstabilityReport> out;
    std::vector<std::string> f;
    while (reader.next(f)) {
        const auto where = " at line " + std::to_string(reader.line_number());
        if (f.size() != 13) throw InputError("malformed instability row" + where);
        InstabilityReport r;
        r.security_id = f[0];
        r.window = f[1];
        auto mad = parse_optional(f[2], where), var = parse_optional(f[3], where);
        auto op = csv::parse_int(f[8]), on = csv::parse_int(f[9]);
        if (!mad || !var || !op || !on) throw InputError("malformed instability row" + where);
        r.mad = *mad;
        r.variance = *var;
        r.skewness = parse_optional(f[4], where);
        r.kurtosis = parse_optional(f[5], where);
        r.hill_pos = parse_optional(f[6], where);
        r.hill_neg = parse_optional(f[7], where);
        r.outliers_pos = static_cast<int>(*op);
        r.outliers_neg = static_cast<int>(*on);
        r.var_chg = parse_optional(f[10], where);
        r.var_dev = parse_optional(f[11], where);
        r.vluck_chg = parse_optional(f[12], where);
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace mclust
