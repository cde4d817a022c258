#pragma once

// Monthly (security, month) panel for external econometric tooling: the
// clustering score, the VaR dynamics, and the user-supplied covariates.

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "mclust/clustering.hpp"
#include "mclust/instability.hpp"
#include "mclust/util/calendar.hpp"
#include "mclust/util/csv.hpp"
#include "mclust/util/error.hpp"

namespace mclust {

struct MarketRow {
    std::optional<double> mktf;
    std::optional<double> vix;
};
using MarketCovariates = std::map<YearMonth, MarketRow>;

struct FundamentalRow {
    std::optional<double> mcap;  // market capitalization, 10^6 EUR, untransformed
    std::optional<double> pb3;
    std::optional<double> dy;
    std::optional<double> lev3;
};
using SecurityMonth = std::pair<std::string, YearMonth>;
using Fundamentals = std::map<SecurityMonth, FundamentalRow>;

struct VolumePoint {
    Date date;
    double euro_volume = 0.0;
};
using VolumeTable = std::map<std::string, std::vector<VolumePoint>>;

namespace detail {

inline std::optional<double> optional_cell(const std::string& cell, const std::string& where) {
    if (cell.empty()) return std::nullopt;
    auto v = csv::parse_double(cell);
    if (!v) throw InputError("malformed number '" + cell + "'" + where);
    return v;
}

inline std::string join_keys(const std::vector<std::string>& keys) {
    std::string out;
    for (std::size_t i = 0; i < keys.size() && i < 20; ++i) out += (i ? ", " : "") + keys[i];
    if (keys.size() > 20) out += ", ...";
    return out;
}

}  // namespace detail

inline MarketCovariates read_market(std::istream& in) {
    csv::Reader reader(in);
    reader.expect_header({"month", "MKTF", "VIX"});
    MarketCovariates out;
    std::vector<std::string> f, dup;
    while (reader.next(f)) {
        const auto where = " at line " + std::to_string(reader.line_number());
        if (f.size() != 3) throw InputError("malformed market row" + where);
        const auto month = YearMonth::parse(f[0]);
        MarketRow r{detail::optional_cell(f[1], where), detail::optional_cell(f[2], where)};
        if (!out.emplace(month, r).second) dup.push_back(month.to_string());
    }
    if (!dup.empty()) throw InputError("duplicate market months: " + detail::join_keys(dup));
    return out;
}

inline Fundamentals read_fundamentals(std::istream& in) {
    csv::Reader reader(in);
    reader.expect_header({"security_id", "month", "MCAP", "PB3", "DY", "LEV3"});
    Fundamentals out;
    std::vector<std::string> f, dup;
    while (reader.next(f)) {
        const auto where = " at line " + std::to_string(reader.line_number());
        if (f.size() != 6 || f[0].empty()) throw InputError("malformed fundamentals row" + where);
        const auto month = YearMonth::parse(f[1]);
        FundamentalRow r{detail::optional_cell(f[2], where), detail::optional_cell(f[3], where),
                         detail::optional_cell(f[4], where), detail::optional_cell(f[5], where)};
        if (r.mcap && *r.mcap <= 0.0) throw InputError("MCAP must be positive" + where);
        if (!out.emplace(SecurityMonth{f[0], month}, r).second) dup.push_back(f[0] + "@" + month.to_string());
    }
    if (!dup.empty()) throw InputError("duplicate fundamentals keys: " + detail::join_keys(dup));
    return out;
}

inline VolumeTable read_volumes(std::istream& in) {
    csv::Reader reader(in);
    reader.expect_header({"security_id", "date", "euro_volume"});
    VolumeTable out;
    std::set<std::pair<std::string, int>> seen;
    std::vector<std::string> f, dup;
    while (reader.next(f)) {
        const auto where = " at line " + std::to_string(reader.line_number());
        if (f.size() != 3 || f[0].empty()) throw InputError("malformed volume row" + where);
        const auto date = parse_date(f[1]);
        auto v = csv::parse_double(f[2]);
        if (!v || *v < 0.0) throw InputError("malformed euro_volume" + where);
        const int day = std::chrono::sys_days(date).time_since_epoch().count();
        if (!seen.emplace(f[0], day).second) dup.push_back(f[0] + "@" + f[1]);
        out[f[0]].push_back({date, *v});
    }
    if (!dup.empty()) throw InputError("duplicate volume keys: " + detail::join_keys(dup));
    for (auto& [id, points] : out)
        std::sort(points.begin(), points.end(), [](const auto& a, const auto& b) { return a.date < b.date; });
    return out;
}

// Month-end closes keyed by month.
inline std::map<YearMonth, double> month_end_closes(const std::vector<PricePoint>& points) {
    std::map<YearMonth, double> out;
    for (const auto& p : points) out[YearMonth::of(p.date)] = p.close;  // points are date-sorted
    return out;
}

// Monthly simple returns in percent, from consecutive month-end closes.
inline std::map<YearMonth, double> monthly_returns_pct(const std::vector<PricePoint>& points) {
    const auto closes = month_end_closes(points);
    std::map<YearMonth, double> out;
    for (auto it = closes.begin(); it != closes.end(); ++it) {
        auto prev = closes.find(it->first.plus(-1));
        if (prev == closes.end()) continue;
        out[it->first] = 100.0 * (it->second / prev->second - 1.0);
    }
    return out;
}

// Mean of the monthly returns over (t - months + 1 .. t); every month required.
inline std::optional<double> momentum(const std::map<YearMonth, double>& monthly, YearMonth t, int months) {
    double sum = 0.0;
    for (int i = 0; i < months; ++i) {
        auto it = monthly.find(t.plus(-i));
        if (it == monthly.end()) return std::nullopt;
        sum += it->second;
    }
    return sum / months;
}

inline constexpr double kIlliquidityOffset = 1e-6;

// ln(mean over days in t of |log return| / euro volume + 1e-6); days with zero
// volume or no return are skipped.
inline std::optional<double> illiquidity(const ReturnSeries& returns, const std::vector<VolumePoint>& volumes,
                                         YearMonth t) {
    double sum = 0.0;
    std::size_t n = 0;
    auto v = volumes.begin();
    for (std::size_t i = 0; i < returns.size(); ++i) {
        if (!t.contains(returns.dates[i])) continue;
        while (v != volumes.end() && v->date < returns.dates[i]) ++v;
        if (v == volumes.end()) break;
        if (v->date != returns.dates[i] || v->euro_volume <= 0.0) continue;
        sum += std::abs(returns.log_returns[i]) / v->euro_volume;
        ++n;
    }
    if (n == 0) return std::nullopt;
    return std::log(sum / static_cast<double>(n) + kIlliquidityOffset);
}

struct PanelRow {
    std::string security_id;
    YearMonth month;
    double clust = 0.0;
    std::optional<double> var_chg, var_dev, vluck_chg;
    std::optional<double> mktf, vix;
    std::optional<double> mom12, mom6;
    std::optional<double> mcap, illiq, pb3;
    double dy = 0.0;
    std::optional<double> lev3;
};

inline const std::vector<std::string>& panel_header() {
    static const std::vector<std::string> h{"security_id", "month", "CLUST", "VaR_chg", "VaR_dev",
                                            "VLuck_chg",   "MKTF",  "VIX",   "MOM12",   "MOM6",
                                            "MCAP",        "ILLIQ", "PB3",   "DY",      "LEV3"};
    return h;
}

struct PanelInputs {
    const std::vector<ClusteringScore>* scores = nullptr;
    const std::vector<MonthlyRisk>* risk = nullptr;
    const PriceTable* prices = nullptr;  // for MOM and ILLIQ
    const MarketCovariates* market = nullptr;
    const Fundamentals* fundamentals = nullptr;
    const VolumeTable* volumes = nullptr;
};

// One row per (security, month) holding an ok clustering score and a VaR for
// that month; covariates are attached where available.
inline std::vector<PanelRow> export_panel(const PanelInputs& in) {
    if (!in.scores || !in.risk) throw InputError("panel export needs scores and risk rows");
    std::map<SecurityMonth, const MonthlyRisk*> risk;
    for (const auto& r : *in.risk)
        if (r.var) risk[{r.security_id, r.month}] = &r;

    std::map<std::string, std::map<YearMonth, double>> monthly;
    std::map<std::string, ReturnSeries> daily;
    if (in.prices)
        for (const auto& [id, points] : *in.prices) {
            monthly[id] = monthly_returns_pct(points);
            daily[id] = log_returns(id, points);
        }

    std::vector<PanelRow> rows;
    std::set<SecurityMonth> seen;
    for (const auto& c : *in.scores) {
        if (c.status != ScoreStatus::ok || !c.score) continue;
        const SecurityMonth key{c.security_id, c.month};
        auto rit = risk.find(key);
        if (rit == risk.end()) continue;
        if (!seen.insert(key).second) throw InputError("duplicate score for " + c.security_id + "@" + c.month.to_string());
        PanelRow row;
        row.security_id = c.security_id;
        row.month = c.month;
        row.clust = *c.score;
        row.var_chg = rit->second->var_chg;
        row.var_dev = rit->second->var_dev;
        row.vluck_chg = rit->second->vluck_chg;
        if (in.market)
            if (auto m = in.market->find(c.month); m != in.market->end()) {
                row.mktf = m->second.mktf;
                row.vix = m->second.vix;
            }
        if (auto m = monthly.find(c.security_id); m != monthly.end()) {
            row.mom12 = momentum(m->second, c.month, 12);
            row.mom6 = momentum(m->second, c.month, 6);
        }
        if (in.fundamentals)
            if (auto f = in.fundamentals->find(key); f != in.fundamentals->end()) {
                if (f->second.mcap) row.mcap = std::log(*f->second.mcap);
                row.pb3 = f->second.pb3;
                row.dy = f->second.dy.value_or(0.0);
                row.lev3 = f->second.lev3;
            }
        if (in.volumes)
            if (auto v = in.volumes->find(c.security_id); v != in.volumes->end())
                if (auto d = daily.find(c.security_id); d != daily.end())
                    row.illiq = illiquidity(d->second, v->second, c.month);
        rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end(), [](const PanelRow& a, const PanelRow& b) {
        return std::tie(a.security_id, a.month) < std::tie(b.security_id, b.month);
    });
    return rows;
}

inline void write_panel(std::ostream& out, const std::vector<PanelRow>& rows) {
    const auto& h = panel_header();
    for (std::size_t i = 0; i < h.size(); ++i) out << (i ? "," : "") << h[i];
    out << '\n';
    for (const auto& r : rows)
        out << csv::quote(r.security_id) << ',' << r.month.to_string() << ',' << csv::format(r.clust) << ','
            << csv::format(r.var_chg) << ',' << csv::format(r.var_dev) << ',' << csv::format(r.vluck_chg) << ','
            << csv::format(r.mktf) << ',' << csv::format(r.vix) << ',' << csv::format(r.mom12) << ','
            << csv::format(r.mom6) << ',' << csv::format(r.mcap) << ',' << csv::format(r.illiq) << ','
            << csv::format(r.pb3) << ',' << csv::format(r.dy) << ',' << csv::format(r.lev3) << '\n';
}

// Panel CSV as a long table: variable name -> (security, month, value).
struct PanelObservation {
    std::string security_id;
    YearMonth month;
    double value = 0.0;
};
using PanelColumns = std::vector<std::pair<std::string, std::vector<PanelObservation>>>;

inline PanelColumns read_panel(std::istream& in) {
    csv::Reader reader(in);
    reader.expect_header(panel_header());
    const auto& h = panel_header();
    PanelColumns cols;
    for (std::size_t i = 2; i < h.size(); ++i) cols.emplace_back(h[i], std::vector<PanelObservation>{});
    std::vector<std::string> f;
    while (reader.next(f)) {
        const auto where = " at line " + std::to_string(reader.line_number());
        if (f.size() != h.size()) throw InputError("malformed panel row" + where);
        const auto month = YearMonth::parse(f[1]);
        for (std::size_t i = 2; i < h.size(); ++i)
            if (auto v = detail::optional_cell(f[i], where)) cols[i - 2].second.push_back({f[0], month, *v});
    }
    return cols;
}

struct VariableSummary {
    std::string variable;
    std::size_t n = 0;
    double mean = 0.0, median = 0.0, sd = 0.0, min = 0.0, max = 0.0;
    std::optional<double> between;  // T-bar * sum_i (mean_i - mean)^2 / SS_total
    std::optional<double> within;   // sum_it (x_it - mean_i)^2 / SS_total
};

inline VariableSummary describe_variable(const std::string& name, const std::vector<PanelObservation>& obs) {
    VariableSummary s;
    s.variable = name;
    s.n = obs.size();
    if (obs.empty()) return s;
    std::vector<double> x;
    x.reserve(obs.size());
    std::map<std::string, std::pair<double, std::size_t>> by_security;
    for (const auto& o : obs) {
        x.push_back(o.value);
        auto& acc = by_security[o.security_id];
        acc.first += o.value;
        ++acc.second;
    }
    s.mean = stats::mean(x);
    s.median = stats::median(x);
    s.sd = x.size() > 1 ? stats::sample_sd(x) : 0.0;
    s.min = *std::min_element(x.begin(), x.end());
    s.max = *std::max_element(x.begin(), x.end());
    double total = 0.0, within = 0.0, between = 0.0;
    for (const auto& o : obs) {
        const auto& acc = by_security[o.security_id];
        const double mi = acc.first / static_cast<double>(acc.second);
        total += (o.value - s.mean) * (o.value - s.mean);
        within += (o.value - mi) * (o.value - mi);
    }
    for (const auto& [id, acc] : by_security) {
        const double mi = acc.first / static_cast<double>(acc.second);
        between += (mi - s.mean) * (mi - s.mean);
    }
    const double t_bar = static_cast<double>(obs.size()) / static_cast<double>(by_security.size());
    if (total > 0.0) {
        s.within = within / total;
        s.between = t_bar * between / total;
    }
    return s;
}

inline std::vector<VariableSummary> describe_panel(const PanelColumns& cols) {
    std::vector<VariableSummary> out;
    std::size_t n = 0;
    for (const auto& [name, obs] : cols) {
        out.push_back(describe_variable(name, obs));
        n += obs.size();
    }
    if (n == 0) throw InsufficientDataError("panel is empty");
    return out;
}

inline void write_panel_summary(std::ostream& out, const std::vector<VariableSummary>& rows) {
    out << "variable,n,mean,median,sd,min,max,between,within\n";
    for (const auto& s : rows) {
        out << s.variable << ',' << s.n;
        if (s.n == 0) {
            out << ",,,,,,,\n";
            continue;
        }
        out << ',' << csv::format(s.mean) << ',' << csv::format(s.median) << ',' << csv::format(s.sd) << ','
            << csv::format(s.min) << ',' << csv::format(s.max) << ',' << csv::format(s.between) << ','
            << csv::format(s.within) << '\n';
    }
}

}  // namespace mclust
