#pragma once

// Trade ingestion, monthly binary firm x security networks, and turnover coverage.

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mclust/util/calendar.hpp"
#include "mclust/util/csv.hpp"
#include "mclust/util/error.hpp"
#include "mclust/util/matrix.hpp"

namespace mclust {

enum class Side : std::uint8_t { buy, sell };
enum class Capacity : std::uint8_t { principal, agent };
enum class CapacityFilter : std::uint8_t { principal_only, agent_only, all };

struct TradeRecord {
    std::string firm_id;
    std::string security_id;
    Date date;
    Side side = Side::buy;
    double units = 0.0;
    double price = 0.0;
    Capacity capacity = Capacity::principal;

    double turnover() const noexcept { return units * price; }
    bool operator==(const TradeRecord&) const = default;
};

inline const std::vector<std::string>& trades_header() {
    static const std::vector<std::string> h{"firm_id", "security_id", "date", "side", "units", "price", "capacity"};
    return h;
}

inline bool accepts(CapacityFilter filter, Capacity c) noexcept {
    switch (filter) {
        case CapacityFilter::principal_only: return c == Capacity::principal;
        case CapacityFilter::agent_only: return c == Capacity::agent;
        case CapacityFilter::all: return true;
    }
    return false;
}

inline CapacityFilter parse_capacity_filter(std::string_view text) {
    if (text == "principal") return CapacityFilter::principal_only;
    if (text == "agent") return CapacityFilter::agent_only;
    if (text == "all") return CapacityFilter::all;
    throw UsageError("capacity filter must be one of principal|agent|all, got '" + std::string(text) + "'");
}

struct RowDiagnostic {
    std::size_t line = 0;
    std::string message;
};

struct IngestResult {
    std::vector<TradeRecord> trades;
    std::vector<RowDiagnostic> diagnostics;
    std::size_t rows_read = 0;
    std::size_t filtered_out = 0;  // well-formed rows dropped by the capacity filter
};

struct IngestOptions {
    CapacityFilter filter = CapacityFilter::principal_only;
    double max_malformed_fraction = 0.10;
    // The malformed-fraction guard only fires once this many data rows were read.
    std::size_t min_rows_for_guard = 20;
};

namespace detail {

inline std::optional<TradeRecord> parse_trade(const std::vector<std::string>& f, std::string& why) {
    if (f.size() != 7) {
        why = "expected 7 fields, got " + std::to_string(f.size());
        return std::nullopt;
    }
    TradeRecord t;
    t.firm_id = f[0];
    t.security_id = f[1];
    if (t.firm_id.empty() || t.security_id.empty()) {
        why = "empty firm_id or security_id";
        return std::nullopt;
    }
    try {
        t.date = parse_date(f[2]);
    } catch (const InputError& e) {
        why = e.what();
        return std::nullopt;
    }
    if (f[3] == "B") t.side = Side::buy;
    else if (f[3] == "S") t.side = Side::sell;
    else {
        why = "side must be B or S, got '" + f[3] + "'";
        return std::nullopt;
    }
    auto units = csv::parse_double(f[4]);
    auto price = csv::parse_double(f[5]);
    if (!units || *units < 0) {
        why = "units must be a nonnegative number, got '" + f[4] + "'";
        return std::nullopt;
    }
    if (!price || *price < 0) {
        why = "price must be a nonnegative number, got '" + f[5] + "'";
        return std::nullopt;
    }
    t.units = *units;
    t.price = *price;
    if (f[6] == "P") t.capacity = Capacity::principal;
    else if (f[6] == "A") t.capacity = Capacity::agent;
    else {
        why = "capacity must be P or A, got '" + f[6] + "'";
        return std::nullopt;
    }
    return t;
}

}  // namespace detail

// Reads the trades CSV. Malformed rows become diagnostics; if more than
// `max_malformed_fraction` of rows are malformed the whole source is rejected.
inline IngestResult ingest_trades(std::istream& in, const IngestOptions& opts = {}) {
    csv::Reader reader(in);
    reader.expect_header(trades_header());
    IngestResult result;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        ++result.rows_read;
        std::string why;
        auto trade = detail::parse_trade(fields, why);
        if (!trade) {
            result.diagnostics.push_back({reader.line_number(), std::move(why)});
            continue;
        }
        if (!accepts(opts.filter, trade->capacity)) {
            ++result.filtered_out;
            continue;
        }
        result.trades.push_back(std::move(*trade));
    }
    if (in.bad()) throw IoError("read error while ingesting trades");
    const auto bad = result.diagnostics.size();
    if (result.rows_read >= opts.min_rows_for_guard &&
        static_cast<double>(bad) > opts.max_malformed_fraction * static_cast<double>(result.rows_read)) {
        std::string msg = std::to_string(bad) + " of " + std::to_string(result.rows_read) +
                          " trade rows are malformed (schema mismatch?)";
        if (!result.diagnostics.empty())
            msg += "; first at line " + std::to_string(result.diagnostics.front().line) + ": " +
                   result.diagnostics.front().message;
        throw InputError(msg);
    }
    return result;
}

inline IngestResult ingest_trades_file(const std::string& path, const IngestOptions& opts = {}) {
    auto in = csv::open_input(path);
    return ingest_trades(in, opts);
}

inline void write_trades(std::ostream& out, const std::vector<TradeRecord>& trades) {
    out << "firm_id,security_id,date,side,units,price,capacity\n";
    for (const auto& t : trades) {
        out << csv::quote(t.firm_id) << ',' << csv::quote(t.security_id) << ',' << format_date(t.date) << ','
            << (t.side == Side::buy ? 'B' : 'S') << ',' << csv::format(t.units) << ',' << csv::format(t.price)
            << ',' << (t.capacity == Capacity::principal ? 'P' : 'A') << '\n';
    }
}

// One month's binary firm x security network. Rows are securities, columns firms.
// Nodes are sorted by id and every node has degree >= 1.
struct BipartiteSnapshot {
    YearMonth month;
    std::vector<std::string> firms;
    std::vector<std::string> securities;
    Matrix<std::uint8_t> adjacency;  // n_S x n_F
    std::vector<int> firm_degrees;
    std::vector<int> security_degrees;

    std::size_t n_firms() const noexcept { return firms.size(); }
    std::size_t n_securities() const noexcept { return securities.size(); }
    bool empty() const noexcept { return firms.empty() || securities.empty(); }
    bool linked(std::size_t s, std::size_t f) const { return adjacency(s, f) != 0; }

    std::size_t edge_count() const {
        std::size_t e = 0;
        for (int d : firm_degrees) e += static_cast<std::size_t>(d);
        return e;
    }

    bool operator==(const BipartiteSnapshot&) const = default;
};

// Builds a snapshot from an adjacency matrix, dropping zero-degree nodes.
// Node order is kept as given.
inline BipartiteSnapshot make_snapshot(YearMonth month, std::vector<std::string> firms,
                                       std::vector<std::string> securities, const Matrix<std::uint8_t>& adjacency) {
    if (adjacency.rows() != securities.size() || adjacency.cols() != firms.size())
        throw InputError("adjacency shape does not match node lists");
    std::vector<int> df(firms.size(), 0), ds(securities.size(), 0);
    for (std::size_t s = 0; s < securities.size(); ++s)
        for (std::size_t f = 0; f < firms.size(); ++f)
            if (adjacency(s, f)) {
                ++df[f];
                ++ds[s];
            }
    std::vector<std::size_t> keep_f, keep_s;
    for (std::size_t f = 0; f < firms.size(); ++f)
        if (df[f] > 0) keep_f.push_back(f);
    for (std::size_t s = 0; s < securities.size(); ++s)
        if (ds[s] > 0) keep_s.push_back(s);

    BipartiteSnapshot snap;
    snap.month = month;
    snap.adjacency = Matrix<std::uint8_t>(keep_s.size(), keep_f.size(), 0);
    for (auto f : keep_f) {
        snap.firms.push_back(std::move(firms[f]));
        snap.firm_degrees.push_back(df[f]);
    }
    for (std::size_t i = 0; i < keep_s.size(); ++i) {
        snap.securities.push_back(std::move(securities[keep_s[i]]));
        snap.security_degrees.push_back(ds[keep_s[i]]);
        for (std::size_t j = 0; j < keep_f.size(); ++j) snap.adjacency(i, j) = adjacency(keep_s[i], keep_f[j]);
    }
    return snap;
}

// a_sf = 1 iff firm f traded security s (either side) in `month`.
inline BipartiteSnapshot build_snapshot(const std::vector<TradeRecord>& trades, YearMonth month) {
    std::set<std::pair<std::string, std::string>> edges;  // (security, firm)
    std::set<std::string> firm_set, sec_set;
    for (const auto& t : trades) {
        if (!month.contains(t.date)) continue;
        edges.emplace(t.security_id, t.firm_id);
        firm_set.insert(t.firm_id);
        sec_set.insert(t.security_id);
    }
    std::vector<std::string> firms(firm_set.begin(), firm_set.end());
    std::vector<std::string> securities(sec_set.begin(), sec_set.end());
    std::map<std::string, std::size_t> fidx, sidx;
    for (std::size_t i = 0; i < firms.size(); ++i) fidx[firms[i]] = i;
    for (std::size_t i = 0; i < securities.size(); ++i) sidx[securities[i]] = i;
    Matrix<std::uint8_t> adj(securities.size(), firms.size(), 0);
    for (const auto& [s, f] : edges) adj(sidx[s], fidx[f]) = 1;
    return make_snapshot(month, std::move(firms), std::move(securities), adj);
}

inline nlohmann::json snapshot_to_json(const BipartiteSnapshot& snap) {
    nlohmann::json edges = nlohmann::json::array();
    for (std::size_t s = 0; s < snap.n_securities(); ++s)
        for (std::size_t f = 0; f < snap.n_firms(); ++f)
            if (snap.linked(s, f)) edges.push_back({s, f});
    return {{"month", snap.month.to_string()},
            {"firms", snap.firms},
            {"securities", snap.securities},
            {"edges", std::move(edges)},
            {"firm_degrees", snap.firm_degrees},
            {"security_degrees", snap.security_degrees}};
}

inline BipartiteSnapshot snapshot_from_json(const nlohmann::json& j) {
    auto month = YearMonth::parse(j.at("month").get<std::string>());
    auto firms = j.at("firms").get<std::vector<std::string>>();
    auto securities = j.at("securities").get<std::vector<std::string>>();
    Matrix<std::uint8_t> adj(securities.size(), firms.size(), 0);
    for (const auto& e : j.at("edges")) {
        auto s = e.at(0).get<std::size_t>();
        auto f = e.at(1).get<std::size_t>();
        if (s >= securities.size() || f >= firms.size()) throw InputError("snapshot edge index out of range");
        adj(s, f) = 1;
    }
    auto snap = make_snapshot(month, std::move(firms), std::move(securities), adj);
    if (snap.n_firms() != j.at("firms").size() || snap.n_securities() != j.at("securities").size())
        throw InputError("snapshot JSON contains zero-degree nodes");
    if (snap.firm_degrees != j.at("firm_degrees").get<std::vector<int>>() ||
        snap.security_degrees != j.at("security_degrees").get<std::vector<int>>())
        throw InputError("snapshot JSON degree arrays disagree with its edges");
    return snap;
}

// ---------------------------------------------------------------------------
// Turnover coverage

struct SecurityYear {
    std::string security_id;
    int year = 0;
    auto operator<=>(const SecurityYear&) const = default;
};

using ExternalTurnover = std::map<SecurityYear, double>;

inline ExternalTurnover read_external_turnover(std::istream& in) {
    csv::Reader reader(in);
    reader.expect_header({"security_id", "year", "total_turnover"});
    ExternalTurnover out;
    std::vector<std::string> f;
    while (reader.next(f)) {
        const auto where = " at line " + std::to_string(reader.line_number());
        if (f.size() != 3 || f[0].empty()) throw InputError("malformed turnover row" + where);
        auto year = csv::parse_int(f[1]);
        auto total = csv::parse_double(f[2]);
        if (!year) throw InputError("invalid year" + where);
        if (!total || *total <= 0) throw InputError("total_turnover must be strictly positive" + where);
        if (!out.emplace(SecurityYear{f[0], static_cast<int>(*year)}, *total).second)
            throw InputError("duplicate turnover entry for " + f[0] + where);
    }
    return out;
}

enum class CoverageClass : std::uint8_t { covered, control, missing_total, inconsistent };

inline std::string_view to_string(CoverageClass c) {
    switch (c) {
        case CoverageClass::covered: return "covered";
        case CoverageClass::control: return "control";
        case CoverageClass::missing_total: return "missing_total";
        case CoverageClass::inconsistent: return "inconsistent";
    }
    return "?";
}

struct CoverageEntry {
    SecurityYear key;
    double covered_turnover = 0.0;
    std::optional<double> total_turnover;
    std::optional<double> coverage_ratio;  // missing when no external total
    CoverageClass cls = CoverageClass::missing_total;
};

// Per (security, year) classification. Every traded security-year lands in
// exactly one class; the last two are the excluded ones.
struct CoverageSplit {
    std::vector<CoverageEntry> entries;

    std::set<std::string> securities(int year, CoverageClass cls) const {
        std::set<std::string> out;
        for (const auto& e : entries)
            if (e.key.year == year && e.cls == cls) out.insert(e.key.security_id);
        return out;
    }
    std::optional<CoverageClass> classify(const std::string& security, int year) const {
        for (const auto& e : entries)
            if (e.key.year == year && e.key.security_id == security) return e.cls;
        return std::nullopt;
    }
};

// Securities whose covered share of yearly turnover is strictly below `threshold`
// form the control group.
inline CoverageSplit coverage_split(const std::vector<TradeRecord>& trades, const ExternalTurnover& external,
                                    double threshold = 0.10) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw UsageError("coverage threshold must lie in (0,1)");
    std::map<SecurityYear, double> covered;
    for (const auto& t : trades) covered[{t.security_id, static_cast<int>(t.date.year())}] += t.turnover();
    CoverageSplit split;
    for (const auto& [key, amount] : covered) {
        CoverageEntry e{key, amount, std::nullopt, std::nullopt, CoverageClass::missing_total};
        if (auto it = external.find(key); it != external.end()) {
            e.total_turnover = it->second;
            e.coverage_ratio = amount / it->second;
            if (amount > it->second) e.cls = CoverageClass::inconsistent;
            else e.cls = *e.coverage_ratio < threshold ? CoverageClass::control : CoverageClass::covered;
        }
        split.entries.push_back(std::move(e));
    }
    return split;
}

inline void write_coverage(std::ostream& out, const CoverageSplit& split) {
    out << "security_id,year,covered_turnover,total_turnover,coverage_ratio,class\n";
    for (const auto& e : split.entries)
        out << csv::quote(e.key.security_id) << ',' << e.key.year << ',' << csv::format(e.covered_turnover) << ','
            << csv::format(e.total_turnover) << ',' << csv::format(e.coverage_ratio) << ',' << to_string(e.cls)
            << '\n';
}

inline CoverageClass parse_coverage_class(std::string_view s) {
    if (s == "covered") return CoverageClass::covered;
    if (s == "control") return CoverageClass::control;
    if (s == "missing_total") return CoverageClass::missing_total;
    if (s == "inconsistent") return CoverageClass::inconsistent;
    throw InputError("unknown coverage class '" + std::string(s) + "'");
}

inline CoverageSplit read_coverage(std::istream& in) {
    csv::Reader reader(in);
    reader.expect_header({"security_id", "year", "covered_turnover", "total_turnover", "coverage_ratio", "class"});
    CoverageSplit split;
    std::vector<std::string> f;
    while (reader.next(f)) {
        const auto where = " at line " + std::to_string(reader.line_number());
        if (f.size() != 6) throw InputError("malformed coverage row" + where);
        auto year = csv::parse_int(f[1]);
        auto covered = csv::parse_double(f[2]);
        if (!year || !covered) throw InputError("malformed coverage row" + where);
        CoverageEntry e{{f[0], static_cast<int>(*year)}, *covered, std::nullopt, std::nullopt, parse_coverage_class(f[5])};
        if (!f[3].empty()) e.total_turnover = csv::parse_double(f[3]);
        if (!f[4].empty()) e.coverage_ratio = csv::parse_double(f[4]);
        split.entries.push_back(std::move(e));
    }
    return split;
}

}  // namespace mclust
