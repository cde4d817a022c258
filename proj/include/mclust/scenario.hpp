#pragma once

// Synthetic market scenarios: a complete input directory (trades, prices,
// external turnover, covariates) with known ground truth, plus a run config.
//
// Firms form blocks. Each block trades its own "clustered" securities densely;
// "diffuse" securities are traded by firms picked independently. The same
// layout is repeated for control securities, whose recorded turnover is a small
// share of the external total. Returns are heavy-tailed only for securities
// that are both clustered and covered; everything else is Gaussian.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mclust/market_graph.hpp"
#include "mclust/panel.hpp"
#include "mclust/pipeline.hpp"
#include "mclust/synth.hpp"
#include "mclust/util/calendar.hpp"
#include "mclust/util/csv.hpp"
#include "mclust/util/rng.hpp"

namespace mclust::synth {

struct MarketScenario {
    std::uint64_t seed = 1;
    MonthRange months{{2013, 1}, {2013, 12}};
    int history_months = 13;  // price history before the first traded month
    std::size_t blocks = 4;
    std::size_t firms_per_block = 5;
    std::size_t securities_per_block = 8;
    double within_density = 0.9;
    std::size_t diffuse_securities = 64;
    double diffuse_density = 0.15;
    bool control = true;           // add a control copy of the security layout
    bool control_effect = false;   // give clustered control securities heavy tails too
    ReturnLaw heavy_law = ReturnLaw::student_t;
    double heavy_dof = 3.0;
    double daily_vol = 0.02;
    double agent_fraction = 0.1;   // extra agent-capacity trades per edge
    double covered_ratio_lo = 0.3, covered_ratio_hi = 0.9;
    double control_ratio_lo = 0.01, control_ratio_hi = 0.08;

    std::size_t n_firms() const { return blocks * firms_per_block; }
    std::size_t n_clustered() const { return blocks * securities_per_block; }
    std::size_t n_per_universe() const { return n_clustered() + diffuse_securities; }
};

inline MarketScenario market_scenario_from_json(const nlohmann::json& j) {
    mclust::detail::reject_unknown_keys(
        j,
        {"kind", "seed", "first_month", "last_month", "history_months", "blocks", "firms_per_block",
         "securities_per_block", "within_density", "diffuse_securities", "diffuse_density", "control",
         "control_effect", "heavy_law", "heavy_dof", "daily_vol", "agent_fraction", "covered_ratio", "control_ratio"},
        "market scenario");
    MarketScenario s;
    using mclust::detail::get_or;
    s.seed = get_or(j, "seed", s.seed);
    s.months.first = YearMonth::parse(get_or<std::string>(j, "first_month", s.months.first.to_string()));
    s.months.last = YearMonth::parse(get_or<std::string>(j, "last_month", s.months.last.to_string()));
    s.history_months = get_or(j, "history_months", s.history_months);
    s.blocks = get_or(j, "blocks", s.blocks);
    s.firms_per_block = get_or(j, "firms_per_block", s.firms_per_block);
    s.securities_per_block = get_or(j, "securities_per_block", s.securities_per_block);
    s.within_density = get_or(j, "within_density", s.within_density);
    s.diffuse_securities = get_or(j, "diffuse_securities", s.diffuse_securities);
    s.diffuse_density = get_or(j, "diffuse_density", s.diffuse_density);
    s.control = get_or(j, "control", s.control);
    s.control_effect = get_or(j, "control_effect", s.control_effect);
    s.heavy_law = parse_return_law(get_or<std::string>(j, "heavy_law", "student_t"));
    s.heavy_dof = get_or(j, "heavy_dof", s.heavy_dof);
    s.daily_vol = get_or(j, "daily_vol", s.daily_vol);
    s.agent_fraction = get_or(j, "agent_fraction", s.agent_fraction);
    if (j.contains("covered_ratio")) {
        auto r = j.at("covered_ratio").get<std::vector<double>>();
        if (r.size() != 2) throw UsageError("covered_ratio must be [lo, hi]");
        s.covered_ratio_lo = r[0];
        s.covered_ratio_hi = r[1];
    }
    if (j.contains("control_ratio")) {
        auto r = j.at("control_ratio").get<std::vector<double>>();
        if (r.size() != 2) throw UsageError("control_ratio must be [lo, hi]");
        s.control_ratio_lo = r[0];
        s.control_ratio_hi = r[1];
    }
    if (s.months.empty()) throw UsageError("scenario month range is empty");
    if (s.blocks == 0 || s.firms_per_block < 2 || s.securities_per_block < 2)
        throw UsageError("scenario needs blocks >= 1, firms_per_block >= 2, securities_per_block >= 2");
    if (!(s.within_density > 0 && s.within_density <= 1) || !(s.diffuse_density > 0 && s.diffuse_density <= 1))
        throw UsageError("densities must lie in (0,1]");
    if (!(s.covered_ratio_lo > 0 && s.covered_ratio_lo <= s.covered_ratio_hi && s.covered_ratio_hi <= 1) ||
        !(s.control_ratio_lo > 0 && s.control_ratio_lo <= s.control_ratio_hi && s.control_ratio_hi <= 1))
        throw UsageError("coverage ratio ranges must satisfy 0 < lo <= hi <= 1");
    if (s.history_months < 0) throw UsageError("history_months must be >= 0");
    return s;
}

struct SecurityTruth {
    std::string security_id;
    bool clustered = false;
    bool covered = true;
    int block = -1;  // -1 for diffuse securities
    ReturnLaw law = ReturnLaw::normal;
};

struct ScenarioData {
    std::vector<TradeRecord> trades;
    PricePanel prices;
    ExternalTurnover turnover;
    MarketCovariates market;
    Fundamentals fundamentals;
    VolumeTable volumes;
    std::vector<SecurityTruth> truth;
};

inline std::vector<SecurityTruth> scenario_securities(const MarketScenario& s) {
    std::vector<SecurityTruth> out;
    const std::size_t universes = s.control ? 2 : 1;
    std::size_t idx = 0;
    for (std::size_t u = 0; u < universes; ++u) {
        const bool covered = u == 0;
        for (std::size_t i = 0; i < s.n_per_universe(); ++i, ++idx) {
            SecurityTruth t;
            t.security_id = node_name('S', idx);
            t.covered = covered;
            t.clustered = i < s.n_clustered();
            if (t.clustered) t.block = static_cast<int>(i / s.securities_per_block);
            t.law = t.clustered && (covered || s.control_effect) ? s.heavy_law : ReturnLaw::normal;
            out.push_back(std::move(t));
        }
    }
    return out;
}

inline ScenarioData generate_scenario(const MarketScenario& s) {
    ScenarioData data;
    data.truth = scenario_securities(s);
    const auto firms = node_names('F', s.n_firms());

    // Prices.
    PricePanelSpec pspec;
    const auto first_price_month = s.months.first.plus(-s.history_months);
    pspec.start = Date{std::chrono::year{first_price_month.year}, std::chrono::month{static_cast<unsigned>(first_price_month.month)},
                       std::chrono::day{1}};
    pspec.end = Date{std::chrono::year{s.months.last.year} / std::chrono::month{static_cast<unsigned>(s.months.last.month)} /
                     std::chrono::last};
    pspec.seed = s.seed;
    ReturnGroup heavy{"heavy", {}, s.heavy_law, s.heavy_dof, s.daily_vol};
    ReturnGroup normal{"normal", {}, ReturnLaw::normal, 3.0, s.daily_vol};
    for (const auto& t : data.truth) (t.law == ReturnLaw::normal ? normal : heavy).securities.push_back(t.security_id);
    pspec.groups = {heavy, normal};
    data.prices = generate_price_panel(pspec);

    // Trades.
    std::map<std::string, const std::vector<PricePoint>*> price_of;
    for (const auto& [id, pts] : data.prices.prices) price_of[id] = &pts;
    std::map<SecurityYear, double> principal_turnover;
    for (int mi = s.months.first.index(); mi <= s.months.last.index(); ++mi) {
        const auto month = YearMonth::from_index(mi);
        auto gen = make_engine(s.seed, "scenario-trades", static_cast<std::uint64_t>(mi));
        std::bernoulli_distribution within(s.within_density), diffuse(s.diffuse_density), agent(s.agent_fraction),
            buy(0.5);
        std::uniform_int_distribution<int> n_trades(1, 3), units(10, 1000);
        for (const auto& t : data.truth) {
            const auto& pts = *price_of.at(t.security_id);
            std::vector<const PricePoint*> days;
            for (const auto& p : pts)
                if (month.contains(p.date)) days.push_back(&p);
            if (days.empty()) continue;
            std::uniform_int_distribution<std::size_t> day(0, days.size() - 1);
            for (std::size_t f = 0; f < firms.size(); ++f) {
                const bool edge = t.clustered
                                      ? static_cast<int>(f / s.firms_per_block) == t.block && within(gen)
                                      : diffuse(gen);
                if (!edge) continue;
                const int n = n_trades(gen);
                for (int k = 0; k < n; ++k) {
                    const auto* p = days[day(gen)];
                    TradeRecord r{firms[f], t.security_id, p->date, buy(gen) ? Side::buy : Side::sell,
                                  static_cast<double>(units(gen)), std::round(p->close * 100.0) / 100.0,
                                  Capacity::principal};
                    principal_turnover[{t.security_id, month.year}] += r.turnover();
                    data.trades.push_back(r);
                }
                if (agent(gen)) {
                    const auto* p = days[day(gen)];
                    data.trades.push_back({firms[f], t.security_id, p->date, buy(gen) ? Side::buy : Side::sell,
                                           static_cast<double>(units(gen)), std::round(p->close * 100.0) / 100.0,
                                           Capacity::agent});
                }
            }
        }
    }
    std::stable_sort(data.trades.begin(), data.trades.end(),
                     [](const TradeRecord& a, const TradeRecord& b) { return a.date < b.date; });

    // External turnover: recorded principal turnover divided by a coverage ratio.
    {
        auto gen = make_engine(s.seed, "scenario-turnover");
        std::map<std::string, bool> covered;
        for (const auto& t : data.truth) covered[t.security_id] = t.covered;
        for (const auto& [key, amount] : principal_turnover) {
            const bool cov = covered.at(key.security_id);
            std::uniform_real_distribution<double> ratio(cov ? s.covered_ratio_lo : s.control_ratio_lo,
                                                         cov ? s.covered_ratio_hi : s.control_ratio_hi);
            data.turnover[key] = amount / ratio(gen);
        }
    }

    // Covariates.
    {
        auto gen = make_engine(s.seed, "scenario-market");
        std::normal_distribution<double> mktf(0.5, 4.0), vix(0.0, 5.0);
        for (auto m = first_price_month; !(s.months.last < m); m = m.plus(1))
            data.market[m] = {std::round(mktf(gen) * 100.0) / 100.0, std::round((15.0 + std::abs(vix(gen))) * 100.0) / 100.0};
    }
    for (const auto& t : data.truth) {
        auto gen = make_engine(s.seed, "scenario-fundamentals", stream_tag(t.security_id));
        std::normal_distribution<double> size(std::log(500.0), 1.0), drift(0.0, 0.05);
        std::uniform_real_distribution<double> pb(0.5, 4.0), dy(0.0, 6.0), lev(0.0, 0.6);
        std::bernoulli_distribution pays(0.8);
        const bool dividend = pays(gen);
        double log_cap = size(gen);
        const double lev3 = lev(gen);
        for (auto m = s.months.first; !(s.months.last < m); m = m.plus(1)) {
            log_cap += drift(gen);
            FundamentalRow row{std::round(std::exp(log_cap) * 100.0) / 100.0, std::round(pb(gen) * 1000.0) / 1000.0,
                               std::nullopt, std::round(lev3 * 1000.0) / 1000.0};
            if (dividend) row.dy = std::round(dy(gen) * 100.0) / 100.0;
            data.fundamentals[{t.security_id, m}] = row;
        }
        auto vgen = make_engine(s.seed, "scenario-volumes", stream_tag(t.security_id));
        std::lognormal_distribution<double> vol(std::log(1e6), 0.5);
        for (const auto& p : data.prices.prices.at(t.security_id))
            data.volumes[t.security_id].push_back({p.date, std::round(vol(vgen))});
    }
    return data;
}

inline void write_market(std::ostream& out, const MarketCovariates& m) {
    out << "month,MKTF,VIX\n";
    for (const auto& [month, row] : m)
        out << month.to_string() << ',' << csv::format(row.mktf) << ',' << csv::format(row.vix) << '\n';
}

inline void write_fundamentals(std::ostream& out, const Fundamentals& f) {
    out << "security_id,month,MCAP,PB3,DY,LEV3\n";
    for (const auto& [key, row] : f)
        out << csv::quote(key.first) << ',' << key.second.to_string() << ',' << csv::format(row.mcap) << ','
            << csv::format(row.pb3) << ',' << csv::format(row.dy) << ',' << csv::format(row.lev3) << '\n';
}

inline void write_volumes(std::ostream& out, const VolumeTable& v) {
    out << "security_id,date,euro_volume\n";
    for (const auto& [id, pts] : v)
        for (const auto& p : pts) out << csv::quote(id) << ',' << format_date(p.date) << ',' << csv::format(p.euro_volume) << '\n';
}

inline void write_turnover(std::ostream& out, const ExternalTurnover& t) {
    out << "security_id,year,total_turnover\n";
    for (const auto& [key, total] : t)
        out << csv::quote(key.security_id) << ',' << key.year << ',' << csv::format(total) << '\n';
}

inline void write_truth(std::ostream& out, const std::vector<SecurityTruth>& truth) {
    out << "security_id,clustered,covered,block,law\n";
    for (const auto& t : truth)
        out << t.security_id << ',' << t.clustered << ',' << t.covered << ',' << t.block << ','
            << (t.law == ReturnLaw::normal ? "normal" : "student_t") << '\n';
}

// Writes the scenario inputs and a run config (config.json) into `dir`.
inline RunConfig write_scenario(const MarketScenario& s, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const auto data = generate_scenario(s);
    auto put = [&](const char* name, auto&& writer) {
        auto out = csv::open_output((dir / name).string());
        writer(out);
        out.flush();
        if (!out) throw IoError(std::string("write failed for '") + name + "'");
    };
    put("trades.csv", [&](std::ostream& o) { write_trades(o, data.trades); });
    put("prices.csv", [&](std::ostream& o) { write_prices(o, data.prices.prices); });
    put("turnover.csv", [&](std::ostream& o) { write_turnover(o, data.turnover); });
    put("market.csv", [&](std::ostream& o) { write_market(o, data.market); });
    put("fundamentals.csv", [&](std::ostream& o) { write_fundamentals(o, data.fundamentals); });
    put("volumes.csv", [&](std::ostream& o) { write_volumes(o, data.volumes); });
    put("ground_truth.csv", [&](std::ostream& o) { write_truth(o, data.truth); });

    nlohmann::json cfg{{"trades", "trades.csv"},
                       {"prices", "prices.csv"},
                       {"turnover", "turnover.csv"},
                       {"market", "market.csv"},
                       {"fundamentals", "fundamentals.csv"},
                       {"volumes", "volumes.csv"},
                       {"months", {{"first", s.months.first.to_string()}, {"last", s.months.last.to_string()}}},
                       {"window", "annual"},
                       {"output", "run"},
                       {"seed", s.seed}};
    put("config.json", [&](std::ostream& o) { o << cfg.dump(2) << '\n'; });
    return run_config_from_json(cfg, dir);
}

}  // namespace mclust::synth
