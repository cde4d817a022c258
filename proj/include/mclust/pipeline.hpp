#pragma once

// End-to-end run: trades -> monthly snapshots -> null models -> scores ->
// instability statistics -> group comparisons -> panel, all written as flat
// files in one run directory together with a manifest of content hashes.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mclust/clustering.hpp"
#include "mclust/entropy_null.hpp"
#include "mclust/grouptests.hpp"
#include "mclust/instability.hpp"
#include "mclust/market_graph.hpp"
#include "mclust/panel.hpp"
#include "mclust/util/csv.hpp"
#include "mclust/util/error.hpp"
#include "mclust/util/hash.hpp"

namespace mclust {

inline constexpr const char* kVersion = "1.0.0";

namespace fs = std::filesystem;

struct RunConfig {
    fs::path trades;
    std::optional<fs::path> prices;
    std::optional<fs::path> turnover;
    std::optional<fs::path> market;
    std::optional<fs::path> fundamentals;
    std::optional<fs::path> volumes;
    std::optional<MonthRange> months;
    CapacityFilter capacity = CapacityFilter::principal_only;
    double max_malformed_fraction = 0.10;
    WindowKind window = WindowKind::annual;
    SolverConfig solver;
    OutlierTestConfig outliers;
    HillConfig hill;
    RiskConfig risk;
    std::optional<CriticalValues> critical;  // defaults depend on the window kind
    double coverage_threshold = 0.10;
    IsolatedPolicy isolated = IsolatedPolicy::drop;
    fs::path output = "run";
    std::uint64_t seed = 0;

    CriticalValues critical_values() const {
        if (critical) return *critical;
        return window == WindowKind::annual ? CriticalValues::annual() : CriticalValues::two_month();
    }

    InstabilityConfig instability() const {
        InstabilityConfig c;
        c.hill = hill;
        c.outliers = outliers;
        c.risk = risk;
        c.risk.seed = seed;
        return c;
    }
};

inline std::string to_string(CapacityFilter f) {
    switch (f) {
        case CapacityFilter::principal_only: return "principal";
        case CapacityFilter::agent_only: return "agent";
        case CapacityFilter::all: return "all";
    }
    return "?";
}

inline std::string to_string(WindowKind k) { return k == WindowKind::annual ? "annual" : "2-month"; }

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw UsageError(where + " must be a JSON object");
    for (const auto& [key, value] : j.items())
        if (!known.contains(key)) throw UsageError("unknown key '" + key + "' in " + where);
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("config key '") + key + "': " + e.what());
    }
}

inline fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

}  // namespace detail

// Relative paths are resolved against `base` (the config file's directory).
inline RunConfig run_config_from_json(const nlohmann::json& j, const fs::path& base = ".") {
    detail::reject_unknown_keys(j,
                                {"trades", "prices", "turnover", "market", "fundamentals", "volumes", "months",
                                 "capacity", "max_malformed_fraction", "window", "solver", "outliers", "hill",
                                 "risk", "critical_values", "coverage_threshold", "isolated", "output", "seed"},
                                "run config");
    RunConfig c;
    if (!j.contains("trades")) throw UsageError("run config needs 'trades'");
    c.trades = detail::resolve(base, j.at("trades").get<std::string>());
    auto opt_path = [&](const char* key) -> std::optional<fs::path> {
        if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
        return detail::resolve(base, j.at(key).get<std::string>());
    };
    c.prices = opt_path("prices");
    c.turnover = opt_path("turnover");
    c.market = opt_path("market");
    c.fundamentals = opt_path("fundamentals");
    c.volumes = opt_path("volumes");
    if (j.contains("months")) {
        const auto& m = j.at("months");
        detail::reject_unknown_keys(m, {"first", "last"}, "months");
        try {
            c.months = MonthRange{YearMonth::parse(m.at("first").get<std::string>()),
                                  YearMonth::parse(m.at("last").get<std::string>())};
        } catch (const std::exception& e) {
            throw UsageError(std::string("months: ") + e.what());
        }
    }
    c.capacity = parse_capacity_filter(detail::get_or<std::string>(j, "capacity", "principal"));
    c.max_malformed_fraction = detail::get_or(j, "max_malformed_fraction", c.max_malformed_fraction);
    c.window = parse_window_kind(detail::get_or<std::string>(j, "window", "annual"));
    if (j.contains("solver")) {
        const auto& s = j.at("solver");
        detail::reject_unknown_keys(s, {"tolerance", "max_iterations", "damping"}, "solver");
        c.solver.tolerance = detail::get_or(s, "tolerance", c.solver.tolerance);
        c.solver.max_iterations = detail::get_or(s, "max_iterations", c.solver.max_iterations);
        c.solver.damping = detail::get_or(s, "damping", c.solver.damping);
    }
    if (j.contains("outliers")) {
        const auto& s = j.at("outliers");
        detail::reject_unknown_keys(s, {"alpha", "max_removals"}, "outliers");
        c.outliers.alpha = detail::get_or(s, "alpha", c.outliers.alpha);
        c.outliers.max_removals = detail::get_or(s, "max_removals", c.outliers.max_removals);
    }
    if (j.contains("hill")) {
        const auto& s = j.at("hill");
        detail::reject_unknown_keys(s, {"k_fraction", "k_min"}, "hill");
        c.hill.k_fraction = detail::get_or(s, "k_fraction", c.hill.k_fraction);
        c.hill.k_min = detail::get_or(s, "k_min", c.hill.k_min);
    }
    if (j.contains("risk")) {
        const auto& s = j.at("risk");
        detail::reject_unknown_keys(s, {"level", "window_months", "min_obs", "method", "bootstrap_draws"}, "risk");
        c.risk.level = detail::get_or(s, "level", c.risk.level);
        c.risk.window_months = detail::get_or(s, "window_months", c.risk.window_months);
        c.risk.min_obs = detail::get_or(s, "min_obs", c.risk.min_obs);
        const auto method = detail::get_or<std::string>(s, "method", "empirical");
        if (method == "empirical") c.risk.method = QuantileMethod::empirical;
        else if (method == "bootstrap") c.risk.method = QuantileMethod::bootstrap;
        else throw UsageError("risk.method must be empirical or bootstrap");
        c.risk.bootstrap_draws = detail::get_or(s, "bootstrap_draws", c.risk.bootstrap_draws);
    }
    if (j.contains("critical_values")) {
        const auto& s = j.at("critical_values");
        detail::reject_unknown_keys(s, {"ks", "mww", "chi2"}, "critical_values");
        auto cv = c.window == WindowKind::annual ? CriticalValues::annual() : CriticalValues::two_month();
        cv.ks = detail::get_or(s, "ks", cv.ks);
        cv.mww = detail::get_or(s, "mww", cv.mww);
        cv.chi2 = detail::get_or(s, "chi2", cv.chi2);
        c.critical = cv;
    }
    c.coverage_threshold = detail::get_or(j, "coverage_threshold", c.coverage_threshold);
    const auto iso = detail::get_or<std::string>(j, "isolated", "drop");
    if (iso == "drop") c.isolated = IsolatedPolicy::drop;
    else if (iso == "keep") c.isolated = IsolatedPolicy::keep_flagged;
    else throw UsageError("isolated must be drop or keep");
    c.output = detail::resolve(base, detail::get_or<std::string>(j, "output", "run"));
    c.seed = detail::get_or(j, "seed", c.seed);
    return c;
}

inline RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return run_config_from_json(j, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

inline nlohmann::json run_config_to_json(const RunConfig& c) {
    auto opt = [](const std::optional<fs::path>& p) { return p ? nlohmann::json(p->string()) : nlohmann::json(); };
    const auto cv = c.critical_values();
    nlohmann::json j{
        {"trades", c.trades.string()},
        {"prices", opt(c.prices)},
        {"turnover", opt(c.turnover)},
        {"market", opt(c.market)},
        {"fundamentals", opt(c.fundamentals)},
        {"volumes", opt(c.volumes)},
        {"capacity", to_string(c.capacity)},
        {"max_malformed_fraction", c.max_malformed_fraction},
        {"window", to_string(c.window)},
        {"solver",
         {{"tolerance", c.solver.tolerance}, {"max_iterations", c.solver.max_iterations}, {"damping", c.solver.damping}}},
        {"outliers", {{"alpha", c.outliers.alpha}, {"max_removals", c.outliers.max_removals}}},
        {"hill", {{"k_fraction", c.hill.k_fraction}, {"k_min", c.hill.k_min}}},
        {"risk",
         {{"level", c.risk.level},
          {"window_months", c.risk.window_months},
          {"min_obs", c.risk.min_obs},
          {"method", c.risk.method == QuantileMethod::empirical ? "empirical" : "bootstrap"},
          {"bootstrap_draws", c.risk.bootstrap_draws}}},
        {"critical_values", {{"ks", cv.ks}, {"mww", cv.mww}, {"chi2", cv.chi2}}},
        {"coverage_threshold", c.coverage_threshold},
        {"isolated", c.isolated == IsolatedPolicy::drop ? "drop" : "keep"},
        {"output", c.output.string()},
        {"seed", c.seed},
    };
    if (c.months) j["months"] = {{"first", c.months->first.to_string()}, {"last", c.months->last.to_string()}};
    return j;
}

// Checks everything that can be checked before touching the output directory.
inline void validate(const RunConfig& c) {
    if (!c.months) throw UsageError("month range is required");
    if (c.months->empty()) throw UsageError("month range is empty");
    c.solver.validate();
    if (!(c.outliers.alpha > 0 && c.outliers.alpha < 1)) throw UsageError("outliers.alpha must lie in (0,1)");
    if (!(c.outliers.max_removals >= 0 && c.outliers.max_removals < 1))
        throw UsageError("outliers.max_removals must lie in [0,1)");
    if (!(c.hill.k_fraction > 0 && c.hill.k_fraction < 1)) throw UsageError("hill.k_fraction must lie in (0,1)");
    if (!(c.risk.level > 0 && c.risk.level < 0.5)) throw UsageError("risk.level must lie in (0,0.5)");
    if (c.risk.window_months < 1) throw UsageError("risk.window_months must be >= 1");
    if (!(c.coverage_threshold > 0 && c.coverage_threshold < 1))
        throw UsageError("coverage_threshold must lie in (0,1)");
    if (!(c.max_malformed_fraction >= 0 && c.max_malformed_fraction <= 1))
        throw UsageError("max_malformed_fraction must lie in [0,1]");
    const auto cv = c.critical_values();
    for (double p : {cv.ks, cv.mww, cv.chi2})
        if (!(p > 0 && p < 1)) throw UsageError("critical values must lie in (0,1)");
    auto must_exist = [](const fs::path& p, const char* what) {
        if (!fs::is_regular_file(p)) throw UsageError(std::string(what) + " file '" + p.string() + "' does not exist");
    };
    must_exist(c.trades, "trades");
    if (c.prices) must_exist(*c.prices, "prices");
    if (c.turnover) must_exist(*c.turnover, "turnover");
    if (c.market) must_exist(*c.market, "market");
    if (c.fundamentals) must_exist(*c.fundamentals, "fundamentals");
    if (c.volumes) must_exist(*c.volumes, "volumes");
    if ((c.market || c.fundamentals || c.volumes) && !c.prices)
        throw UsageError("covariate files need a prices file for the panel export");
}

// Raised when a stage fails; the stage name is also written to FAILED_STAGE.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& message)
        : Error("stage '" + stage + "' failed: " + message), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

// Exclusive ownership of a run directory for the lifetime of the object.
class RunLock {
public:
    explicit RunLock(fs::path dir) : path_(std::move(dir) / "run.lock") {
        std::FILE* f = std::fopen(path_.c_str(), "wx");
        if (!f) throw IoError("run directory is locked by another process ('" + path_.string() + "' exists)");
        std::fclose(f);
    }
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;
    ~RunLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }

private:
    fs::path path_;
};

struct RunResult {
    fs::path directory;
    std::vector<std::string> outputs;  // relative to directory, sorted
    nlohmann::json summary;
};

// Securities eligible for grouping in a window, by coverage class. Without a
// turnover file every security counts as covered.
struct GroupUniverse {
    std::string name;  // "covered" or "control"
    std::optional<CoverageClass> cls;
};

namespace detail {

class RunWriter {
public:
    explicit RunWriter(fs::path dir) : dir_(std::move(dir)) {}

    std::ofstream open(const std::string& rel) {
        const auto p = dir_ / rel;
        fs::create_directories(p.parent_path());
        files_.insert(rel);
        return csv::open_output(p.string());
    }

    void json(const std::string& rel, const nlohmann::json& j) {
        auto out = open(rel);
        out << j.dump(2) << '\n';
        if (!out) throw IoError("write failed for '" + rel + "'");
    }

    const std::set<std::string>& files() const { return files_; }
    const fs::path& dir() const { return dir_; }

private:
    fs::path dir_;
    std::set<std::string> files_;
};

inline void check_written(std::ofstream& out, const std::string& what) {
    out.flush();
    if (!out) throw IoError("write failed for '" + what + "'");
}

inline std::string measure_file(const std::string& measure, const std::string& window) {
    return measure + "_" + window + ".csv";
}

}  // namespace detail

inline RunResult run_pipeline(const RunConfig& cfg) {
    validate(cfg);
    const auto months = *cfg.months;
    fs::create_directories(cfg.output);
    RunLock lock(cfg.output);
    const auto marker = cfg.output / "FAILED_STAGE";
    fs::remove(marker);

    detail::RunWriter out(cfg.output);
    nlohmann::json summary;
    std::string stage;
    try {
        // ---- ingest
        stage = "ingest";
        IngestOptions iopt;
        iopt.filter = cfg.capacity;
        iopt.max_malformed_fraction = cfg.max_malformed_fraction;
        const auto ingest = ingest_trades_file(cfg.trades.string(), iopt);
        {
            auto f = out.open("ingest_diagnostics.csv");
            f << "line,message\n";
            for (const auto& d : ingest.diagnostics) f << d.line << ',' << csv::quote(d.message) << '\n';
            detail::check_written(f, "ingest_diagnostics.csv");
        }
        summary["ingest"] = {{"rows_read", ingest.rows_read},
                             {"accepted", ingest.trades.size()},
                             {"malformed", ingest.diagnostics.size()},
                             {"filtered_out", ingest.filtered_out}};

        std::vector<BipartiteSnapshot> snapshots;
        for (int i = months.first.index(); i <= months.last.index(); ++i) {
            const auto m = YearMonth::from_index(i);
            snapshots.push_back(build_snapshot(ingest.trades, m));
            out.json("snapshots/" + m.to_string() + ".json", snapshot_to_json(snapshots.back()));
        }

        // ---- null models and scores
        stage = "score";
        std::vector<ClusteringScore> scores;
        nlohmann::json null_summary = nlohmann::json::array();
        for (const auto& snap : snapshots) {
            if (snap.n_firms() == 0) {
                null_summary.push_back({{"month", snap.month.to_string()}, {"empty", true}});
                continue;
            }
            const auto model = solve_null_model(snap, cfg.solver);
            out.json("null_models/" + snap.month.to_string() + ".json", null_model_to_json(model));
            null_summary.push_back({{"month", snap.month.to_string()},
                                    {"firms", snap.n_firms()},
                                    {"securities", snap.n_securities()},
                                    {"residual", model.residual},
                                    {"iterations", model.iterations}});
            auto s = clustering_scores(snap, model);
            scores.insert(scores.end(), s.begin(), s.end());
        }
        {
            auto f = out.open("scores.csv");
            write_scores_header(f);
            write_scores(f, scores);
            detail::check_written(f, "scores.csv");
        }
        const auto grouped_scores = drop_isolated_scores(scores, cfg.isolated);
        std::size_t n_ok = 0, n_degenerate = 0, n_minus_one = 0;
        for (const auto& c : scores) {
            if (c.status == ScoreStatus::ok) ++n_ok;
            else ++n_degenerate;
            if (c.no_joint_trading()) ++n_minus_one;
        }
        summary["scores"] = {{"months", null_summary},
                             {"ok", n_ok},
                             {"degenerate", n_degenerate},
                             {"no_joint_trading", n_minus_one},
                             {"used_for_grouping", grouped_scores.size()}};

        // ---- instability
        stage = "instability";
        std::vector<ReturnSeries> universe;
        PriceTable prices;
        std::vector<InstabilityReport> reports;
        std::vector<MonthlyRisk> risk;
        const auto windows = make_windows(months, cfg.window);
        if (cfg.prices) {
            auto in = csv::open_input(cfg.prices->string());
            prices = read_prices(in);
            for (const auto& [id, points] : prices) universe.push_back(log_returns(id, points));
            const auto icfg = cfg.instability();
            risk = var_dynamics(universe, months, icfg.risk);
            std::map<SecurityMonth, const MonthlyRisk*> risk_at;
            for (const auto& r : risk) risk_at[{r.security_id, r.month}] = &r;
            for (const auto& series : universe)
                for (const auto& w : windows) {
                    auto it = risk_at.find({series.security_id, w.months.last});
                    auto rep = instability_report(series, w, icfg, it == risk_at.end() ? nullptr : it->second);
                    if (rep) reports.push_back(std::move(*rep));
                }
            auto f = out.open("risk.csv");
            write_monthly_risk(f, risk);
            detail::check_written(f, "risk.csv");
            auto g = out.open("instability.csv");
            write_instability(g, reports);
            detail::check_written(g, "instability.csv");
        }
        summary["instability"] = {{"securities", universe.size()}, {"reports", reports.size()}};

        // ---- group comparisons
        stage = "compare";
        std::optional<CoverageSplit> coverage;
        if (cfg.turnover) {
            auto in = csv::open_input(cfg.turnover->string());
            const auto external = read_external_turnover(in);
            coverage = coverage_split(ingest.trades, external, cfg.coverage_threshold);
            auto f = out.open("coverage.csv");
            write_coverage(f, *coverage);
            detail::check_written(f, "coverage.csv");
        }
        std::vector<GroupUniverse> universes{{"covered", coverage ? std::optional(CoverageClass::covered) : std::nullopt}};
        if (coverage) universes.push_back({"control", CoverageClass::control});
        nlohmann::json compare_summary = nlohmann::json::object();
        if (cfg.prices) {
            const auto crit = cfg.critical_values();
            for (const auto& u : universes) {
                const std::string suffix = u.name == "covered" ? "" : "_" + u.name;
                std::vector<TestVerdict> verdicts;
                nlohmann::json windows_summary = nlohmann::json::array();
                auto groups_file = out.open("groups" + suffix + ".csv");
                groups_file << "window,security_id,score,group\n";
                for (const auto& w : windows) {
                    auto ws = window_scores(grouped_scores, w.months);
                    if (u.cls) {
                        const int year = w.months.first.year;
                        std::erase_if(ws, [&](const SecurityScore& s) { return coverage->classify(s.security_id, year) != u.cls; });
                    }
                    nlohmann::json wsum{{"window", w.label}, {"scored", ws.size()}};
                    if (ws.size() < 9) {
                        wsum["skipped"] = "fewer than 9 scored securities";
                        windows_summary.push_back(std::move(wsum));
                        continue;
                    }
                    const auto assignment = assign_terciles(ws, w.label);
                    std::map<std::string, double> score_of;
                    for (const auto& s : ws) score_of[s.security_id] = s.score;
                    for (const auto& [id, g] : assignment.groups)
                        groups_file << w.label << ',' << csv::quote(id) << ',' << csv::format(score_of[id]) << ','
                                    << (g == Group::low ? "L" : g == Group::high ? "H" : "M") << '\n';
                    auto v = verdict_table(reports, assignment, crit);
                    for (const auto& m : standard_measures()) {
                        const auto samples = split_by_group(reports, assignment, m);
                        if (samples.low.empty() || samples.high.empty()) continue;
                        auto f = out.open("cdf" + suffix + "/" + detail::measure_file(m.name, w.label));
                        write_cdf(f, cdf_curves(samples.low, samples.high));
                        detail::check_written(f, "cdf");
                    }
                    wsum["low"] = v.empty() ? 0 : v.front().n_low;
                    wsum["high"] = v.empty() ? 0 : v.front().n_high;
                    wsum["low_cutoff"] = assignment.low_cutoff;
                    wsum["high_cutoff"] = assignment.high_cutoff;
                    windows_summary.push_back(std::move(wsum));
                    verdicts.insert(verdicts.end(), v.begin(), v.end());
                }
                detail::check_written(groups_file, "groups");
                auto f = out.open("verdicts" + suffix + ".csv");
                write_verdicts(f, verdicts);
                detail::check_written(f, "verdicts");
                compare_summary[u.name] = std::move(windows_summary);
            }
        }
        summary["compare"] = std::move(compare_summary);

        // ---- panel
        stage = "panel";
        if (cfg.prices) {
            MarketCovariates market;
            Fundamentals fundamentals;
            VolumeTable volumes;
            PanelInputs pin;
            pin.scores = &scores;
            pin.risk = &risk;
            pin.prices = &prices;
            if (cfg.market) {
                auto in = csv::open_input(cfg.market->string());
                market = read_market(in);
                pin.market = &market;
            }
            if (cfg.fundamentals) {
                auto in = csv::open_input(cfg.fundamentals->string());
                fundamentals = read_fundamentals(in);
                pin.fundamentals = &fundamentals;
            }
            if (cfg.volumes) {
                auto in = csv::open_input(cfg.volumes->string());
                volumes = read_volumes(in);
                pin.volumes = &volumes;
            }
            const auto panel = export_panel(pin);
            {
                auto f = out.open("panel.csv");
                write_panel(f, panel);
                detail::check_written(f, "panel.csv");
            }
            summary["panel"] = {{"rows", panel.size()}};
            if (!panel.empty()) {
                auto in = std::ifstream(cfg.output / "panel.csv");
                auto f = out.open("panel_summary.csv");
                write_panel_summary(f, describe_panel(read_panel(in)));
                detail::check_written(f, "panel_summary.csv");
            }
        }

        // ---- manifest
        stage = "manifest";
        out.json("summary.json", summary);
        nlohmann::json inputs = nlohmann::json::array();
        auto add_input = [&](const char* role, const std::optional<fs::path>& p) {
            if (!p) return;
            inputs.push_back({{"role", role},
                              {"path", p->string()},
                              {"bytes", fs::file_size(*p)},
                              {"sha256", sha256_file(p->string())}});
        };
        add_input("trades", cfg.trades);
        add_input("prices", cfg.prices);
        add_input("turnover", cfg.turnover);
        add_input("market", cfg.market);
        add_input("fundamentals", cfg.fundamentals);
        add_input("volumes", cfg.volumes);
        nlohmann::json outputs = nlohmann::json::array();
        for (const auto& rel : out.files()) {
            const auto p = cfg.output / rel;
            outputs.push_back({{"path", rel}, {"bytes", fs::file_size(p)}, {"sha256", sha256_file(p.string())}});
        }
        nlohmann::json manifest{{"tool", "mclust"},
                                {"version", kVersion},
                                {"config", run_config_to_json(cfg)},
                                {"inputs", std::move(inputs)},
                                {"outputs", std::move(outputs)}};
        {
            auto f = csv::open_output((cfg.output / "manifest.json").string());
            f << manifest.dump(2) << '\n';
            detail::check_written(f, "manifest.json");
        }
    } catch (const Error& e) {
        std::ofstream m(marker);
        m << stage << '\n' << e.what() << '\n';
        throw StageError(stage, e.what());
    } catch (const std::exception& e) {
        std::ofstream m(marker);
        m << stage << '\n' << e.what() << '\n';
        throw StageError(stage, e.what());
    }

    RunResult result{cfg.output, {out.files().begin(), out.files().end()}, std::move(summary)};
    result.outputs.push_back("manifest.json");
    std::sort(result.outputs.begin(), result.outputs.end());
    return result;
}

// Recomputes every hash listed in a manifest; returns the paths that differ.
inline std::vector<std::string> verify_manifest(const fs::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw IoError("no manifest in '" + dir.string() + "'");
    nlohmann::json m;
    in >> m;
    std::vector<std::string> bad;
    for (const auto& o : m.at("outputs")) {
        const auto rel = o.at("path").get<std::string>();
        const auto p = dir / rel;
        if (!fs::is_regular_file(p) || sha256_file(p.string()) != o.at("sha256").get<std::string>()) bad.push_back(rel);
    }
    return bad;
}

}  // namespace mclust
