#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mclust.hpp"

namespace fs = std::filesystem;
using namespace mclust;

namespace {

constexpr int kExitStage = 1;
constexpr int kExitUsage = 2;

struct RangeFlags {
    std::string from, to;

    void add(CLI::App* app) {
        app->add_option("--from", from, "First month (YYYY-MM)");
        app->add_option("--to", to, "Last month (YYYY-MM)");
    }

    MonthRange resolve(const std::optional<MonthRange>& fallback) const {
        std::optional<MonthRange> r = fallback;
        try {
            if (!from.empty() || !to.empty()) {
                if (from.empty() || to.empty()) throw UsageError("--from and --to go together");
                r = MonthRange{YearMonth::parse(from), YearMonth::parse(to)};
            }
        } catch (const InputError& e) {
            throw UsageError(e.what());
        }
        if (!r) throw UsageError("a month range is required (--from/--to or config 'months')");
        if (r->empty()) throw UsageError("month range is empty");
        return *r;
    }
};

std::string need(const std::string& flag_value, const std::optional<fs::path>& fallback, const char* what) {
    if (!flag_value.empty()) return flag_value;
    if (fallback) return fallback->string();
    throw UsageError(std::string("missing ") + what);
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& fn) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    auto out = csv::open_output(path.string());
    fn(out);
    out.flush();
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open '" + path.string() + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

std::vector<BipartiteSnapshot> snapshots_for(const std::vector<TradeRecord>& trades, const MonthRange& months) {
    std::vector<BipartiteSnapshot> out;
    for (int i = months.first.index(); i <= months.last.index(); ++i)
        out.push_back(build_snapshot(trades, YearMonth::from_index(i)));
    return out;
}

synth::GeneratorSpec generator_spec_from_json(const nlohmann::json& j, const fs::path& base) {
    mclust::detail::reject_unknown_keys(j,
                                        {"kind", "blocks", "firms_per_block", "securities_per_block", "within_density",
                                         "reference", "swaps_per_edge", "seed", "month", "max_retries"},
                                        "generator spec");
    using mclust::detail::get_or;
    synth::GeneratorSpec s;
    s.kind = synth::parse_generator_kind(j.at("kind").get<std::string>());
    s.blocks = get_or(j, "blocks", s.blocks);
    s.firms_per_block = get_or(j, "firms_per_block", s.firms_per_block);
    s.securities_per_block = get_or(j, "securities_per_block", s.securities_per_block);
    s.within_density = get_or(j, "within_density", s.within_density);
    s.swaps_per_edge = get_or(j, "swaps_per_edge", s.swaps_per_edge);
    s.seed = get_or(j, "seed", s.seed);
    s.max_retries = get_or(j, "max_retries", s.max_retries);
    if (j.contains("month")) s.month = YearMonth::parse(j.at("month").get<std::string>());
    if (j.contains("reference"))
        s.reference = snapshot_from_json(read_json(mclust::detail::resolve(base, j.at("reference").get<std::string>())));
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Market clustering scores, price-instability statistics and group comparisons"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    std::string config_path;
    app.add_option("--config", config_path, "Run configuration (JSON); flags override its values");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Validate trades and build monthly snapshots");
    std::string trades_path, capacity, out_path;
    RangeFlags ingest_range;
    ingest->add_option("--trades", trades_path, "Trades CSV");
    ingest->add_option("--capacity", capacity, "principal | agent | all");
    ingest_range.add(ingest);
    ingest->add_option("--out", out_path, "Output directory")->required();

    // score
    auto* score = app.add_subcommand("score", "Solve null models and compute clustering scores");
    std::vector<std::string> snapshot_paths;
    std::string models_dir;
    bool link_prob = false;
    std::optional<double> tolerance, damping;
    std::optional<std::size_t> max_iterations;
    RangeFlags score_range;
    score->add_option("--snapshot", snapshot_paths, "Snapshot JSON file(s)");
    score->add_option("--trades", trades_path, "Trades CSV (instead of snapshots)");
    score->add_option("--capacity", capacity, "principal | agent | all");
    score_range.add(score);
    score->add_option("--out", out_path, "Scores CSV")->required();
    score->add_option("--models", models_dir, "Directory for null-model JSON");
    score->add_flag("--link-prob", link_prob, "Include the link-probability matrix in model JSON");
    score->add_option("--tolerance", tolerance, "Max degree residual");
    score->add_option("--max-iterations", max_iterations, "Solver iteration cap");
    score->add_option("--damping", damping, "Initial damping in (0,1]");

    // instability
    auto* instab = app.add_subcommand("instability", "Per-window instability statistics and monthly VaR");
    std::string prices_path, window, risk_out, var_method;
    std::optional<double> alpha, k_fraction, level;
    RangeFlags instab_range;
    instab->add_option("--prices", prices_path, "Daily prices CSV");
    instab_range.add(instab);
    instab->add_option("--window", window, "annual | 2-month");
    instab->add_option("--out", out_path, "Instability CSV")->required();
    instab->add_option("--risk-out", risk_out, "Monthly VaR CSV");
    instab->add_option("--alpha", alpha, "Grubbs significance level");
    instab->add_option("--k-fraction", k_fraction, "Hill tail fraction");
    instab->add_option("--level", level, "VaR level");
    instab->add_option("--var-method", var_method, "empirical | bootstrap");

    // compare
    auto* compare = app.add_subcommand("compare", "Tercile groups, KS/MWW/chi-square verdicts and CDF curves");
    std::string scores_path, instability_path, coverage_path, coverage_class = "covered", cdf_dir, groups_out;
    RangeFlags compare_range;
    compare->add_option("--scores", scores_path, "Scores CSV")->required();
    compare->add_option("--instability", instability_path, "Instability CSV")->required();
    compare_range.add(compare);
    compare->add_option("--window", window, "annual | 2-month");
    compare->add_option("--coverage", coverage_path, "Coverage CSV restricting the securities compared");
    compare->add_option("--class", coverage_class, "covered | control (with --coverage)");
    compare->add_option("--out", out_path, "Verdicts CSV")->required();
    compare->add_option("--cdf-dir", cdf_dir, "Directory for CDF CSVs");
    compare->add_option("--groups-out", groups_out, "Group assignment CSV");

    // panel
    auto* panel = app.add_subcommand("panel", "Export or describe the (security, month) panel");
    std::string risk_path, market_path, fundamentals_path, volumes_path, describe_path, summary_out;
    panel->add_option("--scores", scores_path, "Scores CSV");
    panel->add_option("--risk", risk_path, "Monthly VaR CSV");
    panel->add_option("--prices", prices_path, "Daily prices CSV");
    panel->add_option("--market", market_path, "month,MKTF,VIX");
    panel->add_option("--fundamentals", fundamentals_path, "security_id,month,MCAP,PB3,DY,LEV3");
    panel->add_option("--volumes", volumes_path, "security_id,date,euro_volume");
    panel->add_option("--out", out_path, "Panel CSV");
    panel->add_option("--describe", describe_path, "Summarize an existing panel CSV instead");
    panel->add_option("--summary", summary_out, "Summary CSV (default: stdout)");

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic graphs or market scenarios");
    std::string spec_path;
    synth_cmd->add_option("--spec", spec_path, "Generator or scenario spec (JSON)")->required();
    synth_cmd->add_option("--out", out_path, "Snapshot JSON, or directory for a market scenario")->required();

    // run
    auto* run = app.add_subcommand("run", "Full pipeline into one run directory");
    std::optional<std::uint64_t> seed;
    std::optional<double> coverage_threshold;
    RangeFlags run_range;
    run_range.add(run);
    run->add_option("--out", out_path, "Run directory");
    run->add_option("--window", window, "annual | 2-month");
    run->add_option("--capacity", capacity, "principal | agent | all");
    run->add_option("--seed", seed, "Root seed");
    run->add_option("--coverage-threshold", coverage_threshold, "Control group threshold");
    run->add_option("--tolerance", tolerance, "Solver tolerance");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        RunConfig cfg;
        bool have_config = false;
        if (!config_path.empty()) {
            cfg = load_run_config(config_path);
            have_config = true;
        }
        if (!capacity.empty()) cfg.capacity = parse_capacity_filter(capacity);
        if (!window.empty()) cfg.window = parse_window_kind(window);
        if (tolerance) cfg.solver.tolerance = *tolerance;
        if (damping) cfg.solver.damping = *damping;
        if (max_iterations) cfg.solver.max_iterations = *max_iterations;
        if (alpha) cfg.outliers.alpha = *alpha;
        if (k_fraction) cfg.hill.k_fraction = *k_fraction;
        if (level) cfg.risk.level = *level;
        if (!var_method.empty()) {
            if (var_method == "empirical") cfg.risk.method = QuantileMethod::empirical;
            else if (var_method == "bootstrap") cfg.risk.method = QuantileMethod::bootstrap;
            else throw UsageError("--var-method must be empirical or bootstrap");
        }
        if (seed) cfg.seed = *seed;
        if (coverage_threshold) cfg.coverage_threshold = *coverage_threshold;
        cfg.solver.validate();
        const std::optional<fs::path> cfg_trades = have_config ? std::optional(cfg.trades) : std::nullopt;

        if (*ingest) {
            const auto months = ingest_range.resolve(cfg.months);
            IngestOptions opt;
            opt.filter = cfg.capacity;
            opt.max_malformed_fraction = cfg.max_malformed_fraction;
            const auto result = ingest_trades_file(need(trades_path, cfg_trades, "--trades"), opt);
            const fs::path dir(out_path);
            write_file(dir / "ingest_diagnostics.csv", [&](std::ostream& o) {
                o << "line,message\n";
                for (const auto& d : result.diagnostics) o << d.line << ',' << csv::quote(d.message) << '\n';
            });
            for (const auto& snap : snapshots_for(result.trades, months))
                write_file(dir / "snapshots" / (snap.month.to_string() + ".json"),
                           [&](std::ostream& o) { o << snapshot_to_json(snap).dump(2) << '\n'; });
            std::cout << "rows " << result.rows_read << ", accepted " << result.trades.size() << ", malformed "
                      << result.diagnostics.size() << ", filtered " << result.filtered_out << '\n';
            return 0;
        }

        if (*score) {
            std::vector<BipartiteSnapshot> snaps;
            if (!snapshot_paths.empty()) {
                for (const auto& p : snapshot_paths) snaps.push_back(snapshot_from_json(read_json(p)));
            } else {
                const auto months = score_range.resolve(cfg.months);
                IngestOptions opt;
                opt.filter = cfg.capacity;
                opt.max_malformed_fraction = cfg.max_malformed_fraction;
                snaps = snapshots_for(ingest_trades_file(need(trades_path, cfg_trades, "--trades or --snapshot"), opt).trades,
                                      months);
            }
            std::vector<ClusteringScore> all;
            for (const auto& snap : snaps) {
                if (snap.n_firms() == 0) continue;
                const auto model = solve_null_model(snap, cfg.solver);
                if (!models_dir.empty())
                    write_file(fs::path(models_dir) / (snap.month.to_string() + ".json"),
                               [&](std::ostream& o) { o << null_model_to_json(model, link_prob).dump(2) << '\n'; });
                auto s = clustering_scores(snap, model);
                all.insert(all.end(), s.begin(), s.end());
            }
            write_file(out_path, [&](std::ostream& o) {
                write_scores_header(o);
                write_scores(o, all);
            });
            std::cout << all.size() << " scores\n";
            return 0;
        }

        if (*instab) {
            const auto months = instab_range.resolve(cfg.months);
            auto in = csv::open_input(need(prices_path, cfg.prices, "--prices"));
            const auto prices = read_prices(in);
            std::vector<ReturnSeries> universe;
            for (const auto& [id, points] : prices) universe.push_back(log_returns(id, points));
            const auto icfg = cfg.instability();
            const auto risk = var_dynamics(universe, months, icfg.risk);
            std::map<SecurityMonth, const MonthlyRisk*> risk_at;
            for (const auto& r : risk) risk_at[{r.security_id, r.month}] = &r;
            std::vector<InstabilityReport> reports;
            for (const auto& series : universe)
                for (const auto& w : make_windows(months, cfg.window)) {
                    auto it = risk_at.find({series.security_id, w.months.last});
                    if (auto rep = instability_report(series, w, icfg, it == risk_at.end() ? nullptr : it->second))
                        reports.push_back(std::move(*rep));
                }
            write_file(out_path, [&](std::ostream& o) { write_instability(o, reports); });
            if (!risk_out.empty()) write_file(risk_out, [&](std::ostream& o) { write_monthly_risk(o, risk); });
            std::cout << reports.size() << " reports, " << risk.size() << " monthly VaR rows\n";
            return 0;
        }

        if (*compare) {
            const auto months = compare_range.resolve(cfg.months);
            auto sin = csv::open_input(scores_path);
            const auto scores = drop_isolated_scores(read_scores(sin), cfg.isolated);
            auto iin = csv::open_input(instability_path);
            const auto reports = read_instability(iin);
            std::optional<CoverageSplit> coverage;
            std::optional<CoverageClass> cls;
            if (!coverage_path.empty()) {
                auto cin = csv::open_input(coverage_path);
                coverage = read_coverage(cin);
                try {
                    cls = parse_coverage_class(coverage_class);
                } catch (const InputError& e) {
                    throw UsageError(e.what());
                }
            }
            std::vector<TestVerdict> verdicts;
            std::ostringstream groups;
            groups << "window,security_id,score,group\n";
            for (const auto& w : make_windows(months, cfg.window)) {
                auto ws = window_scores(scores, w.months);
                if (coverage)
                    std::erase_if(ws, [&](const SecurityScore& s) {
                        return coverage->classify(s.security_id, w.months.first.year) != cls;
                    });
                if (ws.size() < 9) {
                    std::cerr << "window " << w.label << ": only " << ws.size() << " scored securities, skipped\n";
                    continue;
                }
                const auto assignment = assign_terciles(ws, w.label);
                for (const auto& s : ws) {
                    const auto g = assignment.groups.at(s.security_id);
                    groups << w.label << ',' << csv::quote(s.security_id) << ',' << csv::format(s.score) << ','
                           << (g == Group::low ? "L" : g == Group::high ? "H" : "M") << '\n';
                }
                auto v = verdict_table(reports, assignment, cfg.critical_values());
                verdicts.insert(verdicts.end(), v.begin(), v.end());
                if (!cdf_dir.empty())
                    for (const auto& m : standard_measures()) {
                        const auto samples = split_by_group(reports, assignment, m);
                        if (samples.low.empty() || samples.high.empty()) continue;
                        write_file(fs::path(cdf_dir) / (m.name + "_" + w.label + ".csv"),
                                   [&](std::ostream& o) { write_cdf(o, cdf_curves(samples.low, samples.high)); });
                    }
            }
            write_file(out_path, [&](std::ostream& o) { write_verdicts(o, verdicts); });
            if (!groups_out.empty()) write_file(groups_out, [&](std::ostream& o) { o << groups.str(); });
            write_verdicts(std::cout, verdicts);
            return 0;
        }

        if (*panel) {
            if (!describe_path.empty()) {
                auto in = csv::open_input(describe_path);
                const auto summary = describe_panel(read_panel(in));
                if (summary_out.empty()) write_panel_summary(std::cout, summary);
                else write_file(summary_out, [&](std::ostream& o) { write_panel_summary(o, summary); });
                return 0;
            }
            if (scores_path.empty() || risk_path.empty() || out_path.empty())
                throw UsageError("panel export needs --scores, --risk and --out");
            auto sin = csv::open_input(scores_path);
            const auto scores = read_scores(sin);
            auto rin = csv::open_input(risk_path);
            const auto risk = read_monthly_risk(rin);
            PanelInputs pin;
            pin.scores = &scores;
            pin.risk = &risk;
            PriceTable prices;
            MarketCovariates market;
            Fundamentals fundamentals;
            VolumeTable volumes;
            const auto prices_file = prices_path.empty() && cfg.prices ? cfg.prices->string() : prices_path;
            if (!prices_file.empty()) {
                auto in = csv::open_input(prices_file);
                prices = read_prices(in);
                pin.prices = &prices;
            }
            const auto market_file = market_path.empty() && cfg.market ? cfg.market->string() : market_path;
            if (!market_file.empty()) {
                auto in = csv::open_input(market_file);
                market = read_market(in);
                pin.market = &market;
            }
            const auto fund_file =
                fundamentals_path.empty() && cfg.fundamentals ? cfg.fundamentals->string() : fundamentals_path;
            if (!fund_file.empty()) {
                auto in = csv::open_input(fund_file);
                fundamentals = read_fundamentals(in);
                pin.fundamentals = &fundamentals;
            }
            const auto vol_file = volumes_path.empty() && cfg.volumes ? cfg.volumes->string() : volumes_path;
            if (!vol_file.empty()) {
                if (!pin.prices) throw UsageError("--volumes needs --prices");
                auto in = csv::open_input(vol_file);
                volumes = read_volumes(in);
                pin.volumes = &volumes;
            }
            const auto rows = export_panel(pin);
            write_file(out_path, [&](std::ostream& o) { write_panel(o, rows); });
            std::cout << rows.size() << " panel rows\n";
            return 0;
        }

        if (*synth_cmd) {
            const auto spec = read_json(spec_path);
            const auto kind = spec.value("kind", std::string{});
            const fs::path base = fs::path(spec_path).parent_path();
            if (kind == "market") {
                const auto scenario = synth::market_scenario_from_json(spec);
                synth::write_scenario(scenario, out_path);
                std::cout << "scenario written to " << out_path << '\n';
                return 0;
            }
            const auto g = synth::generate(generator_spec_from_json(spec, base.empty() ? fs::path(".") : base));
            auto j = snapshot_to_json(g.snapshot);
            if (!g.security_label.empty()) j["security_label"] = g.security_label;
            if (!g.firm_label.empty()) j["firm_label"] = g.firm_label;
            write_file(out_path, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
            std::cout << g.snapshot.n_firms() << " firms x " << g.snapshot.n_securities() << " securities\n";
            return 0;
        }

        if (*run) {
            if (!have_config) throw UsageError("run needs --config");
            if (!run_range.from.empty() || !run_range.to.empty()) cfg.months = run_range.resolve(cfg.months);
            if (!out_path.empty()) cfg.output = out_path;
            const auto result = run_pipeline(cfg);
            std::cout << "wrote " << result.outputs.size() << " files to " << result.directory.string() << '\n';
            return 0;
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const StageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitStage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitStage;
    }
    return 0;
}
