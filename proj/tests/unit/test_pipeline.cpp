#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mclust/pipeline.hpp"
#include "mclust/scenario.hpp"

using namespace mclust;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("mclust_pipeline_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

synth::MarketScenario small_scenario(std::uint64_t seed) {
    synth::MarketScenario s;
    s.seed = seed;
    s.months = {{2013, 1}, {2013, 6}};
    s.blocks = 3;
    s.securities_per_block = 6;
    s.diffuse_securities = 30;
    return s;
}

int run_cli(const std::string& args) {
    const int status = std::system((std::string(MCLUST_CLI) + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::string> csv_files(const fs::path& dir) {
    std::vector<std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".csv") out.push_back(fs::relative(e.path(), dir).string());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

TEST(Pipeline, ScenarioRunWritesEveryArtifact) {
    const auto dir = scratch("full");
    auto cfg = synth::write_scenario(small_scenario(3), dir);
    const auto result = run_pipeline(cfg);
    for (const char* f : {"scores.csv", "risk.csv", "instability.csv", "coverage.csv", "verdicts.csv",
                          "verdicts_control.csv", "groups.csv", "panel.csv", "panel_summary.csv", "summary.json",
                          "manifest.json", "ingest_diagnostics.csv", "snapshots/2013-01.json",
                          "null_models/2013-06.json"}) {
        EXPECT_TRUE(fs::is_regular_file(cfg.output / f)) << f;
        EXPECT_TRUE(std::binary_search(result.outputs.begin(), result.outputs.end(), std::string(f))) << f;
    }
    EXPECT_FALSE(fs::exists(cfg.output / "FAILED_STAGE"));
    EXPECT_FALSE(fs::exists(cfg.output / "run.lock"));
    EXPECT_TRUE(verify_manifest(cfg.output).empty());
    EXPECT_GT(result.summary.at("scores").at("ok").get<std::size_t>(), 0u);

    const auto manifest = nlohmann::json::parse(slurp(cfg.output / "manifest.json"));
    EXPECT_EQ(manifest.at("version").get<std::string>(), kVersion);
    EXPECT_EQ(manifest.at("inputs").size(), 6u);
    EXPECT_EQ(manifest.at("config").at("seed").get<std::uint64_t>(), 3u);

    std::ofstream(cfg.output / "scores.csv", std::ios::app) << "tampered\n";
    EXPECT_EQ(verify_manifest(cfg.output), (std::vector<std::string>{"scores.csv"}));
}

TEST(Pipeline, RerunsAreByteIdentical) {
    const auto dir = scratch("determinism");
    auto cfg = synth::write_scenario(small_scenario(9), dir);
    cfg.risk.method = QuantileMethod::bootstrap;
    cfg.risk.bootstrap_draws = 50;
    cfg.output = dir / "a";
    run_pipeline(cfg);
    cfg.output = dir / "b";
    run_pipeline(cfg);
    const auto a = csv_files(dir / "a"), b = csv_files(dir / "b");
    ASSERT_EQ(a, b);
    ASSERT_FALSE(a.empty());
    for (const auto& f : a) EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
}

TEST(Pipeline, LockedDirectoryIsRefused) {
    const auto dir = scratch("locked");
    auto cfg = synth::write_scenario(small_scenario(1), dir);
    fs::create_directories(cfg.output);
    std::ofstream(cfg.output / "run.lock") << "busy\n";
    EXPECT_THROW(run_pipeline(cfg), IoError);
    EXPECT_TRUE(fs::exists(cfg.output / "run.lock"));
    {
        RunLock lock(dir);
        EXPECT_THROW(RunLock{dir}, IoError);
    }
    EXPECT_NO_THROW(RunLock{dir});
}

TEST(Pipeline, StageFailureLeavesMarker) {
    const auto dir = scratch("failure");
    std::ofstream(dir / "trades.csv") << "this is not a trades file\n";
    nlohmann::json j{{"trades", "trades.csv"}, {"months", {{"first", "2013-01"}, {"last", "2013-02"}}}};
    const auto cfg = run_config_from_json(j, dir);
    try {
        run_pipeline(cfg);
        FAIL() << "expected a stage failure";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "ingest");
    }
    std::istringstream marker(slurp(cfg.output / "FAILED_STAGE"));
    std::string first;
    std::getline(marker, first);
    EXPECT_EQ(first, "ingest");
    EXPECT_FALSE(fs::exists(cfg.output / "run.lock"));
}

TEST(Config, ValidationErrors) {
    const auto dir = scratch("config");
    std::ofstream(dir / "trades.csv") << "x\n";
    const nlohmann::json base{{"trades", "trades.csv"}, {"months", {{"first", "2013-01"}, {"last", "2013-03"}}}};
    EXPECT_NO_THROW(validate(run_config_from_json(base, dir)));

    EXPECT_THROW(run_config_from_json(nlohmann::json::object(), dir), UsageError);
    auto j = base;
    j["unknown"] = 1;
    EXPECT_THROW(run_config_from_json(j, dir), UsageError);
    j = base;
    j["months"] = {{"first", "2013-05"}, {"last", "2013-03"}};
    EXPECT_THROW(validate(run_config_from_json(j, dir)), UsageError);
    j = base;
    j.erase("months");
    EXPECT_THROW(validate(run_config_from_json(j, dir)), UsageError);
    j = base;
    j["coverage_threshold"] = 1.5;
    EXPECT_THROW(validate(run_config_from_json(j, dir)), UsageError);
    j = base;
    j["capacity"] = "broker";
    EXPECT_THROW(run_config_from_json(j, dir), UsageError);
    j = base;
    j["trades"] = "missing.csv";
    EXPECT_THROW(validate(run_config_from_json(j, dir)), UsageError);
    j = base;
    j["market"] = "trades.csv";
    EXPECT_THROW(validate(run_config_from_json(j, dir)), UsageError);
    j = base;
    j["critical_values"] = {{"ks", 0.0}};
    EXPECT_THROW(validate(run_config_from_json(j, dir)), UsageError);
    j = base;
    j["window"] = "2-month";
    const auto two = run_config_from_json(j, dir);
    EXPECT_EQ(two.critical_values().ks, 0.05);
    EXPECT_EQ(run_config_from_json(base, dir).critical_values().ks, 0.025);

    const auto echoed = run_config_to_json(run_config_from_json(base, dir));
    EXPECT_EQ(run_config_from_json(echoed, dir).trades, (dir / "trades.csv"));
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch("cli");
    synth::write_scenario(small_scenario(4), dir);
    const auto config = (dir / "config.json").string();
    EXPECT_EQ(run_cli("--config " + config + " run --from 2013-05 --to 2013-03"), 2);
    EXPECT_EQ(run_cli("--config " + config + " run --no-such-flag"), 2);
    EXPECT_EQ(run_cli("--config " + (dir / "absent.json").string() + " run"), 2);
    EXPECT_EQ(run_cli("--config " + config + " run"), 0);
    EXPECT_TRUE(verify_manifest(dir / "run").empty());

    std::ofstream(dir / "bad_trades.csv") << "garbage\n";
    nlohmann::json j{{"trades", "bad_trades.csv"}, {"months", {{"first", "2013-01"}, {"last", "2013-01"}}},
                     {"output", "bad_run"}};
    std::ofstream(dir / "bad.json") << j.dump();
    EXPECT_EQ(run_cli("--config " + (dir / "bad.json").string() + " run"), 1);
    EXPECT_TRUE(fs::exists(dir / "bad_run" / "FAILED_STAGE"));
}
