#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "mlmon/report.hpp"
#include "mlmon/trial.hpp"
#include "support.hpp"

using namespace mlmon;
using namespace mlmon::report;
namespace fs = std::filesystem;

namespace {

struct Cli {
    int code = -1;
    std::string out;
};

Cli cli(const std::string& args, const std::string& env = {}) {
    const std::string cmd = env + std::string(MLMON_CLI) + " " + args + " 2>&1";
    Cli r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    char buf[4096];
    while (std::size_t n = fread(buf, 1, sizeof buf, p)) r.out.append(buf, n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string first_line(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    return line;
}

std::vector<std::string> lines(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

/// One harness run shared by the report tests.
class ReportRun : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new test::TempDir("report");
        trial::run_trial(trial::load_scenario(test::source("fixtures/scenarios/near.toml")), {dir_->path()});
    }
    static void TearDownTestSuite() { delete dir_; }
    static const fs::path& run() { return dir_->path(); }

    static test::TempDir* dir_;
};

test::TempDir* ReportRun::dir_ = nullptr;

}  // namespace

TEST_F(ReportRun, CsvSchemas) {
    test::TempDir out("report-out");
    const auto result = report::report({run(), kAllOutputs, {Format::csv}, out.path()});
    EXPECT_TRUE(result.warnings.empty());
    EXPECT_EQ(first_line(out / "bitrate.csv"), schema::bitrate);
    EXPECT_EQ(first_line(out / "stalls.csv"), schema::stalls);
    EXPECT_EQ(first_line(out / "qoe.csv"), schema::qoe);
    EXPECT_EQ(first_line(out / "throughput_l3_l7.csv"), schema::throughput);
    EXPECT_EQ(first_line(out / "rf.csv"), radio::kDriveTraceHeader);
    EXPECT_TRUE(fs::exists(out / "coverage.geojson"));
    EXPECT_EQ(result.written.size(), 6u);
}

TEST_F(ReportRun, BitrateCoversSession) {
    test::TempDir out("report-bitrate");
    report::report({run(), {Output::bitrate}, {Format::csv}, out.path()});
    const auto rows = lines(out / "bitrate.csv");
    const auto manifest = nlohmann::json::parse(test::slurp(run() / trial::files::manifest));
    EXPECT_EQ(rows.size(), 1 + manifest["horizon_s"].get<std::size_t>());
}

TEST_F(ReportRun, L7RowsOnlyAtCompletions) {
    test::TempDir out("report-l3l7");
    report::report({run(), {Output::throughput_l3_l7}, {Format::csv}, out.path()});
    const auto rows = lines(out / "throughput_l3_l7.csv");
    std::size_t l7_rows = 0;
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].back() != ',') ++l7_rows;
    std::size_t segments = 0;
    for (const auto& l : lines(run() / trial::files::session))
        if (l.find("\"type\":\"segment\"") != std::string::npos) ++segments;
    EXPECT_EQ(l7_rows, segments);
    EXPECT_EQ(segments, 81u);
}

TEST_F(ReportRun, PlotsOnRequest) {
    test::TempDir out("report-plots");
    report::report({run(), {Output::rf, Output::coverage}, {Format::csv, Format::svg, Format::png}, out.path()});
    EXPECT_TRUE(fs::exists(out / "rf.svg"));
    EXPECT_TRUE(fs::exists(out / "rf.png"));
    EXPECT_TRUE(fs::exists(out / "coverage.png"));
    const auto png = test::slurp(out / "rf.png");
    ASSERT_GT(png.size(), 8u);
    EXPECT_EQ(png.substr(1, 3), "PNG");
    EXPECT_NE(test::slurp(out / "rf.svg").find("<svg"), std::string::npos);
}

TEST_F(ReportRun, ByteIdenticalAcrossInvocations) {
    test::TempDir a("report-a"), b("report-b");
    report::report({run(), kAllOutputs, {Format::csv, Format::svg}, a.path()});
    report::report({run(), kAllOutputs, {Format::csv, Format::svg}, b.path()});
    for (const auto& e : fs::directory_iterator(a.path()))
        EXPECT_EQ(test::slurp(e.path()), test::slurp(b / e.path().filename().string())) << e.path();
}

TEST(Report, MissingSeriesWarnsAndContinues) {
    test::TempDir dir("report-sparse");
    test::spill(dir / "run.json", R"({"complete": true, "session_id": "s1"})");
    test::spill(dir / "trace.csv", std::string(radio::kDriveTraceHeader) + "\n0.000,43.3100000,-1.9800000,-85.00,-10.00,12.00\n");
    const auto result = report::report({dir.path(), kAllOutputs, {Format::csv}, {}});
    EXPECT_TRUE(fs::exists(dir / "rf.csv"));
    EXPECT_TRUE(fs::exists(dir / "coverage.geojson"));
    ASSERT_EQ(result.warnings.size(), 4u);
    EXPECT_EQ(result.warnings[0].rfind("bitrate:", 0), 0u);
}

TEST(Report, IncompleteRunIsRejected) {
    test::TempDir dir("report-incomplete");
    EXPECT_THROW(report::report({dir.path(), kAllOutputs}), SemanticError);
    test::spill(dir / "run.json", R"({"complete": false})");
    EXPECT_THROW(report::report({dir.path(), kAllOutputs}), SemanticError);
    test::spill(dir / "run.json", R"({"complete": true})");
    EXPECT_THROW(report::report({dir.path(), {}}), SemanticError);
}

TEST(Report, NamesRoundTrip) {
    for (Output o : kAllOutputs) EXPECT_EQ(output_from_string(to_string(o)), o);
    EXPECT_THROW(output_from_string("nope"), SemanticError);
    EXPECT_EQ(format_from_string("svg"), Format::svg);
}

TEST(Cli, HelpExitsZero) {
    const auto r = cli("--help");
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("trial"), std::string::npos);
    EXPECT_NE(r.out.find("report"), std::string::npos);
}

TEST(Cli, UnknownSubcommandExitsOne) {
    const auto r = cli("sreve");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("serve"), std::string::npos) << r.out;
}

TEST(Cli, UnknownFlagSuggests) {
    const auto r = cli("trial run --scenari x --out y");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("--scenario"), std::string::npos) << r.out;
}

TEST(Cli, RuntimeFailureExitsTwo) {
    test::TempDir dir("cli-fail");
    const auto r = cli("report --run " + dir.path().string());
    EXPECT_EQ(r.code, 2) << r.out;
    EXPECT_EQ(cli("report --run " + (dir / "absent").string()).code, 1);
}

TEST(Cli, TrialThenReportProducesAllOutputs) {
    test::TempDir dir("cli-e2e");
    const auto run = dir / "run";
    const auto t = cli("trial run --scenario " + test::source("fixtures/scenarios/far.toml").string() + " --out " + run.string());
    ASSERT_EQ(t.code, 0) << t.out;
    const auto r = cli("report --run " + run.string() + " --format png");
    ASSERT_EQ(r.code, 0) << r.out;
    for (const char* f : {"bitrate.csv", "stalls.csv", "qoe.csv", "throughput_l3_l7.csv", "rf.csv", "coverage.geojson"})
        EXPECT_TRUE(fs::exists(run / f)) << f;
    for (const char* f : {"bitrate.png", "stalls.png", "qoe.png", "throughput_l3_l7.png", "rf.png", "coverage.png"})
        EXPECT_TRUE(fs::exists(run / f)) << f;
}

TEST(Cli, CoverageFromTrace) {
    const auto r = cli("coverage --trace " + test::source("fixtures/traces/near_322s.csv").string());
    ASSERT_EQ(r.code, 0) << r.out;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["type"], "FeatureCollection");
}

TEST(Cli, ExportRadioFromLogs) {
    const auto r = cli("export radio --modem-log " + test::source("fixtures/modem/rfsts_30s.log").string() + " --nmea " +
                       test::source("fixtures/modem/nmea_30s.log").string());
    ASSERT_EQ(r.code, 0) << r.out;
    std::size_t radio_lines = 0;
    for (std::size_t at = r.out.find("\"type\":\"radio\""); at != std::string::npos;
         at = r.out.find("\"type\":\"radio\"", at + 1))
        ++radio_lines;
    EXPECT_EQ(radio_lines, 29u);
}

TEST(Cli, FlagsOverEnvironmentOverConfig) {
    test::TempDir dir("cli-config");
    test::spill(dir / "c.toml", "[coverage]\ncell_size_m = 400\n");
    const auto trace = test::source("fixtures/traces/near_322s.csv").string();
    auto features = [&](const std::string& env, const std::string& global, const std::string& local = {}) {
        const auto r = cli(global + " coverage --trace " + trace + " " + local, env);
        return r.code == 0 ? nlohmann::json::parse(r.out)["features"].size() : 0u;
    };
    const auto fine = features("", "");
    const auto coarse = features("", "--config " + (dir / "c.toml").string());
    EXPECT_GT(fine, coarse);
    EXPECT_EQ(coarse, 1u);
    EXPECT_EQ(features("MLMON_CONFIG=" + (dir / "c.toml").string() + " ", ""), coarse);
    EXPECT_EQ(features("MLMON_CELL_SIZE_M=25 ", "--config " + (dir / "c.toml").string()), fine);
    EXPECT_EQ(features("MLMON_CELL_SIZE_M=400 ", "", "--cell-size-m 25"), fine);
}
