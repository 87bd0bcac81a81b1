#include <gtest/gtest.h>

#include <json.hpp>
#include <sstream>

#include "cli_util.hpp"
#include "test_util.hpp"

using namespace sbf;
using clitest::fresh_dir;
using clitest::kData;
using clitest::run;
using clitest::slurp;

namespace {

const std::string kTri = "--input '" + (kData / "triangle10.csv").string() + "'";

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(slurp(p));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(cell);
        if (!line.empty() && line.back() == ',') row.emplace_back();
        rows.push_back(row);
    }
    return rows;
}

nlohmann::json read_json(const std::filesystem::path& p) { return nlohmann::json::parse(slurp(p)); }

}  // namespace

class Golden : public ::testing::TestWithParam<clitest::GoldenCase> {};

TEST_P(Golden, MatchesCheckedInOutputs) {
    const auto& c = GetParam();
    int code = -1;
    const auto got = clitest::golden_outputs(c, fresh_dir("golden_" + c.name), &code);
    ASSERT_EQ(code, 0);
    const auto want = clitest::read_dir(clitest::golden_dir(c));
    ASSERT_FALSE(want.empty()) << "no golden files for " << c.name;
    for (const auto& [name, text] : want) {
        ASSERT_TRUE(got.count(name)) << name;
        EXPECT_EQ(got.at(name), text) << name;
    }
    EXPECT_EQ(got.size(), want.size());
}

INSTANTIATE_TEST_SUITE_P(Cli, Golden, ::testing::ValuesIn(clitest::golden_cases()),
                         [](const auto& info) { return info.param.name; });

TEST(Cli, MissingInputIsUsageError) {
    auto r = run("estimate --input /nonexistent/tri.csv", fresh_dir("missing"));
    EXPECT_EQ(r.code, 1);
    EXPECT_FALSE(r.err.empty());
}

TEST(Cli, BadBandwidthIsUsageError) {
    EXPECT_EQ(run("estimate " + kTri + " --bandwidth 1,-2", fresh_dir("badbw")).code, 1);
    EXPECT_EQ(run("estimate " + kTri + " --bandwidth x", fresh_dir("badbw2")).code, 1);
    EXPECT_EQ(run("cv " + kTri + " --leave-out row", fresh_dir("badmode")).code, 1);
}

TEST(Cli, NonConvergenceExitsTwo) {
    const auto dir = fresh_dir("noconv");
    auto r = run("estimate " + kTri + " --tolerance 1e-16 --max-iter 1", dir);
    EXPECT_EQ(r.code, 2);
    auto j = read_json(dir / "fit.json");
    EXPECT_FALSE(j["diagnostics"]["converged"].get<bool>());
    EXPECT_EQ(run("forecast " + kTri + " --tolerance 1e-16 --max-iter 1", fresh_dir("noconv_fc")).code, 2);
}

TEST(Cli, CvSingleCandidate) {
    const auto dir = fresh_dir("cv1");
    ASSERT_EQ(run("cv " + kTri + " --grid '2;3' --workers 1", dir).code, 0);
    auto rows = read_csv(dir / "cv.csv");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1][0], "2");
    EXPECT_EQ(rows[1][1], "3");
    EXPECT_EQ(rows[1][9], "1");
}

TEST(Cli, CvAllCandidatesFailingAreReported) {
    const auto dir = fresh_dir("cvfail");
    auto r = run("cv " + kTri + " --grid '1,2;2' --tolerance 1e-16 --max-iter 1", dir);
    EXPECT_EQ(r.code, 2);
    auto rows = read_csv(dir / "cv.csv");
    ASSERT_EQ(rows.size(), 3u);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        EXPECT_EQ(rows[i][5], "0");
        EXPECT_EQ(rows[i][9], "0");
        EXPECT_FALSE(rows[i][10].empty());
    }
}

TEST(Cli, CvScoresEqualLibrary) {
    const auto dir = fresh_dir("cvlib");
    ASSERT_EQ(run("cv " + kTri + " --grid '1,2;2,3' --workers 2", dir).code, 0);
    auto rows = read_csv(dir / "cv.csv");
    const auto g = estimation_grid(load_triangle((kData / "triangle10.csv").string()));
    ASSERT_EQ(rows.size(), 5u);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const Bandwidth b{std::stod(rows[i][0]), std::stod(rows[i][1])};
        EXPECT_EQ(std::stod(rows[i][2]), cv_score(g, Kernel{}, b, BackfitConfig{}).score) << rows[i][0] << "," << rows[i][1];
    }
}

TEST(Cli, CellLeaveOutOption) {
    const auto dir = fresh_dir("cvcell");
    ASSERT_EQ(run("cv " + kTri + " --grid '2;3' --leave-out cell", dir).code, 0);
    auto rows = read_csv(dir / "cv.csv");
    const auto g = estimation_grid(load_triangle((kData / "triangle10.csv").string()));
    EXPECT_EQ(std::stod(rows[1][2]), cv_score(g, Kernel{}, {2.0, 3.0}, BackfitConfig{}, Smoother::local_linear, LeaveOut::cell).score);
}

TEST(Cli, ForecastTotalsEqualLibrary) {
    const auto dir = fresh_dir("fclib");
    ASSERT_EQ(run("forecast " + kTri + " --bandwidth 1.5,2 --periods 12", dir).code, 0);
    auto j = read_json(dir / "forecast.json");
    PipelineConfig cfg;
    cfg.bandwidth = {1.5, 2.0};
    cfg.periods = 12;
    const auto lib = forecast_ph(load_triangle((kData / "triangle10.csv").string()), cfg).forecast;
    EXPECT_EQ(j["total"].get<double>(), lib.total);
    ASSERT_EQ(j["cash_flow"].size(), 12u);
    for (std::size_t a = 0; a < 12; ++a) EXPECT_EQ(j["cash_flow"][a].get<double>(), lib.cash_flow[a]);
    auto cf = read_csv(dir / "cashflow.csv");
    EXPECT_EQ(cf.size(), 13u);
    EXPECT_FALSE(std::filesystem::exists(dir / "comparison.csv"));
}

TEST(Cli, BaselineComparisonHasTwoRows) {
    const auto dir = fresh_dir("clm");
    ASSERT_EQ(run("forecast " + kTri + " --baseline clm", dir).code, 0);
    auto rows = read_csv(dir / "comparison.csv");
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[1][0], "PH");
    EXPECT_EQ(rows[2][0], "CLM");
    const auto clm = chain_ladder(load_triangle((kData / "triangle10.csv").string()), 10);
    EXPECT_EQ(std::stod(rows[2][1]), clm.total);
}

TEST(Cli, SimulateDeterministicAndSized) {
    const std::string args = "simulate --scenario '" + (kData / "scenario.json").string() + "' --n 500";
    const auto a = fresh_dir("sim_a"), b = fresh_dir("sim_b"), c = fresh_dir("sim_c");
    ASSERT_EQ(run(args + " --seed 3", a).code, 0);
    ASSERT_EQ(run(args + " --seed 3", b).code, 0);
    ASSERT_EQ(run(args + " --seed 4", c).code, 0);
    EXPECT_EQ(slurp(a / "events.csv"), slurp(b / "events.csv"));
    EXPECT_NE(slurp(a / "events.csv"), slurp(c / "events.csv"));
    EXPECT_EQ(read_csv(a / "events.csv").size(), 502u);  // horizon comment, header, 500 events
    EXPECT_EQ(read_csv(a / "triangle.csv").size(), 10u);
}

TEST(Cli, EventsAndTriangleInputsGiveSameFit) {
    const auto sim = fresh_dir("rt_sim");
    ASSERT_EQ(run("simulate --scenario '" + (kData / "scenario.json").string() + "' --n 2000", sim).code, 0);
    const auto e = fresh_dir("rt_events"), t = fresh_dir("rt_tri");
    ASSERT_EQ(run("estimate --input '" + (sim / "events.csv").string() + "' --bandwidth 2,2", e).code, 0);
    ASSERT_EQ(run("estimate --input '" + (sim / "triangle.csv").string() + "' --bandwidth 2,2", t).code, 0);
    EXPECT_EQ(slurp(e / "fit.json"), slurp(t / "fit.json"));
    auto j = read_json(t / "fit.json");
    EXPECT_TRUE(j["diagnostics"]["converged"].get<bool>());
}

TEST(Cli, ConfigFileAndFlagPrecedence) {
    const auto dir = fresh_dir("cfg");
    const auto cfg = dir.parent_path() / "cfg.json";
    {
        std::ofstream out(cfg);
        out << R"({"bandwidth": [2.0, 3.0], "periods": 4})";
    }
    const auto a = fresh_dir("cfg_a"), b = fresh_dir("cfg_b");
    ASSERT_EQ(run("forecast " + kTri + " --config '" + cfg.string() + "'", a).code, 0);
    ASSERT_EQ(run("forecast " + kTri + " --config '" + cfg.string() + "' --bandwidth 1,1", b).code, 0);
    auto ja = read_json(a / "forecast.json"), jb = read_json(b / "forecast.json");
    EXPECT_EQ(ja["bandwidth"], nlohmann::json({2.0, 3.0}));
    EXPECT_EQ(ja["cash_flow"].size(), 4u);
    EXPECT_EQ(jb["bandwidth"], nlohmann::json({1.0, 1.0}));
    EXPECT_EQ(jb["cash_flow"].size(), 4u);
}

TEST(Cli, KeepClosureChangesFit) {
    const auto a = fresh_dir("closure_a"), b = fresh_dir("closure_b");
    ASSERT_EQ(run("estimate " + kTri + " --bandwidth 2,2", a).code, 0);
    ASSERT_EQ(run("estimate " + kTri + " --bandwidth 2,2 --keep-closure", b).code, 0);
    auto ja = read_json(a / "fit.json"), jb = read_json(b / "fit.json");
    EXPECT_FALSE(ja["keep_closure"].get<bool>());
    EXPECT_TRUE(jb["keep_closure"].get<bool>());
    EXPECT_NE(ja["fit"]["alpha_star"], jb["fit"]["alpha_star"]);
}
