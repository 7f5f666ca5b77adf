#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "pushest/dataio.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(PUSHEST_CLI) + " " + args + " 2>/dev/null";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("pushest_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, HelpListsCommandsAndUnits) {
  const RunResult top = run("--help");
  EXPECT_EQ(top.code, 0);
  for (const char* cmd : {"simulate", "corrupt", "estimate", "benchmark", "inspect", "--seed", "--config", "--out", "--quiet"}) {
    EXPECT_NE(top.out.find(cmd), std::string::npos) << cmd;
  }
  const RunResult sim = run("simulate --help");
  EXPECT_NE(sim.out.find("[m/s]"), std::string::npos);
  EXPECT_NE(sim.out.find("[s]"), std::string::npos);
}

TEST_F(Cli, SimulateWritesTwoHundredFiftySteps) {
  const RunResult r = run("--quiet --out " + path("s.json") + " simulate --shape box:0.1x0.1 --speed 0.06 --dur 10 --dt 0.04");
  ASSERT_EQ(r.code, 0);
  const pushest::MeasuredTrajectory traj = pushest::loadTrajectory(path("s.json"));
  EXPECT_EQ(traj.size(), 250u);
  EXPECT_TRUE(traj.hasGroundTruth());
}

TEST_F(Cli, DiscParamsUseTwoThirdsRadius) {
  ASSERT_EQ(run("--quiet --out " + path("d.json") + " simulate --shape disc:0.05 --dur 1").code, 0);
  EXPECT_NEAR(pushest::loadTrajectory(path("d.json")).params->c, 2.0 * 0.05 / 3.0, 1e-15);
}

TEST_F(Cli, SameSeedGivesIdenticalFiles) {
  for (const char* name : {"a.json", "b.json"}) {
    ASSERT_EQ(run("--quiet --seed 5 --out " + path(name) + " simulate --path random --dur 2").code, 0);
  }
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
  ASSERT_EQ(run("--quiet --seed 6 --out " + path("c.json") + " simulate --path random --dur 2").code, 0);
  EXPECT_NE(slurp(path("a.json")), slurp(path("c.json")));
}

TEST_F(Cli, NoiselessEstimateReachesZeroCost) {
  ASSERT_EQ(run("--quiet --out " + path("s.json") + " simulate --dur 2").code, 0);
  const RunResult r = run("--out " + path("r.csv") + " estimate --model QS --mode batch --in " + path("s.json"));
  ASSERT_EQ(r.code, 0);
  const auto report = nlohmann::json::parse(r.out);
  EXPECT_TRUE(report.at("converged").get<bool>());
  EXPECT_LT(report.at("final_cost").get<double>(), 1e-12);
  const pushest::ResultsTable table = pushest::readResults(path("r.csv"));
  EXPECT_EQ(table.rows.size(), 50u);
}

TEST_F(Cli, IncrementalWithLongLagMatchesBatch) {
  ASSERT_EQ(run("--quiet --seed 2 --out " + path("s.json") + " simulate --path arc --dur 2").code, 0);
  ASSERT_EQ(run("--quiet --seed 3 --out " + path("n.json") + " corrupt --in " + path("s.json")).code, 0);
  ASSERT_EQ(run("--quiet --out " + path("b.csv") + " estimate --no-covariance --in " + path("n.json")).code, 0);
  ASSERT_EQ(run("--quiet --out " + path("i.csv") + " estimate --no-covariance --mode incremental --lag 60 --in " +
                path("n.json")).code, 0);
  const auto b = pushest::readResults(path("b.csv"));
  const auto i = pushest::readResults(path("i.csv"));
  ASSERT_EQ(b.rows.size(), i.rows.size());
  for (std::size_t k = 0; k < b.rows.size(); ++k) {
    for (std::size_t c = 1; c < 11; ++c) EXPECT_NEAR(b.rows[k][c], i.rows[k][c], 1e-9);
  }
}

TEST_F(Cli, ConfigFileIsOverriddenByFlags) {
  std::ofstream(path("cfg.txt")) << "duration = 1\nspeed = 0.05\n";
  ASSERT_EQ(run("--quiet --config " + path("cfg.txt") + " --out " + path("a.json") + " simulate").code, 0);
  EXPECT_EQ(pushest::loadTrajectory(path("a.json")).size(), 25u);
  ASSERT_EQ(run("--quiet --config " + path("cfg.txt") + " --out " + path("b.json") + " simulate --dur 2").code, 0);
  EXPECT_EQ(pushest::loadTrajectory(path("b.json")).size(), 50u);
}

TEST_F(Cli, ErrorsGiveNonzeroExitCodes) {
  EXPECT_NE(run("estimate --in " + path("missing.json")).code, 0);
  EXPECT_NE(run("simulate --shape blob:1").code, 0);
  EXPECT_NE(run("--out " + path("x.json") + " simulate --speed -1").code, 0);
  EXPECT_NE(run("estimate --model XYZ --in " + path("missing.json")).code, 0);
  EXPECT_NE(run("no-such-command").code, 0);
}

TEST_F(Cli, BenchmarkEmitsRowsAndAggregate) {
  const RunResult r = run("--quiet --seed 4 --out " + path("b.csv") +
                          " benchmark --trials 2 --dur 1 --models CP,QS --no-covariance");
  EXPECT_EQ(r.code, 0);
  const std::string csv = slurp(path("b.csv"));
  std::size_t trialRows = 0;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("0,", 0) == 0 || line.rfind("1,", 0) == 0) ++trialRows;
  }
  EXPECT_EQ(trialRows, 4u);
  EXPECT_NE(csv.find("mean"), std::string::npos);
}
