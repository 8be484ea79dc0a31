// Copyright 2026 The urnlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include "urnlab/io.hpp"

namespace urnlab {
namespace {

namespace fs = std::filesystem;

const std::string kCli = URNLAB_CLI_PATH;
const std::string kConfigs = URNLAB_CONFIG_DIR;

int run_cli(const std::string& args) {
  const std::string cmd = kCli + " " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("urnlab_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(Cli, SimulateIsDeterministic) {
  const std::string cfg = kConfigs + "/all8_behavioral.json";
  ASSERT_EQ(run_cli("simulate --config " + cfg + " --out " + path("a")), 0);
  ASSERT_EQ(run_cli("simulate --config " + cfg + " --out " + path("b") + " --threads 3"), 0);
  EXPECT_EQ(read_file(path("a/panel.csv")), read_file(path("b/panel.csv")));
  EXPECT_EQ(read_file(path("a/series.csv")), read_file(path("b/series.csv")));
  const Panel p = load_panel(path("a/panel.csv"));
  EXPECT_EQ(p.size(), 200u * 160u);
  ASSERT_EQ(run_cli("simulate --config " + cfg + " --seed 43 --out " + path("c")), 0);
  EXPECT_NE(read_file(path("a/panel.csv")), read_file(path("c/panel.csv")));
}

TEST_F(Cli, BenchmarkAndMetrics) {
  ASSERT_EQ(run_cli("benchmark --treatment signals --group-size 4 --seed 1 --out " + path("b.csv")), 0);
  const std::string csv = read_file(path("b.csv"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kBenchmarkHeader);
  ASSERT_EQ(run_cli("benchmark --treatment actions --group-size 3 --rounds 6 --replications 500 "
                    "--seed 1 --format json --out " + path("b.json")),
            0);
  const auto j = json::parse(read_file(path("b.json")));
  EXPECT_EQ(j[0]["rows"].size(), 6u);
  EXPECT_FALSE(j[0]["exact"].get<bool>());

  ASSERT_EQ(run_cli("simulate --config " + kConfigs + "/all8_behavioral.json --out " + path("s")), 0);
  ASSERT_EQ(run_cli("metrics --panel " + path("s/panel.csv") + " --out " + path("m")), 0);
  EXPECT_TRUE(fs::exists(path("m/series.csv")));
  EXPECT_TRUE(fs::exists(path("m/responsiveness.csv")));
}

TEST_F(Cli, FitWritesJson) {
  ASSERT_EQ(run_cli("simulate --config " + kConfigs + "/all8_behavioral.json --replications 400 --out " +
                    path("s")),
            0);
  ASSERT_EQ(run_cli("fit --panel " + path("s/panel.csv") + " --format json --out " + path("fit.json")), 0);
  const auto j = json::parse(read_file(path("fit.json")));
  const auto& est = j["fit"]["estimates"];
  EXPECT_NEAR(est["beta"].get<double>(), 0.5, 0.1);
  EXPECT_NEAR(est["gamma"].get<double>(), 1.0, 0.1);
  EXPECT_NEAR(est["psi"].get<double>(), 0.5, 0.1);
  EXPECT_TRUE(j["fit"]["convergence"]["converged"].get<bool>());
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run_cli(""), 1);
  EXPECT_EQ(run_cli("frobnicate"), 1);
  EXPECT_EQ(run_cli("benchmark --treatment signals"), 1);
  EXPECT_EQ(run_cli("benchmark --treatment nothing --seed 1 --out " + path("x.csv")), 1);
  EXPECT_EQ(run_cli("simulate --seed 1 --group-size 0 --out " + path("x")), 1);
  EXPECT_EQ(run_cli("metrics --panel " + path("missing.csv")), 1);
  EXPECT_EQ(run_cli("fit"), 1);
  write_file(path("bad.json"), "{\"seed\": 1, \"colour\": 2}");
  EXPECT_EQ(run_cli("simulate --config " + path("bad.json") + " --out " + path("y")), 1);
  EXPECT_EQ(run_cli("benchmark --format xml --seed 1"), 1);
  EXPECT_EQ(run_cli("--help"), 0);
}

}  // namespace
}  // namespace urnlab
