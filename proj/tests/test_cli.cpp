// Drives the smgaa binary end to end: artifacts, exit codes, reproducibility.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "smgaa/config.hpp"
#include "smgaa/image_io.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;  // stdout and stderr interleaved
};

const fs::path& workdir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("smgaa_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Run smgaa(const std::string& args) {
  const std::string cmd = "cd '" + workdir().string() + "' && '" SMGAA_CLI "' " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[512];
  while (fgets(buf, sizeof buf, p)) r.output += buf;
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(workdir() / p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

constexpr const char* kSmallData =
    "--seed 3 -s dataset.classes=3 -s dataset.train_per_class=30 -s dataset.test_per_class=10";
constexpr const char* kSmallAttack = "-s attack.population=4 -s attack.max_iterations=5";

// gen-data and train once; later tests reuse the artifacts
class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    ASSERT_EQ(smgaa(std::string("-o ds ") + kSmallData + " gen-data").code, 0);
    ASSERT_EQ(smgaa("-o tr --seed 3 -s train.epochs=2 train --data ds").code, 0);
  }
  static void TearDownTestSuite() { fs::remove_all(workdir()); }
};

TEST_F(CliPipeline, GenDataAndTrainWriteArtifacts) {
  EXPECT_TRUE(fs::exists(workdir() / "ds/manifest.txt"));
  EXPECT_TRUE(fs::exists(workdir() / "tr/model.bin"));
  const auto metrics = slurp("tr/metrics.txt");
  EXPECT_NE(metrics.find("test_accuracy = "), std::string::npos);
  EXPECT_NE(metrics.find("epoch.1.loss = "), std::string::npos);
  for (const char* d : {"ds", "tr"}) {
    EXPECT_TRUE(fs::exists(workdir() / d / "config.txt")) << d;
    EXPECT_NE(slurp(fs::path(d) / "provenance.txt").find("seed = 3"), std::string::npos) << d;
  }
}

TEST_F(CliPipeline, WrittenConfigReproducesTheRun) {
  // config.txt holds every setting used, so replaying it regenerates the same data
  ASSERT_EQ(smgaa("-c ds/config.txt -o ds2 gen-data").code, 0);
  EXPECT_EQ(slurp("ds/manifest.txt"), slurp("ds2/manifest.txt"));
  const auto c = smgaa::Config::load(workdir() / "ds/config.txt");
  EXPECT_EQ(c.require<int>("dataset.classes"), 3);
  EXPECT_EQ(c.require<std::uint64_t>("dataset.seed"), 3u);
}

TEST_F(CliPipeline, AttackWritesRecordsAndReport) {
  const auto r = smgaa(std::string("-o at --seed 3 ") + kSmallAttack + " attack --data ds --checkpoint tr/model.bin --n 3 --samples 3");
  ASSERT_EQ(r.code, 0) << r.output;
  const auto report = slurp("at/report.txt");
  EXPECT_NE(report.find("attack = smgaa-3"), std::string::npos);
  EXPECT_NE(report.find("samples = 3"), std::string::npos);
  EXPECT_NE(report.find("interference.median-3 = "), std::string::npos);
  EXPECT_FALSE(fs::is_empty(workdir() / "at/records"));
}

TEST_F(CliPipeline, ReportsAreByteIdenticalAcrossRunsAndWorkers) {
  const std::string args = std::string("--seed 5 ") + kSmallAttack + " attack --data ds --checkpoint tr/model.bin --samples 5";
  ASSERT_EQ(smgaa("-o r1 -j 1 " + args).code, 0);
  ASSERT_EQ(smgaa("-o r2 -j 1 " + args).code, 0);
  ASSERT_EQ(smgaa("-o r3 -j 3 " + args).code, 0);
  EXPECT_EQ(slurp("r1/report.txt"), slurp("r2/report.txt"));
  EXPECT_EQ(slurp("r1/report.txt"), slurp("r3/report.txt"));
}

TEST_F(CliPipeline, MissingCheckpointNamesThePath) {
  const auto r = smgaa("-o x attack --data ds --checkpoint no/such/model.bin");
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.output.find("no/such/model.bin"), std::string::npos) << r.output;
  EXPECT_FALSE(fs::exists(workdir() / "x")) << "inputs are checked before any output is written";
}

TEST_F(CliPipeline, UnreadableOrInvalidConfigFails) {
  auto r = smgaa("-c absent.cfg -o x gen-data");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.output.find("absent.cfg"), std::string::npos);
  r = smgaa("-o x -s attack.population=0 attack --data ds --checkpoint tr/model.bin");
  EXPECT_EQ(r.code, 3);
  r = smgaa("-o x -s noequals gen-data");
  EXPECT_EQ(r.code, 3);
}

TEST_F(CliPipeline, MissingDatasetFails) {
  const auto r = smgaa("-o x train --data no_dataset");
  EXPECT_EQ(r.code, 5);
  EXPECT_NE(r.output.find("no_dataset"), std::string::npos);
}

TEST_F(CliPipeline, UsageErrorsAreNonzero) {
  EXPECT_NE(smgaa("").code, 0);
  EXPECT_NE(smgaa("frobnicate").code, 0);
  EXPECT_NE(smgaa("train --epochs notanumber").code, 0);
  EXPECT_EQ(smgaa("--help").code, 0);
}

TEST_F(CliPipeline, EmptyThetaRendersBlack) {
  std::ofstream(workdir() / "empty.theta").flush();
  ASSERT_EQ(smgaa("-o rd render --theta empty.theta").code, 0);
  const auto img = smgaa::read_float_image(workdir() / "rd/render.img");
  for (double v : img) ASSERT_EQ(v, 0.0);
  EXPECT_TRUE(fs::exists(workdir() / "rd/render.png"));
}

TEST_F(CliPipeline, EvalWritesPerAttackReports) {
  const auto r = smgaa(std::string("-o ev ") + kSmallAttack +
                       " -s linf.steps=3 eval --data ds --checkpoint tr/model.bin --samples 4 --attacks smgaa-1,fgsm"
                       " --transfer tr/model.bin");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(fs::exists(workdir() / "ev/report.smgaa-1.txt"));
  EXPECT_TRUE(fs::exists(workdir() / "ev/report.fgsm.txt"));
  EXPECT_NE(slurp("ev/transfer.txt").find("transfer.1 = "), std::string::npos);
}

TEST_F(CliPipeline, SweepModes) {
  ASSERT_EQ(smgaa(std::string("-o sw ") + kSmallAttack +
                  " sweep --mode config --key attack.amplitude_cap_db --values '0;1' --data ds --checkpoint tr/model.bin"
                  " --samples 3")
                .code,
            0);
  const auto text = slurp("sw/sweep.txt");
  EXPECT_NE(text.find("attack.amplitude_cap_db[0].fooling_rate"), std::string::npos);
  EXPECT_NE(text.find("attack.amplitude_cap_db[1].fooling_rate"), std::string::npos);
  ASSERT_EQ(smgaa(std::string("-o hm ") + kSmallAttack +
                  " sweep --mode heatmap --repeats 2 --data ds --checkpoint tr/model.bin")
                .code,
            0);
  EXPECT_TRUE(fs::exists(workdir() / "hm/heatmap.png"));
  EXPECT_EQ(smgaa("-o x sweep --mode nonsense --data ds --checkpoint tr/model.bin").code, 3);
}

TEST_F(CliPipeline, DefendProducesComparison) {
  const auto r = smgaa(
      "-o df -s train.epochs=1 -s defense.iterations=2 -s eval.population=2 -s eval.iterations=2 -s linf.steps=2"
      " defend --data ds --checkpoint tr/model.bin --samples 3");
  ASSERT_EQ(r.code, 0) << r.output;
  const auto cmp = slurp("df/comparison.txt");
  EXPECT_NE(cmp.find("normal.smgaa-3.robust_accuracy"), std::string::npos);
  EXPECT_NE(cmp.find("defended.pgd.robust_accuracy"), std::string::npos);
  EXPECT_TRUE(fs::exists(workdir() / "df/defended.bin"));
  EXPECT_NE(slurp("df/defense_log.txt").find("epoch.0.selected = 90"), std::string::npos);
}

}  // namespace
