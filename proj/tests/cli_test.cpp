#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string output;
};

CliResult run(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / ("vdnet_cli_" + std::to_string(::getpid()) + ".log");
  const std::string cmd = std::string(VDNET_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream text;
  text << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, text.str()};
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  static fs::path root() { return fs::temp_directory_path() / ("vdnet_cli_test_" + std::to_string(::getpid())); }

  static void SetUpTestSuite() {
    fs::remove_all(root());
    fs::create_directories(root());
    ASSERT_EQ(run("gen-data --seed 7 --train 12 --test 4 --out " + (root() / "data").string()).code, 0);
    ASSERT_EQ(run("train-ventral --data " + (root() / "data").string() + " --epochs 2 --out " +
                  (root() / "ventral").string())
                  .code,
              0);
  }

  static void TearDownTestSuite() { fs::remove_all(root()); }

  static std::string data() { return (root() / "data").string(); }
  static std::string ventral() { return (root() / "ventral" / "ventral.ckpt").string(); }
};

TEST_F(CliTest, GenDataIsDeterministic) {
  const fs::path again = root() / "data_again";
  ASSERT_EQ(run("gen-data --seed 7 --train 12 --test 4 --out " + again.string()).code, 0);
  EXPECT_EQ(read_json(again / "manifest.json"), read_json(root() / "data" / "manifest.json"));
  EXPECT_EQ(slurp(again / "annotations.jsonl"), slurp(root() / "data" / "annotations.jsonl"));
  EXPECT_TRUE(fs::exists(again / "gen-data.config.json"));
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run("gen-data --train 0 --out " + (root() / "bad").string()).code, 2);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("no-such-command").code, 2);
  EXPECT_EQ(run("saliency --image x.ppm").code, 2);
  EXPECT_EQ(run("saliency --image x.ppm --ventral v --aggregation median").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST_F(CliTest, RuntimeErrorsExitOne) {
  EXPECT_EQ(run("train-dorsal --data " + (root() / "missing").string() + " --out " + (root() / "x").string()).code,
            1);
  EXPECT_EQ(run("saliency --image " + (root() / "none.ppm").string() + " --ventral " + ventral() + " --out " +
                (root() / "x").string())
                .code,
            1);
}

TEST_F(CliTest, ZeroEpochDorsalRunEchoesDefaults) {
  const fs::path out = root() / "d0";
  const CliResult r = run("train-dorsal --data " + data() + " --epochs 0 --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(fs::exists(out / "detector.ckpt"));
  EXPECT_TRUE(read_json(out / "dorsal_report.json")["report"]["epochs"].empty());
  const auto echo = read_json(out / "train-dorsal.config.json");
  EXPECT_EQ(echo["training"]["detector"]["lambda"], 10.0);
  EXPECT_EQ(echo["seed"], 7);
  EXPECT_EQ(echo["subcommand"], "train-dorsal");
}

TEST_F(CliTest, SaliencyWritesFourArtifactsPerAggregation) {
  const fs::path img = root() / "data" / "images" / "test_0000.ppm";
  const fs::path out = root() / "sal";
  for (const std::string agg : {"mean", "max"}) {
    const CliResult r = run("saliency --image " + img.string() + " --ventral " + ventral() + " --aggregation " + agg +
                      " --out " + out.string());
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("mask coverage"), std::string::npos);
    for (const std::string suffix : {".agg.pgm", ".smooth.pgm", ".mask.pgm", ".masked.ppm"}) {
      EXPECT_TRUE(fs::exists(out / ("test_0000." + agg + suffix))) << agg << suffix;
    }
  }
  EXPECT_EQ(read_json(out / "saliency.config.json")["saliency"]["gaussian_variance"], 30.0);
}

TEST_F(CliTest, TrainDetectEvalCompareAblate) {
  const fs::path plain = root() / "plain", masked = root() / "masked";
  ASSERT_EQ(run("train-dorsal --data " + data() + " --epochs 1 --out " + plain.string()).code, 0);
  ASSERT_EQ(
      run("train-dorsal --data " + data() + " --epochs 1 --ventral " + ventral() + " --out " + masked.string()).code,
      0);
  EXPECT_TRUE(read_json(masked / "train-dorsal.config.json").contains("ventral"));

  const fs::path img = root() / "data" / "images" / "test_0001.ppm";
  const fs::path det = root() / "det";
  CliResult r = run("detect --image " + img.string() + " --detector " + (masked / "detector.ckpt").string() +
              " --score-thresh 0 --out " + det.string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(fs::exists(det / "test_0001.det.ppm"));
  std::ifstream lines(det / "test_0001.det.jsonl");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["image"], "test_0001");
    EXPECT_EQ(j["box"].size(), 4u);
    ++rows;
  }
  EXPECT_GT(rows, 0u);
  EXPECT_EQ(read_json(det / "detect.config.json")["attention"], true);

  r = run("eval --data " + data() + " --detector " + (plain / "detector.ckpt").string() + " --out " +
          (root() / "eval").string());
  ASSERT_EQ(r.code, 0) << r.output;
  const double map = read_json(root() / "eval" / "eval.json")["mAP"];
  EXPECT_GE(map, 0.0);
  EXPECT_LE(map, 1.0);

  r = run("compare --data " + data() + " --plain " + (plain / "detector.ckpt").string() + " --masked " +
          (masked / "detector.ckpt").string() + " --out " + (root() / "cmp").string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto cmp = read_json(root() / "cmp" / "comparison.json");
  EXPECT_TRUE(cmp.contains("mAP_delta"));
  EXPECT_EQ(cmp["mask_coverage"]["count"], 4);

  r = run("ablate-sigma --data " + data() + " --ventral " + ventral() + " --epochs 1 --variances 5,30,120 --out " +
          (root() / "ablate").string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto ablation = read_json(root() / "ablate" / "ablation.json")["rows"];
  ASSERT_EQ(ablation.size(), 3u);
  EXPECT_EQ(ablation[1]["in_tuned_band"], true);
  EXPECT_EQ(ablation[0]["in_tuned_band"], false);
  EXPECT_NE(r.output.find("tuned band"), std::string::npos);
}

TEST_F(CliTest, CompareRejectsUnmaskedPair) {
  const fs::path plain = root() / "plain0";
  ASSERT_EQ(run("train-dorsal --data " + data() + " --epochs 0 --out " + plain.string()).code, 0);
  const std::string ckpt = (plain / "detector.ckpt").string();
  EXPECT_EQ(run("compare --data " + data() + " --plain " + ckpt + " --masked " + ckpt + " --out " +
                (root() / "cmp0").string())
                .code,
            2);
  EXPECT_EQ(run("detect --image " + (root() / "data" / "images" / "test_0000.ppm").string() + " --detector " +
                ventral() + " --out " + (root() / "x").string())
                .code,
            2);
}

}  // namespace
