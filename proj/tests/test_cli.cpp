#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "adaptraj_cli_test";

int run(const std::string& args, const std::string& out_file = "out.txt") {
  const std::string cmd = std::string(ADAPTRAJ_CLI_PATH) + " " + args + " > " + (kWork / out_file).string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    std::ofstream(kWork / "profiles.json") << R"({"domains": [
      {"domain_id": 0, "name": "a", "scene_count": 30, "desired_speed_mean": 1.0},
      {"domain_id": 1, "name": "b", "scene_count": 30, "desired_speed_mean": 1.3},
      {"domain_id": 2, "name": "c", "scene_count": 30, "desired_speed_mean": 1.6},
      {"domain_id": 3, "name": "d", "scene_count": 30, "desired_speed_mean": 2.1, "axis_scale_y": 1.8}]})";
    std::ofstream(kWork / "config.json") << R"({"d_f": 8, "embed_dim": 4, "noise_dim": 2, "batch_size": 16,
      "e_start": 1, "e_end": 2, "e_total": 3, "seed": 5})";
    ASSERT_EQ(run("generate --profile " + (kWork / "profiles.json").string() + " --seed 1 --out " +
                  (kWork / "data").string()),
              0)
        << slurp(kWork / "out.txt");
  }
  static void TearDownTestSuite() { fs::remove_all(kWork); }
};

}  // namespace

TEST_F(Cli, GenerateWritesOneCorpusPerProfile) {
  for (const char* d : {"a", "b", "c", "d"}) {
    EXPECT_TRUE(fs::exists(kWork / "data" / d / "scenes.jsonl"));
    EXPECT_TRUE(fs::exists(kWork / "data" / d / "corpus.json"));
  }
  std::ifstream is(kWork / "data" / "a" / "scenes.jsonl");
  std::string line;
  std::getline(is, line);
  const auto j = nlohmann::json::parse(line);
  EXPECT_EQ(j.size(), 6u);
  EXPECT_EQ(j["focal"].size(), 8u);
}

TEST_F(Cli, StatsPrintsTheTable) {
  ASSERT_EQ(run("stats --in " + (kWork / "data/a").string() + " --in " + (kWork / "data/d").string()), 0);
  const auto out = slurp(kWork / "out.txt");
  EXPECT_NE(out.find("v(y) avg/std"), std::string::npos);
  EXPECT_NE(out.find("\nd "), std::string::npos);
}

TEST_F(Cli, IngestSlidesWindows) {
  std::ofstream raw(kWork / "raw.txt");
  for (int i = 0; i < 21; ++i) raw << 0.4 * i << " 1 " << 10 * i << " 5\n";
  raw.close();
  ASSERT_EQ(run("ingest --raw " + (kWork / "raw.txt").string() + " --units px:0.1 --out " + (kWork / "ingested").string()),
            0);
  std::ifstream is(kWork / "ingested" / "scenes.jsonl");
  int n = 0;
  for (std::string l; std::getline(is, l);) ++n;
  EXPECT_EQ(n, 2);
  EXPECT_EQ(run("ingest --raw " + (kWork / "raw.txt").string() + " --units furlong --out " + (kWork / "x").string()),
            2);
}

TEST_F(Cli, TrainAndEvalAreDeterministic) {
  const std::string sources = (kWork / "data/a").string() + "," + (kWork / "data/b").string();
  const std::string cfg = (kWork / "config.json").string();
  ASSERT_EQ(run("train --sources " + sources + " --config " + cfg + " --out " + (kWork / "ck1").string()), 0)
      << slurp(kWork / "out.txt");
  ASSERT_EQ(run("train --sources " + sources + " --config " + cfg + " --out " + (kWork / "ck2").string()), 0);
  EXPECT_EQ(slurp(kWork / "ck1/train_log.jsonl"), slurp(kWork / "ck2/train_log.jsonl"));
  EXPECT_EQ(slurp(kWork / "ck1/model.ckpt"), slurp(kWork / "ck2/model.ckpt"));

  const std::string target = (kWork / "data/d").string();
  ASSERT_EQ(run("eval --ckpt " + (kWork / "ck1/model.ckpt").string() + " --target " + target, "e1.txt"), 0);
  ASSERT_EQ(run("eval --ckpt " + (kWork / "ck2/model.ckpt").string() + " --target " + target, "e2.txt"), 0);
  EXPECT_EQ(slurp(kWork / "e1.txt"), slurp(kWork / "e2.txt"));
  EXPECT_NE(slurp(kWork / "e1.txt").find("\"ade\""), std::string::npos);
  EXPECT_EQ(run("eval --ckpt " + (kWork / "ck1/model.ckpt").string() + " --target " + target + " --k 3"), 0);
  EXPECT_EQ(run("eval --ckpt " + (kWork / "missing.ckpt").string() + " --target " + target), 1);
}

TEST_F(Cli, ExperimentAndSweepEmitReports) {
  const std::string common =
      "--profiles " + (kWork / "profiles.json").string() + " --target-index 3 --config " + (kWork / "config.json").string();
  ASSERT_EQ(run("experiment " + common + " --methods vanilla,adaptraj --seeds 1 --out " + (kWork / "exp").string()), 0)
      << slurp(kWork / "out.txt");
  EXPECT_TRUE(fs::exists(kWork / "exp/experiment.txt"));
  EXPECT_TRUE(fs::exists(kWork / "exp/logs/adaptraj_seed1_n3.jsonl"));
  std::ifstream jl(kWork / "exp/experiment.jsonl");
  int cells = 0, summaries = 0;
  for (std::string l; std::getline(jl, l);) {
    const auto j = nlohmann::json::parse(l);
    (j["record"] == "cell" ? cells : summaries) += 1;
  }
  EXPECT_EQ(cells, 2);
  EXPECT_EQ(summaries, 2);
  const int gated = run("experiment " + common + " --methods vanilla,adaptraj --seeds 1 --gate");
  EXPECT_TRUE(gated == 0 || gated == 3);

  ASSERT_EQ(run("sweep " + common + " --max-sources 2 --seeds 1 --out " + (kWork / "sweep").string()), 0)
      << slurp(kWork / "out.txt");
  EXPECT_NE(slurp(kWork / "sweep/sweep.txt").find("source_sweep"), std::string::npos);
  EXPECT_EQ(run("sweep " + common + " --max-sources 4 --seeds 1"), 2);
  EXPECT_EQ(run("experiment " + common + " --methods w/o-both"), 2);
}
