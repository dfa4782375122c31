// Copyright 2026 The HiFIRec Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string out;
};

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "hifirec_cli_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static Result run(const std::string& args) {
    const fs::path out = dir_ / "stdout.txt";
    const std::string cmd = std::string("\"") + HIFIREC_CLI_PATH + "\" " + args + " > \"" + out.string() + "\" 2>&1";
    Result r;
    const int status = std::system(cmd.c_str());
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(out);
    std::ostringstream s;
    s << in.rdbuf();
    r.out = s.str();
    return r;
  }

  static nlohmann::json last_json(const std::string& text) {
    std::istringstream in(text);
    std::string line, last;
    while (std::getline(in, line))
      if (!line.empty() && line[0] == '{') last = line;
    return nlohmann::json::parse(last);
  }

  static std::string path(const std::string& name) { return (dir_ / name).string(); }

  static void prepare() {
    if (fs::exists(dir_ / "data")) return;
    ASSERT_EQ(run("synth --out " + path("raw.tsv") + " --users 40 --items 60 --topics 3 --hot-items 6").code, 0);
    const auto r = run("prepare --input " + path("raw.tsv") + " --out " + path("data"));
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_GT(last_json(r.out)["eval_users"].get<int>(), 0);
  }

  static inline fs::path dir_;
};

constexpr const char* kTrainArgs = " --d 8 --L 1 --epochs 3 --patience 0 --lr 0.01";

TEST_F(Cli, TrainWritesRunDirectoryAndEvaluateAgrees) {
  prepare();
  const auto t = run("train --data " + path("data") + " --out " + path("run") + kTrainArgs);
  ASSERT_EQ(t.code, 0) << t.out;
  for (const char* f : {"config.txt", "loss.jsonl", "model.bin", "model.bin.adam"})
    EXPECT_TRUE(fs::exists(dir_ / "run" / f)) << f;
  const auto trained = last_json(t.out)["metrics"];

  const auto e = run("evaluate --data " + path("data") + " --checkpoint " + path("run/model.bin"));
  ASSERT_EQ(e.code, 0) << e.out;
  const auto j = last_json(e.out);
  EXPECT_EQ(j["split"], "test");
  EXPECT_EQ(j["metrics"], trained);
}

TEST_F(Cli, FrozenConfigReproducesMetrics) {
  prepare();
  const auto a = run("train --data " + path("data") + " --out " + path("a") + kTrainArgs);
  ASSERT_EQ(a.code, 0) << a.out;
  const auto b = run("train --data " + path("data") + " --out " + path("b") + " --config " + path("a/config.txt"));
  ASSERT_EQ(b.code, 0) << b.out;
  EXPECT_EQ(last_json(a.out)["metrics"], last_json(b.out)["metrics"]);
  std::ifstream ma(path("a/model.bin"), std::ios::binary), mb(path("b/model.bin"), std::ios::binary);
  const std::string ba((std::istreambuf_iterator<char>(ma)), {}), bb((std::istreambuf_iterator<char>(mb)), {});
  EXPECT_EQ(ba, bb);
}

TEST_F(Cli, ReportRendersTrainOutput) {
  prepare();
  const auto t = run("train --data " + path("data") + " --out " + path("r") + kTrainArgs + " --variant P-NB+U-NS");
  ASSERT_EQ(t.code, 0);
  {
    std::ofstream f(path("records.jsonl"));
    f << "{\"variant\":\"P-NB+U-NS\",\"metrics\":" << last_json(t.out)["metrics"].dump() << "}\n";
  }
  const auto r = run("report --input " + path("records.jsonl") + " --style ablation");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("P-NB+U-NS"), std::string::npos);
}

TEST_F(Cli, BadArgumentsFail) {
  prepare();
  const auto bad_set = run("train --data " + path("data") + " --out " + path("x") + " --set lr");
  EXPECT_NE(bad_set.code, 0);
  EXPECT_NE(bad_set.out.find("error"), std::string::npos);
  EXPECT_NE(run("train --data " + path("data") + " --out " + path("x") + " --set nonsense=1").code, 0);
  EXPECT_NE(run("evaluate --data " + path("data") + " --checkpoint " + path("missing.bin")).code, 0);
  EXPECT_NE(run("frobnicate").code, 0);
}

}  // namespace
