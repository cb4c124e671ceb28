// Copyright 2026 The MoralBench Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli_app.hpp"
#include "moral/checkpoint.hpp"
#include "moral/errors.hpp"

namespace moral::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const fs::path kCorpus = fs::path(MORAL_TEST_DATA_DIR) / "corpus";

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t line_count(const fs::path& p) {
  const std::string text = slurp(p);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            (std::string("moral_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(root_);
    fs::create_directories(root_);
    write_config(json::object());
  }
  void TearDown() override { fs::remove_all(root_); }

  // Small model so that eval runs in milliseconds; extra keys merge on top.
  void write_config(const json& extra) {
    json cfg = {{"split", {{"target_size", 200}, {"overlap", 0}}},
                {"model", {{"d_model", 16}, {"n_layers", 1}, {"n_heads", 2}, {"d_ff", 32}, {"max_seq_len", 256}}},
                {"train", {{"epochs", 1}, {"n_experts", 2}, {"top_k", 1}, {"rank", 2}}},
                {"eval", {{"max_new_tokens", 6}}}};
    cfg.merge_patch(extra);
    std::ofstream(root_ / "config.json") << cfg.dump();
  }

  Outcome run(std::vector<std::string> args, const fs::path& out_dir = {}) {
    std::vector<std::string> full{"--config", (root_ / "config.json").string(), "--output-dir",
                                  (out_dir.empty() ? root_ / "out" : out_dir).string()};
    full.insert(full.end(), args.begin(), args.end());
    std::ostringstream out, err;
    const int code = run_cli(full, out, err);
    return {code, out.str(), err.str()};
  }

  Outcome curate(const fs::path& out_dir = {}) {
    return run({"--stub-clients", "curate", "--corpus", kCorpus.string()}, out_dir);
  }

  fs::path root_;
};

TEST_F(CliTest, CurateIsByteIdenticalAcrossReruns) {
  ASSERT_EQ(curate(root_ / "a").code, kExitOk);
  ASSERT_EQ(curate(root_ / "b").code, kExitOk);
  for (const char* f : {"dataset/train.jsonl", "dataset/test.jsonl", "index.jsonl"}) {
    EXPECT_FALSE(slurp(root_ / "a" / f).empty()) << f;
    EXPECT_EQ(slurp(root_ / "a" / f), slurp(root_ / "b" / f)) << f;
  }
}

TEST_F(CliTest, MissingCorpusExitsTwo) {
  const Outcome r = run({"curate", "--corpus", (root_ / "nowhere").string()});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("nowhere"), std::string::npos);
}

TEST_F(CliTest, SummaryCountsMatchJsonlLines) {
  const Outcome r = curate();
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::smatch m;
  ASSERT_TRUE(std::regex_search(r.out, m, std::regex(R"(records: (\d+) \(train (\d+), test (\d+)\))")));
  EXPECT_EQ(std::stoul(m[2]), line_count(root_ / "out/dataset/train.jsonl"));
  EXPECT_EQ(std::stoul(m[3]), line_count(root_ / "out/dataset/test.jsonl"));
  EXPECT_EQ(std::stoul(m[1]), std::stoul(m[2]) + std::stoul(m[3]));
  ASSERT_TRUE(std::regex_search(r.out, m, std::regex(R"(chunks: (\d+))")));
  EXPECT_EQ(std::stoul(m[1]), line_count(root_ / "out/index.jsonl"));
}

TEST_F(CliTest, IndexMatchesCurateIndex) {
  ASSERT_EQ(curate(root_ / "a").code, kExitOk);
  ASSERT_EQ(run({"--stub-clients", "index", "--corpus", kCorpus.string()}, root_ / "b").code, kExitOk);
  EXPECT_EQ(slurp(root_ / "a/index.jsonl"), slurp(root_ / "b/index.jsonl"));
}

TEST_F(CliTest, ZeroEpochCheckpointEqualsInitialization) {
  ASSERT_EQ(curate().code, kExitOk);
  const Outcome r = run({"train", "--epochs", "0"});
  ASSERT_EQ(r.code, kExitOk) << r.err;

  ToyModelConfig mc;
  mc.vocab_size = 256;
  mc.d_model = 16;
  mc.n_layers = 1;
  mc.n_heads = 2;
  mc.d_ff = 32;
  mc.max_seq_len = 256;
  mc.seed = 0;
  TrainConfig tc;
  tc.n_experts = 2;
  tc.top_k = 1;
  tc.rank = 2;
  save_checkpoint(root_ / "fresh", build_frozen_model(mc, tc.adapter_config()), {});
  for (const char* f : {"adapter.json", "base_weights.bin", "model_config.json", "loss.csv"})
    EXPECT_EQ(slurp(root_ / "out/checkpoint" / f), slurp(root_ / "fresh" / f)) << f;
}

TEST_F(CliTest, TrainingIsDeterministic) {
  ASSERT_EQ(curate(root_ / "a").code, kExitOk);
  ASSERT_EQ(curate(root_ / "b").code, kExitOk);
  ASSERT_EQ(run({"train"}, root_ / "a").code, kExitOk);
  ASSERT_EQ(run({"train"}, root_ / "b").code, kExitOk);
  for (const char* f : {"adapter.json", "base_weights.bin", "loss.csv"})
    EXPECT_EQ(slurp(root_ / "a/checkpoint" / f), slurp(root_ / "b/checkpoint" / f)) << f;
  EXPECT_EQ(line_count(root_ / "a/checkpoint/loss.csv"), 2u);
}

TEST_F(CliTest, TrainWithoutDatasetExitsTwo) {
  EXPECT_EQ(run({"train"}).code, kExitUsage);
}

TEST_F(CliTest, ClosedReportHasRaOnly) {
  ASSERT_EQ(curate().code, kExitOk);
  ASSERT_EQ(run({"train"}).code, kExitOk);
  const Outcome r = run({"--stub-clients", "eval", "--mode", "closed"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const json report = json::parse(slurp(root_ / "out/reports/closed.json"));
  const json& m = report.at("metrics");
  EXPECT_TRUE(m.at("faith").is_null());
  EXPECT_TRUE(m.at("filter").is_null());
  EXPECT_TRUE(m.at("rr").is_null());
  EXPECT_TRUE(m.at("ra_open").is_null());
  EXPECT_TRUE(m.at("ra_closed").is_number());
  EXPECT_TRUE(fs::exists(root_ / "out/reports/closed.txt"));
  EXPECT_EQ(line_count(root_ / "out/reports/closed_responses.jsonl"), line_count(root_ / "out/dataset/test.jsonl"));
}

TEST_F(CliTest, OpenReportWithEmptyContextsHasRaOnly) {
  ASSERT_EQ(curate().code, kExitOk);
  ASSERT_EQ(run({"train"}).code, kExitOk);
  // Trigram cosine between a question and its chunk stays far below 0.87,
  // so every test record lands in the empty-context scenario.
  const Outcome r = run({"--stub-clients", "eval", "--mode", "open"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const json report = json::parse(slurp(root_ / "out/reports/open.json"));
  EXPECT_EQ(report.at("scenario_counts").at("empty_context"), report.at("record_count"));
  const json& m = report.at("metrics");
  EXPECT_TRUE(m.at("faith").is_null());
  EXPECT_TRUE(m.at("filter").is_null());
  EXPECT_TRUE(m.at("rr").is_null());
  EXPECT_TRUE(m.at("ra_open").is_number());
}

TEST_F(CliTest, ReportMergesModes) {
  ASSERT_EQ(curate().code, kExitOk);
  ASSERT_EQ(run({"train"}).code, kExitOk);
  for (const char* mode : {"open", "closed", "cross"})
    ASSERT_EQ(run({"--stub-clients", "eval", "--mode", mode}).code, kExitOk) << mode;
  const Outcome r = run({"report"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const json m = json::parse(slurp(root_ / "out/reports/summary.json")).at("metrics");
  const json open = json::parse(slurp(root_ / "out/reports/open.json")).at("metrics");
  const json closed = json::parse(slurp(root_ / "out/reports/closed.json")).at("metrics");
  const json cross = json::parse(slurp(root_ / "out/reports/cross.json")).at("metrics");
  EXPECT_EQ(m.at("ra_open"), open.at("ra_open"));
  EXPECT_EQ(m.at("ra_closed"), closed.at("ra_closed"));
  EXPECT_EQ(m.at("qr"), cross.at("qr"));
  EXPECT_EQ(m.at("fl"), cross.at("fl"));
  EXPECT_EQ(slurp(root_ / "out/reports/summary.txt"), r.out);
}

TEST_F(CliTest, ReportWithoutRunsExitsTwo) {
  EXPECT_EQ(run({"report"}).code, kExitUsage);
}

TEST_F(CliTest, UnreachableJudgeMakesEvalPartial) {
  ASSERT_EQ(curate().code, kExitOk);
  ASSERT_EQ(run({"train"}).code, kExitOk);
  ::setenv("MORAL_CLI_TEST_KEY", "secret", 1);
  write_config({{"judges",
                 {{{"kind", "stub"}},
                  {{"kind", "chat"},
                   {"base_url", "http://127.0.0.1:1"},
                   {"model", "judge"},
                   {"api_key_env", "MORAL_CLI_TEST_KEY"},
                   {"timeout_seconds", 1},
                   {"max_retries", 0}}}}});
  const Outcome r = run({"eval", "--mode", "cross"});
  EXPECT_EQ(r.code, kExitPartial) << r.err;
  const json report = json::parse(slurp(root_ / "out/reports/cross.json"));
  EXPECT_TRUE(report.at("partial").get<bool>());
  EXPECT_TRUE(report.at("metrics").at("fl").is_number());
}

TEST_F(CliTest, UnknownModeExitsTwoWithUsage) {
  const Outcome r = run({"eval", "--mode", "sideways"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST_F(CliTest, MissingSubcommandExitsTwo) {
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
}

TEST_F(CliTest, HelpExitsZero) {
  const Outcome r = run({"--help"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("gradcheck"), std::string::npos);
}

TEST_F(CliTest, GradcheckDefaultPasses) {
  const Outcome r = run({"gradcheck"});
  EXPECT_EQ(r.code, kExitOk) << r.out << r.err;
  EXPECT_NE(r.out.find("max relative error"), std::string::npos);
}

TEST_F(CliTest, GradcheckRefusesOversizedModel) {
  write_config({{"gradcheck", {{"d_model", 64}, {"d_ff", 256}, {"rank", 8}, {"n_experts", 4}}}});
  const Outcome r = run({"gradcheck"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("limited"), std::string::npos);
}

TEST_F(CliTest, GradcheckZeroEpsilonExitsTwo) {
  EXPECT_EQ(run({"gradcheck", "--epsilon", "0"}).code, kExitUsage);
}

TEST_F(CliTest, ConfigRejectsUnknownKeys) {
  write_config({{"thetta", 0.5}});
  const Outcome r = run({"--stub-clients", "curate", "--corpus", kCorpus.string()});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("thetta"), std::string::npos);
}

TEST_F(CliTest, ConfigRejectsInlineCredentials) {
  write_config({{"generator", {{"kind", "chat"}, {"api_key", "sk-123"}}}});
  EXPECT_EQ(curate().code, kExitUsage);
}

TEST_F(CliTest, ConfigRejectsEscapingPaths) {
  write_config({{"paths", {{"reports", "../elsewhere"}}}});
  EXPECT_EQ(curate().code, kExitUsage);
  write_config({{"paths", {{"index", "/tmp/index.jsonl"}}}});
  EXPECT_EQ(curate().code, kExitUsage);
}

TEST_F(CliTest, ConfigRejectsThetaOutsideRange) {
  write_config({{"retrieval", {{"theta", 1.0}}}});
  EXPECT_EQ(curate().code, kExitUsage);
}

TEST_F(CliTest, ConfigDefaultsAndOverrides) {
  const RunConfig defaults;
  EXPECT_EQ(defaults.retrieval.theta, 0.87);
  const RunConfig c = apply_config_json(
      {{"seed", 9}, {"retrieval", {{"theta", 0.5}}}, {"train", {{"adapter", "lora"}, {"prompt", "open_book"}}}});
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.retrieval.theta, 0.5);
  EXPECT_EQ(c.adapter, AdapterKind::kLora);
  EXPECT_EQ(c.training_prompt, TrainingPrompt::kOpenBook);
  EXPECT_THROW(apply_config_json({{"seed", "nine"}}), ConfigError);
}

TEST_F(CliTest, SeedFlagOverridesConfigFile) {
  write_config({{"seed", 1}});
  ASSERT_EQ(curate(root_ / "file").code, kExitOk);
  ASSERT_EQ(run({"--seed", "1", "--stub-clients", "curate", "--corpus", kCorpus.string()}, root_ / "same").code,
            kExitOk);
  ASSERT_EQ(run({"--seed", "2", "--stub-clients", "curate", "--corpus", kCorpus.string()}, root_ / "flag").code,
            kExitOk);
  EXPECT_EQ(slurp(root_ / "file/dataset/test.jsonl"), slurp(root_ / "same/dataset/test.jsonl"));
  const auto split = [&](const char* d) {
    return slurp(root_ / d / "dataset/train.jsonl") + "|" + slurp(root_ / d / "dataset/test.jsonl");
  };
  EXPECT_NE(split("file"), split("flag"));
}

TEST_F(CliTest, NoWritesOutsideOutputDirectory) {
  const auto listing = [&] {
    std::set<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(root_)) files.insert(e.path());
    return files;
  };
  const auto before = listing();
  ASSERT_EQ(curate().code, kExitOk);
  ASSERT_EQ(run({"train"}).code, kExitOk);
  for (const char* mode : {"open", "closed", "cross"}) ASSERT_EQ(run({"--stub-clients", "eval", "--mode", mode}).code, kExitOk);
  ASSERT_EQ(run({"report"}).code, kExitOk);
  for (const fs::path& p : listing()) {
    if (before.contains(p)) continue;
    const auto rel = fs::relative(p, root_ / "out");
    EXPECT_FALSE(rel.empty() || *rel.begin() == "..") << p;
  }
}

}  // namespace
}  // namespace moral::cli
