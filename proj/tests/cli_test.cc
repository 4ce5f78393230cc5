/*
 * Copyright 2026 The selfcal Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "config.h"
#include "pipeline.h"
#include "test_util.h"

namespace selfcal::cli {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int exit_code = -1;
  std::string output;  // stdout and stderr
};

Outcome RunCli(const std::string& args) {
  const std::string cmd = std::string(SELFCAL_CLI_PATH) + " " + args + " 2>&1";
  Outcome out;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return out;
  std::array<char, 4096> buf{};
  while (std::size_t n = fread(buf.data(), 1, buf.size(), pipe)) out.output.append(buf.data(), n);
  const int status = pclose(pipe);
  out.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return out;
}

// A small synthetic run that finishes in about a second.
fs::path TinyConfig(const fs::path& dir) {
  const fs::path path = dir / "tiny.ini";
  testing::WriteText(path,
                     "[run]\nseed = 11\noutput_dir = " + (dir / "run").string() +
                         "\n\n[synthetic]\nsamples_per_class = 150\ntest_samples_per_class = 80\n"
                         "\n[featurizer]\nhash_dim = 4096\n\n[train]\nhidden_dim = 16\n"
                         "\n[adversarial]\nmax_adversarial = 60\n"
                         "\n[cascade]\nlarge_hidden_dim = 32\n"
                         "\n[sweep]\nsizes = 20,40,80\nseeds = 1,2\nmultitask_epochs = 3\n");
  return path;
}

TEST(ConfigTest, MissingSeedIsRejected) {
  try {
    ParseConfig("[run]\noutput_dir = x\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("run.seed"), std::string::npos);
  }
}

TEST(ConfigTest, UnknownKeyIsNamed) {
  try {
    ParseConfig("[run]\nseed = 1\n[toast]\nalpah = 0.2\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("toast.alpah"), std::string::npos);
  }
  EXPECT_THROW(ParseConfig("[run]\nseed = 1\n", {"run.colour=red"}), ConfigError);
  EXPECT_THROW(ParseConfig("[run]\nseed = 1\n", {"no-equals-sign"}), ConfigError);
}

TEST(ConfigTest, BadValuesAreConfigErrors) {
  EXPECT_THROW(ParseConfig("[run]\nseed = 1\n[toast]\nk = 1\n"), ConfigError);
  EXPECT_THROW(ParseConfig("[run]\nseed = 1\n[train]\nepochs = many\n"), ConfigError);
  EXPECT_THROW(ParseConfig("[run]\nseed = 1\nmethods = vanilla,ensemble\n"), ConfigError);
  EXPECT_THROW(ParseConfig("[run]\nseed = 1\n[data]\nsource = files\n"), ConfigError);
}

TEST(ConfigTest, DefaultsOverridesAndFanOut) {
  const RunConfig c = ParseConfig("[run]\nseed = 5\n[featurizer]\nhash_dim = 1024\n",
                                  {"toast.alpha=0.3", "sweep.seeds=4,8"});
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.synthetic.seed, 5u);
  EXPECT_DOUBLE_EQ(c.toast.alpha, 0.3);
  EXPECT_EQ(c.toast.k, 2);
  EXPECT_EQ(c.toast.featurizer.hash_dim, 1024);
  EXPECT_EQ(c.pilot.featurizer.hash_dim, 1024);
  EXPECT_EQ(c.sweep_seeds, (std::vector<std::uint64_t>{4, 8}));
  EXPECT_DOUBLE_EQ(c.label_smoothing_epsilon, 0.1);
  const auto resolved = c.Resolved();
  EXPECT_EQ(resolved.at("toast.alpha"), "0.3");
  for (const std::string& key : KnownKeys()) EXPECT_TRUE(resolved.count(key)) << key;
}

TEST(CliTest, InvalidKeyExitsWithConfigError) {
  const fs::path dir = testing::TempDir("cli_invalid");
  const Outcome r = RunCli("eval -c " + TinyConfig(dir).string() + " --set toast.bogus=1");
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.output.find("toast.bogus"), std::string::npos) << r.output;
  EXPECT_FALSE(fs::exists(dir / "run" / "metrics.json"));
  EXPECT_EQ(RunCli("eval -c " + (dir / "absent.ini").string()).exit_code, 2);
}

TEST(CliTest, EvalIsByteReproducible) {
  const fs::path dir = testing::TempDir("cli_eval");
  const std::string cfg = TinyConfig(dir).string();
  const Outcome a = RunCli("eval -c " + cfg + " -o " + (dir / "a").string());
  ASSERT_EQ(a.exit_code, 0) << a.output;
  EXPECT_NE(a.output.find("toast"), std::string::npos);
  const Outcome b = RunCli("eval -c " + cfg + " -o " + (dir / "b").string() + " --jobs 2");
  ASSERT_EQ(b.exit_code, 0) << b.output;
  EXPECT_EQ(testing::ReadText(dir / "a" / "metrics.json"),
            testing::ReadText(dir / "b" / "metrics.json"));

  const auto metrics = nlohmann::json::parse(testing::ReadText(dir / "a" / "metrics.json"));
  for (const char* m : {"vanilla", "temperature", "label_smoothing", "toast"}) {
    EXPECT_TRUE(metrics.at("methods").contains(m)) << m;
  }
  for (const char* e : {"selective", "adversarial", "cascade"}) EXPECT_TRUE(metrics.contains(e)) << e;

  const auto meta = nlohmann::json::parse(testing::ReadText(dir / "a" / "meta.json"));
  EXPECT_EQ(meta.at("config").at("run.seed"), "11");
  EXPECT_TRUE(meta.contains("seeds"));
  const auto& artifacts = meta.at("artifacts");
  ASSERT_TRUE(artifacts.contains("metrics.json"));
  EXPECT_EQ(artifacts.at("metrics.json").get<std::string>(), FileDigest(dir / "a" / "metrics.json"));
  EXPECT_TRUE(fs::exists(dir / "a" / "toast" / "dstar.jsonl"));

  const Outcome report = RunCli("report " + (dir / "a").string());
  EXPECT_EQ(report.exit_code, 0);
  EXPECT_NE(report.output.find("AUROC"), std::string::npos);
}

std::vector<std::string> Lines(const fs::path& path) {
  std::istringstream in(testing::ReadText(path));
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

TEST(CliTest, SweepResumesAfterInterruption) {
  const fs::path dir = testing::TempDir("cli_sweep");
  const std::string cfg = TinyConfig(dir).string();
  const std::string once = (dir / "once").string(), resumed = (dir / "resumed").string();
  ASSERT_EQ(RunCli("sweep -c " + cfg + " -o " + once).exit_code, 0);
  const auto full = Lines(dir / "once" / "sweep.csv");
  ASSERT_EQ(full.size(), 1u + 6u);

  ASSERT_EQ(RunCli("sweep -c " + cfg + " -o " + resumed + " --stop-after 2").exit_code, 0);
  ASSERT_EQ(Lines(dir / "resumed" / "sweep.csv").size(), 3u);
  // Simulate a kill during a write.
  {
    std::ofstream torn(dir / "resumed" / "sweep.csv", std::ios::app);
    torn << full[3].substr(0, full[3].size() / 2);
  }
  const Outcome r = RunCli("sweep -c " + cfg + " -o " + resumed);
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_NE(r.output.find("resuming"), std::string::npos);
  EXPECT_EQ(Lines(dir / "resumed" / "sweep.csv"), full);

  std::vector<double> sizes;
  for (std::size_t i = 1; i < full.size(); ++i) {
    const auto first = full[i].find(',');
    EXPECT_EQ(full[i].substr(first + 1, 10), "size,size,");
    sizes.push_back(std::stod(full[i].substr(first + 11)));
  }
  EXPECT_TRUE(std::is_sorted(sizes.begin(), sizes.end()));
}

TEST(CliTest, KSweepHasOneRowPerK) {
  const fs::path dir = testing::TempDir("cli_ksweep");
  const Outcome r = RunCli("sweep -c " + TinyConfig(dir).string() + " --kind k --set sweep.seeds=3 -o " +
                        (dir / "k").string());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const auto lines = Lines(dir / "k" / "sweep.csv");
  ASSERT_EQ(lines.size(), 5u);
  for (int k = 2; k <= 5; ++k) {
    EXPECT_EQ(lines[static_cast<std::size_t>(k - 1)].rfind("k:k:" + std::to_string(k) + ":seed=3,", 0), 0u);
  }
}

TEST(CliTest, StagewiseSubcommands) {
  const fs::path dir = testing::TempDir("cli_stages");
  const std::string cfg = TinyConfig(dir).string();
  ASSERT_EQ(RunCli("synth -c " + cfg + " -o " + (dir / "data").string()).exit_code, 0);
  for (const char* f : {"train.jsonl", "test.jsonl", "lexicon.tsv", "meta.json"}) {
    EXPECT_TRUE(fs::exists(dir / "data" / f)) << f;
  }
  const std::string files = " --set data.source=files --set data.train=" + (dir / "data" / "train.jsonl").string() +
                            " --set data.test=" + (dir / "data" / "test.jsonl").string() +
                            " --set data.lexicon=" + (dir / "data" / "lexicon.tsv").string();
  const Outcome train = RunCli("train -c " + cfg + files + " --method temperature -o " + (dir / "ts").string());
  ASSERT_EQ(train.exit_code, 0) << train.output;
  EXPECT_TRUE(fs::exists(dir / "ts" / "model.bin"));
  const auto meta = nlohmann::json::parse(testing::ReadText(dir / "ts" / "meta.json"));
  EXPECT_GT(meta.at("temperature").get<double>(), 0.0);

  const Outcome toast = RunCli("toast -c " + cfg + files + " -o " + (dir / "toast").string());
  ASSERT_EQ(toast.exit_code, 0) << toast.output;
  EXPECT_TRUE(fs::exists(dir / "toast" / "daug.jsonl"));

  const Outcome attack = RunCli("attack -c " + cfg + files + " --model " + (dir / "ts" / "model.bin").string() +
                             " -o " + (dir / "adv.jsonl").string());
  ASSERT_EQ(attack.exit_code, 0) << attack.output;
  EXPECT_TRUE(fs::exists(dir / "adv.jsonl"));
  EXPECT_NE(RunCli("train -c " + cfg + " --method toast -o " + (dir / "x").string()).exit_code, 0);
}

}  // namespace
}  // namespace selfcal::cli
