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

// selfcal: synthetic data, training, self-calibration runs, sweeps and
// downstream evaluation from one INI config.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "config.h"
#include "pipeline.h"
#include "selfcal/common.h"

namespace {

using selfcal::cli::ConfigError;
using selfcal::cli::RunConfig;

struct CommonArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<int> jobs;
  std::optional<std::string> out;
};

void AddCommon(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config, "INI config file")->required();
  cmd->add_option("--set", args.overrides, "Override a config key: section.key=value");
  cmd->add_option("--jobs", args.jobs, "Parallel workers (overrides run.jobs)");
  cmd->add_option("-o,--out", args.out, "Output location (overrides run.output_dir)");
}

RunConfig Load(const CommonArgs& args, std::vector<std::string> extra = {}) {
  std::vector<std::string> overrides = args.overrides;
  if (args.jobs) overrides.push_back("run.jobs=" + std::to_string(*args.jobs));
  if (args.out) overrides.push_back("run.output_dir=" + *args.out);
  overrides.insert(overrides.end(), extra.begin(), extra.end());
  return selfcal::cli::LoadConfig(args.config, overrides);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Confidence estimation with a self-calibration task"};
  app.require_subcommand(1);

  CommonArgs synth_args, train_args, toast_args, eval_args, sweep_args, attack_args;
  auto* synth = app.add_subcommand("synth", "Write the synthetic dataset, hardness flags and lexicon");
  AddCommon(synth, synth_args);

  auto* train = app.add_subcommand("train", "Train a baseline main-task model");
  AddCommon(train, train_args);
  std::string train_method = "vanilla";
  train->add_option("--method", train_method, "vanilla | temperature | label_smoothing");

  auto* toast = app.add_subcommand("toast", "Run the self-calibration pipeline and keep its artifacts");
  AddCommon(toast, toast_args);

  auto* eval = app.add_subcommand("eval", "End-to-end run: all methods and evaluators");
  AddCommon(eval, eval_args);

  auto* sweep = app.add_subcommand("sweep", "Pilot sweep over the calibration task");
  AddCommon(sweep, sweep_args);
  std::optional<std::string> sweep_kind;
  std::optional<std::size_t> stop_after;
  sweep->add_option("--kind", sweep_kind, "size | imbalance | features | k (overrides sweep.kind)");
  sweep->add_option("--stop-after", stop_after)->group("");

  auto* attack = app.add_subcommand("attack", "Greedy substitution attack on the test split");
  AddCommon(attack, attack_args);
  std::optional<std::string> attack_model;
  attack->add_option("--model", attack_model, "Victim model file (default: train one)");

  auto* report = app.add_subcommand("report", "Print the summary of a run directory");
  std::string report_dir;
  report->add_option("run_dir", report_dir, "Run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      const RunConfig c = Load(synth_args);
      selfcal::cli::CmdSynth(c, c.output_dir);
      std::cout << "wrote synthetic data to " << c.output_dir << "\n";
    } else if (train->parsed()) {
      const RunConfig c = Load(train_args);
      selfcal::cli::CmdTrain(c, selfcal::ParseMethod(train_method), c.output_dir);
      std::cout << "wrote model to " << c.output_dir << "\n";
    } else if (toast->parsed()) {
      const RunConfig c = Load(toast_args);
      selfcal::cli::CmdToast(c, c.output_dir);
      std::cout << "wrote toast artifacts to " << c.output_dir << "\n";
    } else if (eval->parsed()) {
      const RunConfig c = Load(eval_args);
      const auto metrics = selfcal::cli::CmdEval(c, c.output_dir, std::cerr);
      selfcal::cli::PrintSummary(metrics, std::cout);
    } else if (sweep->parsed()) {
      std::vector<std::string> extra;
      if (sweep_kind) extra.push_back("sweep.kind=" + *sweep_kind);
      const RunConfig c = Load(sweep_args, extra);
      const std::size_t n = selfcal::cli::CmdSweep(c, c.output_dir, stop_after, std::cerr);
      std::cout << "ran " << n << " grid points; rows in " << c.output_dir << "/sweep.csv\n";
    } else if (attack->parsed()) {
      const RunConfig c = Load(attack_args);
      std::optional<std::filesystem::path> model;
      if (attack_model) model = *attack_model;
      const std::filesystem::path out =
          attack_args.out ? std::filesystem::path(*attack_args.out) : std::filesystem::path(c.output_dir) / "adversarial.jsonl";
      selfcal::cli::CmdAttack(c, model, out, std::cerr);
    } else if (report->parsed()) {
      selfcal::cli::CmdReport(report_dir, std::cout);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
