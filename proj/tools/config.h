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

// INI run configuration for the selfcal tool.

#ifndef SELFCAL_TOOLS_CONFIG_H_
#define SELFCAL_TOOLS_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "selfcal/apps.h"
#include "selfcal/calibrators.h"
#include "selfcal/corpus.h"
#include "selfcal/model.h"
#include "selfcal/toast.h"

namespace selfcal::cli {

// Unknown keys, malformed values and missing mandatory keys. The tool exits
// with status 2 on this error.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  // [run]
  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";
  std::vector<Method> methods = {Method::kVanilla, Method::kTemperature,
                                 Method::kLabelSmoothing, Method::kToast};
  std::vector<std::string> evaluators = {"selective", "adversarial", "cascade"};
  int jobs = 1;

  // [data]
  std::string source = "synthetic";  // synthetic | files
  std::filesystem::path train_path;
  std::filesystem::path test_path;
  std::filesystem::path lexicon_path;
  TaskKind task = TaskKind::kSingleText;

  // [synthetic]; seed falls back to run.seed when unset
  SynthConfig synthetic;
  bool synthetic_seed_set = false;

  FeaturizerConfig featurizer;  // [featurizer]

  // [train]: vanilla / temperature / label_smoothing models
  TrainConfig train;
  double label_smoothing_epsilon = 0.1;
  double temperature_split = 0.1;

  ToastConfig toast;  // [toast] and [augment]

  std::vector<double> selective_targets = {0.9, 0.95, 0.99};  // [selective]

  // [adversarial]
  int attack_budget = 5;
  std::size_t max_id = 1000;
  std::size_t max_adversarial = 1000;

  // [cascade]
  TrainConfig small;
  TrainConfig large;

  // [sweep]
  SweepKind sweep_kind = SweepKind::kSize;
  std::vector<std::uint64_t> sweep_seeds;  // defaults to {run.seed}
  PilotConfig pilot;

  RunConfig();

  // Fully resolved "section.key" -> value map, as recorded in meta.json.
  std::map<std::string, std::string> Resolved() const;
};

// `overrides` are "section.key=value" strings applied after the file.
RunConfig LoadConfig(const std::filesystem::path& path,
                     const std::vector<std::string>& overrides = {});
RunConfig ParseConfig(const std::string& ini_text,
                      const std::vector<std::string>& overrides = {});

// Every accepted "section.key".
std::vector<std::string> KnownKeys();

}  // namespace selfcal::cli

#endif  // SELFCAL_TOOLS_CONFIG_H_
