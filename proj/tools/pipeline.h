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

// Subcommand implementations behind the selfcal tool.

#ifndef SELFCAL_TOOLS_PIPELINE_H_
#define SELFCAL_TOOLS_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "config.h"
#include "selfcal/augment.h"
#include "selfcal/corpus.h"

namespace selfcal::cli {

// Sub-streams of run.seed, one per pipeline stage.
enum RunStream : std::uint64_t {
  kTemperatureSplitStream = 1,
  kVanillaStream = 2,
  kSmoothingStream = 3,
  kToastStream = 4,
  kMainOnlyStream = 5,
  kSmallStream = 6,
  kLargeStream = 7,
  kAdversarialStream = 8,
  kSmallToastStream = 9,
};

struct RunData {
  Dataset train;
  Dataset test;
  SynonymLexicon lexicon;
};

RunData LoadRunData(const RunConfig& config);

void CmdSynth(const RunConfig& config, const std::filesystem::path& out_dir);
void CmdTrain(const RunConfig& config, Method method, const std::filesystem::path& out_dir);
void CmdToast(const RunConfig& config, const std::filesystem::path& out_dir);

// End-to-end evaluation. Returns the metrics.json document.
nlohmann::ordered_json CmdEval(const RunConfig& config, const std::filesystem::path& out_dir,
                               std::ostream& log);

// Appends to out_dir/sweep.csv, skipping grid points already present.
// `stop_after` limits the number of new points (simulated interruption).
// Returns the number of points run.
std::size_t CmdSweep(const RunConfig& config, const std::filesystem::path& out_dir,
                     std::optional<std::size_t> stop_after, std::ostream& log);

void CmdAttack(const RunConfig& config, const std::optional<std::filesystem::path>& model,
               const std::filesystem::path& out_path, std::ostream& log);

// Summary table of an existing run directory.
void CmdReport(const std::filesystem::path& run_dir, std::ostream& out);

// Method x {AUROC, Delta-Conf, accuracy} table from a metrics document.
void PrintSummary(const nlohmann::ordered_json& metrics, std::ostream& out);

std::string FileDigest(const std::filesystem::path& path);

}  // namespace selfcal::cli

#endif  // SELFCAL_TOOLS_PIPELINE_H_
