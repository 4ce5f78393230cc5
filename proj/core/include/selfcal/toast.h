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

#ifndef SELFCAL_TOAST_H_
#define SELFCAL_TOAST_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "selfcal/augment.h"
#include "selfcal/common.h"
#include "selfcal/corpus.h"
#include "selfcal/model.h"
#include "selfcal/objective.h"

namespace selfcal {

struct ToastConfig {
  int k = 2;
  double alpha = 0.1;
  int augment_per_negative = 1;
  double rate = 0.1;  // transform intensity

  bool no_cross_annotation = false;  // 9:1 split instead of K folds
  bool no_downsample = false;
  bool no_augment = false;
  bool no_alpha_decay = false;  // alpha = 1

  CalibInputs calib_inputs = CalibInputs::kAll;
  FeaturizerConfig featurizer;
  TrainConfig annotator;  // main-task models of stage 1
  TrainConfig train;      // stage-3 multi-task model
  std::uint64_t seed = 0;
  int jobs = 1;  // parallel annotation rounds

  ToastConfig();
  void Validate() const;
  double effective_alpha() const { return no_alpha_decay ? 1.0 : alpha; }
};

struct AnnotationRound {
  int round = 0;
  std::vector<std::string> training_ids;
  std::vector<std::string> annotated_ids;
};

struct CrossAnnotation {
  std::vector<CalibrationRecord> records;  // dataset order
  std::vector<AnnotationRound> rounds;
};

// Builds a predictor from a training set. The default trains a main-task
// model; tests substitute oracles.
using Annotator = std::function<int(const Sample&)>;
using AnnotatorFactory =
    std::function<Annotator(const Dataset& train, int round)>;

CrossAnnotation CrossAnnotate(const Dataset& dataset, const ToastConfig& config);
CrossAnnotation CrossAnnotate(const Dataset& dataset, int k, std::uint64_t seed,
                              const AnnotatorFactory& factory, int jobs = 1);

// Train on a 90% slice and annotate the remaining 10%.
CrossAnnotation HoldoutAnnotate(const Dataset& dataset, const ToastConfig& config);

// Keeps every minority record and a uniform subset of the majority of the
// same size. Output keeps input order.
std::vector<CalibrationRecord> DownsampleBalance(
    std::span<const CalibrationRecord> records, Rng& rng);

struct AugmentedRecord {
  std::string sample_id;
  std::string text_a;
  std::optional<std::string> text_b;
  std::string transformed_a;
  std::optional<std::string> transformed_b;
  int predicted_label = 0;
  TransformKind kind = TransformKind::kSynonymSubstitution;

  friend bool operator==(const AugmentedRecord&,
                         const AugmentedRecord&) = default;
};

// augment_per_negative variants for every correctness-0 record.
std::vector<AugmentedRecord> BuildAugmentSet(
    std::span<const CalibrationRecord> records, const SynonymLexicon& lexicon,
    const ToastConfig& config, Rng& rng);

struct MultitaskResult {
  ModelParameters params;
  std::vector<ObjectiveTerms> trace;  // one entry per step
};

// Fresh model minimizing L_o + L_c + alpha * L_c*. One step takes one batch
// from each non-empty set; the main set defines an epoch and the other two
// cycle with their own reshuffles.
MultitaskResult TrainMultitask(const Dataset& dataset,
                               std::span<const CalibrationRecord> dstar,
                               std::span<const AugmentedRecord> daug,
                               const ToastConfig& config);

struct ToastArtifacts {
  std::vector<CalibrationRecord> annotated;  // before post-processing
  std::vector<CalibrationRecord> dstar;      // after post-processing
  std::vector<AugmentedRecord> daug;
  std::vector<AnnotationRound> rounds;
  std::vector<ObjectiveTerms> trace;
  std::string stage1;  // "cross_annotation" or "holdout_9_1"
};

struct ToastResult {
  ModelParameters params;
  ToastArtifacts artifacts;
};

ToastResult RunToast(const Dataset& dataset, const ToastConfig& config,
                     const SynonymLexicon& lexicon);

// dstar.jsonl, daug.jsonl, losses.csv and meta.json under `dir`.
void WriteArtifacts(const ToastArtifacts& artifacts, const ToastConfig& config,
                    const std::vector<std::string>& label_names,
                    const std::filesystem::path& dir);

}  // namespace selfcal

#endif  // SELFCAL_TOAST_H_
