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

#ifndef SELFCAL_APPS_H_
#define SELFCAL_APPS_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "selfcal/calibrators.h"
#include "selfcal/corpus.h"
#include "selfcal/metrics.h"
#include "selfcal/model.h"
#include "selfcal/toast.h"

namespace selfcal {

// ---------------------------------------------------------------------------
// Selective classification.

struct SelectiveReport {
  double accuracy = 0.0;
  double auroc_risk = 0.0;
  // (target accuracy, max coverage or nullopt)
  std::vector<std::pair<double, std::optional<double>>> coverage_at;
  std::vector<RiskCoveragePoint> curve;
  ConfidenceLog log;
};

SelectiveReport SelectiveEval(const Calibrator& calibrator,
                              const Dataset& dataset,
                              std::span<const double> targets);
SelectiveReport SelectiveEvalLog(ConfidenceLog log,
                                 std::span<const double> targets);

// ---------------------------------------------------------------------------
// Adversarial sample detection.

struct AdversarialReport {
  double auroc = 0.0;       // ID confidences as positives
  double delta_conf = 0.0;  // ID minus adversarial, percentage points
  std::vector<std::pair<double, DetectionScores>> detection;  // 0.01 grid
  double best_threshold = 0.0;
  double best_macro_f1 = 0.0;
  std::vector<double> id_scores;
  std::vector<double> adv_scores;
};

// ID samples are min(max_id, |id_samples|) drawn without replacement by
// `seed`; every adversarial sample is used.
AdversarialReport AdversarialEval(const Calibrator& calibrator,
                                  const Dataset& id_samples,
                                  const Dataset& adv_samples,
                                  std::size_t max_id = 1000,
                                  std::uint64_t seed = 0);
AdversarialReport AdversarialEvalScores(std::vector<double> id_scores,
                                        std::vector<double> adv_scores);

// Runs GreedyAttack on every correctly classified sample until `limit`
// successes; failures and misclassified inputs are skipped.
struct AttackBatch {
  std::vector<Sample> adversarial;
  std::vector<std::string> origin_ids;
  std::size_t attempted = 0;
};
AttackBatch AttackDataset(const ModelParameters& victim, const Dataset& dataset,
                          const SynonymLexicon& lexicon, int budget,
                          std::size_t limit);

// ---------------------------------------------------------------------------
// Model cascading.

struct CascadeReport {
  std::vector<CascadePoint> curve;  // UnitThresholdGrid() plus t = 1.01
  double area = 0.0;
  double small_accuracy = 0.0;
  double large_accuracy = 0.0;
};

CascadeReport CascadeEval(const Calibrator& small, const ModelParameters& large,
                          const Dataset& dataset);

// ---------------------------------------------------------------------------
// Pilot sweeps over the calibration task.

enum class SweepKind { kSize, kImbalance, kFeatures, kK };

std::string_view SweepKindName(SweepKind kind);
SweepKind ParseSweepKind(std::string_view name);

struct PilotConfig {
  FeaturizerConfig featurizer;
  TrainConfig main;       // annotator model, 5 epochs
  TrainConfig multitask;  // calibration-task training, 8 epochs
  double pool_fraction = 0.5;  // training share held out for annotation

  std::vector<int> sizes = {40, 80, 160, 320, 640};
  int imbalance_total = 200;
  std::vector<double> ratios = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  int fixed_count = 60;
  std::vector<int> fixed_other = {15, 30, 60, 120, 240};
  std::vector<int> k_values = {2, 3, 4, 5};
  ToastConfig toast;  // K sweep

  PilotConfig();
  void Validate() const;
};

// One grid point of a sweep; `key()` identifies it in sweep.csv.
struct SweepPoint {
  SweepKind kind = SweepKind::kSize;
  std::string variant;  // size | ratio | fix_neg | fix_pos | all | ... | k
  double value = 0.0;
  std::uint64_t seed = 0;

  std::string key() const;
};

struct SweepRow {
  SweepPoint point;
  int n_pos = 0;
  int n_neg = 0;
  bool skipped = false;
  std::string reason;
  double auroc = 0.0;
  double delta_conf = 0.0;
  double accuracy = 0.0;
};

// Ordered grid for one sweep kind and seed list. Size rows ascend by size.
std::vector<SweepPoint> PlanSweep(SweepKind kind, const PilotConfig& config,
                                  std::span<const std::uint64_t> seeds);

// Per-seed shared state: the pool annotated by a main-task model trained on
// the remaining data.
struct PilotContext {
  Dataset train;
  Dataset test;
  Dataset main_part;
  std::vector<CalibrationRecord> pool_records;
  std::uint64_t seed = 0;
};

PilotContext PreparePilot(const Dataset& train, const Dataset& test,
                          const PilotConfig& config, std::uint64_t seed);

SweepRow RunSweepPoint(const SweepPoint& point, const PilotContext& context,
                       const PilotConfig& config,
                       const SynonymLexicon& lexicon);

// Runs every planned point not rejected by `skip`, calling `on_row` in plan
// order as rows complete.
std::vector<SweepRow> PilotSweeps(
    const Dataset& train, const Dataset& test, SweepKind kind,
    const PilotConfig& config, std::span<const std::uint64_t> seeds,
    const SynonymLexicon& lexicon,
    const std::function<bool(const SweepPoint&)>& skip = {},
    const std::function<void(const SweepRow&)>& on_row = {}, int jobs = 1);

// Calibration AUROC and Delta-Conf of a model's P_True on a test set.
struct CalibrationQuality {
  double auroc = 0.0;
  double delta_conf = 0.0;
  double accuracy = 0.0;
  bool defined = false;  // both correct and wrong predictions present
};
CalibrationQuality EvaluateCalibration(const Calibrator& calibrator,
                                       const Dataset& test);

}  // namespace selfcal

#endif  // SELFCAL_APPS_H_
