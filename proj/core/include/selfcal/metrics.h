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

#ifndef SELFCAL_METRICS_H_
#define SELFCAL_METRICS_H_

#include <optional>
#include <span>
#include <vector>

#include "selfcal/calibrators.h"

namespace selfcal {

// Mann-Whitney AUROC: P(pos > neg) + 0.5 P(pos == neg), computed exactly from
// mid-ranks in O(n log n).
double Auroc(std::span<const double> pos_scores,
             std::span<const double> neg_scores);

// 100 * (mean(pos) - mean(neg)), in percentage points.
double DeltaConf(std::span<const double> pos_scores,
                 std::span<const double> neg_scores);

struct RiskCoveragePoint {
  double threshold = 0.0;
  double coverage = 0.0;
  double risk = 0.0;
  std::size_t accepted = 0;
};

// Thresholds are 0, every distinct confidence and 1, ascending. A row is
// accepted when confidence >= threshold; thresholds accepting nothing are
// omitted.
std::vector<RiskCoveragePoint> RiskCoverage(const ConfidenceLog& log);

// 1 - AUROC(correct confidences, wrong confidences). Lower is better.
double AurocRisk(const ConfidenceLog& log);

// Largest coverage over the swept thresholds whose accepted accuracy reaches
// target_accuracy; nullopt when none does.
std::optional<double> CoverageAtRisk(const ConfidenceLog& log,
                                     double target_accuracy);

struct DetectionScores {
  double macro_f1 = 0.0;
  double adversarial_f1 = 0.0;
  double id_f1 = 0.0;
};

// Scores below `threshold` are flagged adversarial.
DetectionScores DetectionF1(std::span<const double> id_scores,
                            std::span<const double> adv_scores,
                            double threshold);

// One sample seen by a two-model cascade.
struct CascadeRow {
  double small_confidence = 0.0;
  int small_prediction = 0;
  int large_prediction = 0;
  int gold = 0;
};

struct CascadePoint {
  double threshold = 0.0;
  double accuracy = 0.0;
  double routed_fraction = 0.0;
};

// Rows with small_confidence < t are answered by the large model.
std::vector<CascadePoint> CascadeCurve(std::span<const CascadeRow> rows,
                                       std::span<const double> thresholds);

// Thresholds 0, 0.01, ..., 1.
std::vector<double> UnitThresholdGrid();

// Trapezoid area of the accuracy curve over UnitThresholdGrid().
double CascadeArea(std::span<const CascadeRow> rows);

}  // namespace selfcal

#endif  // SELFCAL_METRICS_H_
