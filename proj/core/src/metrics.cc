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

#include "selfcal/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "selfcal/common.h"

namespace selfcal {

double Auroc(std::span<const double> pos_scores, std::span<const double> neg_scores) {
  if (pos_scores.empty() || neg_scores.empty()) {
    throw Error("AUROC undefined: both score lists must be non-empty");
  }
  struct Item {
    double score;
    bool positive;
  };
  std::vector<Item> items;
  items.reserve(pos_scores.size() + neg_scores.size());
  for (double s : pos_scores) items.push_back({s, true});
  for (double s : neg_scores) items.push_back({s, false});
  for (const Item& it : items) {
    if (std::isnan(it.score)) throw Error("AUROC undefined for NaN scores");
  }
  std::sort(items.begin(), items.end(),
            [](const Item& a, const Item& b) { return a.score < b.score; });

  // Sum of 1-based mid-ranks of the positives. All quantities are multiples
  // of 0.5 well below 2^53, so the statistic is exact.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    std::size_t pos_in_run = 0;
    while (j < items.size() && items[j].score == items[i].score) {
      pos_in_run += items[j].positive;
      ++j;
    }
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    rank_sum += mid_rank * static_cast<double>(pos_in_run);
    i = j;
  }
  const auto n_pos = static_cast<double>(pos_scores.size());
  const auto n_neg = static_cast<double>(neg_scores.size());
  const double u = rank_sum - n_pos * (n_pos + 1.0) / 2.0;
  return u / (n_pos * n_neg);
}

double DeltaConf(std::span<const double> pos_scores, std::span<const double> neg_scores) {
  if (pos_scores.empty() || neg_scores.empty()) {
    throw Error("Delta-Conf undefined: both score lists must be non-empty");
  }
  auto mean = [](std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  return 100.0 * (mean(pos_scores) - mean(neg_scores));
}

std::vector<RiskCoveragePoint> RiskCoverage(const ConfidenceLog& log) {
  log.Validate();
  std::vector<RiskCoveragePoint> points;
  const std::size_t n = log.size();
  if (n == 0) return points;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return log.confidence[a] < log.confidence[b]; });
  // correct_from[i]: correct rows among order[i..n).
  std::vector<std::size_t> correct_from(n + 1, 0);
  for (std::size_t i = n; i-- > 0;) {
    correct_from[i] = correct_from[i + 1] + static_cast<std::size_t>(log.correct[order[i]]);
  }

  std::vector<double> thresholds = {0.0};
  for (std::size_t i : order) thresholds.push_back(log.confidence[i]);
  thresholds.push_back(1.0);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  for (double t : thresholds) {
    auto first = std::lower_bound(order.begin(), order.end(), t, [&](std::size_t idx, double v) {
      return log.confidence[idx] < v;
    });
    const auto start = static_cast<std::size_t>(first - order.begin());
    const std::size_t accepted = n - start;
    if (accepted == 0) continue;
    const std::size_t errors = accepted - correct_from[start];
    points.push_back({t, static_cast<double>(accepted) / static_cast<double>(n),
                      static_cast<double>(errors) / static_cast<double>(accepted), accepted});
  }
  return points;
}

double AurocRisk(const ConfidenceLog& log) {
  return 1.0 - Auroc(log.CorrectScores(), log.WrongScores());
}

std::optional<double> CoverageAtRisk(const ConfidenceLog& log, double target_accuracy) {
  if (!(target_accuracy > 0.0 && target_accuracy <= 1.0)) {
    throw Error("target accuracy must be in (0,1]");
  }
  std::optional<double> best;
  for (const RiskCoveragePoint& p : RiskCoverage(log)) {
    if (1.0 - p.risk >= target_accuracy - 1e-12) {
      if (!best || p.coverage > *best) best = p.coverage;
    }
  }
  return best;
}

DetectionScores DetectionF1(std::span<const double> id_scores,
                            std::span<const double> adv_scores, double threshold) {
  if (id_scores.empty() || adv_scores.empty()) {
    throw Error("detection F1 needs ID and adversarial scores");
  }
  std::size_t adv_tp = 0, adv_fn = 0, id_tp = 0, id_fn = 0;
  for (double s : adv_scores) (s < threshold ? adv_tp : adv_fn)++;
  for (double s : id_scores) (s < threshold ? id_fn : id_tp)++;
  // An ID sample flagged adversarial is an adversarial false positive and an
  // ID false negative, and vice versa.
  auto f1 = [](std::size_t tp, std::size_t fp, std::size_t fn) {
    const std::size_t denom = 2 * tp + fp + fn;
    return tp == 0 || denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  };
  DetectionScores out;
  out.adversarial_f1 = f1(adv_tp, id_fn, adv_fn);
  out.id_f1 = f1(id_tp, adv_fn, id_fn);
  out.macro_f1 = 0.5 * (out.adversarial_f1 + out.id_f1);
  return out;
}

std::vector<CascadePoint> CascadeCurve(std::span<const CascadeRow> rows,
                                       std::span<const double> thresholds) {
  if (rows.empty()) throw Error("cascade curve needs at least one row");
  std::vector<CascadePoint> out;
  out.reserve(thresholds.size());
  const auto n = static_cast<double>(rows.size());
  for (double t : thresholds) {
    std::size_t hits = 0, routed = 0;
    for (const CascadeRow& r : rows) {
      const bool route = r.small_confidence < t;
      routed += route;
      hits += (route ? r.large_prediction : r.small_prediction) == r.gold;
    }
    out.push_back({t, static_cast<double>(hits) / n, static_cast<double>(routed) / n});
  }
  return out;
}

std::vector<double> UnitThresholdGrid() {
  std::vector<double> grid(101);
  for (int i = 0; i <= 100; ++i) grid[static_cast<std::size_t>(i)] = i / 100.0;
  return grid;
}

double CascadeArea(std::span<const CascadeRow> rows) {
  const auto grid = UnitThresholdGrid();
  const auto curve = CascadeCurve(rows, grid);
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
    area += 0.5 * (curve[i].accuracy + curve[i + 1].accuracy) *
            (curve[i + 1].threshold - curve[i].threshold);
  }
  return area;
}

}  // namespace selfcal
