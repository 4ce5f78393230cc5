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

#include "selfcal/apps.h"

#include <algorithm>
#include <cmath>
#include <future>
#include <map>
#include <memory>
#include <numeric>

#include "selfcal/common.h"

namespace selfcal {

SelectiveReport SelectiveEvalLog(ConfidenceLog log, std::span<const double> targets) {
  log.Validate();
  SelectiveReport report;
  report.accuracy = log.accuracy();
  report.auroc_risk = AurocRisk(log);
  for (double target : targets) report.coverage_at.emplace_back(target, CoverageAtRisk(log, target));
  report.curve = RiskCoverage(log);
  report.log = std::move(log);
  return report;
}

SelectiveReport SelectiveEval(const Calibrator& calibrator, const Dataset& dataset,
                              std::span<const double> targets) {
  return SelectiveEvalLog(BuildLog(calibrator, dataset, "id"), targets);
}

AdversarialReport AdversarialEvalScores(std::vector<double> id_scores,
                                        std::vector<double> adv_scores) {
  if (adv_scores.empty()) throw Error("adversarial evaluation needs adversarial samples");
  if (id_scores.empty()) throw Error("adversarial evaluation needs ID samples");
  AdversarialReport report;
  report.auroc = Auroc(id_scores, adv_scores);
  report.delta_conf = DeltaConf(id_scores, adv_scores);
  for (double t : UnitThresholdGrid()) {
    DetectionScores scores = DetectionF1(id_scores, adv_scores, t);
    if (scores.macro_f1 > report.best_macro_f1) {
      report.best_macro_f1 = scores.macro_f1;
      report.best_threshold = t;
    }
    report.detection.emplace_back(t, scores);
  }
  report.id_scores = std::move(id_scores);
  report.adv_scores = std::move(adv_scores);
  return report;
}

AdversarialReport AdversarialEval(const Calibrator& calibrator, const Dataset& id_samples,
                                  const Dataset& adv_samples, std::size_t max_id,
                                  std::uint64_t seed) {
  if (adv_samples.empty()) throw Error("adversarial evaluation needs adversarial samples");
  std::vector<std::size_t> chosen(id_samples.size());
  std::iota(chosen.begin(), chosen.end(), 0);
  if (chosen.size() > max_id) {
    Rng rng(DeriveSeed(seed, 0xAD5));
    std::shuffle(chosen.begin(), chosen.end(), rng);
    chosen.resize(max_id);
    std::sort(chosen.begin(), chosen.end());
  }
  std::vector<double> id_scores, adv_scores;
  for (std::size_t i : chosen) id_scores.push_back(calibrator.Score(id_samples[i]).confidence);
  for (const Sample& s : adv_samples.samples()) {
    adv_scores.push_back(calibrator.Score(s).confidence);
  }
  return AdversarialEvalScores(std::move(id_scores), std::move(adv_scores));
}

AttackBatch AttackDataset(const ModelParameters& victim, const Dataset& dataset,
                          const SynonymLexicon& lexicon, int budget, std::size_t limit) {
  AttackBatch batch;
  for (const Sample& s : dataset.samples()) {
    if (batch.adversarial.size() >= limit) break;
    if (Predict(victim, s).label != s.label) continue;
    ++batch.attempted;
    AttackResult result = GreedyAttack(victim, s, lexicon, budget);
    if (!result.success) continue;
    batch.adversarial.push_back(std::move(result.adversarial));
    batch.origin_ids.push_back(s.id);
  }
  return batch;
}

CascadeReport CascadeEval(const Calibrator& small, const ModelParameters& large,
                          const Dataset& dataset) {
  if (dataset.empty()) throw Error("cascade evaluation needs samples");
  std::vector<CascadeRow> rows;
  rows.reserve(dataset.size());
  for (const Sample& s : dataset.samples()) {
    const ScoredPrediction scored = small.Score(s);
    rows.push_back({scored.confidence, scored.label, Predict(large, s).label, s.label});
  }
  auto thresholds = UnitThresholdGrid();
  thresholds.push_back(1.01);
  CascadeReport report;
  report.curve = CascadeCurve(rows, thresholds);
  report.area = CascadeArea(rows);
  std::size_t small_hits = 0, large_hits = 0;
  for (const CascadeRow& r : rows) {
    small_hits += r.small_prediction == r.gold;
    large_hits += r.large_prediction == r.gold;
  }
  report.small_accuracy = static_cast<double>(small_hits) / static_cast<double>(rows.size());
  report.large_accuracy = static_cast<double>(large_hits) / static_cast<double>(rows.size());
  return report;
}

// ---------------------------------------------------------------------------

std::string_view SweepKindName(SweepKind kind) {
  switch (kind) {
    case SweepKind::kSize: return "size";
    case SweepKind::kImbalance: return "imbalance";
    case SweepKind::kFeatures: return "features";
    case SweepKind::kK: return "k";
  }
  return "size";
}

SweepKind ParseSweepKind(std::string_view name) {
  for (SweepKind k : {SweepKind::kSize, SweepKind::kImbalance, SweepKind::kFeatures,
                      SweepKind::kK}) {
    if (SweepKindName(k) == name) return k;
  }
  throw Error("unknown sweep kind '" + std::string(name) + "'");
}

PilotConfig::PilotConfig() {
  main.epochs = 5;
  multitask.epochs = 8;
}

void PilotConfig::Validate() const {
  featurizer.Validate();
  main.Validate();
  multitask.Validate();
  toast.Validate();
  if (!(pool_fraction > 0.0 && pool_fraction < 1.0)) {
    throw Error("pilot: pool_fraction must be in (0,1)");
  }
  for (int s : sizes) {
    if (s < 2) throw Error("pilot: calibration sizes must be >= 2");
  }
  for (double r : ratios) {
    if (!(r > 0.0 && r < 1.0)) throw Error("pilot: imbalance ratios must be in (0,1)");
  }
  if (imbalance_total < 2) throw Error("pilot: imbalance_total must be >= 2");
  if (fixed_count < 1) throw Error("pilot: fixed_count must be >= 1");
  for (int k : k_values) {
    if (k < 2) throw Error("pilot: K values must be >= 2");
  }
}

std::string SweepPoint::key() const {
  return std::string(SweepKindName(kind)) + ":" + variant + ":" + FormatDouble(value) +
         ":seed=" + std::to_string(seed);
}

std::vector<SweepPoint> PlanSweep(SweepKind kind, const PilotConfig& config,
                                  std::span<const std::uint64_t> seeds) {
  std::vector<SweepPoint> plan;
  auto add = [&](std::string variant, double value) {
    for (std::uint64_t seed : seeds) plan.push_back({kind, variant, value, seed});
  };
  switch (kind) {
    case SweepKind::kSize: {
      std::vector<int> sizes = config.sizes;
      std::sort(sizes.begin(), sizes.end());
      for (int s : sizes) add("size", s);
      break;
    }
    case SweepKind::kImbalance:
      for (double r : config.ratios) add("ratio", r);
      for (int n : config.fixed_other) add("fix_neg", n);
      for (int n : config.fixed_other) add("fix_pos", n);
      break;
    case SweepKind::kFeatures:
      for (CalibInputs in : {CalibInputs::kAll, CalibInputs::kWithoutPrediction,
                             CalibInputs::kWithoutSample}) {
        add(std::string(CalibInputsName(in)), 0);
      }
      break;
    case SweepKind::kK:
      for (int k : config.k_values) add("k", k);
      break;
  }
  return plan;
}

namespace {

enum PilotStream : std::uint64_t {
  kPoolSplitStream = 21,
  kPoolAnnotatorStream = 22,
  kSubsetStream = 23,
  kPilotTrainStream = 24,
};

}  // namespace

PilotContext PreparePilot(const Dataset& train, const Dataset& test, const PilotConfig& config,
                          std::uint64_t seed) {
  config.Validate();
  Rng rng(DeriveSeed(seed, kPoolSplitStream));
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(train.num_classes()));
  for (std::size_t i = 0; i < train.size(); ++i) {
    by_class[static_cast<std::size_t>(train[i].label)].push_back(i);
  }
  std::vector<std::size_t> pool, main;
  for (auto& group : by_class) {
    std::shuffle(group.begin(), group.end(), rng);
    const auto n_pool = static_cast<std::size_t>(
        std::llround(config.pool_fraction * static_cast<double>(group.size())));
    pool.insert(pool.end(), group.begin(), group.begin() + static_cast<std::ptrdiff_t>(n_pool));
    main.insert(main.end(), group.begin() + static_cast<std::ptrdiff_t>(n_pool), group.end());
  }
  std::sort(pool.begin(), pool.end());
  std::sort(main.begin(), main.end());

  PilotContext ctx{train, test, train.Subset(main), {}, seed};
  TrainConfig tc = config.main;
  tc.seed = DeriveSeed(seed, kPoolAnnotatorStream);
  const ModelParameters annotator = TrainMain(ctx.main_part, config.featurizer, tc).params;
  for (std::size_t i : pool) {
    const Sample& s = train[i];
    const int pred = Predict(annotator, s).label;
    ctx.pool_records.push_back({s.id, s.text_a, s.text_b, pred, pred == s.label ? 1 : 0});
  }
  return ctx;
}

CalibrationQuality EvaluateCalibration(const Calibrator& calibrator, const Dataset& test) {
  const ConfidenceLog log = BuildLog(calibrator, test, "test");
  CalibrationQuality q;
  q.accuracy = log.accuracy();
  const auto pos = log.CorrectScores();
  const auto neg = log.WrongScores();
  if (pos.empty() || neg.empty()) return q;
  q.defined = true;
  q.auroc = Auroc(pos, neg);
  q.delta_conf = DeltaConf(pos, neg);
  return q;
}

namespace {

SweepRow Skipped(SweepRow row, std::string reason) {
  row.skipped = true;
  row.reason = std::move(reason);
  return row;
}

void Score(SweepRow& row, const ModelParameters& params, const Dataset& test) {
  const Calibrator toast(Method::kToast, std::make_shared<const ModelParameters>(params));
  const CalibrationQuality q = EvaluateCalibration(toast, test);
  row.accuracy = q.accuracy;
  if (!q.defined) {
    row.skipped = true;
    row.reason = "test predictions are all correct or all wrong";
    return;
  }
  row.auroc = q.auroc;
  row.delta_conf = q.delta_conf;
}

}  // namespace

SweepRow RunSweepPoint(const SweepPoint& point, const PilotContext& context,
                       const PilotConfig& config, const SynonymLexicon& lexicon) {
  SweepRow row;
  row.point = point;

  if (point.kind == SweepKind::kK) {
    ToastConfig tc = config.toast;
    tc.k = static_cast<int>(point.value);
    tc.seed = DeriveSeed(context.seed, kPilotTrainStream);
    if (static_cast<std::size_t>(tc.k) > context.train.size()) {
      return Skipped(row, "K exceeds the training set");
    }
    try {
      ToastResult result = RunToast(context.train, tc, lexicon);
      for (const auto& r : result.artifacts.dstar) (r.correctness ? row.n_pos : row.n_neg)++;
      Score(row, result.params, context.test);
    } catch (const Error& e) {
      return Skipped(row, e.what());
    }
    return row;
  }

  // Shared shuffled pools: every grid point of a seed draws prefixes, so
  // larger configurations contain the smaller ones.
  std::vector<const CalibrationRecord*> pos, neg;
  for (const auto& r : context.pool_records) (r.correctness ? pos : neg).push_back(&r);
  Rng rng(DeriveSeed(context.seed, kSubsetStream));
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);

  std::size_t want_pos = 0, want_neg = 0;
  ToastConfig tc = config.toast;
  tc.featurizer = config.featurizer;
  tc.train = config.multitask;
  tc.no_augment = true;
  tc.seed = DeriveSeed(context.seed, kPilotTrainStream);

  if (point.kind == SweepKind::kSize) {
    const auto n = static_cast<std::size_t>(point.value);
    want_neg = n / 2;
    want_pos = n - want_neg;
  } else if (point.kind == SweepKind::kImbalance) {
    if (point.variant == "ratio") {
      const auto total = static_cast<std::size_t>(config.imbalance_total);
      want_neg = static_cast<std::size_t>(std::llround(point.value * static_cast<double>(total)));
      want_pos = total - want_neg;
    } else if (point.variant == "fix_neg") {
      want_neg = static_cast<std::size_t>(config.fixed_count);
      want_pos = static_cast<std::size_t>(point.value);
    } else {
      want_pos = static_cast<std::size_t>(config.fixed_count);
      want_neg = static_cast<std::size_t>(point.value);
    }
  } else {
    want_neg = want_pos = std::min(pos.size(), neg.size());
    tc.calib_inputs = ParseCalibInputs(point.variant);
  }

  row.n_pos = static_cast<int>(want_pos);
  row.n_neg = static_cast<int>(want_neg);
  if (want_pos > pos.size() || want_neg > neg.size() || want_pos + want_neg == 0) {
    return Skipped(row, "pool has " + std::to_string(pos.size()) + " correct and " +
                            std::to_string(neg.size()) + " wrong annotations");
  }
  std::vector<CalibrationRecord> dstar;
  for (std::size_t i = 0; i < want_pos; ++i) dstar.push_back(*pos[i]);
  for (std::size_t i = 0; i < want_neg; ++i) dstar.push_back(*neg[i]);
  MultitaskResult result = TrainMultitask(context.main_part, dstar, {}, tc);
  Score(row, result.params, context.test);
  return row;
}

std::vector<SweepRow> PilotSweeps(const Dataset& train, const Dataset& test, SweepKind kind,
                                  const PilotConfig& config, std::span<const std::uint64_t> seeds,
                                  const SynonymLexicon& lexicon,
                                  const std::function<bool(const SweepPoint&)>& skip,
                                  const std::function<void(const SweepRow&)>& on_row, int jobs) {
  config.Validate();
  std::vector<SweepPoint> todo;
  for (const SweepPoint& p : PlanSweep(kind, config, seeds)) {
    if (!skip || !skip(p)) todo.push_back(p);
  }
  std::map<std::uint64_t, std::unique_ptr<PilotContext>> contexts;
  for (const SweepPoint& p : todo) {
    auto& slot = contexts[p.seed];
    if (!slot) slot = std::make_unique<PilotContext>(PreparePilot(train, test, config, p.seed));
  }

  std::vector<SweepRow> rows;
  const auto chunk = static_cast<std::size_t>(std::max(1, jobs));
  for (std::size_t start = 0; start < todo.size(); start += chunk) {
    const std::size_t end = std::min(todo.size(), start + chunk);
    std::vector<SweepRow> done(end - start);
    if (chunk == 1) {
      done[0] = RunSweepPoint(todo[start], *contexts.at(todo[start].seed), config, lexicon);
    } else {
      std::vector<std::future<SweepRow>> pending;
      for (std::size_t i = start; i < end; ++i) {
        pending.push_back(std::async(std::launch::async, [&, i] {
          return RunSweepPoint(todo[i], *contexts.at(todo[i].seed), config, lexicon);
        }));
      }
      for (std::size_t i = 0; i < pending.size(); ++i) done[i] = pending[i].get();
    }
    for (SweepRow& row : done) {
      if (on_row) on_row(row);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace selfcal
