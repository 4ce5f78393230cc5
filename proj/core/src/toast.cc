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

#include "selfcal/toast.h"

#include <algorithm>
#include <fstream>
#include <future>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>

namespace selfcal {

using nlohmann::json;

namespace {

// Stage seeds all derive from ToastConfig::seed.
enum SeedStream : std::uint64_t {
  kFoldStream = 1,
  kDownsampleStream = 2,
  kAugmentStream = 3,
  kMultitaskInitStream = 4,
  kHoldoutStream = 5,
  kMainOrderStream = 10,
  kCalibOrderStream = 11,
  kConsistencyOrderStream = 12,
  kAnnotatorStreamBase = 100,
};

}  // namespace

ToastConfig::ToastConfig() { train.epochs = 8; }

void ToastConfig::Validate() const {
  if (k < 2) throw Error("toast: K must be >= 2");
  if (!(alpha >= 0.0)) throw Error("toast: alpha must be >= 0");
  if (augment_per_negative < 1) throw Error("toast: augment_per_negative must be >= 1");
  if (!(rate > 0.0 && rate <= 1.0)) throw Error("toast: rate must be in (0,1]");
  if (jobs < 1) throw Error("toast: jobs must be >= 1");
  featurizer.Validate();
  annotator.Validate();
  train.Validate();
}

CrossAnnotation CrossAnnotate(const Dataset& dataset, int k, std::uint64_t seed,
                              const AnnotatorFactory& factory, int jobs) {
  auto folds = SplitFolds(dataset, k, seed);
  std::map<std::string_view, int> fold_of;
  for (int f = 0; f < k; ++f) {
    for (const Sample& s : folds[static_cast<std::size_t>(f)].samples()) fold_of[s.id] = f;
  }

  struct RoundOutput {
    AnnotationRound round;
    std::vector<CalibrationRecord> records;
  };
  auto run_round = [&](int r) {
    std::vector<std::size_t> train_idx;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (fold_of.at(dataset[i].id) != r) train_idx.push_back(i);
    }
    Dataset train = dataset.Subset(train_idx);
    Annotator annotate = factory(train, r);
    RoundOutput out;
    out.round.round = r;
    for (const Sample& s : train.samples()) out.round.training_ids.push_back(s.id);
    for (const Sample& s : folds[static_cast<std::size_t>(r)].samples()) {
      const int pred = annotate(s);
      out.round.annotated_ids.push_back(s.id);
      out.records.push_back({s.id, s.text_a, s.text_b, pred, pred == s.label ? 1 : 0});
    }
    return out;
  };

  std::vector<RoundOutput> outputs(static_cast<std::size_t>(k));
  if (jobs <= 1) {
    for (int r = 0; r < k; ++r) outputs[static_cast<std::size_t>(r)] = run_round(r);
  } else {
    // Rounds are independent; results are merged by round index.
    for (int start = 0; start < k; start += jobs) {
      std::vector<std::future<RoundOutput>> pending;
      for (int r = start; r < std::min(k, start + jobs); ++r) {
        pending.push_back(std::async(std::launch::async, run_round, r));
      }
      for (int r = start; r < std::min(k, start + jobs); ++r) {
        outputs[static_cast<std::size_t>(r)] = pending[static_cast<std::size_t>(r - start)].get();
      }
    }
  }

  std::map<std::string_view, const CalibrationRecord*> by_id;
  CrossAnnotation result;
  for (const auto& out : outputs) {
    for (const auto& rec : out.records) by_id[rec.sample_id] = &rec;
  }
  for (const Sample& s : dataset.samples()) result.records.push_back(*by_id.at(s.id));
  for (auto& out : outputs) result.rounds.push_back(std::move(out.round));
  return result;
}

namespace {

AnnotatorFactory MainTaskAnnotators(const ToastConfig& config) {
  return [config](const Dataset& train, int round) -> Annotator {
    TrainConfig tc = config.annotator;
    tc.seed = DeriveSeed(config.seed, kAnnotatorStreamBase + static_cast<std::uint64_t>(round));
    auto params = std::make_shared<const ModelParameters>(
        TrainMain(train, config.featurizer, tc).params);
    return [params](const Sample& s) { return Predict(*params, s).label; };
  };
}

}  // namespace

CrossAnnotation CrossAnnotate(const Dataset& dataset, const ToastConfig& config) {
  config.Validate();
  return CrossAnnotate(dataset, config.k, DeriveSeed(config.seed, kFoldStream),
                       MainTaskAnnotators(config), config.jobs);
}

CrossAnnotation HoldoutAnnotate(const Dataset& dataset, const ToastConfig& config) {
  config.Validate();
  if (dataset.size() < 10) throw Error("9:1 split needs at least 10 samples");
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(DeriveSeed(config.seed, kHoldoutStream));
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_cal = dataset.size() / 10;
  std::vector<std::size_t> cal(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_cal));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_cal), order.end());
  std::sort(cal.begin(), cal.end());
  std::sort(train.begin(), train.end());

  Dataset train_set = dataset.Subset(train);
  Annotator annotate = MainTaskAnnotators(config)(train_set, 0);
  CrossAnnotation result;
  AnnotationRound round;
  for (const Sample& s : train_set.samples()) round.training_ids.push_back(s.id);
  for (std::size_t i : cal) {
    const Sample& s = dataset[i];
    const int pred = annotate(s);
    round.annotated_ids.push_back(s.id);
    result.records.push_back({s.id, s.text_a, s.text_b, pred, pred == s.label ? 1 : 0});
  }
  result.rounds.push_back(std::move(round));
  return result;
}

std::vector<CalibrationRecord> DownsampleBalance(std::span<const CalibrationRecord> records,
                                                 Rng& rng) {
  if (records.empty()) throw Error("downsample_balance: no records");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < records.size(); ++i) {
    (records[i].correctness == 1 ? pos : neg).push_back(i);
  }
  if (pos.empty() || neg.empty()) {
    throw Error("calibration classes degenerate; annotator is perfectly right or wrong");
  }
  auto& majority = pos.size() >= neg.size() ? pos : neg;
  const std::size_t keep = std::min(pos.size(), neg.size());
  std::shuffle(majority.begin(), majority.end(), rng);
  majority.resize(keep);
  std::vector<std::size_t> chosen = pos;
  chosen.insert(chosen.end(), neg.begin(), neg.end());
  std::sort(chosen.begin(), chosen.end());
  std::vector<CalibrationRecord> out;
  out.reserve(chosen.size());
  for (std::size_t i : chosen) out.push_back(records[i]);
  return out;
}

std::vector<AugmentedRecord> BuildAugmentSet(std::span<const CalibrationRecord> records,
                                             const SynonymLexicon& lexicon,
                                             const ToastConfig& config, Rng& rng) {
  std::vector<AugmentedRecord> out;
  for (const CalibrationRecord& rec : records) {
    if (rec.correctness != 0) continue;
    for (int m = 0; m < config.augment_per_negative; ++m) {
      auto [kind, text] = RandomTransform(rec.text_a, config.rate, lexicon, rng);
      AugmentedRecord aug{rec.sample_id, rec.text_a, rec.text_b, std::move(text),
                          std::nullopt, rec.predicted_label, kind};
      if (rec.text_b) aug.transformed_b = ApplyTransform(kind, *rec.text_b, config.rate, lexicon, rng);
      out.push_back(std::move(aug));
    }
  }
  return out;
}

namespace {

// Cycles through [0, n) in reshuffled passes.
class Cursor {
 public:
  Cursor(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
    std::iota(order_.begin(), order_.end(), 0);
    std::shuffle(order_.begin(), order_.end(), rng_);
  }

  std::vector<std::size_t> Next(std::size_t count) {
    std::vector<std::size_t> out;
    if (order_.empty()) return out;
    while (out.size() < count) {
      if (pos_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  Rng rng_;
  std::size_t pos_ = 0;
};

}  // namespace

MultitaskResult TrainMultitask(const Dataset& dataset, std::span<const CalibrationRecord> dstar,
                               std::span<const AugmentedRecord> daug,
                               const ToastConfig& config) {
  config.Validate();
  if (dataset.empty()) throw Error("train_multitask: empty main dataset");
  if (dstar.empty()) throw Error("train_multitask: empty calibration dataset");
  const FeaturizerConfig& fc = config.featurizer;
  MultitaskResult result{ModelParameters::Initialize(fc, dataset.num_classes(),
                                                     config.train.hidden_dim,
                                                     DeriveSeed(config.seed, kMultitaskInitStream)),
                         {}};
  result.params.calib_inputs = config.calib_inputs;

  std::vector<MainExample> main;
  for (const Sample& s : dataset.samples()) {
    main.push_back({Featurize(s.text_a, s.text_b, fc), s.label});
  }
  std::vector<CalibExample> calib;
  for (const CalibrationRecord& r : dstar) {
    if (r.predicted_label < 0 || r.predicted_label >= dataset.num_classes()) {
      throw Error("calibration record '" + r.sample_id + "' has an invalid prediction");
    }
    calib.push_back({Featurize(r.text_a, r.text_b, fc), r.predicted_label, r.correctness});
  }
  std::vector<ConsistencyExample> consistency;
  if (!config.no_augment) {
    for (const AugmentedRecord& a : daug) {
      consistency.push_back({Featurize(a.text_a, a.text_b, fc),
                             Featurize(a.transformed_a, a.transformed_b, fc),
                             a.predicted_label});
    }
  }

  const auto batch = static_cast<std::size_t>(config.train.batch_size);
  const double alpha = config.effective_alpha();
  Rng main_rng(DeriveSeed(config.seed, kMainOrderStream));
  Cursor calib_cursor(calib.size(), DeriveSeed(config.seed, kCalibOrderStream));
  Cursor cons_cursor(consistency.size(), DeriveSeed(config.seed, kConsistencyOrderStream));
  std::vector<std::size_t> order(main.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<MainExample> main_batch;
  std::vector<CalibExample> calib_batch;
  std::vector<ConsistencyExample> cons_batch;
  for (int epoch = 0; epoch < config.train.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), main_rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      main_batch.clear();
      calib_batch.clear();
      cons_batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + batch); ++i) {
        main_batch.push_back(main[order[i]]);
      }
      for (std::size_t i : calib_cursor.Next(batch)) calib_batch.push_back(calib[i]);
      for (std::size_t i : cons_cursor.Next(batch)) cons_batch.push_back(consistency[i]);
      Gradients grads(result.params);
      auto terms = EvaluateObjective(result.params, main_batch, calib_batch, cons_batch, alpha,
                                     config.train.label_smoothing_epsilon, &grads);
      grads.ApplySgd(result.params, config.train.learning_rate);
      result.trace.push_back(terms);
    }
  }
  return result;
}

ToastResult RunToast(const Dataset& dataset, const ToastConfig& config,
                     const SynonymLexicon& lexicon) {
  config.Validate();
  ToastArtifacts artifacts;
  CrossAnnotation stage1 = config.no_cross_annotation ? HoldoutAnnotate(dataset, config)
                                                      : CrossAnnotate(dataset, config);
  artifacts.stage1 = config.no_cross_annotation ? "holdout_9_1" : "cross_annotation";
  artifacts.annotated = std::move(stage1.records);
  artifacts.rounds = std::move(stage1.rounds);

  if (config.no_downsample) {
    artifacts.dstar = artifacts.annotated;
  } else {
    Rng rng(DeriveSeed(config.seed, kDownsampleStream));
    artifacts.dstar = DownsampleBalance(artifacts.annotated, rng);
  }
  if (!config.no_augment) {
    Rng rng(DeriveSeed(config.seed, kAugmentStream));
    artifacts.daug = BuildAugmentSet(artifacts.dstar, lexicon, config, rng);
  }
  MultitaskResult stage3 = TrainMultitask(dataset, artifacts.dstar, artifacts.daug, config);
  artifacts.trace = std::move(stage3.trace);
  return ToastResult{std::move(stage3.params), std::move(artifacts)};
}

void WriteArtifacts(const ToastArtifacts& artifacts, const ToastConfig& config,
                    const std::vector<std::string>& label_names,
                    const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error("cannot write '" + (dir / name).string() + "'");
    return out;
  };
  {
    auto out = open("dstar.jsonl");
    for (const auto& r : artifacts.dstar) {
      json obj = {{"id", r.sample_id}, {"text", r.text_a}};
      if (r.text_b) obj["text_pair"] = *r.text_b;
      obj["predicted_label"] = label_names.at(static_cast<std::size_t>(r.predicted_label));
      obj["correctness"] = r.correctness;
      out << obj.dump() << '\n';
    }
  }
  {
    auto out = open("daug.jsonl");
    for (const auto& a : artifacts.daug) {
      json obj = {{"id", a.sample_id}, {"text", a.text_a}, {"transformed_text", a.transformed_a}};
      if (a.text_b) obj["text_pair"] = *a.text_b;
      if (a.transformed_b) obj["transformed_text_pair"] = *a.transformed_b;
      obj["predicted_label"] = label_names.at(static_cast<std::size_t>(a.predicted_label));
      obj["transform"] = TransformKindName(a.kind);
      out << obj.dump() << '\n';
    }
  }
  {
    auto out = open("losses.csv");
    out << "step,main,calib,consistency,total\n";
    for (std::size_t i = 0; i < artifacts.trace.size(); ++i) {
      const auto& t = artifacts.trace[i];
      out << i << ',' << FormatDouble(t.main) << ',' << FormatDouble(t.calib) << ','
          << FormatDouble(t.consistency) << ',' << FormatDouble(t.total) << '\n';
    }
  }
  {
    json rounds = json::array();
    for (const auto& r : artifacts.rounds) {
      rounds.push_back({{"round", r.round},
                        {"annotated_ids", r.annotated_ids},
                        {"training_ids", r.training_ids}});
    }
    std::size_t negatives = 0;
    for (const auto& r : artifacts.annotated) negatives += r.correctness == 0;
    json meta = {
        {"stage1", artifacts.stage1},
        {"k", config.k},
        {"alpha", config.alpha},
        {"effective_alpha", config.effective_alpha()},
        {"augment_per_negative", config.augment_per_negative},
        {"rate", config.rate},
        {"seed", config.seed},
        {"ablations",
         {{"no_cross_annotation", config.no_cross_annotation},
          {"no_downsample", config.no_downsample},
          {"no_augment", config.no_augment},
          {"no_alpha_decay", config.no_alpha_decay}}},
        {"calib_inputs", CalibInputsName(config.calib_inputs)},
        {"annotated", artifacts.annotated.size()},
        {"annotated_negatives", negatives},
        {"dstar", artifacts.dstar.size()},
        {"daug", artifacts.daug.size()},
        {"steps", artifacts.trace.size()},
        {"rounds", rounds},
    };
    auto out = open("meta.json");
    out << meta.dump(2) << '\n';
  }
}

}  // namespace selfcal
