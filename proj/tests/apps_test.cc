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
#include <memory>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "selfcal/common.h"
#include "test_util.h"

namespace selfcal {
namespace {

using V = std::vector<double>;

TEST(SelectiveTest, OracleConfidence) {
  ConfidenceLog log;
  for (int i = 0; i < 40; ++i) log.Append(i % 4 == 0 ? 0.0 : 1.0, i % 4 != 0, 0, "id");
  const V targets = {0.9, 0.99, 1.0};
  const SelectiveReport r = SelectiveEvalLog(log, targets);
  EXPECT_DOUBLE_EQ(r.auroc_risk, 0.0);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.75);
  for (const auto& [target, coverage] : r.coverage_at) {
    ASSERT_TRUE(coverage.has_value()) << target;
    EXPECT_DOUBLE_EQ(*coverage, 0.75);
  }
}

TEST(SelectiveTest, ConstantConfidenceIsAllOrNothing) {
  ConfidenceLog log;
  for (int i = 0; i < 10; ++i) log.Append(0.7, i < 8, 0, "id");
  const V targets = {0.5, 0.8, 0.81, 0.95};
  const SelectiveReport r = SelectiveEvalLog(log, targets);
  ASSERT_EQ(r.coverage_at.size(), 4u);
  EXPECT_EQ(r.coverage_at[0].second, 1.0);
  EXPECT_EQ(r.coverage_at[1].second, 1.0);
  EXPECT_FALSE(r.coverage_at[2].second.has_value());
  EXPECT_FALSE(r.coverage_at[3].second.has_value());
  EXPECT_DOUBLE_EQ(r.auroc_risk, 0.5);
}

TEST(SelectiveTest, CalibratorLogMatchesBuildLog) {
  const Dataset d = testing::SeparableFixture(30, 1);
  FeaturizerConfig fc;
  fc.hash_dim = 1 << 10;
  TrainConfig tc;
  tc.epochs = 1;
  tc.hidden_dim = 4;
  tc.learning_rate = 0.05;
  const Calibrator cal(Method::kVanilla,
                       std::make_shared<const ModelParameters>(TrainMain(d, fc, tc).params));
  const V targets = {0.9};
  const SelectiveReport r = SelectiveEval(cal, d, targets);
  const ConfidenceLog log = BuildLog(cal, d, "id");
  EXPECT_EQ(r.log.confidence, log.confidence);
  EXPECT_DOUBLE_EQ(r.accuracy, log.accuracy());
}

TEST(AdversarialTest, CopiedIdSetIsIndistinguishable) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  V id(300);
  for (double& v : id) v = u(rng);
  const AdversarialReport r = AdversarialEvalScores(id, id);
  EXPECT_DOUBLE_EQ(r.auroc, 0.5);
  EXPECT_DOUBLE_EQ(r.delta_conf, 0.0);
  EXPECT_EQ(r.detection.size(), 101u);
}

TEST(AdversarialTest, SeparatedScoresAreDetected) {
  const AdversarialReport r = AdversarialEvalScores({0.7, 0.8, 0.95}, {0.1, 0.3, 0.69});
  EXPECT_DOUBLE_EQ(r.auroc, 1.0);
  EXPECT_GT(r.delta_conf, 0.0);
  EXPECT_DOUBLE_EQ(r.best_macro_f1, 1.0);
  EXPECT_DOUBLE_EQ(r.best_threshold, 0.7);
  double best = 0.0;
  for (const auto& [t, scores] : r.detection) best = std::max(best, scores.macro_f1);
  EXPECT_DOUBLE_EQ(best, r.best_macro_f1);
  EXPECT_THROW(AdversarialEvalScores({}, {0.1}), Error);
  EXPECT_THROW(AdversarialEvalScores({0.1}, {}), Error);
}

class TrainedSynthetic : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    SynthConfig sc;
    sc.samples_per_class = 300;
    sc.test_samples_per_class = 150;
    sc.seed = 4;
    data_ = new SyntheticData(GenerateSynthetic(sc));
    lexicon_ = new SynonymLexicon(BuildSyntheticLexicon(sc));
    FeaturizerConfig fc;
    fc.hash_dim = 1 << 12;
    TrainConfig tc;
    tc.hidden_dim = 16;
    model_ = new ModelParameters(TrainMain(data_->train, fc, tc).params);
  }
  static void TearDownTestSuite() {
    delete data_;
    delete lexicon_;
    delete model_;
  }
  static SyntheticData* data_;
  static SynonymLexicon* lexicon_;
  static ModelParameters* model_;
};
SyntheticData* TrainedSynthetic::data_ = nullptr;
SynonymLexicon* TrainedSynthetic::lexicon_ = nullptr;
ModelParameters* TrainedSynthetic::model_ = nullptr;

TEST_F(TrainedSynthetic, AttackFlipsPredictions) {
  const AttackBatch batch = AttackDataset(*model_, data_->test, *lexicon_, 5, 40);
  ASSERT_FALSE(batch.adversarial.empty());
  EXPECT_LE(batch.adversarial.size(), 40u);
  EXPECT_GE(batch.attempted, batch.adversarial.size());
  ASSERT_EQ(batch.origin_ids.size(), batch.adversarial.size());
  for (const Sample& s : batch.adversarial) EXPECT_NE(Predict(*model_, s).label, s.label);
}

TEST_F(TrainedSynthetic, AdversarialEvalOnCopiedSet) {
  const Calibrator cal(Method::kVanilla, std::make_shared<const ModelParameters>(*model_));
  const AdversarialReport r = AdversarialEval(cal, data_->test, data_->test, 100000, 3);
  EXPECT_DOUBLE_EQ(r.auroc, 0.5);
  EXPECT_EQ(r.id_scores.size(), data_->test.size());
  const AdversarialReport sub = AdversarialEval(cal, data_->test, data_->test, 50, 3);
  EXPECT_EQ(sub.id_scores.size(), 50u);
  EXPECT_EQ(sub.id_scores, AdversarialEval(cal, data_->test, data_->test, 50, 3).id_scores);
}

TEST_F(TrainedSynthetic, CascadeEndpointsAndSelfCascade) {
  const Calibrator small(Method::kVanilla, std::make_shared<const ModelParameters>(*model_));
  const CascadeReport self = CascadeEval(small, *model_, data_->test);
  ASSERT_EQ(self.curve.size(), 102u);
  EXPECT_DOUBLE_EQ(self.curve.front().accuracy, self.small_accuracy);
  EXPECT_DOUBLE_EQ(self.curve.back().accuracy, self.large_accuracy);
  for (const auto& p : self.curve) EXPECT_DOUBLE_EQ(p.accuracy, self.small_accuracy);
  EXPECT_NEAR(self.area, self.small_accuracy, 1e-12);
  EXPECT_DOUBLE_EQ(self.small_accuracy, Accuracy(*model_, data_->test));
}

TEST(CascadeCurveTest, OracleLargeModelIsNonDecreasing) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<CascadeRow> rows(400);
  for (auto& r : rows) {
    r.gold = static_cast<int>(rng() % 2);
    r.small_prediction = static_cast<int>(rng() % 2);
    r.large_prediction = r.gold;
    r.small_confidence = u(rng);
  }
  const auto curve = CascadeCurve(rows, UnitThresholdGrid());
  for (std::size_t i = 1; i < curve.size(); ++i) {
    EXPECT_GE(curve[i].accuracy, curve[i - 1].accuracy);
    EXPECT_GE(curve[i].routed_fraction, curve[i - 1].routed_fraction);
  }
}

TEST(SweepPlanTest, KindNames) {
  for (SweepKind k : {SweepKind::kSize, SweepKind::kImbalance, SweepKind::kFeatures, SweepKind::kK}) {
    EXPECT_EQ(ParseSweepKind(SweepKindName(k)), k);
  }
  EXPECT_THROW(ParseSweepKind("depth"), Error);
}

TEST(SweepPlanTest, CountsAndOrder) {
  PilotConfig cfg;
  cfg.sizes = {320, 40, 160};
  const std::vector<std::uint64_t> seeds = {5, 9};
  const auto size = PlanSweep(SweepKind::kSize, cfg, seeds);
  ASSERT_EQ(size.size(), 6u);
  EXPECT_EQ(size[0].key(), "size:size:40:seed=5");
  EXPECT_EQ(size[1].key(), "size:size:40:seed=9");
  for (std::size_t i = 2; i < size.size(); ++i) EXPECT_GE(size[i].value, size[i - 2].value);

  const auto imb = PlanSweep(SweepKind::kImbalance, PilotConfig{}, seeds);
  EXPECT_EQ(imb.size(), 2u * (9 + 5 + 5));
  std::set<std::string> keys;
  for (const auto& p : imb) keys.insert(p.key());
  EXPECT_EQ(keys.size(), imb.size());

  EXPECT_EQ(PlanSweep(SweepKind::kFeatures, PilotConfig{}, seeds).size(), 6u);
  const auto k = PlanSweep(SweepKind::kK, PilotConfig{}, std::vector<std::uint64_t>{1});
  ASSERT_EQ(k.size(), 4u);
  for (std::size_t i = 0; i < k.size(); ++i) EXPECT_EQ(k[i].value, static_cast<double>(i + 2));
}

TEST(PilotConfigTest, DefaultsAndValidation) {
  PilotConfig cfg;
  EXPECT_EQ(cfg.main.epochs, 5);
  EXPECT_EQ(cfg.multitask.epochs, 8);
  EXPECT_NO_THROW(cfg.Validate());
  cfg.pool_fraction = 1.0;
  EXPECT_THROW(cfg.Validate(), Error);
  PilotConfig ratios;
  ratios.ratios = {0.0};
  EXPECT_THROW(ratios.Validate(), Error);
}

SynthConfig PilotSynth() {
  SynthConfig sc;
  sc.samples_per_class = 150;
  sc.test_samples_per_class = 100;
  sc.seed = 2;
  return sc;
}

class PilotTest : public ::testing::Test {
 protected:
  PilotTest() : data_(GenerateSynthetic(PilotSynth())), lexicon_(BuildSyntheticLexicon(PilotSynth())) {
    cfg_.featurizer.hash_dim = 1 << 12;
    cfg_.main.hidden_dim = 8;
    cfg_.multitask.hidden_dim = 8;
    cfg_.multitask.epochs = 3;
    cfg_.toast.featurizer = cfg_.featurizer;
    cfg_.toast.annotator.hidden_dim = 8;
    cfg_.toast.annotator.epochs = 2;
    cfg_.toast.train.hidden_dim = 8;
    cfg_.toast.train.epochs = 2;
    cfg_.sizes = {20, 40, 100000};
    cfg_.k_values = {2, 3};
  }
  SyntheticData data_;
  SynonymLexicon lexicon_;
  PilotConfig cfg_;
};

TEST_F(PilotTest, ContextPartitionsTraining) {
  const PilotContext ctx = PreparePilot(data_.train, data_.test, cfg_, 1);
  EXPECT_EQ(ctx.main_part.size() + ctx.pool_records.size(), data_.train.size());
  std::set<std::string> main_ids;
  for (const auto& s : ctx.main_part.samples()) main_ids.insert(s.id);
  for (const auto& r : ctx.pool_records) EXPECT_EQ(main_ids.count(r.sample_id), 0u);
}

TEST_F(PilotTest, InfeasibleSizeIsSkipped) {
  const std::vector<std::uint64_t> seeds = {1};
  std::vector<std::string> seen;
  const auto rows = PilotSweeps(data_.train, data_.test, SweepKind::kSize, cfg_, seeds, lexicon_,
                                {}, [&](const SweepRow& r) { seen.push_back(r.point.key()); });
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_FALSE(rows[0].skipped);
  EXPECT_EQ(rows[0].n_pos, 10);
  EXPECT_EQ(rows[0].n_neg, 10);
  EXPECT_TRUE(rows[2].skipped);
  EXPECT_NE(rows[2].reason.find("correct and"), std::string::npos);
  ASSERT_EQ(seen.size(), 3u);
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(seen[i], rows[i].point.key());
}

TEST_F(PilotTest, SkipFilterAndParallelism) {
  const std::vector<std::uint64_t> seeds = {1, 2};
  const auto skip_first = [](const SweepPoint& p) { return p.value == 20; };
  const auto serial = PilotSweeps(data_.train, data_.test, SweepKind::kSize, cfg_, seeds,
                                  lexicon_, skip_first);
  ASSERT_EQ(serial.size(), 4u);
  for (const auto& r : serial) EXPECT_NE(r.point.value, 20);
  const auto parallel = PilotSweeps(data_.train, data_.test, SweepKind::kSize, cfg_, seeds,
                                    lexicon_, skip_first, {}, 3);
  ASSERT_EQ(parallel.size(), serial.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    EXPECT_EQ(parallel[i].point.key(), serial[i].point.key());
    EXPECT_EQ(parallel[i].auroc, serial[i].auroc);
  }
}

TEST_F(PilotTest, FeatureAndKSweeps) {
  const std::vector<std::uint64_t> seeds = {3};
  const auto features =
      PilotSweeps(data_.train, data_.test, SweepKind::kFeatures, cfg_, seeds, lexicon_);
  ASSERT_EQ(features.size(), 3u);
  for (const auto& r : features) {
    if (r.point.variant == "without_sample") {
      EXPECT_LT(std::abs(r.delta_conf), 5.0);
    }
  }
  const auto k = PilotSweeps(data_.train, data_.test, SweepKind::kK, cfg_, seeds, lexicon_);
  ASSERT_EQ(k.size(), 2u);
  for (const auto& r : k) EXPECT_EQ(r.point.variant, "k");
}

}  // namespace
}  // namespace selfcal
