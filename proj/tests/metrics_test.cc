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
#include <random>

#include <gtest/gtest.h>

#include "selfcal/common.h"
#include "test_util.h"

namespace selfcal {
namespace {

using V = std::vector<double>;

ConfidenceLog MakeLog(const V& conf, const std::vector<int>& correct) {
  ConfidenceLog log;
  for (std::size_t i = 0; i < conf.size(); ++i) log.Append(conf[i], correct[i], 0, "id");
  return log;
}

ConfidenceLog HandLog() { return MakeLog({0.9, 0.6, 0.4}, {1, 0, 1}); }

TEST(AurocTest, Examples) {
  EXPECT_DOUBLE_EQ(Auroc(V{0.9, 0.8}, V{0.1}), 1.0);
  EXPECT_DOUBLE_EQ(Auroc(V{0.9, 0.3}, V{0.5}), 0.5);
  EXPECT_DOUBLE_EQ(Auroc(V{0.5}, V{0.5}), 0.5);
  EXPECT_DOUBLE_EQ(Auroc(V{0.1}, V{0.9, 0.8}), 0.0);
}

TEST(AurocTest, EmptySideFails) {
  try {
    Auroc(V{}, V{0.5});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("AUROC undefined"), std::string::npos);
  }
  EXPECT_THROW(Auroc(V{0.5}, V{}), Error);
}

TEST(AurocTest, MatchesBruteForce) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 60; ++trial) {
    const auto np = 1 + rng() % 400, nn = 1 + rng() % 400;
    // Coarse grids force ties.
    const int levels = trial % 3 == 0 ? 5 : 1000000;
    std::uniform_int_distribution<int> u(0, levels);
    V pos(np), neg(nn);
    for (double& v : pos) v = u(rng) / static_cast<double>(levels);
    for (double& v : neg) v = u(rng) / static_cast<double>(levels);
    EXPECT_NEAR(Auroc(pos, neg), testing::BruteForceAuroc(pos, neg), 1e-12);
  }
}

TEST(AurocTest, ComplementAndMonotoneInvariance) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    V pos(50), neg(70);
    for (double& v : pos) v = u(rng);
    for (double& v : neg) v = u(rng);
    EXPECT_NEAR(Auroc(pos, neg) + Auroc(neg, pos), 1.0, 1e-12);
    V tp = pos, tn = neg;
    for (double& v : tp) v = std::exp(3.0 * v) - 7.0;
    for (double& v : tn) v = std::exp(3.0 * v) - 7.0;
    EXPECT_EQ(Auroc(tp, tn), Auroc(pos, neg));
  }
}

TEST(DeltaConfTest, Examples) {
  EXPECT_NEAR(DeltaConf(V{0.9, 0.7}, V{0.5, 0.3}), 40.0, 1e-12);
  EXPECT_DOUBLE_EQ(DeltaConf(V{0.4, 0.6}, V{0.6, 0.4}), 0.0);
  EXPECT_DOUBLE_EQ(DeltaConf(V{1.0, 1.0}, V{0.0}), 100.0);
  EXPECT_DOUBLE_EQ(DeltaConf(V{0.2}, V{0.7, 0.3}), -DeltaConf(V{0.7, 0.3}, V{0.2}));
  EXPECT_THROW(DeltaConf(V{}, V{0.1}), Error);
}

TEST(RiskCoverageTest, HandLog) {
  const auto points = RiskCoverage(HandLog());
  // Thresholds 0, .4, .6, .9; t = 1 accepts nothing and is omitted.
  ASSERT_EQ(points.size(), 4u);
  EXPECT_DOUBLE_EQ(points[0].threshold, 0.0);
  EXPECT_DOUBLE_EQ(points[0].coverage, 1.0);
  EXPECT_DOUBLE_EQ(points[0].risk, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(points[2].threshold, 0.6);
  EXPECT_DOUBLE_EQ(points[2].coverage, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(points[2].risk, 0.5);
  EXPECT_DOUBLE_EQ(points[3].coverage, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(points[3].risk, 0.0);
  EXPECT_EQ(points[3].accepted, 1u);
}

TEST(RiskCoverageTest, EmptyAcceptanceIsOmitted) {
  const auto points = RiskCoverage(MakeLog({0.3, 0.5}, {1, 0}));
  for (const auto& p : points) EXPECT_GT(p.accepted, 0u);
  EXPECT_DOUBLE_EQ(points.back().threshold, 0.5);
}

TEST(RiskCoverageTest, CoverageNonIncreasing) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ConfidenceLog log;
  for (int i = 0; i < 500; ++i) log.Append(std::round(u(rng) * 50) / 50, u(rng) < 0.7, 0, "id");
  const auto points = RiskCoverage(log);
  for (std::size_t i = 1; i < points.size(); ++i) {
    EXPECT_GT(points[i].threshold, points[i - 1].threshold);
    EXPECT_LE(points[i].coverage, points[i - 1].coverage);
  }
}

TEST(AurocRiskTest, Examples) {
  EXPECT_DOUBLE_EQ(AurocRisk(MakeLog({0.9, 0.8, 0.2}, {1, 1, 0})), 0.0);
  EXPECT_DOUBLE_EQ(AurocRisk(MakeLog({0.1, 0.8, 0.9}, {1, 0, 0})), 1.0);
  EXPECT_DOUBLE_EQ(AurocRisk(HandLog()), 0.5);
  EXPECT_THROW(AurocRisk(MakeLog({0.1, 0.2}, {1, 1})), Error);
}

TEST(CoverageAtRiskTest, Examples) {
  EXPECT_DOUBLE_EQ(*CoverageAtRisk(MakeLog({0.2, 0.3, 0.4, 0.5}, {1, 1, 1, 0}), 0.75), 1.0);
  EXPECT_DOUBLE_EQ(*CoverageAtRisk(HandLog(), 1.0), 1.0 / 3.0);
  EXPECT_FALSE(CoverageAtRisk(MakeLog({0.9, 0.1}, {0, 1}), 0.9).has_value());
  EXPECT_THROW(CoverageAtRisk(HandLog(), 0.0), Error);
  EXPECT_THROW(CoverageAtRisk(HandLog(), 1.5), Error);
}

// Independent confusion-matrix enumeration; adversarial is the positive
// class when scoring adversarial F1.
double BruteMacroF1(const V& id, const V& adv, double t) {
  std::vector<std::pair<int, int>> rows;  // (truth adv?, flagged adv?)
  for (double s : id) rows.emplace_back(0, s < t);
  for (double s : adv) rows.emplace_back(1, s < t);
  double macro = 0.0;
  for (int cls : {0, 1}) {
    double tp = 0, fp = 0, fn = 0;
    for (auto [truth, flagged] : rows) {
      tp += truth == cls && flagged == cls;
      fp += truth != cls && flagged == cls;
      fn += truth == cls && flagged != cls;
    }
    const double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double rec = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    macro += prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
  }
  return macro / 2.0;
}

TEST(DetectionF1Test, Examples) {
  EXPECT_DOUBLE_EQ(DetectionF1(V{0.9, 0.9}, V{0.1, 0.1}, 0.5).macro_f1, 1.0);
  const auto none = DetectionF1(V{0.9, 0.4}, V{0.3, 0.6}, 0.0);
  EXPECT_DOUBLE_EQ(none.adversarial_f1, 0.0);
  // id=[.9,.4], adv=[.3,.6] at .5: each class has one hit, one miss and one
  // false alarm, so both per-class F1 are 1/2.
  const auto hand = DetectionF1(V{0.9, 0.4}, V{0.3, 0.6}, 0.5);
  EXPECT_DOUBLE_EQ(hand.adversarial_f1, 0.5);
  EXPECT_DOUBLE_EQ(hand.id_f1, 0.5);
  EXPECT_DOUBLE_EQ(hand.macro_f1, BruteMacroF1({0.9, 0.4}, {0.3, 0.6}, 0.5));
}

TEST(DetectionF1Test, MatchesBruteForce) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    V id(1 + rng() % 30), adv(1 + rng() % 30);
    for (double& v : id) v = u(rng);
    for (double& v : adv) v = u(rng) * 0.8;
    const double t = u(rng);
    EXPECT_NEAR(DetectionF1(id, adv, t).macro_f1, BruteMacroF1(id, adv, t), 1e-12);
  }
}

std::vector<CascadeRow> RandomRows(std::uint64_t seed, int n, bool large_is_small) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<CascadeRow> rows;
  for (int i = 0; i < n; ++i) {
    CascadeRow r;
    r.gold = static_cast<int>(rng() % 3);
    r.small_prediction = static_cast<int>(rng() % 3);
    r.large_prediction = large_is_small ? r.small_prediction : static_cast<int>(rng() % 3);
    r.small_confidence = u(rng);
    rows.push_back(r);
  }
  return rows;
}

double AccuracyOf(const std::vector<CascadeRow>& rows, bool large) {
  double hits = 0;
  for (const auto& r : rows) hits += (large ? r.large_prediction : r.small_prediction) == r.gold;
  return hits / static_cast<double>(rows.size());
}

TEST(CascadeTest, Endpoints) {
  const auto rows = RandomRows(5, 300, false);
  const V thresholds = {0.0, 1.01};
  const auto curve = CascadeCurve(rows, thresholds);
  EXPECT_DOUBLE_EQ(curve[0].accuracy, AccuracyOf(rows, false));
  EXPECT_DOUBLE_EQ(curve[0].routed_fraction, 0.0);
  EXPECT_DOUBLE_EQ(curve[1].accuracy, AccuracyOf(rows, true));
  EXPECT_DOUBLE_EQ(curve[1].routed_fraction, 1.0);
}

TEST(CascadeTest, IdenticalModelsGiveFlatCurve) {
  const auto rows = RandomRows(6, 200, true);
  const double acc = AccuracyOf(rows, false);
  for (const auto& p : CascadeCurve(rows, UnitThresholdGrid())) EXPECT_DOUBLE_EQ(p.accuracy, acc);
  EXPECT_NEAR(CascadeArea(rows), acc, 1e-12);
}

TEST(CascadeTest, AreaIsNormalizedTrapezoid) {
  const auto rows = RandomRows(7, 200, false);
  const auto grid = UnitThresholdGrid();
  ASSERT_EQ(grid.size(), 101u);
  const auto curve = CascadeCurve(rows, grid);
  double mean = 0.0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    mean += curve[i].accuracy * ((i == 0 || i + 1 == curve.size()) ? 0.5 : 1.0);
  }
  EXPECT_NEAR(CascadeArea(rows), mean / 100.0, 1e-12);
  EXPECT_THROW(CascadeCurve(std::vector<CascadeRow>{}, grid), Error);
}

}  // namespace
}  // namespace selfcal
