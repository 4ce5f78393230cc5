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

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "selfcal/calibrators.h"
#include "selfcal/corpus.h"
#include "selfcal/metrics.h"
#include "selfcal/model.h"
#include "selfcal/objective.h"

namespace {

using namespace selfcal;

void BM_Auroc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> pos(n), neg(n);
  for (double& v : pos) v = u(rng);
  for (double& v : neg) v = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(Auroc(pos, neg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n));
}
BENCHMARK(BM_Auroc)->Range(1 << 8, 1 << 16);

const SyntheticData& Data() {
  static const SyntheticData data = GenerateSynthetic(SynthConfig{});
  return data;
}

void BM_Featurize(benchmark::State& state) {
  FeaturizerConfig fc;
  const Dataset& d = Data().train;
  std::size_t i = 0;
  for (auto _ : state) {
    const Sample& s = d[i++ % d.size()];
    benchmark::DoNotOptimize(Featurize(s.text_a, s.text_b, fc));
  }
}
BENCHMARK(BM_Featurize);

void BM_ForwardCalib(benchmark::State& state) {
  FeaturizerConfig fc;
  fc.hash_dim = 1 << 14;
  const int hidden = static_cast<int>(state.range(0));
  const ModelParameters p = ModelParameters::Initialize(fc, 2, hidden, 3);
  const Sample& s = Data().train[0];
  const SparseVector f = Featurize(s.text_a, s.text_b, fc);
  for (auto _ : state) benchmark::DoNotOptimize(ForwardCalib(p, f, 1));
}
BENCHMARK(BM_ForwardCalib)->Arg(16)->Arg(64)->Arg(128);

void BM_MultitaskStep(benchmark::State& state) {
  FeaturizerConfig fc;
  fc.hash_dim = 1 << 14;
  ModelParameters p = ModelParameters::Initialize(fc, 2, 64, 3);
  const Dataset& d = Data().train;
  std::vector<MainExample> main;
  std::vector<CalibExample> calib;
  std::vector<ConsistencyExample> consistency;
  for (std::size_t i = 0; i < 32; ++i) {
    const SparseVector f = Featurize(d[i].text_a, d[i].text_b, fc);
    main.push_back({f, d[i].label});
    calib.push_back({f, d[i].label, static_cast<int>(i % 2)});
    consistency.push_back({f, Featurize(d[i + 32].text_a, d[i + 32].text_b, fc), d[i].label});
  }
  for (auto _ : state) {
    Gradients g(p);
    benchmark::DoNotOptimize(EvaluateObjective(p, main, calib, consistency, 0.1, 0.0, &g));
    g.ApplySgd(p, 0.01);
  }
}
BENCHMARK(BM_MultitaskStep);

void BM_FitTemperature(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 2.0);
  std::vector<std::vector<double>> logits(1000, std::vector<double>(3));
  std::vector<int> labels(1000);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    for (double& v : logits[i]) v = n(rng);
    labels[i] = static_cast<int>(i % 3);
  }
  for (auto _ : state) benchmark::DoNotOptimize(FitTemperature(logits, labels));
}
BENCHMARK(BM_FitTemperature);

}  // namespace

BENCHMARK_MAIN();
