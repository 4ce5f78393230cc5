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

#include "selfcal/calibrators.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "selfcal/common.h"

namespace selfcal {

std::string_view MethodName(Method method) {
  switch (method) {
    case Method::kVanilla: return "vanilla";
    case Method::kTemperature: return "temperature";
    case Method::kLabelSmoothing: return "label_smoothing";
    case Method::kToast: return "toast";
  }
  return "vanilla";
}

Method ParseMethod(std::string_view name) {
  for (Method m : {Method::kVanilla, Method::kTemperature, Method::kLabelSmoothing,
                   Method::kToast}) {
    if (MethodName(m) == name) return m;
  }
  throw Error("unknown calibration method '" + std::string(name) + "'");
}

Calibrator::Calibrator(Method method, std::shared_ptr<const ModelParameters> model,
                       std::optional<double> temperature)
    : method_(method), model_(std::move(model)) {
  if (!model_) throw Error("calibrator needs a model");
  if (temperature) set_temperature(*temperature);
}

void Calibrator::set_temperature(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw Error("temperature must be positive and finite");
  temperature_ = t;
}

ScoredPrediction Calibrator::Score(const Sample& sample) const {
  const SparseVector features = Featurize(sample.text_a, sample.text_b, model_->featurizer);
  const Prediction pred = PredictFeatures(*model_, features);
  switch (method_) {
    case Method::kVanilla:
    case Method::kLabelSmoothing:
      return {pred.label, pred.max_probability};
    case Method::kTemperature: {
      if (!temperature_) throw Error("temperature calibrator has not been fitted");
      auto probs = Softmax(pred.logits, *temperature_);
      return {pred.label, probs[static_cast<std::size_t>(pred.label)]};
    }
    case Method::kToast:
      return {pred.label, ForwardCalib(*model_, features, pred.label)[1]};
  }
  throw Error("unreachable calibration method");
}

double TemperatureNll(std::span<const std::vector<double>> logits, std::span<const int> labels,
                      double temperature) {
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    total += LossCe(Softmax(logits[i], temperature), labels[i], 0.0);
  }
  return total / static_cast<double>(logits.size());
}

double FitTemperatureOn(const ModelParameters& params, const Dataset& held_out) {
  std::vector<std::vector<double>> logits;
  std::vector<int> labels;
  for (const Sample& s : held_out.samples()) {
    logits.push_back(Predict(params, s).logits);
    labels.push_back(s.label);
  }
  return FitTemperature(logits, labels);
}

double FitTemperature(std::span<const std::vector<double>> logits, std::span<const int> labels) {
  if (logits.size() != labels.size()) throw Error("fit_temperature: logits and labels differ in length");
  if (logits.size() < 2) throw Error("fit_temperature: needs at least two records");
  std::set<int> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) throw Error("fit_temperature: needs at least two distinct labels");
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= logits[i].size()) {
      throw Error("fit_temperature: label out of range");
    }
  }

  constexpr int kGrid = 200;
  std::vector<double> grid(kGrid);
  for (int i = 0; i < kGrid; ++i) grid[i] = std::pow(10.0, -2.0 + 4.0 * i / (kGrid - 1));
  int best = 0;
  double best_nll = TemperatureNll(logits, labels, grid[0]);
  for (int i = 1; i < kGrid; ++i) {
    const double nll = TemperatureNll(logits, labels, grid[i]);
    if (nll < best_nll) {
      best_nll = nll;
      best = i;
    }
  }

  // Golden-section search on the bracketing grid cell.
  double lo = grid[std::max(best - 1, 0)];
  double hi = grid[std::min(best + 1, kGrid - 1)];
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - inv_phi * (hi - lo);
  double b = lo + inv_phi * (hi - lo);
  double fa = TemperatureNll(logits, labels, a);
  double fb = TemperatureNll(logits, labels, b);
  for (int iter = 0; iter < 80 && hi - lo > 1e-10 * hi; ++iter) {
    if (fa < fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - inv_phi * (hi - lo);
      fa = TemperatureNll(logits, labels, a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + inv_phi * (hi - lo);
      fb = TemperatureNll(logits, labels, b);
    }
  }
  const double refined = 0.5 * (lo + hi);
  return TemperatureNll(logits, labels, refined) <= best_nll ? refined : grid[best];
}

void ConfidenceLog::Append(double conf, int is_correct, int pred, std::string tag) {
  confidence.push_back(conf);
  correct.push_back(is_correct);
  predicted.push_back(pred);
  group.push_back(std::move(tag));
}

void ConfidenceLog::Validate() const {
  if (correct.size() != confidence.size() || predicted.size() != confidence.size() ||
      group.size() != confidence.size()) {
    throw Error("confidence log columns differ in length");
  }
  for (std::size_t i = 0; i < size(); ++i) {
    if (!std::isfinite(confidence[i])) throw Error("confidence log has a non-finite score");
    if (correct[i] != 0 && correct[i] != 1) throw Error("confidence log correctness must be 0/1");
  }
}

std::vector<double> ConfidenceLog::CorrectScores() const {
  std::vector<double> out;
  for (std::size_t i = 0; i < size(); ++i) {
    if (correct[i]) out.push_back(confidence[i]);
  }
  return out;
}

std::vector<double> ConfidenceLog::WrongScores() const {
  std::vector<double> out;
  for (std::size_t i = 0; i < size(); ++i) {
    if (!correct[i]) out.push_back(confidence[i]);
  }
  return out;
}

double ConfidenceLog::accuracy() const {
  if (correct.empty()) return 0.0;
  std::size_t hits = 0;
  for (int c : correct) hits += static_cast<std::size_t>(c);
  return static_cast<double>(hits) / static_cast<double>(correct.size());
}

ConfidenceLog BuildLog(const Calibrator& calibrator, const Dataset& dataset,
                       std::string_view group) {
  ConfidenceLog log;
  for (const Sample& s : dataset.samples()) {
    const ScoredPrediction scored = calibrator.Score(s);
    log.Append(scored.confidence, scored.label == s.label ? 1 : 0, scored.label,
               std::string(group));
  }
  return log;
}

void WriteLogCsv(const ConfidenceLog& log, const std::filesystem::path& path) {
  log.Validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "confidence,correct,pred,group\n";
  for (std::size_t i = 0; i < log.size(); ++i) {
    out << FormatDouble(log.confidence[i]) << ',' << log.correct[i] << ',' << log.predicted[i]
        << ',' << log.group[i] << '\n';
  }
}

ConfidenceLog ReadLogCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  ConfidenceLog log;
  std::string line;
  std::getline(in, line);
  if (line != "confidence,correct,pred,group") throw Error("unexpected confidence log header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string conf, correct, pred, group;
    if (!std::getline(ss, conf, ',') || !std::getline(ss, correct, ',') ||
        !std::getline(ss, pred, ',')) {
      throw Error("malformed confidence log row: " + line);
    }
    std::getline(ss, group);
    log.Append(std::stod(conf), std::stoi(correct), std::stoi(pred), group);
  }
  log.Validate();
  return log;
}

}  // namespace selfcal
