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

#ifndef SELFCAL_CALIBRATORS_H_
#define SELFCAL_CALIBRATORS_H_

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "selfcal/corpus.h"
#include "selfcal/model.h"

namespace selfcal {

enum class Method { kVanilla, kTemperature, kLabelSmoothing, kToast };

std::string_view MethodName(Method method);
Method ParseMethod(std::string_view name);

struct ScoredPrediction {
  int label = 0;
  double confidence = 0.0;
};

// Uniform confidence interface over a bound model.
//   vanilla, label_smoothing: max main-head probability
//   temperature:              max of softmax(logits / T)
//   toast:                    P_True of the calibration head at the
//                             main-head prediction
class Calibrator {
 public:
  Calibrator(Method method, std::shared_ptr<const ModelParameters> model,
             std::optional<double> temperature = std::nullopt);

  Method method() const { return method_; }
  const ModelParameters& model() const { return *model_; }
  std::optional<double> temperature() const { return temperature_; }
  void set_temperature(double t);

  ScoredPrediction Score(const Sample& sample) const;

 private:
  Method method_;
  std::shared_ptr<const ModelParameters> model_;
  std::optional<double> temperature_;
};

// Minimizes mean NLL of softmax(logits / T) over a 200-point log grid on
// [0.01, 100], then refines by golden-section search between the grid
// neighbours of the best point.
double FitTemperature(std::span<const std::vector<double>> logits,
                      std::span<const int> labels);

// FitTemperature on the main-head logits of `held_out`.
double FitTemperatureOn(const ModelParameters& params, const Dataset& held_out);

double TemperatureNll(std::span<const std::vector<double>> logits,
                      std::span<const int> labels, double temperature);

struct ConfidenceLog {
  std::vector<double> confidence;
  std::vector<int> correct;
  std::vector<int> predicted;
  std::vector<std::string> group;

  std::size_t size() const { return confidence.size(); }
  void Append(double conf, int is_correct, int pred, std::string tag);
  void Validate() const;

  // Confidences of correct (resp. wrong) rows.
  std::vector<double> CorrectScores() const;
  std::vector<double> WrongScores() const;
  double accuracy() const;
};

ConfidenceLog BuildLog(const Calibrator& calibrator, const Dataset& dataset,
                       std::string_view group);

// CSV "confidence,correct,pred,group".
void WriteLogCsv(const ConfidenceLog& log, const std::filesystem::path& path);
ConfidenceLog ReadLogCsv(const std::filesystem::path& path);

}  // namespace selfcal

#endif  // SELFCAL_CALIBRATORS_H_
