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

#ifndef SELFCAL_MODEL_H_
#define SELFCAL_MODEL_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "selfcal/corpus.h"

namespace selfcal {

struct FeaturizerConfig {
  bool lowercase = true;
  int ngram_max = 2;
  std::uint32_t hash_dim = 1u << 18;  // must be a power of two
  bool segment_tagging = true;        // text_b n-grams hash to distinct keys

  void Validate() const;
  friend bool operator==(const FeaturizerConfig&,
                         const FeaturizerConfig&) = default;
};

struct Feature {
  std::uint32_t index = 0;
  double value = 0.0;

  friend bool operator==(const Feature&, const Feature&) = default;
};

// Sorted by index, one entry per index, all values positive.
using SparseVector = std::vector<Feature>;

SparseVector Featurize(std::string_view text_a,
                       const std::optional<std::string>& text_b,
                       const FeaturizerConfig& config);

// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols),
                                               data_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Which blocks of the calibration-head input are live. The ablations zero the
// encoder block or the one-hot prediction block.
enum class CalibInputs { kAll, kWithoutPrediction, kWithoutSample };

std::string_view CalibInputsName(CalibInputs inputs);
CalibInputs ParseCalibInputs(std::string_view name);

// Shared linear encoder h = E^T f feeding two heads:
//   main:  softmax(M^T h + b_m)                   over C classes
//   calib: softmax(K^T [h ; onehot(y*)] + b_k)    over {False, True}
struct ModelParameters {
  FeaturizerConfig featurizer;
  int num_classes = 0;
  int hidden_dim = 0;
  std::uint64_t seed = 0;
  CalibInputs calib_inputs = CalibInputs::kAll;

  Matrix encoder;        // hash_dim x H
  Matrix main_weights;   // H x C
  std::vector<double> main_bias;
  Matrix calib_weights;  // (H + C) x 2
  std::vector<double> calib_bias;

  // Encoder entries uniform in [-0.01, 0.01] from `seed`; heads zero.
  static ModelParameters Initialize(const FeaturizerConfig& featurizer,
                                    int num_classes, int hidden_dim,
                                    std::uint64_t seed);

  void CheckConsistent() const;
  friend bool operator==(const ModelParameters&,
                         const ModelParameters&) = default;
};

std::vector<double> Encode(const ModelParameters& params,
                           const SparseVector& features);
std::vector<double> MainLogits(const ModelParameters& params,
                               std::span<const double> hidden);
std::array<double, 2> CalibLogits(const ModelParameters& params,
                                  std::span<const double> hidden, int y_star);

// Numerically stable softmax of logits / temperature.
std::vector<double> Softmax(std::span<const double> logits,
                            double temperature = 1.0);

std::vector<double> ForwardMain(const ModelParameters& params,
                                const SparseVector& features);

// Returns (P_False, P_True).
std::array<double, 2> ForwardCalib(const ModelParameters& params,
                                   const SparseVector& features, int y_star);

inline constexpr double kLogFloor = 1e-12;

// Cross-entropy against a target with 1 - epsilon on `label` and
// epsilon / (C - 1) elsewhere.
double LossCe(std::span<const double> probs, int label, double epsilon = 0.0);

// KL(p || q) with both arguments floored at kLogFloor inside the log.
double LossKl(std::span<const double> p, std::span<const double> q);

struct Prediction {
  int label = 0;
  double max_probability = 0.0;
  std::vector<double> logits;
};

// Argmax of the main head; ties go to the lowest class index.
Prediction Predict(const ModelParameters& params, const Sample& sample);
Prediction PredictFeatures(const ModelParameters& params,
                           const SparseVector& features);

struct TrainConfig {
  double learning_rate = 0.5;
  int epochs = 5;
  int batch_size = 32;
  std::uint64_t seed = 0;
  double label_smoothing_epsilon = 0.0;
  int hidden_dim = 64;

  void Validate() const;
};

struct TrainResult {
  ModelParameters params;
  std::vector<double> loss_trace;  // mean batch loss, one entry per step
};

// Shuffled mini-batch SGD on the main-task cross-entropy.
TrainResult TrainMain(const Dataset& dataset, const FeaturizerConfig& featurizer,
                      const TrainConfig& config);

double Accuracy(const ModelParameters& params, const Dataset& dataset);

// Binary tensor file: magic, JSON header length, JSON header (dims, configs,
// seed), then little-endian float64 tensors in declaration order.
void SaveModel(const ModelParameters& params, const std::filesystem::path& path);
ModelParameters LoadModel(const std::filesystem::path& path);

}  // namespace selfcal

#endif  // SELFCAL_MODEL_H_
