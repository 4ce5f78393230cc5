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

#ifndef SELFCAL_OBJECTIVE_H_
#define SELFCAL_OBJECTIVE_H_

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "selfcal/model.h"

namespace selfcal {

struct MainExample {
  SparseVector features;
  int label = 0;
};

struct CalibExample {
  SparseVector features;
  int predicted_label = 0;
  int correctness = 0;
};

struct ConsistencyExample {
  SparseVector clean;
  SparseVector augmented;
  int predicted_label = 0;
};

// Gradient with the same shapes as ModelParameters. Encoder rows are stored
// sparsely: only rows hit by an active feature exist.
class Gradients {
 public:
  explicit Gradients(const ModelParameters& params);

  std::span<double> EncoderRow(std::uint32_t row);
  // Zero-length span when the row was never touched.
  std::span<const double> FindEncoderRow(std::uint32_t row) const;
  std::size_t touched_rows() const { return slots_.size(); }

  Matrix main_weights;
  std::vector<double> main_bias;
  Matrix calib_weights;
  std::vector<double> calib_bias;

  void ApplySgd(ModelParameters& params, double learning_rate) const;

 private:
  int hidden_dim_;
  std::unordered_map<std::uint32_t, std::size_t> slots_;
  std::vector<double> rows_;
};

struct ObjectiveTerms {
  double main = 0.0;         // L_o
  double calib = 0.0;        // L_c
  double consistency = 0.0;  // L_c*
  double total = 0.0;        // L_o + L_c + alpha * L_c*
};

// Batch-mean multi-task objective. Each term is the mean over its own batch
// and is zero when that batch is empty. When `grads` is non-null the
// gradient of `total` is accumulated into it; the consistency gradient flows
// through both KL arguments.
ObjectiveTerms EvaluateObjective(const ModelParameters& params,
                                 std::span<const MainExample> main_batch,
                                 std::span<const CalibExample> calib_batch,
                                 std::span<const ConsistencyExample> consistency_batch,
                                 double alpha, double label_smoothing_epsilon,
                                 Gradients* grads);

}  // namespace selfcal

#endif  // SELFCAL_OBJECTIVE_H_
