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

#include "selfcal/objective.h"

#include <algorithm>
#include <cmath>

#include "selfcal/common.h"

namespace selfcal {

Gradients::Gradients(const ModelParameters& params)
    : main_weights(params.main_weights.rows(), params.main_weights.cols()),
      main_bias(params.main_bias.size(), 0.0),
      calib_weights(params.calib_weights.rows(), params.calib_weights.cols()),
      calib_bias(params.calib_bias.size(), 0.0),
      hidden_dim_(params.hidden_dim) {}

std::span<double> Gradients::EncoderRow(std::uint32_t row) {
  const auto h = static_cast<std::size_t>(hidden_dim_);
  auto [it, inserted] = slots_.try_emplace(row, rows_.size() / h);
  if (inserted) rows_.resize(rows_.size() + h, 0.0);
  return {rows_.data() + it->second * h, h};
}

std::span<const double> Gradients::FindEncoderRow(std::uint32_t row) const {
  auto it = slots_.find(row);
  if (it == slots_.end()) return {};
  const auto h = static_cast<std::size_t>(hidden_dim_);
  return {rows_.data() + it->second * h, h};
}

void Gradients::ApplySgd(ModelParameters& params, double learning_rate) const {
  for (const auto& [row, slot] : slots_) {
    auto target = params.encoder.row(row);
    const double* g = rows_.data() + slot * static_cast<std::size_t>(hidden_dim_);
    for (std::size_t k = 0; k < target.size(); ++k) target[k] -= learning_rate * g[k];
  }
  auto step = [learning_rate](std::vector<double>& w, const std::vector<double>& g) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= learning_rate * g[i];
  };
  step(params.main_weights.data(), main_weights.data());
  step(params.main_bias, main_bias);
  step(params.calib_weights.data(), calib_weights.data());
  step(params.calib_bias, calib_bias);
}

namespace {

// d/dz of a loss through softmax, given d/dp.
std::vector<double> SoftmaxBackward(std::span<const double> probs,
                                    std::span<const double> grad_probs) {
  double dot = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) dot += probs[i] * grad_probs[i];
  std::vector<double> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] * (grad_probs[i] - dot);
  return out;
}

void BackpropEncoder(const SparseVector& features, std::span<const double> grad_hidden,
                     Gradients& grads) {
  for (const Feature& f : features) {
    auto row = grads.EncoderRow(f.index);
    for (std::size_t k = 0; k < row.size(); ++k) row[k] += f.value * grad_hidden[k];
  }
}

// Forward state of the calibration head for one input.
struct CalibForward {
  std::vector<double> hidden;
  std::vector<double> probs;
};

CalibForward RunCalib(const ModelParameters& params, const SparseVector& features,
                      int y_star) {
  CalibForward out;
  out.hidden = Encode(params, features);
  auto logits = CalibLogits(params, out.hidden, y_star);
  out.probs = Softmax(logits);
  return out;
}

// Accumulates the calibration-head gradient for d(loss)/d(logits) = grad_z.
void BackpropCalib(const ModelParameters& params, const SparseVector& features,
                   const CalibForward& fwd, int y_star, std::span<const double> grad_z,
                   Gradients& grads) {
  const auto h = static_cast<std::size_t>(params.hidden_dim);
  const bool use_sample = params.calib_inputs != CalibInputs::kWithoutSample;
  const bool use_prediction = params.calib_inputs != CalibInputs::kWithoutPrediction;
  for (std::size_t t = 0; t < 2; ++t) grads.calib_bias[t] += grad_z[t];
  if (use_prediction) {
    auto row = grads.calib_weights.row(h + static_cast<std::size_t>(y_star));
    row[0] += grad_z[0];
    row[1] += grad_z[1];
  }
  if (!use_sample) return;
  std::vector<double> grad_hidden(h, 0.0);
  for (std::size_t k = 0; k < h; ++k) {
    auto grow = grads.calib_weights.row(k);
    auto wrow = params.calib_weights.row(k);
    grow[0] += fwd.hidden[k] * grad_z[0];
    grow[1] += fwd.hidden[k] * grad_z[1];
    grad_hidden[k] = wrow[0] * grad_z[0] + wrow[1] * grad_z[1];
  }
  BackpropEncoder(features, grad_hidden, grads);
}

}  // namespace

ObjectiveTerms EvaluateObjective(const ModelParameters& params,
                                 std::span<const MainExample> main_batch,
                                 std::span<const CalibExample> calib_batch,
                                 std::span<const ConsistencyExample> consistency_batch,
                                 double alpha, double label_smoothing_epsilon,
                                 Gradients* grads) {
  ObjectiveTerms terms;
  const auto h = static_cast<std::size_t>(params.hidden_dim);
  const auto c = static_cast<std::size_t>(params.num_classes);

  if (!main_batch.empty()) {
    const double scale = 1.0 / static_cast<double>(main_batch.size());
    const double eps = label_smoothing_epsilon;
    for (const MainExample& ex : main_batch) {
      auto hidden = Encode(params, ex.features);
      auto probs = Softmax(MainLogits(params, hidden));
      terms.main += LossCe(probs, ex.label, eps) * scale;
      if (!grads) continue;
      // d CE / d z = p - target, exact when no probability hits the floor.
      std::vector<double> grad_z(c);
      const double off = c > 1 ? eps / static_cast<double>(c - 1) : 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        double target = static_cast<int>(j) == ex.label ? 1.0 - eps : off;
        grad_z[j] = (probs[j] - target) * scale;
        grads->main_bias[j] += grad_z[j];
      }
      std::vector<double> grad_hidden(h, 0.0);
      for (std::size_t k = 0; k < h; ++k) {
        auto grow = grads->main_weights.row(k);
        auto wrow = params.main_weights.row(k);
        double acc = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          grow[j] += hidden[k] * grad_z[j];
          acc += wrow[j] * grad_z[j];
        }
        grad_hidden[k] = acc;
      }
      BackpropEncoder(ex.features, grad_hidden, *grads);
    }
  }

  if (!calib_batch.empty()) {
    const double scale = 1.0 / static_cast<double>(calib_batch.size());
    for (const CalibExample& ex : calib_batch) {
      if (ex.correctness != 0 && ex.correctness != 1) {
        throw Error("calibration correctness must be 0 or 1");
      }
      auto fwd = RunCalib(params, ex.features, ex.predicted_label);
      terms.calib += LossCe(fwd.probs, ex.correctness, 0.0) * scale;
      if (!grads) continue;
      std::array<double, 2> grad_z = {fwd.probs[0] * scale, fwd.probs[1] * scale};
      grad_z[static_cast<std::size_t>(ex.correctness)] -= scale;
      BackpropCalib(params, ex.features, fwd, ex.predicted_label, grad_z, *grads);
    }
  }

  if (!consistency_batch.empty()) {
    const double scale = 1.0 / static_cast<double>(consistency_batch.size());
    for (const ConsistencyExample& ex : consistency_batch) {
      auto clean = RunCalib(params, ex.clean, ex.predicted_label);
      auto aug = RunCalib(params, ex.augmented, ex.predicted_label);
      terms.consistency += LossKl(clean.probs, aug.probs) * scale;
      if (!grads) continue;
      // KL(p || q) = sum p_i (log max(p_i, floor) - log max(q_i, floor)).
      std::array<double, 2> dp{}, dq{};
      for (std::size_t i = 0; i < 2; ++i) {
        const double p = clean.probs[i];
        const double q = aug.probs[i];
        if (p <= 0.0) continue;
        const double log_p = std::log(std::max(p, kLogFloor));
        const double log_q = std::log(std::max(q, kLogFloor));
        dp[i] = (log_p - log_q) + (p >= kLogFloor ? 1.0 : 0.0);
        dq[i] = q >= kLogFloor ? -p / q : 0.0;
      }
      const double weight = alpha * scale;
      auto grad_zp = SoftmaxBackward(clean.probs, dp);
      auto grad_zq = SoftmaxBackward(aug.probs, dq);
      for (double& g : grad_zp) g *= weight;
      for (double& g : grad_zq) g *= weight;
      BackpropCalib(params, ex.clean, clean, ex.predicted_label, grad_zp, *grads);
      BackpropCalib(params, ex.augmented, aug, ex.predicted_label, grad_zq, *grads);
    }
  }

  terms.total = terms.main + terms.calib + alpha * terms.consistency;
  return terms;
}

}  // namespace selfcal
