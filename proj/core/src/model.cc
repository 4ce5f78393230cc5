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

#include "selfcal/model.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>

#include "selfcal/common.h"
#include "selfcal/objective.h"
#include "selfcal/text.h"

namespace selfcal {

using nlohmann::json;

void FeaturizerConfig::Validate() const {
  if (ngram_max < 1) throw Error("featurizer: ngram_max must be >= 1");
  if (hash_dim == 0 || (hash_dim & (hash_dim - 1)) != 0) {
    throw Error("featurizer: hash_dim must be a power of two");
  }
}

namespace {

void AddNgrams(const std::vector<std::string>& tokens, std::string_view tag,
               const FeaturizerConfig& config,
               std::map<std::uint32_t, double>& counts) {
  const std::uint64_t mask = config.hash_dim - 1;
  for (std::size_t start = 0; start < tokens.size(); ++start) {
    std::string key(tag);
    for (int n = 1; n <= config.ngram_max && start + n <= tokens.size(); ++n) {
      if (n > 1) key.push_back('\x1f');
      key += tokens[start + n - 1];
      // n is folded in so "a" and a one-token "a" bigram can never alias.
      std::uint64_t h = Fnv1a64(key, Fnv1a64(std::string(1, static_cast<char>('0' + n))));
      counts[static_cast<std::uint32_t>(h & mask)] += 1.0;
    }
  }
}

std::vector<std::string> SegmentTokens(std::string_view text, bool lowercase) {
  return lowercase ? Tokenize(ToLower(text)) : Tokenize(text);
}

}  // namespace

SparseVector Featurize(std::string_view text_a,
                       const std::optional<std::string>& text_b,
                       const FeaturizerConfig& config) {
  std::map<std::uint32_t, double> counts;
  const bool tagged = config.segment_tagging && text_b.has_value();
  AddNgrams(SegmentTokens(text_a, config.lowercase), tagged ? "a\x1e" : "", config, counts);
  if (text_b) {
    AddNgrams(SegmentTokens(*text_b, config.lowercase), tagged ? "b\x1e" : "", config,
              counts);
  }
  SparseVector out;
  out.reserve(counts.size());
  for (const auto& [index, value] : counts) out.push_back({index, value});
  return out;
}

std::string_view CalibInputsName(CalibInputs inputs) {
  switch (inputs) {
    case CalibInputs::kAll: return "all";
    case CalibInputs::kWithoutPrediction: return "without_prediction";
    case CalibInputs::kWithoutSample: return "without_sample";
  }
  return "all";
}

CalibInputs ParseCalibInputs(std::string_view name) {
  if (name == "all") return CalibInputs::kAll;
  if (name == "without_prediction") return CalibInputs::kWithoutPrediction;
  if (name == "without_sample") return CalibInputs::kWithoutSample;
  throw Error("unknown calibration input set '" + std::string(name) + "'");
}

ModelParameters ModelParameters::Initialize(const FeaturizerConfig& featurizer,
                                            int num_classes, int hidden_dim,
                                            std::uint64_t seed) {
  featurizer.Validate();
  if (num_classes < 2) throw Error("model needs at least two classes");
  if (hidden_dim < 1) throw Error("hidden_dim must be positive");
  ModelParameters p;
  p.featurizer = featurizer;
  p.num_classes = num_classes;
  p.hidden_dim = hidden_dim;
  p.seed = seed;
  const auto h = static_cast<std::size_t>(hidden_dim);
  const auto c = static_cast<std::size_t>(num_classes);
  p.encoder = Matrix(featurizer.hash_dim, h);
  Rng rng(DeriveSeed(seed, 0xE1C));
  std::uniform_real_distribution<double> init(-0.01, 0.01);
  for (double& w : p.encoder.data()) w = init(rng);
  p.main_weights = Matrix(h, c);
  p.main_bias.assign(c, 0.0);
  p.calib_weights = Matrix(h + c, 2);
  p.calib_bias.assign(2, 0.0);
  return p;
}

void ModelParameters::CheckConsistent() const {
  const auto h = static_cast<std::size_t>(hidden_dim);
  const auto c = static_cast<std::size_t>(num_classes);
  if (encoder.rows() != featurizer.hash_dim || encoder.cols() != h ||
      main_weights.rows() != h || main_weights.cols() != c || main_bias.size() != c ||
      calib_weights.rows() != h + c || calib_weights.cols() != 2 ||
      calib_bias.size() != 2) {
    throw Error("model parameter dimensions are inconsistent");
  }
}

std::vector<double> Encode(const ModelParameters& params,
                           const SparseVector& features) {
  std::vector<double> hidden(static_cast<std::size_t>(params.hidden_dim), 0.0);
  for (const Feature& f : features) {
    if (f.index >= params.encoder.rows()) {
      throw Error("feature index " + std::to_string(f.index) + " exceeds hash_dim");
    }
    auto row = params.encoder.row(f.index);
    for (std::size_t k = 0; k < hidden.size(); ++k) hidden[k] += f.value * row[k];
  }
  return hidden;
}

std::vector<double> MainLogits(const ModelParameters& params,
                               std::span<const double> hidden) {
  if (hidden.size() != params.main_weights.rows()) {
    throw Error("hidden size does not match the main head");
  }
  std::vector<double> logits = params.main_bias;
  for (std::size_t k = 0; k < hidden.size(); ++k) {
    auto row = params.main_weights.row(k);
    for (std::size_t c = 0; c < logits.size(); ++c) logits[c] += hidden[k] * row[c];
  }
  return logits;
}

std::array<double, 2> CalibLogits(const ModelParameters& params,
                                  std::span<const double> hidden, int y_star) {
  if (y_star < 0 || y_star >= params.num_classes) {
    throw Error("invalid predicted label " + std::to_string(y_star) +
                " for the calibration head");
  }
  const auto h = static_cast<std::size_t>(params.hidden_dim);
  if (hidden.size() != h) throw Error("hidden size does not match the calibration head");
  std::array<double, 2> logits = {params.calib_bias[0], params.calib_bias[1]};
  if (params.calib_inputs != CalibInputs::kWithoutSample) {
    for (std::size_t k = 0; k < h; ++k) {
      auto row = params.calib_weights.row(k);
      logits[0] += hidden[k] * row[0];
      logits[1] += hidden[k] * row[1];
    }
  }
  if (params.calib_inputs != CalibInputs::kWithoutPrediction) {
    auto row = params.calib_weights.row(h + static_cast<std::size_t>(y_star));
    logits[0] += row[0];
    logits[1] += row[1];
  }
  return logits;
}

std::vector<double> Softmax(std::span<const double> logits, double temperature) {
  if (!(temperature > 0.0)) throw Error("softmax temperature must be positive");
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  double max_logit = *std::max_element(logits.begin(), logits.end()) / temperature;
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] / temperature - max_logit);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

std::vector<double> ForwardMain(const ModelParameters& params,
                                const SparseVector& features) {
  return Softmax(MainLogits(params, Encode(params, features)));
}

std::array<double, 2> ForwardCalib(const ModelParameters& params,
                                   const SparseVector& features, int y_star) {
  if (y_star < 0 || y_star >= params.num_classes) {
    throw Error("invalid predicted label " + std::to_string(y_star));
  }
  auto logits = CalibLogits(params, Encode(params, features), y_star);
  auto probs = Softmax(logits);
  return {probs[0], probs[1]};
}

double LossCe(std::span<const double> probs, int label, double epsilon) {
  const auto c = probs.size();
  if (label < 0 || static_cast<std::size_t>(label) >= c) {
    throw Error("cross-entropy label out of range");
  }
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw Error("label smoothing must be in [0,1)");
  double loss = -(1.0 - epsilon) * std::log(std::max(probs[label], kLogFloor));
  if (epsilon > 0.0 && c > 1) {
    const double off = epsilon / static_cast<double>(c - 1);
    for (std::size_t i = 0; i < c; ++i) {
      if (static_cast<int>(i) != label) loss -= off * std::log(std::max(probs[i], kLogFloor));
    }
  }
  return loss;
}

double LossKl(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw Error("KL arguments differ in length");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    kl += p[i] * (std::log(std::max(p[i], kLogFloor)) - std::log(std::max(q[i], kLogFloor)));
  }
  return kl;
}

Prediction PredictFeatures(const ModelParameters& params,
                           const SparseVector& features) {
  Prediction out;
  out.logits = MainLogits(params, Encode(params, features));
  auto probs = Softmax(out.logits);
  // max_element returns the first maximum: lowest index wins ties.
  auto best = std::max_element(probs.begin(), probs.end());
  out.label = static_cast<int>(best - probs.begin());
  out.max_probability = *best;
  return out;
}

Prediction Predict(const ModelParameters& params, const Sample& sample) {
  return PredictFeatures(params, Featurize(sample.text_a, sample.text_b, params.featurizer));
}

void TrainConfig::Validate() const {
  if (!(learning_rate >= 0.0)) throw Error("train: learning_rate must be >= 0");
  if (epochs < 1) throw Error("train: epochs must be >= 1");
  if (batch_size < 1) throw Error("train: batch_size must be >= 1");
  if (hidden_dim < 1) throw Error("train: hidden_dim must be >= 1");
  if (!(label_smoothing_epsilon >= 0.0 && label_smoothing_epsilon < 1.0)) {
    throw Error("train: label_smoothing_epsilon must be in [0,1)");
  }
}

TrainResult TrainMain(const Dataset& dataset, const FeaturizerConfig& featurizer,
                      const TrainConfig& config) {
  config.Validate();
  if (dataset.empty()) throw Error("train_main: empty dataset");
  TrainResult result{ModelParameters::Initialize(featurizer, dataset.num_classes(),
                                                 config.hidden_dim, config.seed),
                     {}};
  std::vector<MainExample> examples;
  examples.reserve(dataset.size());
  for (const Sample& s : dataset.samples()) {
    examples.push_back({Featurize(s.text_a, s.text_b, featurizer), s.label});
  }
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(DeriveSeed(config.seed, 0x5A1E));
  const auto batch = static_cast<std::size_t>(config.batch_size);
  std::vector<MainExample> minibatch;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      minibatch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + batch); ++i) {
        minibatch.push_back(examples[order[i]]);
      }
      Gradients grads(result.params);
      auto terms = EvaluateObjective(result.params, minibatch, {}, {}, 0.0,
                                     config.label_smoothing_epsilon, &grads);
      grads.ApplySgd(result.params, config.learning_rate);
      result.loss_trace.push_back(terms.total);
    }
  }
  return result;
}

double Accuracy(const ModelParameters& params, const Dataset& dataset) {
  if (dataset.empty()) return 0.0;
  std::size_t hits = 0;
  for (const Sample& s : dataset.samples()) hits += Predict(params, s).label == s.label;
  return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

namespace {

constexpr char kMagic[8] = {'S', 'E', 'L', 'F', 'C', 'A', 'L', '1'};

json FeaturizerJson(const FeaturizerConfig& f) {
  return {{"lowercase", f.lowercase}, {"ngram_max", f.ngram_max},
          {"hash_dim", f.hash_dim}, {"segment_tagging", f.segment_tagging}};
}

void WriteTensor(std::ofstream& out, const std::vector<double>& values) {
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

void ReadTensor(std::ifstream& in, std::vector<double>& values) {
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!in) throw Error("model file is truncated");
}

}  // namespace

void SaveModel(const ModelParameters& params, const std::filesystem::path& path) {
  params.CheckConsistent();
  json header = {
      {"format", 1},
      {"num_classes", params.num_classes},
      {"hidden_dim", params.hidden_dim},
      {"seed", params.seed},
      {"calib_inputs", CalibInputsName(params.calib_inputs)},
      {"featurizer", FeaturizerJson(params.featurizer)},
      {"tensors",
       json::array({{{"name", "encoder"}, {"shape", {params.encoder.rows(), params.encoder.cols()}}},
                    {{"name", "main_weights"},
                     {"shape", {params.main_weights.rows(), params.main_weights.cols()}}},
                    {{"name", "main_bias"}, {"shape", {params.main_bias.size()}}},
                    {{"name", "calib_weights"},
                     {"shape", {params.calib_weights.rows(), params.calib_weights.cols()}}},
                    {{"name", "calib_bias"}, {"shape", {params.calib_bias.size()}}}})},
  };
  std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out.write(kMagic, sizeof(kMagic));
  std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  WriteTensor(out, params.encoder.data());
  WriteTensor(out, params.main_weights.data());
  WriteTensor(out, params.main_bias);
  WriteTensor(out, params.calib_weights.data());
  WriteTensor(out, params.calib_bias);
}

ModelParameters LoadModel(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model '" + path.string() + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error("'" + path.string() + "' is not a model file");
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1u << 24)) throw Error("model header is corrupt");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  json header = json::parse(text);

  ModelParameters p;
  const json& f = header.at("featurizer");
  p.featurizer.lowercase = f.at("lowercase").get<bool>();
  p.featurizer.ngram_max = f.at("ngram_max").get<int>();
  p.featurizer.hash_dim = f.at("hash_dim").get<std::uint32_t>();
  p.featurizer.segment_tagging = f.at("segment_tagging").get<bool>();
  p.featurizer.Validate();
  p.num_classes = header.at("num_classes").get<int>();
  p.hidden_dim = header.at("hidden_dim").get<int>();
  p.seed = header.at("seed").get<std::uint64_t>();
  p.calib_inputs = ParseCalibInputs(header.at("calib_inputs").get<std::string>());
  const auto h = static_cast<std::size_t>(p.hidden_dim);
  const auto c = static_cast<std::size_t>(p.num_classes);
  p.encoder = Matrix(p.featurizer.hash_dim, h);
  p.main_weights = Matrix(h, c);
  p.main_bias.assign(c, 0.0);
  p.calib_weights = Matrix(h + c, 2);
  p.calib_bias.assign(2, 0.0);
  ReadTensor(in, p.encoder.data());
  ReadTensor(in, p.main_weights.data());
  ReadTensor(in, p.main_bias);
  ReadTensor(in, p.calib_weights.data());
  ReadTensor(in, p.calib_bias);
  return p;
}

}  // namespace selfcal
