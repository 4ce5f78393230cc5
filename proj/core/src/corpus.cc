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

#include "selfcal/corpus.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "selfcal/common.h"
#include "selfcal/text.h"

namespace selfcal {

using nlohmann::json;

std::string_view TaskKindName(TaskKind kind) {
  return kind == TaskKind::kSingleText ? "single" : "pair";
}

TaskKind ParseTaskKind(std::string_view name) {
  if (name == "single" || name == "single-text") return TaskKind::kSingleText;
  if (name == "pair" || name == "text-pair") return TaskKind::kTextPair;
  throw Error("unknown task kind '" + std::string(name) + "'");
}

Dataset::Dataset(std::vector<Sample> samples,
                 std::vector<std::string> label_names, TaskKind task_kind)
    : samples_(std::move(samples)),
      label_names_(std::move(label_names)),
      task_kind_(task_kind) {
  if (label_names_.size() < 2) {
    throw Error("dataset needs at least two label names");
  }
  std::set<std::string_view> ids;
  for (const Sample& s : samples_) {
    if (!ids.insert(s.id).second) {
      throw Error("duplicate sample id '" + s.id + "'");
    }
    if (s.label < 0 || s.label >= num_classes()) {
      throw Error("sample '" + s.id + "' has out-of-range label " +
                  std::to_string(s.label));
    }
    if (Tokenize(s.text_a).empty()) {
      throw Error("sample '" + s.id + "' has empty text");
    }
    if (task_kind_ == TaskKind::kTextPair && !s.text_b) {
      throw Error("sample '" + s.id + "' lacks text_pair for a pair task");
    }
  }
}

Dataset Dataset::Subset(std::span<const std::size_t> indices) const {
  std::vector<Sample> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(samples_.at(i));
  return Dataset(std::move(out), label_names_, task_kind_);
}

namespace {

std::string LinePrefix(std::size_t line_no) {
  return "line " + std::to_string(line_no) + ": ";
}

}  // namespace

Dataset LoadDataset(const std::filesystem::path& path, TaskKind task_kind) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset '" + path.string() + "'");

  std::vector<std::string> label_names;
  bool fixed_labels = false;
  std::map<std::string, int> label_index;
  std::vector<Sample> samples;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(LinePrefix(line_no) + "malformed JSON: " + e.what());
    }
    if (!obj.is_object()) throw Error(LinePrefix(line_no) + "expected an object");

    if (obj.contains("label_names")) {
      if (!samples.empty() || fixed_labels) {
        throw Error(LinePrefix(line_no) + "label_names header must be the first line");
      }
      try {
        label_names = obj.at("label_names").get<std::vector<std::string>>();
      } catch (const json::exception&) {
        throw Error(LinePrefix(line_no) + "label_names must be a list of strings");
      }
      for (std::size_t i = 0; i < label_names.size(); ++i) {
        label_index.emplace(label_names[i], static_cast<int>(i));
      }
      fixed_labels = true;
      continue;
    }

    Sample s;
    if (!obj.contains("text") || !obj["text"].is_string()) {
      throw Error(LinePrefix(line_no) + "missing string field 'text'");
    }
    s.text_a = obj["text"].get<std::string>();
    if (obj.contains("text_pair")) {
      if (task_kind == TaskKind::kSingleText) {
        throw Error(LinePrefix(line_no) + "text_pair given for a single-text task");
      }
      if (!obj["text_pair"].is_string()) {
        throw Error(LinePrefix(line_no) + "text_pair must be a string");
      }
      s.text_b = obj["text_pair"].get<std::string>();
    } else if (task_kind == TaskKind::kTextPair) {
      throw Error(LinePrefix(line_no) + "missing string field 'text_pair'");
    }

    if (!obj.contains("label")) throw Error(LinePrefix(line_no) + "missing field 'label'");
    const json& label = obj["label"];
    std::string name;
    if (label.is_string()) {
      name = label.get<std::string>();
    } else if (label.is_number_integer()) {
      long long v = label.get<long long>();
      if (fixed_labels) {
        if (v < 0 || v >= static_cast<long long>(label_names.size())) {
          throw Error(LinePrefix(line_no) + "label index " + std::to_string(v) +
                      " out of range");
        }
        name = label_names[static_cast<std::size_t>(v)];
      } else {
        name = std::to_string(v);
      }
    } else {
      throw Error(LinePrefix(line_no) + "label must be a string or integer");
    }
    auto it = label_index.find(name);
    if (it == label_index.end()) {
      if (fixed_labels) throw Error(LinePrefix(line_no) + "unknown label '" + name + "'");
      it = label_index.emplace(name, static_cast<int>(label_names.size())).first;
      label_names.push_back(name);
    }
    s.label = it->second;

    if (obj.contains("id")) {
      const json& id = obj["id"];
      s.id = id.is_string() ? id.get<std::string>() : id.dump();
    } else {
      s.id = "line-" + std::to_string(line_no);
    }
    if (Tokenize(s.text_a).empty()) {
      throw Error(LinePrefix(line_no) + "text has no tokens");
    }
    samples.push_back(std::move(s));
  }
  if (samples.empty()) throw Error("no samples in '" + path.string() + "'");
  if (label_names.size() < 2) {
    throw Error("'" + path.string() + "' has fewer than two labels; add a label_names header");
  }
  return Dataset(std::move(samples), std::move(label_names), task_kind);
}

void SaveDataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << json{{"label_names", dataset.label_names()}}.dump() << '\n';
  for (const Sample& s : dataset.samples()) {
    json obj = {{"id", s.id}, {"text", s.text_a}};
    if (s.text_b) obj["text_pair"] = *s.text_b;
    obj["label"] = dataset.label_names()[static_cast<std::size_t>(s.label)];
    out << obj.dump() << '\n';
  }
}

std::vector<Dataset> SplitFolds(const Dataset& dataset, int k,
                                std::uint64_t seed) {
  if (k < 2) throw Error("split_folds needs K >= 2");
  if (static_cast<std::size_t>(k) > dataset.size()) {
    throw Error("split_folds: K=" + std::to_string(k) + " exceeds dataset size " +
                std::to_string(dataset.size()));
  }
  // Shuffle within each class, lay classes end to end, deal round-robin.
  // Consecutive positions land in consecutive folds, so both fold sizes and
  // per-class counts differ by at most one.
  Rng rng(DeriveSeed(seed, 0xF01D));
  std::vector<std::vector<std::size_t>> by_class(
      static_cast<std::size_t>(dataset.num_classes()));
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    by_class[static_cast<std::size_t>(dataset[i].label)].push_back(i);
  }
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(k));
  std::size_t position = 0;
  for (auto& group : by_class) {
    std::shuffle(group.begin(), group.end(), rng);
    for (std::size_t idx : group) {
      members[position % static_cast<std::size_t>(k)].push_back(idx);
      ++position;
    }
  }
  std::vector<Dataset> folds;
  folds.reserve(members.size());
  for (auto& m : members) {
    std::sort(m.begin(), m.end());
    folds.push_back(dataset.Subset(m));
  }
  return folds;
}

HoldoutSplit SplitHoldout(const Dataset& dataset, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw Error("holdout fraction must be in (0,1)");
  if (dataset.size() < 2) throw Error("holdout split needs at least two samples");
  auto n_held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(dataset.size())));
  n_held = std::clamp<std::size_t>(n_held, 1, dataset.size() - 1);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(DeriveSeed(seed, 0x401D));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> held(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_held));
  std::vector<std::size_t> kept(order.begin() + static_cast<std::ptrdiff_t>(n_held), order.end());
  std::sort(held.begin(), held.end());
  std::sort(kept.begin(), kept.end());
  return {dataset.Subset(kept), dataset.Subset(held)};
}

void SynthConfig::Validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw Error(std::string("synthetic: ") + name + " must be positive");
  };
  positive(num_classes, "num_classes");
  positive(vocab_size, "vocab_size");
  positive(samples_per_class, "samples_per_class");
  positive(test_samples_per_class, "test_samples_per_class");
  positive(tokens_per_sample, "tokens_per_sample");
  positive(indicative_per_sample, "indicative_per_sample");
  if (num_classes < 2) throw Error("synthetic: num_classes must be at least 2");
  if (hard_marker_tokens < 0) throw Error("synthetic: hard_marker_tokens must be >= 0");
  if (!(hardness_fraction >= 0.0 && hardness_fraction <= 1.0)) {
    throw Error("synthetic: hardness_fraction must be in [0,1]");
  }
  if (!(hard_flip_prob >= 0.0 && hard_flip_prob <= 1.0)) {
    throw Error("synthetic: hard_flip_prob must be in [0,1]");
  }
  if (indicative_per_sample + 1 + hard_marker_tokens > tokens_per_sample) {
    throw Error("synthetic: tokens_per_sample too small for the planted tokens");
  }
  if (noise_vocab_size() < tokens_per_sample) {
    throw Error("synthetic: vocab_size too small for the class and marker pools");
  }
}

int SynthConfig::indicative_vocab_per_class() const {
  return std::max(4, vocab_size / (5 * std::max(1, num_classes)));
}

int SynthConfig::marker_vocab_size() const { return std::max(4, vocab_size / 50); }

int SynthConfig::noise_vocab_size() const {
  return vocab_size - num_classes * indicative_vocab_per_class() - marker_vocab_size();
}

std::string IndicativeToken(int label, int j) {
  return "c" + std::to_string(label) + "w" + std::to_string(j);
}
std::string MarkerToken(int j) { return "m" + std::to_string(j); }
std::string NoiseToken(int j) { return "n" + std::to_string(j); }

namespace {

int OtherClass(int label, int num_classes, Rng& rng) {
  std::uniform_int_distribution<int> pick(0, num_classes - 2);
  int other = pick(rng);
  return other >= label ? other + 1 : other;
}

void GenerateSplit(const SynthConfig& cfg, int per_class, std::string_view prefix,
                   Rng& rng, std::vector<Sample>& samples,
                   std::vector<bool>& hard_flags) {
  std::uniform_int_distribution<int> ind(0, cfg.indicative_vocab_per_class() - 1);
  std::uniform_int_distribution<int> marker(0, cfg.marker_vocab_size() - 1);
  std::uniform_int_distribution<int> noise(0, cfg.noise_vocab_size() - 1);
  std::bernoulli_distribution is_hard(cfg.hardness_fraction);
  std::bernoulli_distribution flips(cfg.hard_flip_prob);

  struct Draft {
    Sample sample;
    bool hard;
  };
  std::vector<Draft> drafts;
  for (int g = 0; g < cfg.num_classes; ++g) {
    for (int i = 0; i < per_class; ++i) {
      bool hard = is_hard(rng);
      std::vector<std::string> tokens;
      if (hard) {
        int own = std::max(1, cfg.indicative_per_sample / 2);
        for (int j = 0; j < own; ++j) tokens.push_back(IndicativeToken(g, ind(rng)));
        tokens.push_back(IndicativeToken(OtherClass(g, cfg.num_classes, rng), ind(rng)));
        for (int j = 0; j < cfg.hard_marker_tokens; ++j) {
          tokens.push_back(MarkerToken(marker(rng)));
        }
      } else {
        for (int j = 0; j < cfg.indicative_per_sample; ++j) {
          tokens.push_back(IndicativeToken(g, ind(rng)));
        }
      }
      while (static_cast<int>(tokens.size()) < cfg.tokens_per_sample) {
        tokens.push_back(NoiseToken(noise(rng)));
      }
      std::shuffle(tokens.begin(), tokens.end(), rng);
      int label = g;
      if (hard && flips(rng)) label = OtherClass(g, cfg.num_classes, rng);
      drafts.push_back({Sample{"", JoinTokens(tokens), std::nullopt, label}, hard});
    }
  }
  std::shuffle(drafts.begin(), drafts.end(), rng);
  char buf[32];
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "-%06zu", i);
    drafts[i].sample.id = std::string(prefix) + buf;
    samples.push_back(std::move(drafts[i].sample));
    hard_flags.push_back(drafts[i].hard);
  }
}

std::vector<std::string> SyntheticLabelNames(int num_classes) {
  std::vector<std::string> names;
  for (int c = 0; c < num_classes; ++c) names.push_back("class" + std::to_string(c));
  return names;
}

}  // namespace

SyntheticData GenerateSynthetic(const SynthConfig& config) {
  config.Validate();
  std::vector<Sample> train, test;
  std::vector<bool> train_hard, test_hard;
  Rng train_rng(DeriveSeed(config.seed, 1));
  Rng test_rng(DeriveSeed(config.seed, 2));
  GenerateSplit(config, config.samples_per_class, "train", train_rng, train, train_hard);
  GenerateSplit(config, config.test_samples_per_class, "test", test_rng, test, test_hard);
  auto names = SyntheticLabelNames(config.num_classes);
  return SyntheticData{Dataset(std::move(train), names, TaskKind::kSingleText),
                       Dataset(std::move(test), names, TaskKind::kSingleText),
                       std::move(train_hard), std::move(test_hard)};
}

void SaveHardnessFlags(const Dataset& dataset, const std::vector<bool>& hard,
                       const std::filesystem::path& path) {
  if (hard.size() != dataset.size()) throw Error("hardness flags do not match dataset");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "id,hard\n";
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    out << dataset[i].id << ',' << (hard[i] ? 1 : 0) << '\n';
  }
}

std::vector<bool> LoadHardnessFlags(const Dataset& dataset,
                                    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::map<std::string, bool> flags;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    auto comma = line.rfind(',');
    if (comma == std::string::npos) throw Error("malformed hardness row: " + line);
    flags[line.substr(0, comma)] = line.substr(comma + 1) == "1";
  }
  std::vector<bool> out;
  for (const Sample& s : dataset.samples()) {
    auto it = flags.find(s.id);
    if (it == flags.end()) throw Error("no hardness flag for '" + s.id + "'");
    out.push_back(it->second);
  }
  return out;
}

}  // namespace selfcal
