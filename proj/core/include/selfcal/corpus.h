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

#ifndef SELFCAL_CORPUS_H_
#define SELFCAL_CORPUS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace selfcal {

enum class TaskKind { kSingleText, kTextPair };

std::string_view TaskKindName(TaskKind kind);
TaskKind ParseTaskKind(std::string_view name);

struct Sample {
  std::string id;
  std::string text_a;
  std::optional<std::string> text_b;  // second segment for pair tasks
  int label = 0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

// An immutable labeled collection. The constructor enforces the invariants:
// unique ids, at least two label names, labels in range, and a non-empty
// first segment for every sample.
class Dataset {
 public:
  Dataset(std::vector<Sample> samples, std::vector<std::string> label_names,
          TaskKind task_kind);

  const std::vector<Sample>& samples() const { return samples_; }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  int num_classes() const { return static_cast<int>(label_names_.size()); }
  const std::vector<std::string>& label_names() const { return label_names_; }
  TaskKind task_kind() const { return task_kind_; }

  // Samples at `indices`, in the order given.
  Dataset Subset(std::span<const std::size_t> indices) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::vector<Sample> samples_;
  std::vector<std::string> label_names_;
  TaskKind task_kind_;
};

// (x_i, y_i*, c_i): one row of the calibration dataset.
struct CalibrationRecord {
  std::string sample_id;
  std::string text_a;
  std::optional<std::string> text_b;
  int predicted_label = 0;
  int correctness = 0;  // 1 iff predicted_label equals the gold label

  friend bool operator==(const CalibrationRecord&,
                         const CalibrationRecord&) = default;
};

// Reads one JSON object per line: {"text": ..., "text_pair": ..., "label": ...}
// with an optional "id". An optional first line {"label_names": [...]} fixes
// the label vocabulary; otherwise labels are indexed by first appearance.
// Unknown keys are ignored.
Dataset LoadDataset(const std::filesystem::path& path, TaskKind task_kind);

// Writes the header line plus one object per sample; LoadDataset reads it
// back to an equal Dataset.
void SaveDataset(const Dataset& dataset, const std::filesystem::path& path);

// Stratified K-fold partition. Folds keep the input order of their members.
std::vector<Dataset> SplitFolds(const Dataset& dataset, int k,
                                std::uint64_t seed);

// Seeded shuffle split; `held_out` gets max(1, round(fraction * N)) samples.
// Both parts keep input order.
struct HoldoutSplit {
  Dataset kept;
  Dataset held_out;
};
HoldoutSplit SplitHoldout(const Dataset& dataset, double fraction,
                          std::uint64_t seed);

struct SynthConfig {
  int num_classes = 2;
  int vocab_size = 2000;
  int samples_per_class = 1000;
  int test_samples_per_class = 500;
  int tokens_per_sample = 16;
  // Easy samples carry this many tokens of their class; hard samples half of
  // it plus one token of a different class.
  int indicative_per_sample = 4;
  // Tokens from a shared, class-neutral pool planted in hard samples.
  int hard_marker_tokens = 2;
  double hardness_fraction = 0.3;
  double hard_flip_prob = 0.5;
  std::uint64_t seed = 0;

  void Validate() const;

  // Vocabulary layout derived from the counts above.
  int indicative_vocab_per_class() const;
  int marker_vocab_size() const;
  int noise_vocab_size() const;
};

std::string IndicativeToken(int label, int j);
std::string MarkerToken(int j);
std::string NoiseToken(int j);

struct SyntheticData {
  Dataset train;
  Dataset test;
  std::vector<bool> train_hard;
  std::vector<bool> test_hard;
};

SyntheticData GenerateSynthetic(const SynthConfig& config);

// Sidecar format: CSV with header "id,hard".
void SaveHardnessFlags(const Dataset& dataset, const std::vector<bool>& hard,
                       const std::filesystem::path& path);
std::vector<bool> LoadHardnessFlags(const Dataset& dataset,
                                    const std::filesystem::path& path);

}  // namespace selfcal

#endif  // SELFCAL_CORPUS_H_
