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

#ifndef SELFCAL_AUGMENT_H_
#define SELFCAL_AUGMENT_H_

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "selfcal/common.h"
#include "selfcal/corpus.h"
#include "selfcal/model.h"

namespace selfcal {

// Case-normalized word -> synonyms map. TSV on disk: word<TAB>syn1,syn2,...
class SynonymLexicon {
 public:
  static SynonymLexicon Load(const std::filesystem::path& path);
  void Save(const std::filesystem::path& path) const;

  // Throws on an empty synonym list.
  void Add(std::string_view word, std::vector<std::string> synonyms);
  const std::vector<std::string>* Find(std::string_view word) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, std::vector<std::string>, std::less<>> entries_;
};

// Indicative tokens map to one same-class sibling and two noise tokens; noise
// tokens map to neighbouring noise tokens. Markers have no entry.
SynonymLexicon BuildSyntheticLexicon(const SynthConfig& config);

enum class TransformKind {
  kSynonymSubstitution,
  kRandomInsertion,
  kRandomSwap,
  kRandomDeletion,
};

inline constexpr std::array<TransformKind, 4> kAllTransforms = {
    TransformKind::kSynonymSubstitution, TransformKind::kRandomInsertion,
    TransformKind::kRandomSwap, TransformKind::kRandomDeletion};

std::string_view TransformKindName(TransformKind kind);

// Number of edits made by the count-based transforms: ceil(rate * n).
int EditCount(double rate, std::size_t num_tokens);

// rate must be in (0, 1]. Output always has at least one token.
std::string ApplyTransform(TransformKind kind, std::string_view text,
                           double rate, const SynonymLexicon& lexicon,
                           Rng& rng);

std::pair<TransformKind, std::string> RandomTransform(
    std::string_view text, double rate, const SynonymLexicon& lexicon,
    Rng& rng);

struct AttackResult {
  bool success = false;
  Sample adversarial;           // last candidate; misclassified iff success
  int substitutions = 0;
  double gold_probability = 0;  // under the model, after the last edit
};

// Greedy word substitution over both segments. At each step every untouched
// position with lexicon entries is tried with each synonym; the edit giving
// the lowest gold-class probability is kept. Stops on a prediction flip or
// after `budget` edits.
AttackResult GreedyAttack(const ModelParameters& params, const Sample& sample,
                          const SynonymLexicon& lexicon, int budget);

// Adversarial samples in the corpus JSONL schema plus "origin_id".
void SaveAdversarialSamples(const std::vector<Sample>& samples,
                            const std::vector<std::string>& origin_ids,
                            const std::vector<std::string>& label_names,
                            const std::filesystem::path& path);

}  // namespace selfcal

#endif  // SELFCAL_AUGMENT_H_
