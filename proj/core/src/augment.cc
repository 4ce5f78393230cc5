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

#include "selfcal/augment.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "selfcal/text.h"

namespace selfcal {

SynonymLexicon SynonymLexicon::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open lexicon '" + path.string() + "'");
  SynonymLexicon lexicon;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw Error("lexicon line " + std::to_string(line_no) + ": expected word<TAB>synonyms");
    }
    std::vector<std::string> synonyms;
    std::string rest = line.substr(tab + 1);
    std::size_t start = 0;
    while (start <= rest.size()) {
      auto comma = rest.find(',', start);
      if (comma == std::string::npos) comma = rest.size();
      auto tokens = Tokenize(std::string_view(rest).substr(start, comma - start));
      if (tokens.size() == 1) synonyms.push_back(tokens[0]);
      start = comma + 1;
    }
    if (synonyms.empty()) {
      throw Error("lexicon line " + std::to_string(line_no) + ": no synonyms");
    }
    lexicon.Add(line.substr(0, tab), std::move(synonyms));
  }
  return lexicon;
}

void SynonymLexicon::Save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  for (const auto& [word, synonyms] : entries_) {
    out << word << '\t';
    for (std::size_t i = 0; i < synonyms.size(); ++i) out << (i ? "," : "") << synonyms[i];
    out << '\n';
  }
}

void SynonymLexicon::Add(std::string_view word, std::vector<std::string> synonyms) {
  if (synonyms.empty()) {
    throw Error("lexicon entry '" + std::string(word) + "' has no synonyms");
  }
  auto& slot = entries_[ToLower(word)];
  for (auto& s : synonyms) slot.push_back(std::move(s));
}

const std::vector<std::string>* SynonymLexicon::Find(std::string_view word) const {
  auto it = entries_.find(ToLower(word));
  return it == entries_.end() ? nullptr : &it->second;
}

SynonymLexicon BuildSyntheticLexicon(const SynthConfig& config) {
  config.Validate();
  SynonymLexicon lexicon;
  const int per_class = config.indicative_vocab_per_class();
  const int noise = config.noise_vocab_size();
  for (int c = 0; c < config.num_classes; ++c) {
    for (int j = 0; j < per_class; ++j) {
      const int base = (c * per_class + j) * 2;
      lexicon.Add(IndicativeToken(c, j),
                  {IndicativeToken(c, (j + 1) % per_class), NoiseToken(base % noise),
                   NoiseToken((base + 1) % noise)});
    }
  }
  for (int j = 0; j < noise; ++j) {
    lexicon.Add(NoiseToken(j), {NoiseToken((j + 1) % noise), NoiseToken((j + noise - 1) % noise)});
  }
  return lexicon;
}

std::string_view TransformKindName(TransformKind kind) {
  switch (kind) {
    case TransformKind::kSynonymSubstitution: return "synonym_substitution";
    case TransformKind::kRandomInsertion: return "random_insertion";
    case TransformKind::kRandomSwap: return "random_swap";
    case TransformKind::kRandomDeletion: return "random_deletion";
  }
  return "unknown";
}

int EditCount(double rate, std::size_t num_tokens) {
  // The epsilon keeps products like 0.1 * 30 = 3.0000000000000004 at 3.
  const double raw = std::ceil(rate * static_cast<double>(num_tokens) - 1e-9);
  return std::max(1, static_cast<int>(raw));
}

namespace {

std::size_t Uniform(std::size_t n, Rng& rng) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

const std::string& RandomSynonym(const std::vector<std::string>& synonyms, Rng& rng) {
  return synonyms[Uniform(synonyms.size(), rng)];
}

}  // namespace

std::string ApplyTransform(TransformKind kind, std::string_view text, double rate,
                           const SynonymLexicon& lexicon, Rng& rng) {
  if (!(rate > 0.0 && rate <= 1.0)) throw Error("transform rate must be in (0,1]");
  auto tokens = Tokenize(text);
  if (tokens.empty()) throw Error("cannot transform text without tokens");
  const int edits = EditCount(rate, tokens.size());

  switch (kind) {
    case TransformKind::kSynonymSubstitution: {
      std::vector<std::size_t> candidates;
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (lexicon.Find(tokens[i])) candidates.push_back(i);
      }
      std::shuffle(candidates.begin(), candidates.end(), rng);
      const auto n = std::min(candidates.size(), static_cast<std::size_t>(edits));
      for (std::size_t i = 0; i < n; ++i) {
        auto& token = tokens[candidates[i]];
        token = RandomSynonym(*lexicon.Find(token), rng);
      }
      break;
    }
    case TransformKind::kRandomInsertion: {
      std::bernoulli_distribution use_synonym(0.5);
      for (int e = 0; e < edits; ++e) {
        std::string word = tokens[Uniform(tokens.size(), rng)];
        const auto* synonyms = lexicon.Find(word);
        if (synonyms && use_synonym(rng)) word = RandomSynonym(*synonyms, rng);
        const std::size_t at = Uniform(tokens.size() + 1, rng);
        tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(at), std::move(word));
      }
      break;
    }
    case TransformKind::kRandomSwap: {
      if (tokens.size() < 2) break;
      for (int e = 0; e < edits; ++e) {
        const std::size_t i = Uniform(tokens.size() - 1, rng);
        std::swap(tokens[i], tokens[i + 1]);
      }
      break;
    }
    case TransformKind::kRandomDeletion: {
      std::bernoulli_distribution drop(rate);
      std::vector<std::string> kept;
      for (auto& token : tokens) {
        if (!drop(rng)) kept.push_back(token);
      }
      if (kept.empty()) kept.push_back(tokens[Uniform(tokens.size(), rng)]);
      tokens = std::move(kept);
      break;
    }
  }
  return JoinTokens(tokens);
}

std::pair<TransformKind, std::string> RandomTransform(std::string_view text, double rate,
                                                      const SynonymLexicon& lexicon,
                                                      Rng& rng) {
  const TransformKind kind = kAllTransforms[Uniform(kAllTransforms.size(), rng)];
  return {kind, ApplyTransform(kind, text, rate, lexicon, rng)};
}

AttackResult GreedyAttack(const ModelParameters& params, const Sample& sample,
                          const SynonymLexicon& lexicon, int budget) {
  const Prediction initial = Predict(params, sample);
  if (initial.label != sample.label) {
    throw Error("attack requires a correctly classified input");
  }
  AttackResult result;
  result.adversarial = sample;
  result.adversarial.id = sample.id + "-adv";
  result.gold_probability = Softmax(initial.logits)[static_cast<std::size_t>(sample.label)];

  std::vector<std::vector<std::string>> segments = {Tokenize(sample.text_a)};
  if (sample.text_b) segments.push_back(Tokenize(*sample.text_b));
  std::vector<std::vector<bool>> touched;
  for (const auto& seg : segments) touched.emplace_back(seg.size(), false);

  auto render = [&](const std::vector<std::vector<std::string>>& segs) {
    Sample s = result.adversarial;
    s.text_a = JoinTokens(segs[0]);
    if (segs.size() > 1) s.text_b = JoinTokens(segs[1]);
    return s;
  };

  for (int step = 0; step < budget; ++step) {
    double best_prob = 2.0;
    std::size_t best_seg = 0, best_pos = 0;
    std::string best_word;
    for (std::size_t s = 0; s < segments.size(); ++s) {
      for (std::size_t i = 0; i < segments[s].size(); ++i) {
        if (touched[s][i]) continue;
        const auto* synonyms = lexicon.Find(segments[s][i]);
        if (!synonyms) continue;
        for (const std::string& word : *synonyms) {
          auto trial = segments;
          trial[s][i] = word;
          auto probs = ForwardMain(params, Featurize(JoinTokens(trial[0]),
                                                     trial.size() > 1
                                                         ? std::optional(JoinTokens(trial[1]))
                                                         : std::nullopt,
                                                     params.featurizer));
          const double p = probs[static_cast<std::size_t>(sample.label)];
          if (p < best_prob) {
            best_prob = p;
            best_seg = s;
            best_pos = i;
            best_word = word;
          }
        }
      }
    }
    if (best_prob > 1.0) break;  // nothing left to substitute
    segments[best_seg][best_pos] = best_word;
    touched[best_seg][best_pos] = true;
    ++result.substitutions;
    result.adversarial = render(segments);
    const Prediction now = Predict(params, result.adversarial);
    result.gold_probability = Softmax(now.logits)[static_cast<std::size_t>(sample.label)];
    if (now.label != sample.label) {
      result.success = true;
      break;
    }
  }
  return result;
}

void SaveAdversarialSamples(const std::vector<Sample>& samples,
                            const std::vector<std::string>& origin_ids,
                            const std::vector<std::string>& label_names,
                            const std::filesystem::path& path) {
  if (samples.size() != origin_ids.size()) throw Error("origin ids do not match samples");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << nlohmann::json{{"label_names", label_names}}.dump() << '\n';
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    nlohmann::json obj = {{"id", s.id}, {"text", s.text_a}};
    if (s.text_b) obj["text_pair"] = *s.text_b;
    obj["label"] = label_names.at(static_cast<std::size_t>(s.label));
    obj["origin_id"] = origin_ids[i];
    out << obj.dump() << '\n';
  }
}

}  // namespace selfcal
