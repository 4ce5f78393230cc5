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

#include "config.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "selfcal/common.h"
#include "selfcal/text.h"

namespace selfcal::cli {
namespace {

namespace pt = boost::property_tree;

std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void Bad(const std::string& key, const std::string& value,
                      const std::string& what) {
  throw ConfigError("invalid value '" + value + "' for config key '" + key + "': " + what);
}

template <typename T>
T ParseNumber(const std::string& key, const std::string& raw) {
  const std::string v = Trim(raw);
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    Bad(key, raw, "expected a number");
  }
  return out;
}

bool ParseBool(const std::string& key, const std::string& raw) {
  const std::string v = ToLower(Trim(raw));
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  Bad(key, raw, "expected true or false");
}

std::vector<std::string> SplitList(const std::string& raw) {
  std::vector<std::string> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = Trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
std::vector<T> ParseNumberList(const std::string& key, const std::string& raw) {
  std::vector<T> out;
  for (const std::string& item : SplitList(raw)) out.push_back(ParseNumber<T>(key, item));
  if (out.empty()) Bad(key, raw, "expected a non-empty list");
  return out;
}

template <typename T>
std::string JoinNumbers(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_floating_point_v<T>) {
      out += FormatDouble(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

std::string Join(const std::vector<std::string>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + values[i];
  return out;
}

std::string Bool(bool b) { return b ? "true" : "false"; }

// Keys map to a setter and a getter on RunConfig.
struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define SELFCAL_INT_FIELD(name, member)                                                 \
  Field {                                                                               \
    name, [](RunConfig& c, const std::string& k, const std::string& v) {                \
      c.member = ParseNumber<std::remove_reference_t<decltype(c.member)>>(k, v);        \
    },                                                                                  \
        [](const RunConfig& c) { return std::to_string(c.member); }                     \
  }
#define SELFCAL_DOUBLE_FIELD(name, member)                                              \
  Field {                                                                               \
    name, [](RunConfig& c, const std::string& k, const std::string& v) {                \
      c.member = ParseNumber<double>(k, v);                                             \
    },                                                                                  \
        [](const RunConfig& c) { return FormatDouble(c.member); }                       \
  }
#define SELFCAL_BOOL_FIELD(name, member)                                                \
  Field {                                                                               \
    name, [](RunConfig& c, const std::string& k, const std::string& v) {                \
      c.member = ParseBool(k, v);                                                       \
    },                                                                                  \
        [](const RunConfig& c) { return Bool(c.member); }                               \
  }

const std::vector<Field>& Fields() {
  static const std::vector<Field> fields = {
      // [run]
      Field{"run.seed",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.seed = ParseNumber<std::uint64_t>(k, v);
            },
            [](const RunConfig& c) { return std::to_string(c.seed); }},
      Field{"run.output_dir",
            [](RunConfig& c, const std::string&, const std::string& v) { c.output_dir = Trim(v); },
            [](const RunConfig& c) { return c.output_dir; }},
      Field{"run.methods",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.methods.clear();
              for (const auto& m : SplitList(v)) {
                try {
                  c.methods.push_back(ParseMethod(m));
                } catch (const Error& e) {
                  Bad(k, v, e.what());
                }
              }
              if (c.methods.empty()) Bad(k, v, "expected at least one method");
            },
            [](const RunConfig& c) {
              std::vector<std::string> names;
              for (Method m : c.methods) names.emplace_back(MethodName(m));
              return Join(names);
            }},
      Field{"run.evaluators",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.evaluators = SplitList(v);
              for (const auto& e : c.evaluators) {
                if (e != "selective" && e != "adversarial" && e != "cascade") {
                  Bad(k, v, "evaluators are selective, adversarial, cascade");
                }
              }
            },
            [](const RunConfig& c) { return Join(c.evaluators); }},
      SELFCAL_INT_FIELD("run.jobs", jobs),

      // [data]
      Field{"data.source",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.source = Trim(v);
              if (c.source != "synthetic" && c.source != "files") {
                Bad(k, v, "expected synthetic or files");
              }
            },
            [](const RunConfig& c) { return c.source; }},
      Field{"data.train",
            [](RunConfig& c, const std::string&, const std::string& v) { c.train_path = Trim(v); },
            [](const RunConfig& c) { return c.train_path.string(); }},
      Field{"data.test",
            [](RunConfig& c, const std::string&, const std::string& v) { c.test_path = Trim(v); },
            [](const RunConfig& c) { return c.test_path.string(); }},
      Field{"data.lexicon",
            [](RunConfig& c, const std::string&, const std::string& v) {
              c.lexicon_path = Trim(v);
            },
            [](const RunConfig& c) { return c.lexicon_path.string(); }},
      Field{"data.task",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              try {
                c.task = ParseTaskKind(Trim(v));
              } catch (const Error& e) {
                Bad(k, v, e.what());
              }
            },
            [](const RunConfig& c) { return std::string(TaskKindName(c.task)); }},

      // [synthetic]
      SELFCAL_INT_FIELD("synthetic.num_classes", synthetic.num_classes),
      SELFCAL_INT_FIELD("synthetic.vocab_size", synthetic.vocab_size),
      SELFCAL_INT_FIELD("synthetic.samples_per_class", synthetic.samples_per_class),
      SELFCAL_INT_FIELD("synthetic.test_samples_per_class", synthetic.test_samples_per_class),
      SELFCAL_INT_FIELD("synthetic.tokens_per_sample", synthetic.tokens_per_sample),
      SELFCAL_INT_FIELD("synthetic.indicative_per_sample", synthetic.indicative_per_sample),
      SELFCAL_INT_FIELD("synthetic.hard_marker_tokens", synthetic.hard_marker_tokens),
      SELFCAL_DOUBLE_FIELD("synthetic.hardness_fraction", synthetic.hardness_fraction),
      SELFCAL_DOUBLE_FIELD("synthetic.hard_flip_prob", synthetic.hard_flip_prob),
      Field{"synthetic.seed",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.synthetic.seed = ParseNumber<std::uint64_t>(k, v);
              c.synthetic_seed_set = true;
            },
            [](const RunConfig& c) { return std::to_string(c.synthetic.seed); }},

      // [featurizer]
      SELFCAL_BOOL_FIELD("featurizer.lowercase", featurizer.lowercase),
      SELFCAL_INT_FIELD("featurizer.ngram_max", featurizer.ngram_max),
      SELFCAL_INT_FIELD("featurizer.hash_dim", featurizer.hash_dim),
      SELFCAL_BOOL_FIELD("featurizer.segment_tagging", featurizer.segment_tagging),

      // [train]
      SELFCAL_DOUBLE_FIELD("train.learning_rate", train.learning_rate),
      SELFCAL_INT_FIELD("train.epochs", train.epochs),
      SELFCAL_INT_FIELD("train.batch_size", train.batch_size),
      SELFCAL_INT_FIELD("train.hidden_dim", train.hidden_dim),
      SELFCAL_DOUBLE_FIELD("train.label_smoothing_epsilon", label_smoothing_epsilon),
      SELFCAL_DOUBLE_FIELD("train.temperature_split", temperature_split),

      // [toast]
      SELFCAL_INT_FIELD("toast.k", toast.k),
      SELFCAL_DOUBLE_FIELD("toast.alpha", toast.alpha),
      SELFCAL_INT_FIELD("toast.annotator_epochs", toast.annotator.epochs),
      SELFCAL_INT_FIELD("toast.epochs", toast.train.epochs),
      SELFCAL_DOUBLE_FIELD("toast.learning_rate", toast.train.learning_rate),
      SELFCAL_INT_FIELD("toast.batch_size", toast.train.batch_size),
      SELFCAL_INT_FIELD("toast.hidden_dim", toast.train.hidden_dim),
      SELFCAL_BOOL_FIELD("toast.no_cross_annotation", toast.no_cross_annotation),
      SELFCAL_BOOL_FIELD("toast.no_downsample", toast.no_downsample),
      SELFCAL_BOOL_FIELD("toast.no_augment", toast.no_augment),
      SELFCAL_BOOL_FIELD("toast.no_alpha_decay", toast.no_alpha_decay),
      Field{"toast.calib_inputs",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              try {
                c.toast.calib_inputs = ParseCalibInputs(Trim(v));
              } catch (const Error& e) {
                Bad(k, v, e.what());
              }
            },
            [](const RunConfig& c) { return std::string(CalibInputsName(c.toast.calib_inputs)); }},

      // [augment]
      SELFCAL_DOUBLE_FIELD("augment.rate", toast.rate),
      SELFCAL_INT_FIELD("augment.per_negative", toast.augment_per_negative),

      // [selective]
      Field{"selective.targets",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.selective_targets = ParseNumberList<double>(k, v);
            },
            [](const RunConfig& c) { return JoinNumbers(c.selective_targets); }},

      // [adversarial]
      SELFCAL_INT_FIELD("adversarial.budget", attack_budget),
      SELFCAL_INT_FIELD("adversarial.max_id", max_id),
      SELFCAL_INT_FIELD("adversarial.max_adversarial", max_adversarial),

      // [cascade]
      SELFCAL_INT_FIELD("cascade.small_hidden_dim", small.hidden_dim),
      SELFCAL_INT_FIELD("cascade.small_epochs", small.epochs),
      SELFCAL_INT_FIELD("cascade.large_hidden_dim", large.hidden_dim),
      SELFCAL_INT_FIELD("cascade.large_epochs", large.epochs),

      // [sweep]
      Field{"sweep.kind",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              try {
                c.sweep_kind = ParseSweepKind(Trim(v));
              } catch (const Error& e) {
                Bad(k, v, e.what());
              }
            },
            [](const RunConfig& c) { return std::string(SweepKindName(c.sweep_kind)); }},
      Field{"sweep.seeds",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.sweep_seeds = ParseNumberList<std::uint64_t>(k, v);
            },
            [](const RunConfig& c) { return JoinNumbers(c.sweep_seeds); }},
      SELFCAL_DOUBLE_FIELD("sweep.pool_fraction", pilot.pool_fraction),
      SELFCAL_INT_FIELD("sweep.main_epochs", pilot.main.epochs),
      SELFCAL_INT_FIELD("sweep.multitask_epochs", pilot.multitask.epochs),
      Field{"sweep.sizes",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.pilot.sizes = ParseNumberList<int>(k, v);
            },
            [](const RunConfig& c) { return JoinNumbers(c.pilot.sizes); }},
      SELFCAL_INT_FIELD("sweep.imbalance_total", pilot.imbalance_total),
      Field{"sweep.ratios",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.pilot.ratios = ParseNumberList<double>(k, v);
            },
            [](const RunConfig& c) { return JoinNumbers(c.pilot.ratios); }},
      SELFCAL_INT_FIELD("sweep.fixed_count", pilot.fixed_count),
      Field{"sweep.fixed_other",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.pilot.fixed_other = ParseNumberList<int>(k, v);
            },
            [](const RunConfig& c) { return JoinNumbers(c.pilot.fixed_other); }},
      Field{"sweep.k_values",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.pilot.k_values = ParseNumberList<int>(k, v);
            },
            [](const RunConfig& c) { return JoinNumbers(c.pilot.k_values); }},
  };
  return fields;
}

#undef SELFCAL_INT_FIELD
#undef SELFCAL_DOUBLE_FIELD
#undef SELFCAL_BOOL_FIELD

const Field* FindField(std::string_view key) {
  for (const Field& f : Fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

// Shared settings fan out to the nested module configs.
void Finalize(RunConfig& c) {
  if (!c.synthetic_seed_set) c.synthetic.seed = c.seed;
  if (c.sweep_seeds.empty()) c.sweep_seeds = {c.seed};

  c.toast.featurizer = c.featurizer;
  c.toast.annotator.learning_rate = c.train.learning_rate;
  c.toast.annotator.batch_size = c.train.batch_size;
  c.toast.annotator.hidden_dim = c.train.hidden_dim;
  c.toast.jobs = c.jobs;
  for (TrainConfig* t : {&c.small, &c.large}) {
    t->learning_rate = c.train.learning_rate;
    t->batch_size = c.train.batch_size;
  }
  c.pilot.featurizer = c.featurizer;
  c.pilot.toast = c.toast;
  const int main_epochs = c.pilot.main.epochs;
  c.pilot.main = c.train;
  c.pilot.main.epochs = main_epochs;
  const int multitask_epochs = c.pilot.multitask.epochs;
  c.pilot.multitask = c.toast.train;
  c.pilot.multitask.epochs = multitask_epochs;

  auto check = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  };
  check([&] { c.synthetic.Validate(); });
  check([&] { c.featurizer.Validate(); });
  check([&] { c.train.Validate(); });
  check([&] { c.toast.Validate(); });
  check([&] { c.small.Validate(); });
  check([&] { c.large.Validate(); });
  check([&] { c.pilot.Validate(); });
  if (c.jobs < 1) throw ConfigError("config key 'run.jobs' must be >= 1");
  if (!(c.label_smoothing_epsilon >= 0.0 && c.label_smoothing_epsilon < 1.0)) {
    throw ConfigError("config key 'train.label_smoothing_epsilon' must be in [0,1)");
  }
  if (!(c.temperature_split > 0.0 && c.temperature_split < 1.0)) {
    throw ConfigError("config key 'train.temperature_split' must be in (0,1)");
  }
  if (c.attack_budget < 0) throw ConfigError("config key 'adversarial.budget' must be >= 0");
  for (double t : c.selective_targets) {
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("config key 'selective.targets' must be in [0,1]");
  }
  if (c.source == "files" && (c.train_path.empty() || c.test_path.empty())) {
    throw ConfigError("data.source = files needs 'data.train' and 'data.test'");
  }
}

void Apply(RunConfig& c, const std::string& key, const std::string& value) {
  const Field* field = FindField(key);
  if (!field) throw ConfigError("unknown config key '" + key + "'");
  field->set(c, key, value);
}

}  // namespace

RunConfig::RunConfig() {
  small.hidden_dim = 16;
  small.epochs = 2;
  large.hidden_dim = 128;
  large.epochs = 8;
}

std::map<std::string, std::string> RunConfig::Resolved() const {
  std::map<std::string, std::string> out;
  for (const Field& f : Fields()) out[f.key] = f.get(*this);
  return out;
}

std::vector<std::string> KnownKeys() {
  std::vector<std::string> keys;
  for (const Field& f : Fields()) keys.push_back(f.key);
  return keys;
}

RunConfig ParseConfig(const std::string& ini_text, const std::vector<std::string>& overrides) {
  pt::ptree tree;
  std::istringstream in(ini_text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }

  RunConfig config;
  bool seed_given = false;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("unknown config key '" + section + "'");
    for (const auto& [name, value] : body) {
      const std::string key = section + "." + name;
      Apply(config, key, value.data());
      seed_given |= key == "run.seed";
    }
  }
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not section.key=value");
    const std::string key = Trim(o.substr(0, eq));
    Apply(config, key, o.substr(eq + 1));
    seed_given |= key == "run.seed";
  }
  if (!seed_given) throw ConfigError("missing mandatory config key 'run.seed'");
  Finalize(config);
  return config;
}

RunConfig LoadConfig(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return ParseConfig(buffer.str(), overrides);
}

}  // namespace selfcal::cli
