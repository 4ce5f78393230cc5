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

#include "pipeline.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "selfcal/apps.h"
#include "selfcal/calibrators.h"
#include "selfcal/common.h"
#include "selfcal/metrics.h"
#include "selfcal/model.h"
#include "selfcal/toast.h"

namespace selfcal::cli {
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void WriteFile(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

// Seeds handed to every stage, recorded in meta.json.
json SeedTable(const RunConfig& c) {
  json seeds;
  seeds["run"] = c.seed;
  seeds["synthetic"] = c.synthetic.seed;
  const std::pair<const char*, RunStream> streams[] = {
      {"temperature_split", kTemperatureSplitStream},
      {"vanilla", kVanillaStream},
      {"label_smoothing", kSmoothingStream},
      {"toast", kToastStream},
      {"main_only", kMainOnlyStream},
      {"cascade_small", kSmallStream},
      {"cascade_large", kLargeStream},
      {"adversarial_id_sample", kAdversarialStream},
      {"cascade_small_toast", kSmallToastStream},
  };
  for (const auto& [name, stream] : streams) seeds[name] = DeriveSeed(c.seed, stream);
  return seeds;
}

// meta.json: resolved config, seeds and a digest of every file in `dir`.
void WriteMeta(const RunConfig& config, const fs::path& dir, const std::string& command,
               json extra = json::object()) {
  json meta;
  meta["command"] = command;
  json cfg = json::object();
  for (const auto& [key, value] : config.Resolved()) cfg[key] = value;
  meta["config"] = cfg;
  meta["seeds"] = SeedTable(config);
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().filename() != "meta.json") {
      files.push_back(fs::relative(entry.path(), dir));
    }
  }
  std::sort(files.begin(), files.end());
  json artifacts = json::object();
  for (const fs::path& f : files) artifacts[f.generic_string()] = FileDigest(dir / f);
  meta["artifacts"] = artifacts;
  meta["hash"] = "fnv1a64";
  for (auto& [k, v] : extra.items()) meta[k] = v;
  WriteFile(dir / "meta.json", meta.dump(2) + "\n");
}

TrainConfig WithSeed(TrainConfig t, std::uint64_t seed, double epsilon = 0.0) {
  t.seed = seed;
  t.label_smoothing_epsilon = epsilon;
  return t;
}

std::shared_ptr<const ModelParameters> Share(ModelParameters p) {
  return std::make_shared<const ModelParameters>(std::move(p));
}

// One calibrator per requested method, built from one model family.
struct Family {
  TrainConfig main;  // vanilla / temperature / label smoothing
  ToastConfig toast;
};

std::map<Method, Calibrator> BuildCalibrators(const RunConfig& c, const RunData& data,
                                              const Family& family, std::uint64_t seed_base,
                                              const fs::path* toast_dir, std::ostream& log) {
  std::map<Method, Calibrator> out;
  const auto wants = [&](Method m) {
    return std::find(c.methods.begin(), c.methods.end(), m) != c.methods.end();
  };
  const bool need_vanilla = wants(Method::kVanilla) || wants(Method::kTemperature);
  std::optional<HoldoutSplit> split;
  if (need_vanilla || wants(Method::kLabelSmoothing)) {
    split = SplitHoldout(data.train, c.temperature_split,
                         DeriveSeed(seed_base, kTemperatureSplitStream));
  }
  if (need_vanilla) {
    auto model = Share(TrainMain(split->kept, c.featurizer,
                                 WithSeed(family.main, DeriveSeed(seed_base, kVanillaStream)))
                           .params);
    if (wants(Method::kVanilla)) out.emplace(Method::kVanilla, Calibrator(Method::kVanilla, model));
    if (wants(Method::kTemperature)) {
      const double t = FitTemperatureOn(*model, split->held_out);
      log << "  temperature fitted on " << split->held_out.size() << " held-out samples: T = "
          << FormatDouble(t) << "\n";
      out.emplace(Method::kTemperature, Calibrator(Method::kTemperature, model, t));
    }
  }
  if (wants(Method::kLabelSmoothing)) {
    auto model = Share(TrainMain(split->kept, c.featurizer,
                                 WithSeed(family.main, DeriveSeed(seed_base, kSmoothingStream),
                                          c.label_smoothing_epsilon))
                           .params);
    out.emplace(Method::kLabelSmoothing, Calibrator(Method::kLabelSmoothing, model));
  }
  if (wants(Method::kToast)) {
    ToastConfig tc = family.toast;
    tc.seed = DeriveSeed(seed_base, kToastStream);
    ToastResult result = RunToast(data.train, tc, data.lexicon);
    log << "  toast: " << result.artifacts.annotated.size() << " annotated, "
        << result.artifacts.dstar.size() << " calibration records, "
        << result.artifacts.daug.size() << " augmented\n";
    if (toast_dir) {
      WriteArtifacts(result.artifacts, tc, data.train.label_names(), *toast_dir);
      SaveModel(result.params, *toast_dir / "model.bin");
    }
    out.emplace(Method::kToast, Calibrator(Method::kToast, Share(std::move(result.params))));
  }
  return out;
}

std::string CsvSafe(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

constexpr const char* kSweepHeader =
    "key,kind,variant,value,seed,n_pos,n_neg,skipped,reason,auroc,delta_conf,accuracy";

}  // namespace

std::string FileDigest(const fs::path& path) { return HexDigest(Fnv1a64(ReadFile(path))); }

RunData LoadRunData(const RunConfig& c) {
  if (c.source == "synthetic") {
    SyntheticData synth = GenerateSynthetic(c.synthetic);
    SynonymLexicon lexicon = c.lexicon_path.empty() ? BuildSyntheticLexicon(c.synthetic)
                                                    : SynonymLexicon::Load(c.lexicon_path);
    return {std::move(synth.train), std::move(synth.test), std::move(lexicon)};
  }
  Dataset train = LoadDataset(c.train_path, c.task);
  Dataset test = LoadDataset(c.test_path, c.task);
  if (train.label_names() != test.label_names()) {
    throw Error("train and test label names differ");
  }
  SynonymLexicon lexicon =
      c.lexicon_path.empty() ? SynonymLexicon{} : SynonymLexicon::Load(c.lexicon_path);
  return {std::move(train), std::move(test), std::move(lexicon)};
}

void CmdSynth(const RunConfig& c, const fs::path& out_dir) {
  if (c.source != "synthetic") throw Error("synth needs data.source = synthetic");
  fs::create_directories(out_dir);
  const SyntheticData synth = GenerateSynthetic(c.synthetic);
  SaveDataset(synth.train, out_dir / "train.jsonl");
  SaveDataset(synth.test, out_dir / "test.jsonl");
  SaveHardnessFlags(synth.train, synth.train_hard, out_dir / "train.hard.csv");
  SaveHardnessFlags(synth.test, synth.test_hard, out_dir / "test.hard.csv");
  BuildSyntheticLexicon(c.synthetic).Save(out_dir / "lexicon.tsv");
  WriteMeta(c, out_dir, "synth");
}

void CmdTrain(const RunConfig& c, Method method, const fs::path& out_dir) {
  if (method == Method::kToast) throw Error("use the toast subcommand for toast models");
  const RunData data = LoadRunData(c);
  fs::create_directories(out_dir);
  json extra;
  if (method == Method::kTemperature) {
    const HoldoutSplit split =
        SplitHoldout(data.train, c.temperature_split, DeriveSeed(c.seed, kTemperatureSplitStream));
    const ModelParameters model =
        TrainMain(split.kept, c.featurizer, WithSeed(c.train, DeriveSeed(c.seed, kVanillaStream)))
            .params;
    extra["temperature"] = FitTemperatureOn(model, split.held_out);
    SaveModel(model, out_dir / "model.bin");
  } else {
    const double eps = method == Method::kLabelSmoothing ? c.label_smoothing_epsilon : 0.0;
    const auto stream = method == Method::kLabelSmoothing ? kSmoothingStream : kMainOnlyStream;
    const TrainResult result =
        TrainMain(data.train, c.featurizer, WithSeed(c.train, DeriveSeed(c.seed, stream), eps));
    SaveModel(result.params, out_dir / "model.bin");
    extra["test_accuracy"] = Accuracy(result.params, data.test);
  }
  extra["method"] = std::string(MethodName(method));
  WriteMeta(c, out_dir, "train", extra);
}

void CmdToast(const RunConfig& c, const fs::path& out_dir) {
  const RunData data = LoadRunData(c);
  ToastConfig tc = c.toast;
  tc.seed = DeriveSeed(c.seed, kToastStream);
  const ToastResult result = RunToast(data.train, tc, data.lexicon);
  fs::create_directories(out_dir);
  WriteArtifacts(result.artifacts, tc, data.train.label_names(), out_dir);
  SaveModel(result.params, out_dir / "model.bin");
  json extra;
  extra["test_accuracy"] = Accuracy(result.params, data.test);
  WriteMeta(c, out_dir, "toast", extra);
}

json CmdEval(const RunConfig& c, const fs::path& out_dir, std::ostream& log) {
  const RunData data = LoadRunData(c);
  fs::create_directories(out_dir / "logs");
  fs::create_directories(out_dir / "curves");
  const auto evaluates = [&](const std::string& name) {
    return std::find(c.evaluators.begin(), c.evaluators.end(), name) != c.evaluators.end();
  };

  log << "data: " << data.train.size() << " train, " << data.test.size() << " test, "
      << data.train.num_classes() << " classes\n";
  const fs::path toast_dir = out_dir / "toast";
  const auto calibrators =
      BuildCalibrators(c, data, {c.train, c.toast}, c.seed, &toast_dir, log);
  const ModelParameters main_only =
      TrainMain(data.train, c.featurizer, WithSeed(c.train, DeriveSeed(c.seed, kMainOnlyStream)))
          .params;

  json metrics;
  metrics["data"] = {{"train", data.train.size()},
                     {"test", data.test.size()},
                     {"num_classes", data.train.num_classes()}};
  metrics["main_only_accuracy"] = Accuracy(main_only, data.test);

  std::map<Method, ConfidenceLog> logs;
  json methods = json::object();
  for (const auto& [method, calibrator] : calibrators) {
    const std::string name(MethodName(method));
    ConfidenceLog clog = BuildLog(calibrator, data.test, "id");
    WriteLogCsv(clog, out_dir / "logs" / (name + ".csv"));
    const CalibrationQuality q = EvaluateCalibration(calibrator, data.test);
    json m;
    m["accuracy"] = q.accuracy;
    m["auroc"] = q.defined ? json(q.auroc) : json(nullptr);
    m["delta_conf"] = q.defined ? json(q.delta_conf) : json(nullptr);
    if (calibrator.temperature()) m["temperature"] = *calibrator.temperature();
    methods[name] = m;
    logs.emplace(method, std::move(clog));
  }
  metrics["methods"] = methods;

  if (evaluates("selective")) {
    json selective = json::object();
    for (const auto& [method, clog] : logs) {
      const std::string name(MethodName(method));
      const SelectiveReport r = SelectiveEvalLog(clog, c.selective_targets);
      json m;
      m["accuracy"] = r.accuracy;
      m["auroc_risk"] = r.auroc_risk;
      json cov = json::array();
      for (const auto& [target, coverage] : r.coverage_at) {
        cov.push_back({{"target", target}, {"coverage", coverage ? json(*coverage) : json(nullptr)}});
      }
      m["coverage_at_risk"] = cov;
      selective[name] = m;
      std::ostringstream csv;
      csv << "threshold,coverage,risk,accuracy,accepted\n";
      for (const auto& p : r.curve) {
        csv << FormatDouble(p.threshold) << "," << FormatDouble(p.coverage) << ","
            << FormatDouble(p.risk) << "," << FormatDouble(1.0 - p.risk) << "," << p.accepted
            << "\n";
      }
      WriteFile(out_dir / "curves" / ("selective_" + name + ".csv"), csv.str());
    }
    metrics["selective"] = selective;
  }

  if (evaluates("adversarial")) {
    const AttackBatch batch =
        AttackDataset(main_only, data.test, data.lexicon, c.attack_budget, c.max_adversarial);
    log << "attack: " << batch.adversarial.size() << " successes from " << batch.attempted
        << " correctly classified inputs\n";
    if (batch.adversarial.empty()) throw Error("attack produced no adversarial samples");
    SaveAdversarialSamples(batch.adversarial, batch.origin_ids, data.test.label_names(),
                           out_dir / "adversarial.jsonl");
    const Dataset adv(batch.adversarial, data.test.label_names(), data.test.task_kind());
    json adversarial;
    adversarial["attempted"] = batch.attempted;
    adversarial["successes"] = batch.adversarial.size();
    json per = json::object();
    for (const auto& [method, calibrator] : calibrators) {
      const std::string name(MethodName(method));
      const AdversarialReport r = AdversarialEval(calibrator, data.test, adv, c.max_id,
                                                  DeriveSeed(c.seed, kAdversarialStream));
      per[name] = {{"auroc", r.auroc},
                   {"delta_conf", r.delta_conf},
                   {"best_threshold", r.best_threshold},
                   {"best_macro_f1", r.best_macro_f1}};
      std::ostringstream csv;
      csv << "threshold,macro_f1,adversarial_f1,id_f1\n";
      for (const auto& [t, s] : r.detection) {
        csv << FormatDouble(t) << "," << FormatDouble(s.macro_f1) << ","
            << FormatDouble(s.adversarial_f1) << "," << FormatDouble(s.id_f1) << "\n";
      }
      WriteFile(out_dir / "curves" / ("adversarial_" + name + ".csv"), csv.str());
    }
    adversarial["methods"] = per;
    metrics["adversarial"] = adversarial;
  }

  if (evaluates("cascade")) {
    log << "cascade: training small and large models\n";
    const ModelParameters large =
        TrainMain(data.train, c.featurizer, WithSeed(c.large, DeriveSeed(c.seed, kLargeStream)))
            .params;
    Family small{c.small, c.toast};
    small.toast.annotator.hidden_dim = c.small.hidden_dim;
    small.toast.annotator.epochs = c.small.epochs;
    small.toast.train.hidden_dim = c.small.hidden_dim;
    small.toast.train.epochs = c.small.epochs;
    std::ostringstream sink;
    const auto small_calibrators =
        BuildCalibrators(c, data, small, DeriveSeed(c.seed, kSmallStream), nullptr, sink);
    json cascade = json::object();
    for (const auto& [method, calibrator] : small_calibrators) {
      const std::string name(MethodName(method));
      const CascadeReport r = CascadeEval(calibrator, large, data.test);
      cascade[name] = {{"area", r.area},
                       {"small_accuracy", r.small_accuracy},
                       {"large_accuracy", r.large_accuracy}};
      std::ostringstream csv;
      csv << "threshold,accuracy,routed_fraction\n";
      for (const auto& p : r.curve) {
        csv << FormatDouble(p.threshold) << "," << FormatDouble(p.accuracy) << ","
            << FormatDouble(p.routed_fraction) << "\n";
      }
      WriteFile(out_dir / "curves" / ("cascade_" + name + ".csv"), csv.str());
    }
    metrics["cascade"] = cascade;
  }

  WriteFile(out_dir / "metrics.json", metrics.dump(2) + "\n");
  json extra;
  extra["interpretations"] = {
      {"calib_inputs", "feature ablations zero the sample block or the prediction one-hot "
                       "block of the calibration-head input"},
      {"adversarial_victim", "main-task-only model trained on the full training set"},
      {"cascade_small_large", "small and large differ in hidden size and epochs"}};
  WriteMeta(c, out_dir, "eval", extra);
  return metrics;
}

std::size_t CmdSweep(const RunConfig& c, const fs::path& out_dir,
                     std::optional<std::size_t> stop_after, std::ostream& log) {
  const RunData data = LoadRunData(c);
  fs::create_directories(out_dir);
  const fs::path csv_path = out_dir / "sweep.csv";

  std::set<std::string> done;
  if (fs::exists(csv_path)) {
    // Keep complete rows only; an interrupted run may leave a torn last line.
    const std::string text = ReadFile(csv_path);
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    if (line != kSweepHeader) throw Error("sweep.csv has an unexpected header");
    const auto columns = std::count(line.begin(), line.end(), ',');
    std::string kept = line + "\n";
    std::size_t consumed = line.size() + 1;
    while (std::getline(in, line)) {
      consumed += line.size() + 1;
      const bool terminated = consumed <= text.size();
      if (!terminated || std::count(line.begin(), line.end(), ',') != columns) continue;
      if (!done.insert(line.substr(0, line.find(','))).second) continue;
      kept += line + "\n";
    }
    if (kept != text) WriteFile(csv_path, kept);
  } else {
    WriteFile(csv_path, std::string(kSweepHeader) + "\n");
  }
  if (!done.empty()) log << "resuming: " << done.size() << " grid points already in sweep.csv\n";

  std::size_t admitted = 0;
  const auto skip = [&](const SweepPoint& p) {
    if (done.count(p.key())) return true;
    if (stop_after && admitted >= *stop_after) return true;
    ++admitted;
    return false;
  };
  std::ofstream out(csv_path, std::ios::app);
  std::size_t written = 0;
  const auto on_row = [&](const SweepRow& r) {
    out << r.point.key() << "," << SweepKindName(r.point.kind) << "," << r.point.variant << ","
        << FormatDouble(r.point.value) << "," << r.point.seed << "," << r.n_pos << "," << r.n_neg
        << "," << (r.skipped ? 1 : 0) << "," << CsvSafe(r.reason) << ","
        << (r.skipped ? "" : FormatDouble(r.auroc)) << ","
        << (r.skipped ? "" : FormatDouble(r.delta_conf)) << ","
        << (r.skipped ? "" : FormatDouble(r.accuracy)) << "\n";
    out.flush();
    ++written;
    log << "  " << r.point.key()
        << (r.skipped ? "  skipped: " + r.reason
                      : "  auroc " + FormatDouble(r.auroc) + "  dconf " + FormatDouble(r.delta_conf))
        << "\n";
  };
  PilotSweeps(data.train, data.test, c.sweep_kind, c.pilot, c.sweep_seeds, data.lexicon, skip,
              on_row, c.jobs);
  out.close();
  json extra;
  extra["sweep_kind"] = std::string(SweepKindName(c.sweep_kind));
  extra["interpretations"] = {
      {"subsets", "grid points of one seed draw prefixes of one shuffled pool per class"}};
  WriteMeta(c, out_dir, "sweep", extra);
  return written;
}

void CmdAttack(const RunConfig& c, const std::optional<fs::path>& model, const fs::path& out_path,
               std::ostream& log) {
  const RunData data = LoadRunData(c);
  const ModelParameters victim =
      model ? LoadModel(*model)
            : TrainMain(data.train, c.featurizer,
                        WithSeed(c.train, DeriveSeed(c.seed, kMainOnlyStream)))
                  .params;
  const AttackBatch batch =
      AttackDataset(victim, data.test, data.lexicon, c.attack_budget, c.max_adversarial);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  SaveAdversarialSamples(batch.adversarial, batch.origin_ids, data.test.label_names(), out_path);
  log << "attack: " << batch.adversarial.size() << " successes from " << batch.attempted
      << " correctly classified inputs -> " << out_path.string() << "\n";
}

void PrintSummary(const json& metrics, std::ostream& out) {
  auto cell = [](const json& v, double scale) {
    if (v.is_null()) return std::string("n/a");
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << v.get<double>() * scale;
    return s.str();
  };
  out << std::left << std::setw(18) << "Method" << std::right << std::setw(10) << "Acc"
      << std::setw(10) << "AUROC" << std::setw(10) << "dConf" << "\n";
  out << std::string(48, '-') << "\n";
  for (const auto& [name, m] : metrics.at("methods").items()) {
    out << std::left << std::setw(18) << name << std::right << std::setw(10)
        << cell(m.at("accuracy"), 100.0) << std::setw(10) << cell(m.at("auroc"), 100.0)
        << std::setw(10) << cell(m.at("delta_conf"), 1.0) << "\n";
  }
  if (metrics.contains("main_only_accuracy")) {
    out << "main-task-only accuracy: " << cell(metrics.at("main_only_accuracy"), 100.0) << "\n";
  }
}

void CmdReport(const fs::path& run_dir, std::ostream& out) {
  const fs::path metrics_path = run_dir / "metrics.json";
  const fs::path sweep_path = run_dir / "sweep.csv";
  if (fs::exists(metrics_path)) {
    const json metrics = json::parse(ReadFile(metrics_path));
    PrintSummary(metrics, out);
    struct Column {
      const char* section;
      const char* label;
      const char* field;
    };
    const Column columns[] = {{"selective", "selective AUROC_risk", "auroc_risk"},
                              {"adversarial", "adversarial dConf(ID,adv)", "delta_conf"},
                              {"cascade", "cascade area", "area"}};
    for (const Column& col : columns) {
      if (!metrics.contains(col.section)) continue;
      const json& per = std::string(col.section) == "adversarial"
                            ? metrics.at(col.section).at("methods")
                            : metrics.at(col.section);
      out << col.label << ":";
      for (const auto& [name, m] : per.items()) {
        out << "  " << name << " " << std::fixed << std::setprecision(4)
            << m.at(col.field).get<double>();
      }
      out << std::defaultfloat << "\n";
    }
  } else if (fs::exists(sweep_path)) {
    std::ifstream in(sweep_path);
    std::string line;
    while (std::getline(in, line)) out << line << "\n";
  } else {
    throw Error("no metrics.json or sweep.csv under '" + run_dir.string() + "'");
  }
}

}  // namespace selfcal::cli
