// Copyright 2026 NyTT-desk Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Command-line front end. Subcommands map one-to-one onto library entry
// points: synth, train, enhance, eval, iternytt, experiment, report. Every
// subcommand accepts --config, --seed, --out, and --resume; flags that a
// subcommand has no use for are accepted and ignored so drivers can pass a
// uniform argument set.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nytt/experiment.h"
#include "nytt/metrics.h"
#include "nytt/model.h"
#include "nytt/synthesis.h"
#include "nytt/train.h"
#include "nytt/wave.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  json j;
  in >> j;
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out << text;
}

// All .wav files directly inside dir, sorted by filename.
std::vector<std::string> list_wavs(const std::string& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav")
      paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw std::runtime_error("no .wav files in " + dir);
  return paths;
}

std::vector<nytt::Waveform> load_wavs(const std::vector<std::string>& paths) {
  std::vector<nytt::Waveform> waves;
  waves.reserve(paths.size());
  for (const auto& p : paths) waves.push_back(nytt::read_wav(p));
  return waves;
}

// Common options wired into every subcommand.
struct CommonArgs {
  std::string config;
  std::string out;
  std::optional<uint64_t> seed;
  bool resume = false;
};

void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--config", args->config, "JSON configuration file");
  cmd->add_option("--out", args->out, "output directory");
  cmd->add_option("--seed", args->seed, "override the configured seed");
  cmd->add_flag("--resume", args->resume, "reuse completed cell records");
}

int cmd_synth(const CommonArgs& args) {
  json cfg = read_config(args.config);
  const int n_items = cfg.value("items", 8);
  const double duration_s = cfg.value("duration_s", 1.0);
  const int rate = cfg.value("sample_rate_hz", 16000);
  uint64_t seed = cfg.value("seed", uint64_t{1});
  if (args.seed) seed = *args.seed;
  nytt::CorruptionSpec spec = cfg.contains("spec")
                                  ? nytt::CorruptionSpec::from_json(cfg.at("spec"))
                                  : nytt::CorruptionSpec::noop();

  const std::string out = args.out.empty() ? "synth_out" : args.out;
  fs::create_directories(fs::path(out) / "clean");
  fs::create_directories(fs::path(out) / "targets");

  auto clean = nytt::generate_clean_corpus(n_items, duration_s, seed, rate);
  auto data = nytt::build_dataset(clean, spec, seed);
  for (size_t i = 0; i < data.targets.size(); ++i) {
    auto& item = data.manifest.items[i];
    item.clean_path = (fs::path("clean") / (item.item_id + ".wav")).string();
    item.target_path = (fs::path("targets") / (item.item_id + ".wav")).string();
    nytt::write_wav((fs::path(out) / item.clean_path).string(), data.clean[i]);
    nytt::write_wav((fs::path(out) / item.target_path).string(), data.targets[i]);
  }
  data.manifest.save((fs::path(out) / "manifest.json").string());
  std::printf("synth: %zu items -> %s\n", data.targets.size(), out.c_str());
  return 0;
}

int cmd_train(const CommonArgs& args) {
  json cfg = read_config(args.config);
  auto model_cfg = nytt::ModelConfig::from_json(cfg.at("model"));
  auto train_cfg = nytt::TrainConfig::from_json(cfg.at("train"));
  if (args.seed) train_cfg.seed = *args.seed;
  if (!args.out.empty()) train_cfg.checkpoint_dir = args.out;
  if (train_cfg.checkpoint_dir.empty()) train_cfg.checkpoint_dir = "train_out";

  auto targets = load_wavs(list_wavs(cfg.at("targets_dir").get<std::string>()));
  nytt::EnhancerModel init(model_cfg);
  auto result = train_cfg.mode == nytt::TrainMode::kMixIT
                    ? nytt::run_mixit(init, targets, train_cfg)
                    : nytt::train(init, targets, train_cfg);
  std::printf("train: best epoch %d, final train loss %.6g -> %s\n", result.best_epoch,
              result.train_loss.empty() ? 0.0 : result.train_loss.back(),
              train_cfg.checkpoint_dir.c_str());
  return 0;
}

int cmd_enhance(const CommonArgs& args, const std::string& model_path, const std::string& input) {
  auto model = nytt::model_from_checkpoint(nytt::load_checkpoint(model_path));
  const std::string out = args.out.empty() ? "enhanced" : args.out;
  if (fs::is_directory(input)) {
    fs::create_directories(out);
    auto paths = list_wavs(input);
    for (const auto& p : paths) {
      auto est = nytt::enhance(model, nytt::read_wav(p));
      nytt::write_wav((fs::path(out) / fs::path(p).filename()).string(), est);
    }
    std::printf("enhance: %zu files -> %s\n", paths.size(), out.c_str());
  } else {
    auto est = nytt::enhance(model, nytt::read_wav(input));
    if (!fs::path(out).parent_path().empty()) fs::create_directories(fs::path(out).parent_path());
    nytt::write_wav(out, est);
    std::printf("enhance: %s -> %s\n", input.c_str(), out.c_str());
  }
  return 0;
}

int cmd_eval(const CommonArgs& args, std::string estimates, std::string references) {
  if (!args.config.empty()) {
    json cfg = read_config(args.config);
    if (estimates.empty()) estimates = cfg.value("estimates_dir", "");
    if (references.empty()) references = cfg.value("references_dir", "");
  }
  if (estimates.empty() || references.empty())
    throw std::runtime_error("eval needs --estimates and --references (or a config)");

  auto est_paths = list_wavs(estimates);
  std::vector<nytt::EvalPair> pairs;
  for (const auto& p : est_paths) {
    const auto name = fs::path(p).filename();
    const auto ref_path = fs::path(references) / name;
    if (!fs::exists(ref_path)) throw std::runtime_error("missing reference for " + name.string());
    pairs.push_back({name.stem().string(), nytt::read_wav(p), nytt::read_wav(ref_path.string())});
  }
  auto report = nytt::evaluate_corpus(pairs, {"si_sdr", "lsd"});

  const std::string out = args.out.empty() ? "eval_out" : args.out;
  fs::create_directories(out);
  write_text((fs::path(out) / "report.csv").string(), report.to_csv());
  write_text((fs::path(out) / "report.json").string(), report.to_json());
  for (const auto& [k, v] : report.aggregate) std::printf("eval: mean %s = %.4f\n", k.c_str(), v);
  return 0;
}

int cmd_iternytt(const CommonArgs& args) {
  json cfg = read_config(args.config);
  auto iter_cfg = nytt::IterNyttConfig::from_json(cfg.at("iternytt"));
  if (args.seed) iter_cfg.train.seed = *args.seed;
  const std::string out = args.out.empty() ? "iternytt_out" : args.out;
  iter_cfg.train.checkpoint_dir = out;

  auto targets = load_wavs(list_wavs(cfg.at("targets_dir").get<std::string>()));
  auto states = nytt::run_iternytt(targets, iter_cfg);

  json summary = json::array();
  for (const auto& st : states) {
    summary.push_back({{"iteration", st.iteration},
                       {"best_epoch", st.result.best_epoch},
                       {"train_loss", st.result.train_loss},
                       {"input_hash", st.input_hash}});
  }
  fs::create_directories(out);
  write_text((fs::path(out) / "iterations.json").string(), summary.dump(2) + "\n");
  std::printf("iternytt: %zu iterations -> %s\n", states.size(), out.c_str());
  return 0;
}

int cmd_experiment(const CommonArgs& args) {
  json cfg_json = read_config(args.config);
  std::optional<nytt::SweepAxisConfig> axis;
  if (cfg_json.contains("sweep")) {
    axis = nytt::SweepAxisConfig::from_json(cfg_json.at("sweep"));
    cfg_json.erase("sweep");
  }
  auto cfg = nytt::ExperimentConfig::from_json(cfg_json);
  if (args.seed) cfg.seeds = {*args.seed};
  if (!args.out.empty()) cfg.out_dir = args.out;
  if (!args.resume) fs::remove_all(fs::path(cfg.out_dir) / "cells");

  auto table = axis ? nytt::sweep(cfg, *axis) : nytt::run_experiment(cfg);
  nytt::emit_report(table, "plots", cfg.out_dir);

  int failed = 0;
  for (const auto& row : table.rows) failed += row.failed ? 1 : 0;
  std::printf("experiment: %zu rows, %d failed -> %s\n", table.rows.size(), failed,
              cfg.out_dir.c_str());
  for (const auto& row : table.rows) {
    if (row.failed)
      std::fprintf(stderr, "failed cell: %s seed %llu %s: %s\n", row.condition.c_str(),
                   static_cast<unsigned long long>(row.seed), row.method.c_str(),
                   row.error.c_str());
  }
  return failed == 0 ? 0 : 1;
}

int cmd_report(const CommonArgs& args, const std::string& table_path, const std::string& kind) {
  auto table = nytt::ResultsTable::load(table_path);
  const std::string out = args.out.empty() ? "report_out" : args.out;
  if (kind == "all") {
    for (const auto* k : {"csv", "json", "plots"}) nytt::emit_report(table, k, out);
  } else {
    nytt::emit_report(table, kind, out);
  }
  std::printf("report: %s (%s) -> %s\n", table_path.c_str(), kind.c_str(), out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale target-signal enhancement toolkit"};
  app.require_subcommand(1);

  CommonArgs synth_args, train_args, enhance_args, eval_args, iter_args, exp_args, report_args;

  auto* synth = app.add_subcommand("synth", "generate a clean corpus and corrupted targets");
  add_common(synth, &synth_args);
  synth->get_option("--config")->required();

  auto* train = app.add_subcommand("train", "train one enhancer on a target directory");
  add_common(train, &train_args);
  train->get_option("--config")->required();

  std::string model_path, input_path;
  auto* enhance = app.add_subcommand("enhance", "run a checkpoint over a file or directory");
  add_common(enhance, &enhance_args);
  enhance->add_option("--model", model_path, "checkpoint path")->required();
  enhance->add_option("--input", input_path, "input .wav file or directory")->required();

  std::string estimates_dir, references_dir;
  auto* eval = app.add_subcommand("eval", "score estimates against references");
  add_common(eval, &eval_args);
  eval->add_option("--estimates", estimates_dir, "directory of estimate .wav files");
  eval->add_option("--references", references_dir, "directory of reference .wav files");

  auto* iter = app.add_subcommand("iternytt", "iterative retargeting over a target directory");
  add_common(iter, &iter_args);
  iter->get_option("--config")->required();

  auto* exp = app.add_subcommand("experiment", "run a full experiment or sweep");
  add_common(exp, &exp_args);
  exp->get_option("--config")->required();

  std::string table_path, kind = "all";
  auto* report = app.add_subcommand("report", "re-emit reports from a saved results table");
  add_common(report, &report_args);
  report->add_option("--table", table_path, "results table JSON")->required();
  report->add_option("--kind", kind, "csv | json | plots | all");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(synth_args);
    if (train->parsed()) return cmd_train(train_args);
    if (enhance->parsed()) return cmd_enhance(enhance_args, model_path, input_path);
    if (eval->parsed()) return cmd_eval(eval_args, estimates_dir, references_dir);
    if (iter->parsed()) return cmd_iternytt(iter_args);
    if (exp->parsed()) return cmd_experiment(exp_args);
    if (report->parsed()) return cmd_report(report_args, table_path, kind);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
