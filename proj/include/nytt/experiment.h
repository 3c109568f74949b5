// Copyright 2026 NyTT-desk Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NYTT_EXPERIMENT_H_
#define NYTT_EXPERIMENT_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nytt/model.h"
#include "nytt/synthesis.h"
#include "nytt/train.h"
#include "nytt/wave.h"

namespace nytt {

enum class Task { kDenoise, kDereverb, kDeclip };
std::string to_string(Task t);
Task task_from_string(const std::string& s);

// Clean references move in here once synthesis is done; unsupervised training
// phases lock the box, so any accidental read throws instead of leaking
// supervision.
class AuditedReferences {
 public:
  explicit AuditedReferences(std::vector<Waveform> clean) : clean_(std::move(clean)) {}

  void lock() { locked_ = true; }
  void unlock() { locked_ = false; }
  bool locked() const { return locked_; }
  size_t size() const { return clean_.size(); }
  const std::vector<Waveform>& get() const;

 private:
  std::vector<Waveform> clean_;
  bool locked_ = false;
};

struct ExperimentConfig {
  std::string name = "experiment";
  Task task = Task::kDenoise;
  CorruptionSpec obs_spec;   // corrupts clean items into the noisy targets x
  CorruptionSpec test_spec;  // corrupts held-out clean items; TEST partition
  // unprocessed | ctt | nytt | mixit | iternytt
  std::vector<std::string> methods{"unprocessed", "nytt"};
  int iterations = 3;  // iternytt rounds
  std::vector<uint64_t> seeds{1, 2, 3};
  int train_items = 200;
  int test_items = 50;
  double item_s = 2.0;
  ModelConfig model;
  // Template for every cell; seed and checkpoint_dir are overridden per cell.
  // Its add_spec is the training-time corruption (the SNR_y source).
  TrainConfig train;
  std::optional<CorruptionSpec> later_add_spec;  // iternytt rounds >= 2
  std::string out_dir = "out";
  bool save_checkpoints = true;

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
};

void validate_config(const ExperimentConfig& cfg);

struct ResultRow {
  std::string condition = "base";
  uint64_t seed = 0;
  std::string method;
  std::map<std::string, double> metrics;
  bool failed = false;
  std::string error;
  std::string provenance;
};

struct ResultsTable {
  std::string name;
  std::string fingerprint;
  std::vector<ResultRow> rows;
  nlohmann::json trend;  // sweep statistics, keyed by method

  void sort_rows();
  // condition,seed,method,failed,error,<metrics...>,provenance
  std::string to_csv() const;
  nlohmann::json to_json() const;
  static ResultsTable from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static ResultsTable load(const std::string& path);

  // Mean of one metric over all non-failed rows matching condition + method.
  std::optional<double> mean_metric(const std::string& condition, const std::string& method,
                                    const std::string& metric) const;
};

// Synthesizes corpora, trains every configured method per seed, evaluates on
// the shared test set. Completed cells are recorded under out_dir/cells and
// skipped on rerun; failures become failed rows, not aborts.
ResultsTable run_experiment(const ExperimentConfig& cfg);

// Builds the more-noisy y from each noisy target and scores x, y, and f(y)
// against the clean references.
ResultsTable analyze_triplet(const EnhancerModel& model, const std::vector<Waveform>& clean_refs,
                             const std::vector<Waveform>& noisy_targets,
                             const CorruptionSpec& add_spec, uint64_t seed);

struct SweepAxisConfig {
  // snr_x | snr_y | rt60 | clip_snr | volume
  std::string axis;
  // numbers for snr_x/clip_snr, [lo, hi] pairs for snr_y/rt60, composition
  // names for volume
  nlohmann::json points;

  nlohmann::json to_json() const;
  static SweepAxisConfig from_json(const nlohmann::json& j);
};

// One run_experiment-style pass per axis point; numeric axes gain Spearman
// trend statistics in table.trend.
ResultsTable sweep(const ExperimentConfig& cfg, const SweepAxisConfig& axis);

// kind: csv | json | plots. Deterministic output; re-emission is
// byte-identical for identical tables.
void emit_report(const ResultsTable& table, const std::string& kind, const std::string& dir);

// Rank correlation with average ranks on ties; NaN when either side is
// constant.
double spearman_rank_correlation(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace nytt

#endif  // NYTT_EXPERIMENT_H_
