// Copyright 2026 NyTT-desk Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NYTT_TRAIN_H_
#define NYTT_TRAIN_H_

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "nytt/model.h"
#include "nytt/synthesis.h"
#include "nytt/wave.h"

namespace nytt {

// CTT and NyTT share one training loop; the mode only records where the
// targets came from (clean vs corrupted). MixIT runs through run_mixit.
enum class TrainMode { kCTT, kNyTT, kMixIT };
std::string to_string(TrainMode m);
TrainMode train_mode_from_string(const std::string& s);

struct TrainConfig {
  TrainMode mode = TrainMode::kNyTT;
  std::string loss = "mse_time";
  int epochs = 30;
  int batch_size = 4;
  double learning_rate = 1e-3;
  uint64_t seed = 1;
  // Fresh input corruption per item per epoch; its SNR distribution is the
  // SNR_y distribution.
  CorruptionSpec add_spec;
  int validation_size = 8;
  int validation_cadence = 1;
  // Early stop after this many epochs without a new best; 0 disables.
  int patience = 0;
  // When non-empty, best/last checkpoints and the loss-curve CSV land here.
  std::string checkpoint_dir;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainResult {
  explicit TrainResult(EnhancerModel model) : best_model(std::move(model)) {}

  EnhancerModel best_model;
  int best_epoch = 0;
  std::vector<double> train_loss;                    // one entry per epoch
  std::vector<std::pair<int, double>> val_loss;      // (epoch, loss)
  std::vector<int> mixit_assignments;                // per step, MixIT only

  std::string curves_csv() const;
};

// Frozen (input, target) pairs used for best-epoch selection.
using ValPair = std::pair<Waveform, Waveform>;

// One optimizer pass per batch over fresh corruption draws; returns the
// best-validation checkpoint. Throws on divergence (non-finite loss or
// loss > 1e6).
TrainResult train(const EnhancerModel& init, const std::vector<Waveform>& targets,
                  const TrainConfig& cfg);

// Three-output variant trained with the mixture-invariant objective; the
// first output slot is the enhanced signal at inference.
TrainResult run_mixit(const EnhancerModel& init, const std::vector<Waveform>& targets,
                      const TrainConfig& cfg);

struct IterationState {
  IterationState(int it, TrainResult r) : iteration(it), result(std::move(r)) {}

  int iteration = 0;
  TrainResult result;
  // f_i applied to the ORIGINAL x, never to the previous round's targets.
  std::vector<Waveform> enhanced_targets;
  uint64_t input_hash = 0;  // hash of the waveforms fed to enhance
  nlohmann::json metrics;   // filled by callers with reference access
};

struct IterNyttConfig {
  ModelConfig model;
  TrainConfig train;  // iteration 1; later rounds swap in later_add_spec
  // Defaults to the same corruption with SNR grid {0, 5, 10, 15} dB for
  // additive noise, unchanged otherwise.
  std::optional<CorruptionSpec> later_add_spec;
  int iterations = 3;
  bool warm_start = false;

  nlohmann::json to_json() const;
  static IterNyttConfig from_json(const nlohmann::json& j);
};

// Iteration 1 is plain NyTT on x; round i >= 2 trains a fresh model on the
// previous round's enhanced copies of x.
std::vector<IterationState> run_iternytt(const std::vector<Waveform>& x,
                                         const IterNyttConfig& cfg);

// Single frozen forward pass.
Waveform enhance(const EnhancerModel& model, const Waveform& y);

// Mean pairwise objective over a frozen split.
double validate(const EnhancerModel& model, const std::vector<ValPair>& pairs,
                const std::string& loss_name);

// Order-sensitive content hash over samples and rates.
uint64_t hash_waveforms(const std::vector<Waveform>& waves);

// Stable short hex fingerprint of a configuration document.
std::string config_fingerprint(const nlohmann::json& j);

}  // namespace nytt

#endif  // NYTT_TRAIN_H_
