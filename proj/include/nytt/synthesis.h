// Copyright 2026 NyTT-desk Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NYTT_SYNTHESIS_H_
#define NYTT_SYNTHESIS_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nytt/rng.h"
#include "nytt/room.h"
#include "nytt/wave.h"

namespace nytt {

// OBS corrupts targets, ADD corrupts training inputs, TEST corrupts held-out
// inputs. Same family parameters, disjoint random streams.
enum class Partition { kObs, kAdd, kTest };
std::string to_string(Partition p);
Partition partition_from_string(const std::string& s);

enum class NoiseKind { kBand, kTonal, kImpulsive };

struct NoiseFamily {
  std::string family_id;
  NoiseKind kind = NoiseKind::kBand;
  double pass_lo_hz = 0.0;
  double pass_hi_hz = 0.0;
  Partition partition = Partition::kObs;

  nlohmann::json to_json() const;
  static NoiseFamily from_json(const nlohmann::json& j);
};

// Built-in families with mutually disjoint passbands, all above the clean
// corpus support: "band" 4000-5000 Hz filtered noise, "tonal" 5500-6500 Hz
// multi-tone, "impulsive" 6500-7500 Hz decaying-sinusoid bursts.
NoiseFamily make_noise_family(const std::string& family_id, Partition partition);

// Finite grid or closed range; exactly one is active.
struct SnrDistribution {
  std::vector<double> grid_db;
  double lo_db = 0.0;
  double hi_db = 0.0;
  bool is_range = false;

  static SnrDistribution fixed(double snr_db);
  static SnrDistribution grid(std::vector<double> levels_db);
  static SnrDistribution range(double lo_db, double hi_db);

  nlohmann::json to_json() const;
  static SnrDistribution from_json(const nlohmann::json& j);
};

double draw_snr(const SnrDistribution& d, Rng& rng);

// Declarative RIR pool: rooms drawn per item, RT60 targets uniform in bucket.
struct RirPoolSpec {
  int count = 0;
  double rt60_lo_s = 0.0;
  double rt60_hi_s = 0.0;
  uint64_t seed = 0;
  double floor_lo_m = 4.0;
  double floor_hi_m = 8.0;
  double height_lo_m = 2.5;
  double height_hi_m = 3.5;
  double distance_m = 1.0;

  nlohmann::json to_json() const;
  static RirPoolSpec from_json(const nlohmann::json& j);
};

std::vector<Rir> materialize_rir_pool(const RirPoolSpec& spec, int sample_rate_hz = 16000);

struct CorruptionSpec {
  enum class Kind { kAdditive, kReverb, kClip };
  Kind kind = Kind::kAdditive;
  Partition role = Partition::kObs;

  // additive
  std::optional<NoiseFamily> noise;
  SnrDistribution snr_db;  // additive and clip

  // reverberation
  RirPoolSpec rir_pool_spec;
  std::vector<Rir> rir_pool;  // materialized; empty until prepared
  bool align_direct_path = true;

  static CorruptionSpec additive(const NoiseFamily& family, const SnrDistribution& snr);
  // SNR = +inf sentinel: corrupt() returns the input unchanged.
  static CorruptionSpec noop(Partition role = Partition::kObs);
  static CorruptionSpec reverb(const RirPoolSpec& pool, Partition role);
  static CorruptionSpec reverb_with_pool(std::vector<Rir> pool, Partition role);
  static CorruptionSpec clip(const SnrDistribution& snr, Partition role);

  bool is_noop() const;
  nlohmann::json to_json() const;
  static CorruptionSpec from_json(const nlohmann::json& j);
};

void validate_spec(const CorruptionSpec& spec);

// Materializes the RIR pool if the spec is reverberation and the pool is
// still empty. Idempotent.
void prepare_spec(CorruptionSpec& spec, int sample_rate_hz = 16000);

struct CorruptResult {
  Waveform corrupted;
  nlohmann::json params_drawn;
};

// Random stream used for the noise draw of (family, seed, item); exposed for
// partition-disjointness bookkeeping.
uint64_t noise_stream_id(const NoiseFamily& family, uint64_t seed, uint64_t item_index);

Waveform generate_noise(const NoiseFamily& family, double duration_s, uint64_t seed,
                        uint64_t item_index = 0, int sample_rate_hz = 16000);

// Speech-like harmonic complexes: pitch 120-280 Hz with vibrato, harmonics
// below 3 kHz with 1/k amplitudes, syllable-style gating with silences,
// RMS 0.1. Deterministic per (seed, item index).
std::vector<Waveform> generate_clean_corpus(int n_items, double duration_s, uint64_t seed,
                                            int sample_rate_hz = 16000);

CorruptResult corrupt(const Waveform& s, const CorruptionSpec& spec, uint64_t seed,
                      uint64_t item_index = 0);

// Energy inside [lo_hz, hi_hz), Parseval-weighted from the half spectrum.
double band_energy(const Waveform& w, double lo_hz, double hi_hz);

struct DatasetManifest {
  uint64_t global_seed = 0;
  int sample_rate_hz = 16000;
  nlohmann::json spec;  // CorruptionSpec::to_json of the obs corruption
  struct Item {
    std::string item_id;
    std::string clean_path;
    std::string target_path;
    nlohmann::json params_drawn;
  };
  std::vector<Item> items;

  nlohmann::json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static DatasetManifest load(const std::string& path);
};

struct Dataset {
  std::vector<Waveform> clean;
  std::vector<Waveform> targets;
  DatasetManifest manifest;
};

// One corrupted target per clean item; every draw lands in the manifest.
Dataset build_dataset(const std::vector<Waveform>& clean, const CorruptionSpec& obs_spec,
                      uint64_t seed);

// Re-runs corruption from the manifest's seed and spec; byte-identical targets.
std::vector<Waveform> replay_dataset(const DatasetManifest& manifest,
                                     const std::vector<Waveform>& clean);

}  // namespace nytt

#endif  // NYTT_SYNTHESIS_H_
