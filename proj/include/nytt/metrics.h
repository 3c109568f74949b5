// Copyright 2026 NyTT-desk Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NYTT_METRICS_H_
#define NYTT_METRICS_H_

#include <map>
#include <set>
#include <string>
#include <vector>

#include "nytt/stft.h"
#include "nytt/wave.h"

namespace nytt {

// Scale-invariant signal-to-distortion ratio in dB, capped at +100 dB.
// alpha = <estimate, reference> / ||reference||^2,
// value = 10 log10(||alpha r||^2 / ||alpha r - e||^2).
double si_sdr(const Waveform& estimate, const Waveform& reference);

// RMS over frames and bins of 20*(log10(|STFT(e)|+eps) - log10(|STFT(r)|+eps)),
// eps = 1e-8. Nonnegative; zero iff the magnitudes agree.
double log_spectral_distance(const Waveform& estimate, const Waveform& reference,
                             const StftConfig& cfg);

struct MetricsReport {
  struct Item {
    std::string item_id;
    std::map<std::string, double> values;
  };
  std::vector<Item> per_item;               // sorted by item_id
  std::map<std::string, double> aggregate;  // arithmetic means
  int count = 0;

  std::string to_csv() const;
  std::string to_json() const;
};

struct EvalPair {
  std::string item_id;
  Waveform estimate;
  Waveform reference;
};

// Known metric names: "si_sdr", "lsd".
MetricsReport evaluate_corpus(const std::vector<EvalPair>& pairs,
                              const std::set<std::string>& metrics,
                              const StftConfig& cfg = StftConfig{});

}  // namespace nytt

#endif  // NYTT_METRICS_H_
