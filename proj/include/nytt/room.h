// Copyright 2026 NyTT-desk Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NYTT_ROOM_H_
#define NYTT_ROOM_H_

#include <array>
#include <cstdint>

#include "nytt/wave.h"

namespace nytt {

struct Rir {
  Waveform taps;  // peak-normalized to |max| = 1
  double rt60_s = 0.0;
  std::array<double, 3> room_dims_m{};
  double mic_source_distance_m = 0.0;
};

// Reverberation time via Schroeder backward integration: least-squares line
// through the -5..-25 dB span of the decay curve, extrapolated to -60 dB.
// Throws if the curve never reaches -25 dB.
double rt60_of(const Waveform& taps);

// Shoebox image-source model with uniform wall reflectivity beta and
// nearest-sample tap placement. Taps are not normalized here.
Waveform ism_impulse_response(const std::array<double, 3>& room_dims_m,
                              const std::array<double, 3>& source_m,
                              const std::array<double, 3>& mic_m, double beta,
                              double max_time_s, int sample_rate_hz);

// Draws source/mic positions at the requested separation, seeds the wall
// absorption from Sabine's formula, and iterates until the Schroeder-measured
// RT60 lands within +-20% of the target. Throws std::invalid_argument when
// the target is unattainable for the geometry.
Rir generate_rir(const std::array<double, 3>& room_dims_m, double mic_source_distance_m,
                 double target_rt60_s, uint64_t seed, int sample_rate_hz = 16000);

}  // namespace nytt

#endif  // NYTT_ROOM_H_
