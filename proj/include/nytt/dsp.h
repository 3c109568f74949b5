// Copyright 2026 NyTT-desk Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NYTT_DSP_H_
#define NYTT_DSP_H_

#include <utility>

#include "nytt/wave.h"

namespace nytt {

// 10 * log10(||signal||^2 / ||distortion||^2). Returns +inf when the
// distortion has zero energy and -inf when the signal does.
double measured_snr_db(const Waveform& signal, const Waveform& distortion);

struct MixResult {
  Waveform mixture;
  Waveform scaled_noise;
  double gain = 1.0;
};

// Scales the noise so that 10*log10(E_target / E_scaled_noise) == snr_db and
// returns target + scaled_noise. The target is never rescaled. snr_db == +inf
// yields a zero noise contribution (the no-op corruption).
MixResult mix_at_snr(const Waveform& target, const Waveform& noise, double snr_db);

// Full linear convolution truncated to the input length so paired signals
// stay aligned for losses.
Waveform convolve_rir(const Waveform& w, const Waveform& rir);

// Per-sample saturation: s[m] when |s[m]| < c, else c * sgn(s[m]).
Waveform clip(const Waveform& w, double c);

struct ClipThreshold {
  double c = 0.0;
  bool saturated = false;  // requested SNR is attainable only with c >= max|s|
};

// Finds c so that measured_snr_db(s, s - clip(s, c)) == snr_db within 0.05 dB
// by bisection on (0, max|s|]; the clipping SNR is monotone in c.
ClipThreshold clip_threshold_for_snr(const Waveform& s, double snr_db);

}  // namespace nytt

#endif  // NYTT_DSP_H_
