// Copyright 2026 NyTT-desk Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "nytt/dsp.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>

#include "nytt/fft.h"

namespace nytt {

double measured_snr_db(const Waveform& signal, const Waveform& distortion) {
  if (signal.samples.size() != distortion.samples.size())
    throw std::invalid_argument("measured_snr_db: length mismatch");
  const double es = energy(signal);
  const double ed = energy(distortion);
  if (ed <= 0.0) return std::numeric_limits<double>::infinity();
  if (es <= 0.0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(es / ed);
}

MixResult mix_at_snr(const Waveform& target, const Waveform& noise, double snr_db) {
  if (target.samples.size() != noise.samples.size())
    throw std::invalid_argument("mix_at_snr: length mismatch");
  if (target.sample_rate_hz != noise.sample_rate_hz)
    throw std::invalid_argument("mix_at_snr: sample rate mismatch");

  MixResult out;
  if (std::isinf(snr_db) && snr_db > 0) {
    out.gain = 0.0;
    out.scaled_noise = zeros_like(noise);
    out.mixture = target;
    return out;
  }
  if (!std::isfinite(snr_db)) throw std::invalid_argument("mix_at_snr: non-finite SNR");

  const double es = energy(target);
  const double en = energy(noise);
  if (es <= 0.0) throw std::invalid_argument("mix_at_snr: zero-energy target");
  if (en <= 0.0) throw std::invalid_argument("mix_at_snr: zero-energy noise");

  // g = sqrt(E_s / (E_n * 10^(snr/10)))
  out.gain = std::sqrt(es / (en * std::pow(10.0, snr_db / 10.0)));
  out.scaled_noise = scale(noise, out.gain);
  out.mixture = add(target, out.scaled_noise);
  return out;
}

namespace {

Waveform convolve_direct(const Waveform& w, const Waveform& rir) {
  const size_t n = w.samples.size();
  const size_t m = rir.samples.size();
  Waveform out = zeros_like(w);
  for (size_t i = 0; i < n; ++i) {
    const size_t kmax = std::min(m, i + 1);
    double acc = 0.0;
    for (size_t k = 0; k < kmax; ++k) acc += w.samples[i - k] * rir.samples[k];
    out.samples[i] = acc;
  }
  return out;
}

Waveform convolve_fft(const Waveform& w, const Waveform& rir) {
  const size_t n = w.samples.size();
  const size_t m = rir.samples.size();
  size_t fft_n = 1;
  while (fft_n < n + m - 1) fft_n <<= 1;

  std::vector<std::complex<double>> a(fft_n, {0.0, 0.0}), b(fft_n, {0.0, 0.0});
  for (size_t i = 0; i < n; ++i) a[i] = {w.samples[i], 0.0};
  for (size_t i = 0; i < m; ++i) b[i] = {rir.samples[i], 0.0};
  fft_inplace(a, false);
  fft_inplace(b, false);
  for (size_t i = 0; i < fft_n; ++i) a[i] *= b[i];
  fft_inplace(a, true);

  Waveform out = zeros_like(w);
  for (size_t i = 0; i < n; ++i) out.samples[i] = a[i].real();
  return out;
}

}  // namespace

Waveform convolve_rir(const Waveform& w, const Waveform& rir) {
  check_waveform(w);
  if (rir.samples.empty()) throw std::invalid_argument("convolve_rir: empty impulse response");
  if (w.sample_rate_hz != rir.sample_rate_hz)
    throw std::invalid_argument("convolve_rir: sample rate mismatch");
  if (rir.samples.size() <= 32) return convolve_direct(w, rir);
  return convolve_fft(w, rir);
}

Waveform clip(const Waveform& w, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("clip: threshold must be positive");
  Waveform out = w;
  for (double& s : out.samples) {
    if (std::fabs(s) >= c) s = (s < 0.0 ? -c : c);
  }
  return out;
}

ClipThreshold clip_threshold_for_snr(const Waveform& s, double snr_db) {
  check_waveform(s);
  if (!std::isfinite(snr_db)) throw std::invalid_argument("clip_threshold_for_snr: non-finite SNR");
  const double es = energy(s);
  if (es <= 0.0) throw std::invalid_argument("clip_threshold_for_snr: zero-energy signal");
  const double pk = peak_abs(s);

  auto snr_at = [&](double c) {
    // residual energy of s - clip(s, c)
    double er = 0.0;
    for (double v : s.samples) {
      const double a = std::fabs(v);
      if (a >= c) {
        const double d = a - c;
        er += d * d;
      }
    }
    if (er <= 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(es / er);
  };

  ClipThreshold out;
  // SNR(c) increases with c and diverges as c approaches max|s|. A request
  // whose solution would clip only the peak sample itself is trivial: report
  // the peak with the saturation flag instead.
  double pk2 = 0.0;
  for (double v : s.samples) {
    const double a = std::fabs(v);
    if (a < pk && a > pk2) pk2 = a;
  }
  const double knee = pk2 > 0.0 ? pk2 : pk * (1.0 - 1e-9);
  if (snr_at(knee) < snr_db) {
    out.c = pk;
    out.saturated = true;
    return out;
  }

  double lo = pk * 1e-9, hi = pk;
  if (snr_at(lo) > snr_db + 0.05)
    throw std::invalid_argument("clip_threshold_for_snr: requested SNR below attainable range");

  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double v = snr_at(mid);
    if (std::fabs(v - snr_db) <= 0.05) {
      out.c = mid;
      return out;
    }
    if (v < snr_db)
      lo = mid;
    else
      hi = mid;
  }
  // tolerance rule: 0.05 dB or 60 iterations, whichever comes first
  out.c = 0.5 * (lo + hi);
  return out;
}

}  // namespace nytt
