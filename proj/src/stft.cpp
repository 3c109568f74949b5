// Copyright 2026 NyTT-desk Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "nytt/stft.h"

#include <cmath>
#include <stdexcept>

#include "nytt/fft.h"

namespace nytt {

WindowKind window_kind_from_string(const std::string& name) {
  if (name == "hamming") return WindowKind::kHamming;
  if (name == "hann") return WindowKind::kHann;
  if (name == "rect") return WindowKind::kRect;
  throw std::invalid_argument("unknown window kind: " + name);
}

std::string to_string(WindowKind kind) {
  switch (kind) {
    case WindowKind::kHamming: return "hamming";
    case WindowKind::kHann: return "hann";
    case WindowKind::kRect: return "rect";
  }
  return "hamming";
}

void check_config(const StftConfig& cfg) {
  if (!(cfg.hop_size > 0 && cfg.hop_size <= cfg.window_size && cfg.window_size <= cfg.fft_size))
    throw std::invalid_argument("stft config: need 0 < hop <= window <= fft");
  if (!is_power_of_two(cfg.fft_size))
    throw std::invalid_argument("stft config: fft size must be a power of two");
}

std::vector<double> make_window(const StftConfig& cfg) {
  const int n = cfg.window_size;
  std::vector<double> w(n, 1.0);
  switch (cfg.window) {
    case WindowKind::kHamming:
      for (int i = 0; i < n; ++i)
        w[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (n - 1));
      break;
    case WindowKind::kHann:
      for (int i = 0; i < n; ++i)
        w[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / (n - 1)));
      break;
    case WindowKind::kRect:
      break;
  }
  return w;
}

int stft_frames(size_t n, const StftConfig& cfg) {
  if (n < static_cast<size_t>(cfg.window_size)) return 0;
  return static_cast<int>((n - cfg.window_size) / cfg.hop_size) + 1;
}

ComplexSpectrogram stft(const Waveform& w, const StftConfig& cfg) {
  check_config(cfg);
  check_waveform(w);
  const int frames = stft_frames(w.samples.size(), cfg);
  if (frames == 0)
    throw std::invalid_argument("stft: input shorter than one window");

  const std::vector<double> win = make_window(cfg);
  const int bins = cfg.bins();

  ComplexSpectrogram out;
  out.config = cfg;
  out.sample_rate_hz = w.sample_rate_hz;
  out.values.resize(frames, bins);

  std::vector<double> frame(cfg.window_size);
  for (int t = 0; t < frames; ++t) {
    const size_t off = static_cast<size_t>(t) * cfg.hop_size;
    for (int i = 0; i < cfg.window_size; ++i) frame[i] = w.samples[off + i] * win[i];
    auto spec = rfft(frame, cfg.fft_size);
    for (int b = 0; b < bins; ++b) out.values(t, b) = spec[b];
  }
  return out;
}

Waveform istft(const ComplexSpectrogram& spec) {
  const StftConfig& cfg = spec.config;
  check_config(cfg);
  if (spec.bins() != cfg.bins())
    throw std::invalid_argument("istft: bins inconsistent with fft size");
  if (spec.frames() < 1) throw std::invalid_argument("istft: empty spectrogram");
  if (!spec.values.allFinite()) throw std::invalid_argument("istft: non-finite spectrogram");

  const std::vector<double> win = make_window(cfg);
  const int frames = spec.frames();
  const size_t out_len = static_cast<size_t>(frames - 1) * cfg.hop_size + cfg.window_size;

  std::vector<double> acc(out_len, 0.0);
  std::vector<double> norm(out_len, 0.0);
  std::vector<std::complex<double>> half(cfg.bins());

  for (int t = 0; t < frames; ++t) {
    for (int b = 0; b < cfg.bins(); ++b) half[b] = spec.values(t, b);
    std::vector<double> frame = irfft(half, cfg.fft_size);
    const size_t off = static_cast<size_t>(t) * cfg.hop_size;
    for (int i = 0; i < cfg.window_size; ++i) {
      acc[off + i] += frame[i] * win[i];
      norm[off + i] += win[i] * win[i];
    }
  }

  Waveform out(std::vector<double>(out_len, 0.0), spec.sample_rate_hz);
  for (size_t i = 0; i < out_len; ++i) {
    if (norm[i] > 1e-12) out.samples[i] = acc[i] / norm[i];
  }
  return out;
}

Eigen::MatrixXd magnitude(const ComplexSpectrogram& spec) {
  return spec.values.cwiseAbs();
}

}  // namespace nytt
