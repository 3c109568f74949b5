// Copyright 2026 NyTT-desk Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NYTT_STFT_H_
#define NYTT_STFT_H_

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "nytt/wave.h"

namespace nytt {

enum class WindowKind { kHamming, kHann, kRect };

WindowKind window_kind_from_string(const std::string& name);
std::string to_string(WindowKind kind);

// Default config: hop 128, window 512, fft 512, Hamming.
struct StftConfig {
  int window_size = 512;
  int hop_size = 128;
  int fft_size = 512;
  WindowKind window = WindowKind::kHamming;

  int bins() const { return fft_size / 2 + 1; }
};

// Throws std::invalid_argument unless 0 < hop <= window <= fft and fft is a
// power of two.
void check_config(const StftConfig& cfg);

std::vector<double> make_window(const StftConfig& cfg);

struct ComplexSpectrogram {
  Eigen::MatrixXcd values;  // frames x bins
  StftConfig config;
  int sample_rate_hz = 16000;

  int frames() const { return static_cast<int>(values.rows()); }
  int bins() const { return static_cast<int>(values.cols()); }
};

// Number of analysis frames for a waveform of length n: floor((n - window)/hop) + 1.
int stft_frames(size_t n, const StftConfig& cfg);

ComplexSpectrogram stft(const Waveform& w, const StftConfig& cfg);

// Weighted overlap-add with accumulated-window-square normalization.
// Output length is (frames - 1) * hop + window. For any window that is
// nonzero everywhere (Hamming, rect), istft(stft(w)) reproduces w exactly on
// the covered region up to floating-point rounding.
Waveform istft(const ComplexSpectrogram& spec);

Eigen::MatrixXd magnitude(const ComplexSpectrogram& spec);

}  // namespace nytt

#endif  // NYTT_STFT_H_
