// Copyright 2026 NyTT-desk Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NYTT_WAVE_H_
#define NYTT_WAVE_H_

#include <cstdint>
#include <string>
#include <vector>

namespace nytt {

// Finite real-valued sampled signal. Samples are dimensionless with nominal
// range [-1, 1]; values outside that range are permitted internally and only
// clamped when exported to a WAV file.
struct Waveform {
  std::vector<double> samples;
  int sample_rate_hz = 16000;

  Waveform() = default;
  Waveform(std::vector<double> s, int rate) : samples(std::move(s)), sample_rate_hz(rate) {}

  size_t size() const { return samples.size(); }
  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate_hz; }
};

// Throws std::invalid_argument if the waveform violates its invariants
// (empty, non-positive rate, or non-finite samples).
void check_waveform(const Waveform& w);

double energy(const Waveform& w);
double rms(const Waveform& w);
double peak_abs(const Waveform& w);

Waveform zeros_like(const Waveform& w);
Waveform zeros(size_t n, int sample_rate_hz);

// Elementwise helpers; throw on length or rate mismatch.
Waveform add(const Waveform& a, const Waveform& b);
Waveform sub(const Waveform& a, const Waveform& b);
Waveform scale(const Waveform& a, double g);

// 16-bit PCM mono WAV. write_wav clamps samples to [-1, 1] at export;
// quantization is round-to-nearest so identical inputs give identical bytes.
void write_wav(const std::string& path, const Waveform& w);
Waveform read_wav(const std::string& path);

}  // namespace nytt

#endif  // NYTT_WAVE_H_
