// Copyright 2026 NyTT-desk Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "nytt/fft.h"

#include <cmath>
#include <stdexcept>

namespace nytt {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

void fft_inplace(std::vector<std::complex<double>>& data, bool inverse) {
  const size_t n = data.size();
  if (!is_power_of_two(static_cast<int>(n)))
    throw std::invalid_argument("fft: size must be a power of two");

  // bit reversal
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }

  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = data[i + k];
        std::complex<double> v = data[i + k + len / 2] * w;
        data[i + k] = u + v;
        data[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }

  if (inverse) {
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& c : data) c *= inv;
  }
}

std::vector<std::complex<double>> rfft(const std::vector<double>& frame, int fft_size) {
  std::vector<std::complex<double>> buf(fft_size, {0.0, 0.0});
  const size_t m = std::min(frame.size(), static_cast<size_t>(fft_size));
  for (size_t i = 0; i < m; ++i) buf[i] = {frame[i], 0.0};
  fft_inplace(buf, false);
  buf.resize(fft_size / 2 + 1);
  return buf;
}

std::vector<double> irfft(const std::vector<std::complex<double>>& half, int fft_size) {
  const int bins = fft_size / 2 + 1;
  if (static_cast<int>(half.size()) != bins)
    throw std::invalid_argument("irfft: half spectrum size does not match fft size");
  std::vector<std::complex<double>> buf(fft_size);
  for (int b = 0; b < bins; ++b) buf[b] = half[b];
  for (int b = 1; b < fft_size / 2; ++b) buf[fft_size - b] = std::conj(half[b]);
  fft_inplace(buf, true);
  std::vector<double> out(fft_size);
  for (int i = 0; i < fft_size; ++i) out[i] = buf[i].real();
  return out;
}

}  // namespace nytt
