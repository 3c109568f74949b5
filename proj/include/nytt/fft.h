// Copyright 2026 NyTT-desk Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NYTT_FFT_H_
#define NYTT_FFT_H_

#include <complex>
#include <vector>

namespace nytt {

// In-place iterative radix-2 FFT. n must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& data, bool inverse);

// Real-input forward DFT returning the n/2+1 non-redundant bins.
std::vector<std::complex<double>> rfft(const std::vector<double>& frame, int fft_size);

// Inverse of rfft: conjugate-symmetric extension of the half spectrum, then
// the real part of the inverse DFT. Imaginary content of bins 0 and n/2 is
// discarded, matching the forward map's range.
std::vector<double> irfft(const std::vector<std::complex<double>>& half, int fft_size);

bool is_power_of_two(int n);

}  // namespace nytt

#endif  // NYTT_FFT_H_
