// Copyright 2026 NyTT-desk Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NYTT_LOSSES_H_
#define NYTT_LOSSES_H_

#include <map>
#include <string>
#include <vector>

#include "nytt/autodiff.h"
#include "nytt/stft.h"
#include "nytt/wave.h"

namespace nytt {

struct LossValue {
  double scalar = 0.0;
  // Composite losses expose weighted components; scalar is their sum.
  std::map<std::string, double> breakdown;
};

// Mean over samples of the squared difference.
LossValue mse_time(const Waveform& est, const Waveform& tgt);

// Mean squared difference of STFT magnitudes.
LossValue mse_magspec(const Waveform& est, const Waveform& tgt, const StftConfig& cfg = {});

// -10 log10(||tgt||^2 / ||tgt - est||^2), residual floored at 1e-20 ||tgt||^2,
// clamped to [-100, 100]. Lower is better.
LossValue neg_snr_loss(const Waveform& est, const Waveform& tgt);

// fft 512/1024/2048 with hop = fft/4 and window = fft.
std::vector<StftConfig> default_mrstft_resolutions();

// w_l1 * mean|est - tgt| plus w_stft * mean over resolutions of
// (spectral convergence + log-magnitude L1).
LossValue l1_multires_stft_loss(const Waveform& est, const Waveform& tgt,
                                const std::vector<StftConfig>& resolutions =
                                    default_mrstft_resolutions(),
                                double w_l1 = 10.0, double w_stft = 0.1);

struct MixitResult {
  LossValue loss;
  int assignment = 1;  // 1: (u1+u2 -> x, u3 -> n_add); 2: (u1+u3 -> x, u2 -> n_add)
};

// Minimum over the two target/noise assignments; ties go to assignment 1.
MixitResult mixit_loss(const Waveform& u1, const Waveform& u2, const Waveform& u3,
                       const Waveform& x, const Waveform& n_add, const std::string& base);

// {"mse_time", "mse_magspec", "neg_snr", "l1_mrstft", "mixit"}
const std::vector<std::string>& registered_losses();
bool is_pairwise_loss(const std::string& name);

// Delegates to the named pairwise loss; trainers stay target-agnostic.
LossValue pairwise_objective(const Waveform& est, const Waveform& tgt, const std::string& base);

// Tape counterparts. est is a 1 x n node; the target enters as a constant.
// Each evaluates to the same scalar as its direct version up to rounding.
NodeId tape_mse_time(Tape& t, NodeId est, const Waveform& tgt);
NodeId tape_mse_magspec(Tape& t, NodeId est, const Waveform& tgt, const StftConfig& cfg = {});
NodeId tape_neg_snr(Tape& t, NodeId est, const Waveform& tgt);
NodeId tape_l1_mrstft(Tape& t, NodeId est, const Waveform& tgt,
                      const std::vector<StftConfig>& resolutions = default_mrstft_resolutions(),
                      double w_l1 = 10.0, double w_stft = 0.1);
NodeId tape_pairwise(Tape& t, NodeId est, const Waveform& tgt, const std::string& base);

// Picks the winning assignment from forward values, then records only that
// branch on the tape so gradients flow through the chosen assignment alone.
NodeId tape_mixit(Tape& t, NodeId u1, NodeId u2, NodeId u3, const Waveform& x,
                  const Waveform& n_add, const std::string& base, int* assignment);

}  // namespace nytt

#endif  // NYTT_LOSSES_H_
