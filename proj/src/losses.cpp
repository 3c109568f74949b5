// Copyright 2026 NyTT-desk Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "nytt/losses.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nytt {

namespace {

constexpr double kLogEps = 1e-8;
constexpr double kResidualFloor = 1e-20;
constexpr double kClampDb = 100.0;

void check_pair(const Waveform& est, const Waveform& tgt, const char* op) {
  check_waveform(est);
  check_waveform(tgt);
  if (est.samples.size() != tgt.samples.size() || est.sample_rate_hz != tgt.sample_rate_hz) {
    throw std::invalid_argument(std::string(op) + ": waveform shape mismatch");
  }
}

Waveform node_to_wave(const Tape& t, NodeId id, int sample_rate_hz) {
  const Eigen::MatrixXd& v = t.value(id);
  Waveform w;
  w.sample_rate_hz = sample_rate_hz;
  w.samples.assign(v.data(), v.data() + v.cols());
  return w;
}

NodeId wave_constant(Tape& t, const Waveform& w) {
  return t.constant(Eigen::Map<const Eigen::MatrixXd>(w.samples.data(), 1,
                                                      static_cast<Eigen::Index>(w.samples.size())));
}

}  // namespace

LossValue mse_time(const Waveform& est, const Waveform& tgt) {
  check_pair(est, tgt, "mse_time");
  double acc = 0.0;
  for (size_t i = 0; i < est.samples.size(); ++i) {
    const double d = est.samples[i] - tgt.samples[i];
    acc += d * d;
  }
  return {acc / est.samples.size(), {}};
}

LossValue mse_magspec(const Waveform& est, const Waveform& tgt, const StftConfig& cfg) {
  check_pair(est, tgt, "mse_magspec");
  const Eigen::MatrixXd me = magnitude(stft(est, cfg));
  const Eigen::MatrixXd mt = magnitude(stft(tgt, cfg));
  return {(me - mt).array().square().mean(), {}};
}

LossValue neg_snr_loss(const Waveform& est, const Waveform& tgt) {
  check_pair(est, tgt, "neg_snr");
  const double num = energy(tgt);
  if (num <= 0.0) throw std::invalid_argument("neg_snr: zero-energy target");
  double den = 0.0;
  for (size_t i = 0; i < est.samples.size(); ++i) {
    const double d = tgt.samples[i] - est.samples[i];
    den += d * d;
  }
  den = std::max(den, kResidualFloor * num);
  const double v = -10.0 * std::log10(num / den);
  return {std::clamp(v, -kClampDb, kClampDb), {}};
}

std::vector<StftConfig> default_mrstft_resolutions() {
  std::vector<StftConfig> res;
  for (int fft : {512, 1024, 2048}) {
    StftConfig c;
    c.fft_size = fft;
    c.window_size = fft;
    c.hop_size = fft / 4;
    res.push_back(c);
  }
  return res;
}

namespace {

// Spectral convergence + log-magnitude L1 for one resolution.
double stft_term(const Eigen::MatrixXd& me, const Eigen::MatrixXd& mt) {
  const double ref_norm = std::max(std::sqrt(mt.array().square().sum()), 1e-12);
  const double sc = std::sqrt((me - mt).array().square().sum()) / ref_norm;
  const double logmag =
      ((me.array() + kLogEps).log() - (mt.array() + kLogEps).log()).abs().mean();
  return sc + logmag;
}

}  // namespace

LossValue l1_multires_stft_loss(const Waveform& est, const Waveform& tgt,
                                const std::vector<StftConfig>& resolutions, double w_l1,
                                double w_stft) {
  check_pair(est, tgt, "l1_mrstft");
  if (resolutions.empty()) throw std::invalid_argument("l1_mrstft: no resolutions");
  double l1 = 0.0;
  for (size_t i = 0; i < est.samples.size(); ++i) {
    l1 += std::abs(est.samples[i] - tgt.samples[i]);
  }
  l1 /= est.samples.size();
  double spec = 0.0;
  for (const auto& cfg : resolutions) {
    spec += stft_term(magnitude(stft(est, cfg)), magnitude(stft(tgt, cfg)));
  }
  spec /= resolutions.size();
  LossValue out;
  out.breakdown["l1"] = w_l1 * l1;
  out.breakdown["mrstft"] = w_stft * spec;
  out.scalar = out.breakdown["l1"] + out.breakdown["mrstft"];
  return out;
}

const std::vector<std::string>& registered_losses() {
  static const std::vector<std::string> names{"mse_time", "mse_magspec", "neg_snr", "l1_mrstft",
                                              "mixit"};
  return names;
}

bool is_pairwise_loss(const std::string& name) {
  return name == "mse_time" || name == "mse_magspec" || name == "neg_snr" || name == "l1_mrstft";
}

LossValue pairwise_objective(const Waveform& est, const Waveform& tgt, const std::string& base) {
  if (base == "mse_time") return mse_time(est, tgt);
  if (base == "mse_magspec") return mse_magspec(est, tgt);
  if (base == "neg_snr") return neg_snr_loss(est, tgt);
  if (base == "l1_mrstft") return l1_multires_stft_loss(est, tgt);
  throw std::invalid_argument("pairwise_objective: unknown base loss '" + base + "'");
}

MixitResult mixit_loss(const Waveform& u1, const Waveform& u2, const Waveform& u3,
                       const Waveform& x, const Waveform& n_add, const std::string& base) {
  check_pair(u1, x, "mixit");
  check_pair(u2, x, "mixit");
  check_pair(u3, x, "mixit");
  check_pair(n_add, x, "mixit");
  const LossValue a_tgt = pairwise_objective(add(u1, u2), x, base);
  const LossValue a_noise = pairwise_objective(u3, n_add, base);
  const LossValue b_tgt = pairwise_objective(add(u1, u3), x, base);
  const LossValue b_noise = pairwise_objective(u2, n_add, base);
  const double a = a_tgt.scalar + a_noise.scalar;
  const double b = b_tgt.scalar + b_noise.scalar;
  MixitResult out;
  out.assignment = a <= b ? 1 : 2;
  const LossValue& tgt_term = out.assignment == 1 ? a_tgt : b_tgt;
  const LossValue& noise_term = out.assignment == 1 ? a_noise : b_noise;
  out.loss.breakdown["target_term"] = tgt_term.scalar;
  out.loss.breakdown["noise_term"] = noise_term.scalar;
  out.loss.scalar = tgt_term.scalar + noise_term.scalar;
  return out;
}

NodeId tape_mse_time(Tape& t, NodeId est, const Waveform& tgt) {
  return t.mean(t.square_(t.sub(est, wave_constant(t, tgt))));
}

NodeId tape_mse_magspec(Tape& t, NodeId est, const Waveform& tgt, const StftConfig& cfg) {
  const NodeId me = t.magnitude(t.stft_re(est, cfg), t.stft_im(est, cfg));
  const Eigen::MatrixXd mt = magnitude(stft(tgt, cfg));
  return t.mean(t.square_(t.sub(me, t.constant(mt))));
}

NodeId tape_neg_snr(Tape& t, NodeId est, const Waveform& tgt) {
  const double num = energy(tgt);
  if (num <= 0.0) throw std::invalid_argument("tape_neg_snr: zero-energy target");
  const NodeId res = t.sub(wave_constant(t, tgt), est);
  const NodeId den = t.sum(t.square_(res));
  const NodeId den_floored =
      t.emax(den, t.constant(Eigen::MatrixXd::Constant(1, 1, kResidualFloor * num)));
  const NodeId ratio = t.cdiv(t.constant(Eigen::MatrixXd::Constant(1, 1, num)), den_floored);
  const NodeId db = t.scale(t.log_eps(ratio, 0.0), -10.0 / std::log(10.0));
  return t.min_scalar(t.max_scalar(db, -kClampDb), kClampDb);
}

NodeId tape_l1_mrstft(Tape& t, NodeId est, const Waveform& tgt,
                      const std::vector<StftConfig>& resolutions, double w_l1, double w_stft) {
  if (resolutions.empty()) throw std::invalid_argument("tape_l1_mrstft: no resolutions");
  const NodeId l1 = t.mean(t.abs_(t.sub(est, wave_constant(t, tgt))));
  NodeId spec = -1;
  for (const auto& cfg : resolutions) {
    const NodeId me = t.magnitude(t.stft_re(est, cfg), t.stft_im(est, cfg));
    const Eigen::MatrixXd mt = magnitude(stft(tgt, cfg));
    const double ref_norm = std::max(std::sqrt(mt.array().square().sum()), 1e-12);
    const NodeId diff = t.sub(me, t.constant(mt));
    const NodeId sc = t.scale(t.sqrt_(t.sum(t.square_(diff))), 1.0 / ref_norm);
    const NodeId logmag = t.mean(
        t.abs_(t.sub(t.log_eps(me, kLogEps), t.constant((mt.array() + kLogEps).log().matrix()))));
    const NodeId term = t.add(sc, logmag);
    spec = spec < 0 ? term : t.add(spec, term);
  }
  spec = t.scale(spec, 1.0 / resolutions.size());
  return t.add(t.scale(l1, w_l1), t.scale(spec, w_stft));
}

NodeId tape_pairwise(Tape& t, NodeId est, const Waveform& tgt, const std::string& base) {
  if (base == "mse_time") return tape_mse_time(t, est, tgt);
  if (base == "mse_magspec") return tape_mse_magspec(t, est, tgt);
  if (base == "neg_snr") return tape_neg_snr(t, est, tgt);
  if (base == "l1_mrstft") return tape_l1_mrstft(t, est, tgt);
  throw std::invalid_argument("tape_pairwise: unknown base loss '" + base + "'");
}

NodeId tape_mixit(Tape& t, NodeId u1, NodeId u2, NodeId u3, const Waveform& x,
                  const Waveform& n_add, const std::string& base, int* assignment) {
  const int rate = x.sample_rate_hz;
  const MixitResult probe = mixit_loss(node_to_wave(t, u1, rate), node_to_wave(t, u2, rate),
                                       node_to_wave(t, u3, rate), x, n_add, base);
  if (assignment != nullptr) *assignment = probe.assignment;
  const NodeId to_x = probe.assignment == 1 ? t.add(u1, u2) : t.add(u1, u3);
  const NodeId to_noise = probe.assignment == 1 ? u3 : u2;
  return t.add(tape_pairwise(t, to_x, x, base), tape_pairwise(t, to_noise, n_add, base));
}

}  // namespace nytt
