// Copyright 2026 NyTT-desk Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "nytt/room.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "nytt/rng.h"

namespace nytt {

namespace {

constexpr double kSpeedOfSound = 343.0;  // m/s

struct AxisImage {
  double coord;
  int reflections;
};

// Image coordinates along one axis: 2nL + s (2|n| reflections) and
// 2nL - s (|2n - 1| reflections).
std::vector<AxisImage> axis_images(double length, double source, double mic,
                                   double max_dist) {
  std::vector<AxisImage> out;
  const int n_max = static_cast<int>(std::ceil((max_dist + length) / (2.0 * length)));
  for (int n = -n_max; n <= n_max; ++n) {
    const double base = 2.0 * n * length;
    const double a = base + source;
    if (std::abs(a - mic) <= max_dist) out.push_back({a, 2 * std::abs(n)});
    const double b = base - source;
    if (std::abs(b - mic) <= max_dist) out.push_back({b, std::abs(2 * n - 1)});
  }
  return out;
}

double sabine_absorption(const std::array<double, 3>& dims, double rt60_s) {
  const double v = dims[0] * dims[1] * dims[2];
  const double s = 2.0 * (dims[0] * dims[1] + dims[0] * dims[2] + dims[1] * dims[2]);
  return 0.161 * v / (s * rt60_s);
}

}  // namespace

double rt60_of(const Waveform& taps) {
  check_waveform(taps);
  const int n = static_cast<int>(taps.samples.size());
  std::vector<double> energy(n);
  double acc = 0.0;
  for (int i = n - 1; i >= 0; --i) {
    acc += taps.samples[i] * taps.samples[i];
    energy[i] = acc;
  }
  if (acc <= 0.0) throw std::invalid_argument("rt60_of: all-zero impulse response");

  const double floor_db = -200.0;
  std::vector<double> db(n);
  for (int i = 0; i < n; ++i) {
    db[i] = energy[i] > 0.0 ? 10.0 * std::log10(energy[i] / acc) : floor_db;
  }

  int i5 = -1;
  int i25 = -1;
  for (int i = 0; i < n; ++i) {
    if (i5 < 0 && db[i] <= -5.0) i5 = i;
    if (db[i] <= -25.0) {
      i25 = i;
      break;
    }
  }
  // The backward integral of any truncated signal collapses at the window end;
  // a -25 dB crossing inside that tail is a truncation artifact, not decay.
  if (i25 < 0 || i25 > static_cast<int>(0.95 * n)) {
    throw std::invalid_argument("rt60_of: decay range shorter than 20 dB");
  }
  if (i25 <= i5 + 1) {
    // Near-instant decay; below any useful time resolution.
    return static_cast<double>(i25 - i5) / taps.sample_rate_hz;
  }

  // Least-squares line db = a + b*t over [i5, i25], then RT60 = -60 / b.
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const int m = i25 - i5 + 1;
  for (int i = i5; i <= i25; ++i) {
    const double t = static_cast<double>(i) / taps.sample_rate_hz;
    sx += t;
    sy += db[i];
    sxx += t * t;
    sxy += t * db[i];
  }
  const double denom = m * sxx - sx * sx;
  if (denom <= 0.0) throw std::invalid_argument("rt60_of: degenerate decay fit");
  const double slope = (m * sxy - sx * sy) / denom;
  if (slope >= 0.0) throw std::invalid_argument("rt60_of: non-decaying energy curve");
  return -60.0 / slope;
}

Waveform ism_impulse_response(const std::array<double, 3>& room_dims_m,
                              const std::array<double, 3>& source_m,
                              const std::array<double, 3>& mic_m, double beta,
                              double max_time_s, int sample_rate_hz) {
  for (int a = 0; a < 3; ++a) {
    if (room_dims_m[a] <= 0.0) throw std::invalid_argument("ism: non-positive room dimension");
    if (source_m[a] < 0.0 || source_m[a] > room_dims_m[a] || mic_m[a] < 0.0 ||
        mic_m[a] > room_dims_m[a]) {
      throw std::invalid_argument("ism: source or mic outside the room");
    }
  }
  if (beta < 0.0 || beta >= 1.0) throw std::invalid_argument("ism: beta must be in [0, 1)");
  if (max_time_s <= 0.0) throw std::invalid_argument("ism: non-positive max_time_s");

  const double max_dist = kSpeedOfSound * max_time_s;
  const auto xs = axis_images(room_dims_m[0], source_m[0], mic_m[0], max_dist);
  const auto ys = axis_images(room_dims_m[1], source_m[1], mic_m[1], max_dist);
  const auto zs = axis_images(room_dims_m[2], source_m[2], mic_m[2], max_dist);

  // beta^r lookup; reflection order is bounded by the per-axis image counts.
  const int r_max = 3 * static_cast<int>(std::ceil((max_dist + 1.0) /
                                                   (2.0 * std::min({room_dims_m[0], room_dims_m[1],
                                                                    room_dims_m[2]}))) +
                                         2);
  std::vector<double> beta_pow(2 * r_max + 4, 0.0);
  beta_pow[0] = 1.0;
  for (size_t r = 1; r < beta_pow.size(); ++r) beta_pow[r] = beta_pow[r - 1] * beta;

  Waveform out;
  out.sample_rate_hz = sample_rate_hz;
  out.samples.assign(static_cast<size_t>(std::ceil(max_time_s * sample_rate_hz)) + 1, 0.0);
  const int n_taps = static_cast<int>(out.samples.size());

  for (const auto& ix : xs) {
    const double dx2 = (ix.coord - mic_m[0]) * (ix.coord - mic_m[0]);
    for (const auto& iy : ys) {
      const double dy2 = (iy.coord - mic_m[1]) * (iy.coord - mic_m[1]);
      const double dxy2 = dx2 + dy2;
      const int rxy = ix.reflections + iy.reflections;
      for (const auto& iz : zs) {
        const double dz = iz.coord - mic_m[2];
        const double dist = std::sqrt(dxy2 + dz * dz);
        if (dist > max_dist) continue;
        const int idx = static_cast<int>(std::lround(dist / kSpeedOfSound * sample_rate_hz));
        if (idx >= n_taps) continue;
        const double d = std::max(dist, 1e-2);  // guard coincident source/mic
        out.samples[idx] += beta_pow[rxy + iz.reflections] / (4.0 * M_PI * d);
      }
    }
  }
  return out;
}

Rir generate_rir(const std::array<double, 3>& room_dims_m, double mic_source_distance_m,
                 double target_rt60_s, uint64_t seed, int sample_rate_hz) {
  for (int a = 0; a < 3; ++a) {
    if (room_dims_m[a] <= 0.0) throw std::invalid_argument("generate_rir: non-positive dimension");
  }
  if (target_rt60_s <= 0.0) throw std::invalid_argument("generate_rir: non-positive target RT60");
  if (mic_source_distance_m <= 0.0) {
    throw std::invalid_argument("generate_rir: non-positive mic distance");
  }
  const double margin = 0.1;
  const double diag = std::sqrt(room_dims_m[0] * room_dims_m[0] + room_dims_m[1] * room_dims_m[1] +
                                room_dims_m[2] * room_dims_m[2]);
  if (mic_source_distance_m >= diag) {
    throw std::invalid_argument("generate_rir: mic distance exceeds room diagonal");
  }

  const double alpha0 = sabine_absorption(room_dims_m, target_rt60_s);
  if (alpha0 >= 1.0) {
    throw std::invalid_argument(
        "generate_rir: target RT60 " + std::to_string(target_rt60_s) +
        " s is unattainable for this geometry (Sabine absorption >= 1)");
  }

  Rng rng(derive_stream(seed, {0x5249u, static_cast<uint64_t>(room_dims_m[0] * 1000),
                               static_cast<uint64_t>(room_dims_m[1] * 1000),
                               static_cast<uint64_t>(target_rt60_s * 1e6)}));

  // Source placed away from the walls; mic at the requested separation.
  std::array<double, 3> src{};
  std::array<double, 3> mic{};
  bool placed = false;
  for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
    for (int a = 0; a < 3; ++a) {
      const double lo = std::min(margin, 0.25 * room_dims_m[a]);
      src[a] = rng.uniform(lo, room_dims_m[a] - lo);
    }
    // Random direction via gaussian normalization.
    std::array<double, 3> dir{rng.gaussian(), rng.gaussian(), rng.gaussian()};
    const double norm = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
    if (norm < 1e-9) continue;
    placed = true;
    for (int a = 0; a < 3; ++a) {
      mic[a] = src[a] + mic_source_distance_m * dir[a] / norm;
      const double lo = std::min(margin * 0.5, 0.1 * room_dims_m[a]);
      if (mic[a] < lo || mic[a] > room_dims_m[a] - lo) placed = false;
    }
  }
  if (!placed) {
    throw std::invalid_argument("generate_rir: could not place mic at requested distance");
  }

  const double max_time = std::max(1.15 * target_rt60_s, 0.08) + mic_source_distance_m / 343.0;
  double alpha = alpha0;
  Rir out;
  out.room_dims_m = room_dims_m;
  out.mic_source_distance_m = mic_source_distance_m;
  double best_err = 1e300;
  for (int iter = 0; iter < 12; ++iter) {
    Waveform taps =
        ism_impulse_response(room_dims_m, src, mic, std::sqrt(1.0 - alpha), max_time,
                             sample_rate_hz);
    double rt = 0.0;
    bool measured = false;
    try {
      rt = rt60_of(taps);
      measured = true;
    } catch (const std::invalid_argument&) {
      // Decay too shallow inside the window; treat as overly long RT60.
      rt = 4.0 * target_rt60_s;
    }
    const double err = std::abs(rt - target_rt60_s) / target_rt60_s;
    if (measured && err < best_err) {
      best_err = err;
      out.taps = taps;
      out.rt60_s = rt;
    }
    if (err <= 0.15) break;
    // RT60 scales roughly inversely with absorption.
    const double ratio = std::clamp(rt / target_rt60_s, 0.4, 2.5);
    alpha = std::clamp(alpha * ratio, 1e-4, 0.9999);
  }
  if (best_err > 0.2) {
    throw std::invalid_argument("generate_rir: calibration failed to reach +-20% of target RT60 " +
                                std::to_string(target_rt60_s));
  }

  const double pk = peak_abs(out.taps);
  for (auto& v : out.taps.samples) v /= pk;
  return out;
}

}  // namespace nytt
