// Copyright 2026 NyTT-desk Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "nytt/synthesis.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "nytt/dsp.h"
#include "nytt/fft.h"
#include "nytt/rng.h"

namespace nytt {

namespace {

// Substream domain tags; any fixed distinct constants work.
constexpr uint64_t kTagClean = 0xC1EA0ULL;
constexpr uint64_t kTagNoise = 0x015EULL;
constexpr uint64_t kTagCorrupt = 0xC0AAULL;
constexpr uint64_t kTagRirPool = 0x41B0ULL;

constexpr double kNoiseRms = 0.1;
constexpr double kCleanRms = 0.1;

int next_pow2(int n) {
  int p = 1;
  while (p < n) p *= 2;
  return p;
}

std::string kind_to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::kBand: return "band";
    case NoiseKind::kTonal: return "tonal";
    case NoiseKind::kImpulsive: return "impulsive";
  }
  throw std::logic_error("unknown noise kind");
}

NoiseKind kind_from_string(const std::string& s) {
  if (s == "band") return NoiseKind::kBand;
  if (s == "tonal") return NoiseKind::kTonal;
  if (s == "impulsive") return NoiseKind::kImpulsive;
  throw std::invalid_argument("unknown noise kind: " + s);
}

void normalize_rms(Waveform& w, double target_rms) {
  const double r = rms(w);
  if (r <= 0.0) throw std::logic_error("normalize_rms: zero-energy draw");
  const double g = target_rms / r;
  for (auto& v : w.samples) v *= g;
}

nlohmann::json snr_value_to_json(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double snr_value_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw std::invalid_argument("bad snr value: " + s);
  }
  return j.get<double>();
}

}  // namespace

std::string to_string(Partition p) {
  switch (p) {
    case Partition::kObs: return "OBS";
    case Partition::kAdd: return "ADD";
    case Partition::kTest: return "TEST";
  }
  throw std::logic_error("unknown partition");
}

Partition partition_from_string(const std::string& s) {
  if (s == "OBS") return Partition::kObs;
  if (s == "ADD") return Partition::kAdd;
  if (s == "TEST") return Partition::kTest;
  throw std::invalid_argument("unknown partition: " + s);
}

nlohmann::json NoiseFamily::to_json() const {
  return {{"family_id", family_id},
          {"kind", kind_to_string(kind)},
          {"pass_lo_hz", pass_lo_hz},
          {"pass_hi_hz", pass_hi_hz},
          {"partition", to_string(partition)}};
}

NoiseFamily NoiseFamily::from_json(const nlohmann::json& j) {
  NoiseFamily f;
  f.family_id = j.at("family_id").get<std::string>();
  f.kind = kind_from_string(j.at("kind").get<std::string>());
  f.pass_lo_hz = j.at("pass_lo_hz").get<double>();
  f.pass_hi_hz = j.at("pass_hi_hz").get<double>();
  f.partition = partition_from_string(j.at("partition").get<std::string>());
  return f;
}

NoiseFamily make_noise_family(const std::string& family_id, Partition partition) {
  NoiseFamily f;
  f.family_id = family_id;
  f.partition = partition;
  if (family_id == "band") {
    f.kind = NoiseKind::kBand;
    f.pass_lo_hz = 4000.0;
    f.pass_hi_hz = 5000.0;
  } else if (family_id == "tonal") {
    f.kind = NoiseKind::kTonal;
    f.pass_lo_hz = 5500.0;
    f.pass_hi_hz = 6500.0;
  } else if (family_id == "impulsive") {
    f.kind = NoiseKind::kImpulsive;
    f.pass_lo_hz = 6500.0;
    f.pass_hi_hz = 7500.0;
  } else {
    throw std::invalid_argument("unknown noise family: " + family_id);
  }
  return f;
}

SnrDistribution SnrDistribution::fixed(double snr_db) {
  SnrDistribution d;
  d.grid_db = {snr_db};
  return d;
}

SnrDistribution SnrDistribution::grid(std::vector<double> levels_db) {
  if (levels_db.empty()) throw std::invalid_argument("snr grid must be non-empty");
  SnrDistribution d;
  d.grid_db = std::move(levels_db);
  return d;
}

SnrDistribution SnrDistribution::range(double lo_db, double hi_db) {
  if (!(lo_db <= hi_db)) throw std::invalid_argument("snr range requires lo <= hi");
  SnrDistribution d;
  d.is_range = true;
  d.lo_db = lo_db;
  d.hi_db = hi_db;
  return d;
}

nlohmann::json SnrDistribution::to_json() const {
  if (is_range) return {{"lo_db", lo_db}, {"hi_db", hi_db}};
  nlohmann::json arr = nlohmann::json::array();
  for (double v : grid_db) arr.push_back(snr_value_to_json(v));
  return {{"grid_db", arr}};
}

SnrDistribution SnrDistribution::from_json(const nlohmann::json& j) {
  if (j.contains("grid_db")) {
    std::vector<double> g;
    for (const auto& v : j.at("grid_db")) g.push_back(snr_value_from_json(v));
    return grid(std::move(g));
  }
  return range(j.at("lo_db").get<double>(), j.at("hi_db").get<double>());
}

double draw_snr(const SnrDistribution& d, Rng& rng) {
  if (d.is_range) return rng.uniform(d.lo_db, d.hi_db);
  return d.grid_db[rng.uniform_int(d.grid_db.size())];
}

nlohmann::json RirPoolSpec::to_json() const {
  return {{"count", count},           {"rt60_lo_s", rt60_lo_s},   {"rt60_hi_s", rt60_hi_s},
          {"seed", seed},             {"floor_lo_m", floor_lo_m}, {"floor_hi_m", floor_hi_m},
          {"height_lo_m", height_lo_m}, {"height_hi_m", height_hi_m}, {"distance_m", distance_m}};
}

RirPoolSpec RirPoolSpec::from_json(const nlohmann::json& j) {
  RirPoolSpec s;
  s.count = j.at("count").get<int>();
  s.rt60_lo_s = j.at("rt60_lo_s").get<double>();
  s.rt60_hi_s = j.at("rt60_hi_s").get<double>();
  s.seed = j.at("seed").get<uint64_t>();
  s.floor_lo_m = j.at("floor_lo_m").get<double>();
  s.floor_hi_m = j.at("floor_hi_m").get<double>();
  s.height_lo_m = j.at("height_lo_m").get<double>();
  s.height_hi_m = j.at("height_hi_m").get<double>();
  s.distance_m = j.at("distance_m").get<double>();
  return s;
}

std::vector<Rir> materialize_rir_pool(const RirPoolSpec& spec, int sample_rate_hz) {
  if (spec.count < 1) throw std::invalid_argument("rir pool: count must be >= 1");
  std::vector<Rir> pool;
  pool.reserve(spec.count);
  for (int i = 0; i < spec.count; ++i) {
    bool done = false;
    for (uint64_t attempt = 0; attempt < 20 && !done; ++attempt) {
      const uint64_t sub = derive_stream(spec.seed, {kTagRirPool, static_cast<uint64_t>(i), attempt});
      Rng rng(sub);
      const std::array<double, 3> dims{rng.uniform(spec.floor_lo_m, spec.floor_hi_m),
                                       rng.uniform(spec.floor_lo_m, spec.floor_hi_m),
                                       rng.uniform(spec.height_lo_m, spec.height_hi_m)};
      const double target = rng.uniform(spec.rt60_lo_s, spec.rt60_hi_s);
      try {
        pool.push_back(generate_rir(dims, spec.distance_m, target, sub, sample_rate_hz));
        done = true;
      } catch (const std::invalid_argument&) {
        // redraw the geometry
      }
    }
    if (!done) throw std::runtime_error("rir pool: no feasible geometry after 20 attempts");
  }
  return pool;
}

CorruptionSpec CorruptionSpec::additive(const NoiseFamily& family, const SnrDistribution& snr) {
  CorruptionSpec s;
  s.kind = Kind::kAdditive;
  s.role = family.partition;
  s.noise = family;
  s.snr_db = snr;
  validate_spec(s);
  return s;
}

CorruptionSpec CorruptionSpec::noop(Partition role) {
  CorruptionSpec s;
  s.kind = Kind::kAdditive;
  s.role = role;
  s.snr_db = SnrDistribution::fixed(std::numeric_limits<double>::infinity());
  return s;
}

CorruptionSpec CorruptionSpec::reverb(const RirPoolSpec& pool, Partition role) {
  CorruptionSpec s;
  s.kind = Kind::kReverb;
  s.role = role;
  s.rir_pool_spec = pool;
  validate_spec(s);
  return s;
}

CorruptionSpec CorruptionSpec::reverb_with_pool(std::vector<Rir> pool, Partition role) {
  CorruptionSpec s;
  s.kind = Kind::kReverb;
  s.role = role;
  s.rir_pool = std::move(pool);
  validate_spec(s);
  return s;
}

CorruptionSpec CorruptionSpec::clip(const SnrDistribution& snr, Partition role) {
  CorruptionSpec s;
  s.kind = Kind::kClip;
  s.role = role;
  s.snr_db = snr;
  validate_spec(s);
  return s;
}

bool CorruptionSpec::is_noop() const {
  return kind == Kind::kAdditive && !noise.has_value() && !snr_db.is_range &&
         snr_db.grid_db.size() == 1 && std::isinf(snr_db.grid_db[0]) && snr_db.grid_db[0] > 0;
}

nlohmann::json CorruptionSpec::to_json() const {
  nlohmann::json j;
  j["role"] = to_string(role);
  switch (kind) {
    case Kind::kAdditive:
      j["kind"] = "additive";
      if (noise.has_value()) j["noise"] = noise->to_json();
      j["snr"] = snr_db.to_json();
      break;
    case Kind::kReverb:
      j["kind"] = "reverb";
      if (rir_pool_spec.count > 0) {
        j["rir_pool"] = rir_pool_spec.to_json();
      } else {
        j["explicit_pool"] = true;
      }
      j["align_direct_path"] = align_direct_path;
      break;
    case Kind::kClip:
      j["kind"] = "clip";
      j["snr"] = snr_db.to_json();
      break;
  }
  return j;
}

CorruptionSpec CorruptionSpec::from_json(const nlohmann::json& j) {
  CorruptionSpec s;
  s.role = partition_from_string(j.at("role").get<std::string>());
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "additive") {
    s.kind = Kind::kAdditive;
    if (j.contains("noise")) s.noise = NoiseFamily::from_json(j.at("noise"));
    s.snr_db = SnrDistribution::from_json(j.at("snr"));
  } else if (kind == "reverb") {
    s.kind = Kind::kReverb;
    if (j.contains("explicit_pool")) {
      throw std::invalid_argument("corruption spec: explicit RIR pools cannot be rebuilt");
    }
    s.rir_pool_spec = RirPoolSpec::from_json(j.at("rir_pool"));
    s.align_direct_path = j.at("align_direct_path").get<bool>();
  } else if (kind == "clip") {
    s.kind = Kind::kClip;
    s.snr_db = SnrDistribution::from_json(j.at("snr"));
  } else {
    throw std::invalid_argument("corruption spec: unknown kind " + kind);
  }
  validate_spec(s);
  return s;
}

void validate_spec(const CorruptionSpec& spec) {
  const bool snr_ok = spec.snr_db.is_range ? spec.snr_db.lo_db <= spec.snr_db.hi_db
                                           : !spec.snr_db.grid_db.empty();
  switch (spec.kind) {
    case CorruptionSpec::Kind::kAdditive:
      if (spec.is_noop()) return;
      if (!spec.noise.has_value()) {
        throw std::invalid_argument("additive corruption requires a noise family");
      }
      if (spec.noise->partition != spec.role) {
        throw std::invalid_argument("additive corruption: family partition must match spec role");
      }
      if (!(spec.noise->pass_lo_hz < spec.noise->pass_hi_hz)) {
        throw std::invalid_argument("noise family passband is empty");
      }
      if (!snr_ok) throw std::invalid_argument("additive corruption: invalid snr distribution");
      break;
    case CorruptionSpec::Kind::kReverb:
      if (spec.rir_pool.empty() && spec.rir_pool_spec.count < 1) {
        throw std::invalid_argument("reverb corruption requires an RIR pool");
      }
      break;
    case CorruptionSpec::Kind::kClip:
      if (!snr_ok) throw std::invalid_argument("clip corruption: invalid snr distribution");
      break;
  }
}

void prepare_spec(CorruptionSpec& spec, int sample_rate_hz) {
  validate_spec(spec);
  if (spec.kind == CorruptionSpec::Kind::kReverb && spec.rir_pool.empty()) {
    spec.rir_pool = materialize_rir_pool(spec.rir_pool_spec, sample_rate_hz);
  }
}

uint64_t noise_stream_id(const NoiseFamily& family, uint64_t seed, uint64_t item_index) {
  return derive_stream(seed, {kTagNoise, static_cast<uint64_t>(family.kind),
                              static_cast<uint64_t>(family.partition), item_index});
}

Waveform generate_noise(const NoiseFamily& family, double duration_s, uint64_t seed,
                        uint64_t item_index, int sample_rate_hz) {
  if (duration_s <= 0.0) throw std::invalid_argument("generate_noise: non-positive duration");
  const int n = static_cast<int>(std::lround(duration_s * sample_rate_hz));
  if (n < 16) throw std::invalid_argument("generate_noise: duration too short");
  Rng rng(noise_stream_id(family, seed, item_index));

  Waveform out = zeros(static_cast<size_t>(n), sample_rate_hz);
  switch (family.kind) {
    case NoiseKind::kBand: {
      // White gaussian spectrum restricted to the passband, back to time.
      const int n_fft = next_pow2(n);
      std::vector<std::complex<double>> half(n_fft / 2 + 1, {0.0, 0.0});
      const double hz_per_bin = static_cast<double>(sample_rate_hz) / n_fft;
      for (int k = 1; k < n_fft / 2; ++k) {
        const double f = k * hz_per_bin;
        if (f >= family.pass_lo_hz && f < family.pass_hi_hz) {
          half[k] = {rng.gaussian(), rng.gaussian()};
        }
      }
      const std::vector<double> t = irfft(half, n_fft);
      std::copy(t.begin(), t.begin() + n, out.samples.begin());
      break;
    }
    case NoiseKind::kTonal: {
      const int n_tones = 8;
      // Margin keeps spectral leakage of each tone inside the passband.
      const double lo = family.pass_lo_hz + 80.0;
      const double hi = family.pass_hi_hz - 80.0;
      std::vector<double> freq(n_tones), phase(n_tones), amp(n_tones);
      for (int j = 0; j < n_tones; ++j) {
        freq[j] = rng.uniform(lo, hi);
        phase[j] = rng.uniform(0.0, 2.0 * M_PI);
        amp[j] = rng.uniform(0.7, 1.3);
      }
      const int ramp = static_cast<int>(0.010 * sample_rate_hz);
      for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / sample_rate_hz;
        double v = 0.0;
        for (int j = 0; j < n_tones; ++j) v += amp[j] * std::sin(2.0 * M_PI * freq[j] * t + phase[j]);
        double env = 1.0;
        if (i < ramp) env = 0.5 - 0.5 * std::cos(M_PI * i / ramp);
        if (n - 1 - i < ramp) env = std::min(env, 0.5 - 0.5 * std::cos(M_PI * (n - 1 - i) / ramp));
        out.samples[i] = env * v;
      }
      break;
    }
    case NoiseKind::kImpulsive: {
      const double center = 0.5 * (family.pass_lo_hz + family.pass_hi_hz);
      const int n_events = std::max(1, static_cast<int>(std::lround(duration_s * rng.uniform(4.0, 7.0))));
      const int attack = std::max(1, static_cast<int>(0.002 * sample_rate_hz));
      for (int e = 0; e < n_events; ++e) {
        const int start = static_cast<int>(rng.uniform(0.0, std::max(1.0, n - 0.05 * sample_rate_hz)));
        const double carrier = rng.uniform(center - 100.0, center + 100.0);
        const double tau = rng.uniform(0.010, 0.020);
        const double amp = rng.uniform(0.5, 1.0);
        const double ph = rng.uniform(0.0, 2.0 * M_PI);
        const int len = std::min(n - start, static_cast<int>(std::lround(8.0 * tau * sample_rate_hz)));
        for (int i = 0; i < len; ++i) {
          const double t = static_cast<double>(i) / sample_rate_hz;
          double env = std::exp(-t / tau);
          if (i < attack) env *= 0.5 - 0.5 * std::cos(M_PI * i / attack);
          out.samples[start + i] += amp * env * std::sin(2.0 * M_PI * carrier * t + ph);
        }
      }
      break;
    }
  }
  normalize_rms(out, kNoiseRms);
  return out;
}

std::vector<Waveform> generate_clean_corpus(int n_items, double duration_s, uint64_t seed,
                                            int sample_rate_hz) {
  if (n_items < 1) throw std::invalid_argument("generate_clean_corpus: n_items must be >= 1");
  if (duration_s <= 0.0) throw std::invalid_argument("generate_clean_corpus: non-positive duration");
  const int n = static_cast<int>(std::lround(duration_s * sample_rate_hz));

  std::vector<Waveform> corpus;
  corpus.reserve(n_items);
  for (int item = 0; item < n_items; ++item) {
    Rng rng(derive_stream(seed, {kTagClean, static_cast<uint64_t>(item)}));
    const double f0 = rng.uniform(120.0, 280.0);
    const double vib_rate = rng.uniform(4.0, 7.0);
    const double vib_depth = rng.uniform(0.01, 0.04);
    const double vib_phase = rng.uniform(0.0, 2.0 * M_PI);
    // Highest harmonic stays under 3 kHz even at the vibrato peak.
    const int n_harm = std::max(1, static_cast<int>(3000.0 / (f0 * (1.0 + vib_depth))));
    std::vector<double> hphase(n_harm);
    for (int k = 0; k < n_harm; ++k) hphase[k] = rng.uniform(0.0, 2.0 * M_PI);

    // Syllable gate: tone bursts with raised-cosine edges and silent gaps.
    std::vector<double> env(n, 0.0);
    const int ramp = static_cast<int>(0.015 * sample_rate_hz);
    int pos = 0;
    while (pos < n) {
      const int on = static_cast<int>(rng.uniform(0.12, 0.30) * sample_rate_hz);
      const int gap = static_cast<int>(rng.uniform(0.06, 0.18) * sample_rate_hz);
      for (int j = 0; j < on && pos + j < n; ++j) {
        double s = 1.0;
        if (j < ramp) s = 0.5 - 0.5 * std::cos(M_PI * j / ramp);
        if (on - 1 - j < ramp) s = std::min(s, 0.5 - 0.5 * std::cos(M_PI * (on - 1 - j) / ramp));
        env[pos + j] = s;
      }
      pos += on + gap;
    }

    Waveform w = zeros(static_cast<size_t>(n), sample_rate_hz);
    double ph = 0.0;
    for (int i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / sample_rate_hz;
      const double f_t = f0 * (1.0 + vib_depth * std::sin(2.0 * M_PI * vib_rate * t + vib_phase));
      ph += 2.0 * M_PI * f_t / sample_rate_hz;
      if (env[i] == 0.0) continue;
      double v = 0.0;
      for (int k = 1; k <= n_harm; ++k) v += std::sin(k * ph + hphase[k - 1]) / k;
      w.samples[i] = env[i] * v;
    }
    normalize_rms(w, kCleanRms);
    corpus.push_back(std::move(w));
  }
  return corpus;
}

CorruptResult corrupt(const Waveform& s, const CorruptionSpec& spec, uint64_t seed,
                      uint64_t item_index) {
  check_waveform(s);
  validate_spec(spec);
  Rng rng(derive_stream(seed, {kTagCorrupt, static_cast<uint64_t>(spec.kind),
                               static_cast<uint64_t>(spec.role), item_index}));
  CorruptResult out;
  switch (spec.kind) {
    case CorruptionSpec::Kind::kAdditive: {
      if (spec.is_noop()) {
        out.corrupted = s;
        out.params_drawn = {{"kind", "noop"}};
        return out;
      }
      const double snr = draw_snr(spec.snr_db, rng);
      if (std::isinf(snr) && snr > 0) {
        out.corrupted = s;
        out.params_drawn = {{"kind", "additive"}, {"snr_db", "inf"}, {"gain", 0.0},
                            {"family", spec.noise->family_id},
                            {"partition", to_string(spec.noise->partition)}};
        return out;
      }
      const Waveform noise = generate_noise(*spec.noise, s.duration_s(), seed, item_index,
                                            s.sample_rate_hz);
      const MixResult mix = mix_at_snr(s, noise, snr);
      out.corrupted = mix.mixture;
      out.params_drawn = {{"kind", "additive"},
                          {"snr_db", snr},
                          {"gain", mix.gain},
                          {"family", spec.noise->family_id},
                          {"partition", to_string(spec.noise->partition)},
                          {"noise_stream", noise_stream_id(*spec.noise, seed, item_index)}};
      return out;
    }
    case CorruptionSpec::Kind::kReverb: {
      if (spec.rir_pool.empty()) {
        throw std::logic_error("corrupt: reverb spec not prepared (empty RIR pool)");
      }
      const size_t idx = rng.uniform_int(spec.rir_pool.size());
      const Rir& r = spec.rir_pool[idx];
      int lag = 0;
      for (size_t i = 0; i < r.taps.samples.size(); ++i) {
        if (std::abs(r.taps.samples[i]) > std::abs(r.taps.samples[lag])) lag = static_cast<int>(i);
      }
      if (spec.align_direct_path && lag > 0) {
        // Convolve a zero-padded copy and drop the direct-path delay so the
        // output lines up with the input for sample-aligned losses.
        Waveform padded = s;
        padded.samples.resize(s.samples.size() + lag, 0.0);
        const Waveform full = convolve_rir(padded, r.taps);
        out.corrupted.sample_rate_hz = s.sample_rate_hz;
        out.corrupted.samples.assign(full.samples.begin() + lag, full.samples.end());
      } else {
        out.corrupted = convolve_rir(s, r.taps);
        lag = 0;
      }
      out.params_drawn = {{"kind", "reverb"},
                          {"rir_index", idx},
                          {"rt60_s", r.rt60_s},
                          {"align_lag", lag}};
      return out;
    }
    case CorruptionSpec::Kind::kClip: {
      const double snr = draw_snr(spec.snr_db, rng);
      if (std::isinf(snr) && snr > 0) {
        out.corrupted = s;
        out.params_drawn = {{"kind", "clip"}, {"snr_db", "inf"}, {"threshold", peak_abs(s)},
                            {"saturated", true}};
        return out;
      }
      const ClipThreshold th = clip_threshold_for_snr(s, snr);
      out.corrupted = clip(s, th.c);
      out.params_drawn = {{"kind", "clip"},
                          {"snr_db", snr},
                          {"threshold", th.c},
                          {"saturated", th.saturated}};
      return out;
    }
  }
  throw std::logic_error("corrupt: unreachable");
}

double band_energy(const Waveform& w, double lo_hz, double hi_hz) {
  check_waveform(w);
  if (!(lo_hz < hi_hz)) throw std::invalid_argument("band_energy: requires lo < hi");
  const int n = static_cast<int>(w.samples.size());
  const int n_fft = next_pow2(n);
  const auto half = rfft(w.samples, n_fft);
  const double hz_per_bin = static_cast<double>(w.sample_rate_hz) / n_fft;
  double e = 0.0;
  for (int k = 0; k <= n_fft / 2; ++k) {
    const double f = k * hz_per_bin;
    if (f < lo_hz || f >= hi_hz) continue;
    const double weight = (k == 0 || k == n_fft / 2) ? 1.0 : 2.0;
    e += weight * std::norm(half[k]);
  }
  return e / n_fft;
}

nlohmann::json DatasetManifest::to_json() const {
  nlohmann::json items_json = nlohmann::json::array();
  for (const auto& it : items) {
    items_json.push_back({{"item_id", it.item_id},
                          {"clean_path", it.clean_path},
                          {"target_path", it.target_path},
                          {"params", it.params_drawn}});
  }
  return {{"format", "nytt-dataset-manifest-v1"},
          {"global_seed", global_seed},
          {"sample_rate_hz", sample_rate_hz},
          {"spec", spec},
          {"items", items_json}};
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j) {
  if (j.at("format").get<std::string>() != "nytt-dataset-manifest-v1") {
    throw std::invalid_argument("manifest: unknown format");
  }
  DatasetManifest m;
  m.global_seed = j.at("global_seed").get<uint64_t>();
  m.sample_rate_hz = j.at("sample_rate_hz").get<int>();
  m.spec = j.at("spec");
  for (const auto& it : j.at("items")) {
    m.items.push_back({it.at("item_id").get<std::string>(),
                       it.at("clean_path").get<std::string>(),
                       it.at("target_path").get<std::string>(), it.at("params")});
  }
  return m;
}

void DatasetManifest::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("manifest: cannot write " + path);
  out << to_json().dump(2) << "\n";
}

DatasetManifest DatasetManifest::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("manifest: cannot read " + path);
  nlohmann::json j;
  in >> j;
  return from_json(j);
}

Dataset build_dataset(const std::vector<Waveform>& clean, const CorruptionSpec& obs_spec,
                      uint64_t seed) {
  if (clean.empty()) throw std::invalid_argument("build_dataset: empty corpus");
  Dataset ds;
  ds.clean = clean;
  CorruptionSpec spec = obs_spec;
  prepare_spec(spec, clean.front().sample_rate_hz);
  ds.manifest.global_seed = seed;
  ds.manifest.sample_rate_hz = clean.front().sample_rate_hz;
  ds.manifest.spec = spec.to_json();
  ds.targets.reserve(clean.size());
  for (size_t i = 0; i < clean.size(); ++i) {
    CorruptResult res = corrupt(clean[i], spec, seed, i);
    std::ostringstream id;
    id << "item_" << std::setw(5) << std::setfill('0') << i;
    ds.manifest.items.push_back({id.str(), "", "", res.params_drawn});
    ds.targets.push_back(std::move(res.corrupted));
  }
  return ds;
}

std::vector<Waveform> replay_dataset(const DatasetManifest& manifest,
                                     const std::vector<Waveform>& clean) {
  if (clean.size() != manifest.items.size()) {
    throw std::invalid_argument("replay_dataset: corpus size does not match manifest");
  }
  CorruptionSpec spec = CorruptionSpec::from_json(manifest.spec);
  prepare_spec(spec, manifest.sample_rate_hz);
  std::vector<Waveform> targets;
  targets.reserve(clean.size());
  for (size_t i = 0; i < clean.size(); ++i) {
    targets.push_back(corrupt(clean[i], spec, manifest.global_seed, i).corrupted);
  }
  return targets;
}

}  // namespace nytt
