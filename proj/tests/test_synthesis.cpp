// Copyright 2026 NyTT-desk Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include "nytt/dsp.h"
#include "nytt/synthesis.h"
#include "nytt/wave.h"

using namespace nytt;

namespace {

double crest_factor(const Waveform& w) { return peak_abs(w) / rms(w); }

bool same_samples(const Waveform& a, const Waveform& b) {
  if (a.samples.size() != b.samples.size()) return false;
  for (size_t i = 0; i < a.samples.size(); ++i) {
    if (a.samples[i] != b.samples[i]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("clean corpus shape, level, and determinism") {
  const auto corpus = generate_clean_corpus(200, 2.0, 11);
  REQUIRE(corpus.size() == 200);
  for (const auto& w : corpus) {
    CHECK(w.samples.size() == 32000);
    CHECK(rms(w) == doctest::Approx(0.1).epsilon(1e-9));
  }
  const auto again = generate_clean_corpus(3, 2.0, 11);
  for (int i = 0; i < 3; ++i) CHECK(same_samples(corpus[i], again[i]));
  const auto other = generate_clean_corpus(1, 2.0, 12);
  CHECK(!same_samples(corpus[0], other[0]));
}

TEST_CASE("clean corpus keeps 20 dB of clearance over every noise passband") {
  const auto corpus = generate_clean_corpus(6, 2.0, 5);
  for (const auto& w : corpus) {
    const double support = band_energy(w, 0.0, 3400.0);
    for (const char* fam : {"band", "tonal", "impulsive"}) {
      const NoiseFamily f = make_noise_family(fam, Partition::kObs);
      const double inside = band_energy(w, f.pass_lo_hz, f.pass_hi_hz);
      CHECK(10.0 * std::log10(support / inside) >= 20.0);
    }
  }
}

TEST_CASE("noise families concentrate energy in their passbands") {
  for (const char* fam : {"band", "tonal", "impulsive"}) {
    const NoiseFamily f = make_noise_family(fam, Partition::kObs);
    for (uint64_t item = 0; item < 3; ++item) {
      const Waveform w = generate_noise(f, 2.0, 17, item);
      const double frac = band_energy(w, f.pass_lo_hz, f.pass_hi_hz) / energy(w);
      CHECK(frac >= 0.9);
    }
  }
}

TEST_CASE("distinct families overlap by less than 10 percent") {
  const char* fams[] = {"band", "tonal", "impulsive"};
  for (const char* a : fams) {
    const NoiseFamily fa = make_noise_family(a, Partition::kObs);
    const Waveform w = generate_noise(fa, 2.0, 23);
    for (const char* b : fams) {
      if (std::string(a) == b) continue;
      const NoiseFamily fb = make_noise_family(b, Partition::kObs);
      CHECK(band_energy(w, fb.pass_lo_hz, fb.pass_hi_hz) / energy(w) < 0.1);
    }
  }
}

TEST_CASE("impulsive crest factor exceeds tonal crest factor") {
  const NoiseFamily imp = make_noise_family("impulsive", Partition::kObs);
  const NoiseFamily ton = make_noise_family("tonal", Partition::kObs);
  double min_imp = 1e300;
  double max_ton = 0.0;
  for (uint64_t item = 0; item < 5; ++item) {
    min_imp = std::min(min_imp, crest_factor(generate_noise(imp, 2.0, 31, item)));
    max_ton = std::max(max_ton, crest_factor(generate_noise(ton, 2.0, 31, item)));
  }
  CHECK(min_imp > max_ton);
}

TEST_CASE("noise determinism and partition stream disjointness") {
  const NoiseFamily f = make_noise_family("band", Partition::kAdd);
  CHECK(same_samples(generate_noise(f, 1.0, 9, 4), generate_noise(f, 1.0, 9, 4)));

  std::set<uint64_t> ids;
  int total = 0;
  for (Partition p : {Partition::kObs, Partition::kAdd, Partition::kTest}) {
    const NoiseFamily fp = make_noise_family("band", p);
    for (uint64_t item = 0; item < 50; ++item) {
      ids.insert(noise_stream_id(fp, 9, item));
      ++total;
    }
  }
  CHECK(static_cast<int>(ids.size()) == total);

  const NoiseFamily obs = make_noise_family("band", Partition::kObs);
  const NoiseFamily add = make_noise_family("band", Partition::kAdd);
  CHECK(!same_samples(generate_noise(obs, 1.0, 9, 0), generate_noise(add, 1.0, 9, 0)));
}

TEST_CASE("additive corruption hits the requested snr exactly") {
  const auto clean = generate_clean_corpus(1, 1.0, 3);
  const auto spec = CorruptionSpec::additive(make_noise_family("band", Partition::kObs),
                                             SnrDistribution::fixed(5.0));
  const CorruptResult res = corrupt(clean[0], spec, 77, 0);
  const Waveform noise_part = sub(res.corrupted, clean[0]);
  CHECK(measured_snr_db(clean[0], noise_part) == doctest::Approx(5.0).epsilon(1e-6));
  CHECK(res.params_drawn.at("snr_db").get<double>() == 5.0);
  CHECK(res.params_drawn.at("family").get<std::string>() == "band");
}

TEST_CASE("identity rir pool leaves the signal unchanged") {
  const auto clean = generate_clean_corpus(1, 1.0, 3);
  Rir identity;
  identity.taps = Waveform({1.0}, 16000);
  identity.rt60_s = 1e-4;
  const auto spec = CorruptionSpec::reverb_with_pool({identity}, Partition::kObs);
  const CorruptResult res = corrupt(clean[0], spec, 5, 0);
  CHECK(same_samples(res.corrupted, clean[0]));
}

TEST_CASE("clip corruption composes into the smaller threshold") {
  const auto clean = generate_clean_corpus(1, 1.0, 3);
  const auto spec3 = CorruptionSpec::clip(SnrDistribution::fixed(3.0), Partition::kObs);
  const auto spec1 = CorruptionSpec::clip(SnrDistribution::fixed(1.0), Partition::kAdd);
  const CorruptResult first = corrupt(clean[0], spec3, 21, 0);
  const CorruptResult second = corrupt(first.corrupted, spec1, 21, 0);
  const double c3 = first.params_drawn.at("threshold").get<double>();
  const double c1 = second.params_drawn.at("threshold").get<double>();
  CHECK(peak_abs(second.corrupted) <= c3 + 1e-12);
  CHECK(peak_abs(second.corrupted) <= c1 + 1e-12);
}

TEST_CASE("noop spec and corrupt determinism") {
  const auto clean = generate_clean_corpus(1, 1.0, 3);
  const auto noop = CorruptionSpec::noop();
  CHECK(same_samples(corrupt(clean[0], noop, 1, 0).corrupted, clean[0]));

  const auto spec = CorruptionSpec::additive(make_noise_family("tonal", Partition::kObs),
                                             SnrDistribution::range(0.0, 10.0));
  const CorruptResult a = corrupt(clean[0], spec, 55, 7);
  const CorruptResult b = corrupt(clean[0], spec, 55, 7);
  CHECK(same_samples(a.corrupted, b.corrupted));
  CHECK(a.params_drawn == b.params_drawn);

  auto add_spec = spec;
  add_spec.role = Partition::kAdd;
  add_spec.noise->partition = Partition::kAdd;
  const CorruptResult c = corrupt(clean[0], add_spec, 55, 7);
  CHECK(!same_samples(a.corrupted, c.corrupted));
}

TEST_CASE("corruption spec json round-trips") {
  const auto spec = CorruptionSpec::additive(make_noise_family("band", Partition::kObs),
                                             SnrDistribution::grid({0.0, 5.0, 10.0, 15.0}));
  const auto j = spec.to_json();
  CHECK(CorruptionSpec::from_json(j).to_json() == j);

  RirPoolSpec pool;
  pool.count = 2;
  pool.rt60_lo_s = 0.2;
  pool.rt60_hi_s = 0.5;
  pool.seed = 4;
  const auto rspec = CorruptionSpec::reverb(pool, Partition::kAdd);
  CHECK(CorruptionSpec::from_json(rspec.to_json()).to_json() == rspec.to_json());

  CHECK_THROWS_AS(
      CorruptionSpec::additive(make_noise_family("band", Partition::kObs), SnrDistribution()),
      std::invalid_argument);
}

TEST_CASE("snr grid draws cover every level with multinomial counts") {
  const auto clean = generate_clean_corpus(400, 1.0, 19);
  const auto spec = CorruptionSpec::additive(make_noise_family("band", Partition::kObs),
                                             SnrDistribution::grid({0.0, 5.0, 10.0, 15.0}));
  const Dataset ds = build_dataset(clean, spec, 101);
  REQUIRE(ds.targets.size() == 400);
  std::map<double, int> counts;
  for (const auto& it : ds.manifest.items) counts[it.params_drawn.at("snr_db").get<double>()]++;
  REQUIRE(counts.size() == 4);
  for (const auto& [level, count] : counts) {
    (void)level;
    CHECK(count >= 70);
    CHECK(count <= 130);
  }
}

TEST_CASE("noop dataset reproduces the clean corpus") {
  const auto clean = generate_clean_corpus(4, 1.0, 29);
  const Dataset ds = build_dataset(clean, CorruptionSpec::noop(), 1);
  for (size_t i = 0; i < clean.size(); ++i) CHECK(same_samples(ds.targets[i], clean[i]));
}

TEST_CASE("manifest replay is byte-identical") {
  const auto clean = generate_clean_corpus(6, 1.0, 41);
  const auto spec = CorruptionSpec::additive(make_noise_family("impulsive", Partition::kObs),
                                             SnrDistribution::grid({0.0, 5.0, 10.0, 15.0}));
  const Dataset ds = build_dataset(clean, spec, 202);

  const std::string path = "manifest_test.json";
  ds.manifest.save(path);
  const DatasetManifest loaded = DatasetManifest::load(path);
  const auto replayed = replay_dataset(loaded, clean);
  REQUIRE(replayed.size() == ds.targets.size());
  for (size_t i = 0; i < replayed.size(); ++i) CHECK(same_samples(replayed[i], ds.targets[i]));

  // Byte-level check through the WAV writer.
  write_wav("replay_a.wav", ds.targets[0]);
  write_wav("replay_b.wav", replayed[0]);
  std::ifstream fa("replay_a.wav", std::ios::binary);
  std::ifstream fb("replay_b.wav", std::ios::binary);
  const std::string ba((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  const std::string bb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  CHECK(ba == bb);
  std::remove(path.c_str());
  std::remove("replay_a.wav");
  std::remove("replay_b.wav");
}

TEST_CASE("reverb dataset replays through the declarative pool") {
  const auto clean = generate_clean_corpus(2, 1.0, 43);
  RirPoolSpec pool;
  pool.count = 2;
  pool.rt60_lo_s = 0.25;
  pool.rt60_hi_s = 0.35;
  pool.seed = 8;
  pool.floor_lo_m = 4.0;
  pool.floor_hi_m = 6.0;
  const auto spec = CorruptionSpec::reverb(pool, Partition::kObs);
  const Dataset ds = build_dataset(clean, spec, 303);
  const auto replayed = replay_dataset(ds.manifest, clean);
  for (size_t i = 0; i < replayed.size(); ++i) CHECK(same_samples(replayed[i], ds.targets[i]));
  for (const auto& it : ds.manifest.items) {
    const double rt = it.params_drawn.at("rt60_s").get<double>();
    CHECK(rt >= 0.2);
    CHECK(rt <= 0.45);
  }
}
