// Copyright 2026 NyTT-desk Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NYTT_RNG_H_
#define NYTT_RNG_H_

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace nytt {

// splitmix64 finalizer; used to derive independent substream ids from a
// global seed plus a structured path (domain tag, family, partition, item).
inline uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t derive_stream(uint64_t seed, std::initializer_list<uint64_t> path) {
  uint64_t s = mix64(seed);
  for (uint64_t p : path) s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
  return s;
}

// Deterministic generator. Distribution helpers are implemented by hand so
// draws do not depend on the standard library's distribution internals.
class Rng {
 public:
  explicit Rng(uint64_t stream_id) : stream_id_(stream_id), eng_(stream_id) {}

  uint64_t stream_id() const { return stream_id_; }

  uint64_t next_u64() { return eng_(); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  uint64_t uniform_int(uint64_t n) {
    // modulo bias is irrelevant at the sizes used here
    return eng_() % n;
  }

  // standard normal via Box-Muller
  double gaussian() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

  template <typename T>
  const T& pick(const std::vector<T>& items) {
    return items[uniform_int(items.size())];
  }

 private:
  uint64_t stream_id_;
  std::mt19937_64 eng_;
};

}  // namespace nytt

#endif  // NYTT_RNG_H_
