// Copyright 2026 NyTT-desk Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "nytt/wave.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace nytt {

void check_waveform(const Waveform& w) {
  if (w.sample_rate_hz <= 0) throw std::invalid_argument("waveform: sample rate must be positive");
  if (w.samples.empty()) throw std::invalid_argument("waveform: length must be >= 1");
  for (double s : w.samples) {
    if (!std::isfinite(s)) throw std::invalid_argument("waveform: non-finite sample");
  }
}

double energy(const Waveform& w) {
  double e = 0.0;
  for (double s : w.samples) e += s * s;
  return e;
}

double rms(const Waveform& w) {
  if (w.samples.empty()) return 0.0;
  return std::sqrt(energy(w) / w.samples.size());
}

double peak_abs(const Waveform& w) {
  double p = 0.0;
  for (double s : w.samples) p = std::max(p, std::fabs(s));
  return p;
}

Waveform zeros_like(const Waveform& w) {
  return Waveform(std::vector<double>(w.samples.size(), 0.0), w.sample_rate_hz);
}

Waveform zeros(size_t n, int sample_rate_hz) {
  return Waveform(std::vector<double>(n, 0.0), sample_rate_hz);
}

namespace {
void check_pair(const Waveform& a, const Waveform& b) {
  if (a.samples.size() != b.samples.size())
    throw std::invalid_argument("waveform: length mismatch");
  if (a.sample_rate_hz != b.sample_rate_hz)
    throw std::invalid_argument("waveform: sample rate mismatch");
}
}  // namespace

Waveform add(const Waveform& a, const Waveform& b) {
  check_pair(a, b);
  Waveform out = a;
  for (size_t i = 0; i < out.samples.size(); ++i) out.samples[i] += b.samples[i];
  return out;
}

Waveform sub(const Waveform& a, const Waveform& b) {
  check_pair(a, b);
  Waveform out = a;
  for (size_t i = 0; i < out.samples.size(); ++i) out.samples[i] -= b.samples[i];
  return out;
}

Waveform scale(const Waveform& a, double g) {
  Waveform out = a;
  for (double& s : out.samples) s *= g;
  return out;
}

namespace {

void put_u32(std::ostream& os, uint32_t v) {
  char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
  os.write(b, 4);
}

void put_u16(std::ostream& os, uint16_t v) {
  char b[2] = {char(v & 0xff), char((v >> 8) & 0xff)};
  os.write(b, 2);
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) | (uint32_t(b[3]) << 24);
}

uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return uint16_t(b[0]) | (uint16_t(b[1]) << 8);
}

}  // namespace

void write_wav(const std::string& path, const Waveform& w) {
  check_waveform(w);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_wav: cannot open " + path);

  const uint32_t n = static_cast<uint32_t>(w.samples.size());
  const uint32_t data_bytes = n * 2;
  const uint32_t rate = static_cast<uint32_t>(w.sample_rate_hz);

  os.write("RIFF", 4);
  put_u32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  put_u32(os, 16);
  put_u16(os, 1);   // PCM
  put_u16(os, 1);   // mono
  put_u32(os, rate);
  put_u32(os, rate * 2);
  put_u16(os, 2);   // block align
  put_u16(os, 16);  // bits
  os.write("data", 4);
  put_u32(os, data_bytes);

  for (double s : w.samples) {
    double c = std::clamp(s, -1.0, 1.0);
    int v = static_cast<int>(std::lround(c * 32767.0));
    v = std::clamp(v, -32768, 32767);
    put_u16(os, static_cast<uint16_t>(static_cast<int16_t>(v)));
  }
  if (!os) throw std::runtime_error("write_wav: short write to " + path);
}

Waveform read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_wav: cannot open " + path);

  char tag[4];
  is.read(tag, 4);
  if (std::memcmp(tag, "RIFF", 4) != 0) throw std::runtime_error("read_wav: not a RIFF file");
  get_u32(is);
  is.read(tag, 4);
  if (std::memcmp(tag, "WAVE", 4) != 0) throw std::runtime_error("read_wav: not a WAVE file");

  uint16_t channels = 0, bits = 0;
  uint32_t rate = 0;
  std::vector<double> samples;
  bool got_fmt = false, got_data = false;

  while (is && !(got_fmt && got_data)) {
    is.read(tag, 4);
    if (!is) break;
    uint32_t chunk = get_u32(is);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      uint16_t fmt = get_u16(is);
      channels = get_u16(is);
      rate = get_u32(is);
      get_u32(is);
      get_u16(is);
      bits = get_u16(is);
      if (chunk > 16) is.ignore(chunk - 16);
      if (fmt != 1 || channels != 1 || bits != 16)
        throw std::runtime_error("read_wav: only 16-bit PCM mono is supported");
      got_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!got_fmt) throw std::runtime_error("read_wav: data chunk before fmt");
      uint32_t n = chunk / 2;
      samples.resize(n);
      for (uint32_t i = 0; i < n; ++i) {
        int16_t v = static_cast<int16_t>(get_u16(is));
        samples[i] = static_cast<double>(v) / 32767.0;
      }
      got_data = true;
    } else {
      is.ignore(chunk + (chunk & 1));
    }
  }
  if (!got_data) throw std::runtime_error("read_wav: no data chunk in " + path);
  return Waveform(std::move(samples), static_cast<int>(rate));
}

}  // namespace nytt
