// Copyright 2026 NyTT-desk Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "nytt/model.h"

#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "nytt/rng.h"

namespace nytt {

namespace {

constexpr double kFeatureEps = 1e-8;
constexpr uint64_t kTagModel = 0x30DE1ULL;

Eigen::MatrixXd random_init(int rows, int cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  const double scal = 1.0 / std::sqrt(static_cast<double>(cols));
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = scal * rng.gaussian();
  }
  return m;
}

}  // namespace

std::string to_string(ArchKind k) {
  switch (k) {
    case ArchKind::kComplexMask: return "complex-mask";
    case ArchKind::kRealMask: return "real-mask";
    case ArchKind::kWaveform: return "waveform";
  }
  throw std::logic_error("unknown arch kind");
}

ArchKind arch_from_string(const std::string& s) {
  if (s == "complex-mask") return ArchKind::kComplexMask;
  if (s == "real-mask") return ArchKind::kRealMask;
  if (s == "waveform") return ArchKind::kWaveform;
  throw std::invalid_argument("unknown arch kind: " + s);
}

nlohmann::json ModelConfig::to_json() const {
  return {{"kind", to_string(kind)},
          {"stft",
           {{"window_size", stft.window_size},
            {"hop_size", stft.hop_size},
            {"fft_size", stft.fft_size},
            {"window", to_string(stft.window)}}},
          {"context", context},
          {"hidden", hidden},
          {"channels1", channels1},
          {"channels2", channels2},
          {"kernel", kernel},
          {"stride", stride},
          {"outputs", outputs},
          {"init_seed", init_seed}};
}

// Missing keys keep the struct defaults, so hand-written configs can stay
// minimal while to_json round trips remain exact.
ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.kind = arch_from_string(j.at("kind").get<std::string>());
  if (j.contains("stft")) {
    const auto& s = j.at("stft");
    c.stft.window_size = s.value("window_size", c.stft.window_size);
    c.stft.hop_size = s.value("hop_size", c.stft.hop_size);
    c.stft.fft_size = s.value("fft_size", c.stft.fft_size);
    if (s.contains("window"))
      c.stft.window = window_kind_from_string(s.at("window").get<std::string>());
  }
  c.context = j.value("context", c.context);
  c.hidden = j.value("hidden", c.hidden);
  c.channels1 = j.value("channels1", c.channels1);
  c.channels2 = j.value("channels2", c.channels2);
  c.kernel = j.value("kernel", c.kernel);
  c.stride = j.value("stride", c.stride);
  c.outputs = j.value("outputs", c.outputs);
  c.init_seed = j.value("init_seed", c.init_seed);
  return c;
}

EnhancerModel::EnhancerModel(const ModelConfig& cfg) : cfg_(cfg) {
  if (cfg_.kind != ArchKind::kWaveform && cfg_.outputs != 1) {
    throw std::invalid_argument("model: multiple outputs require the waveform kind");
  }
  if (cfg_.hidden < 1 || cfg_.hidden > 256) {
    throw std::invalid_argument("model: hidden width must be in [1, 256]");
  }
  if (cfg_.context < 0 || cfg_.outputs < 1) throw std::invalid_argument("model: bad config");
  Rng rng(derive_stream(cfg_.init_seed, {kTagModel, static_cast<uint64_t>(cfg_.kind)}));

  auto push = [&](const std::string& name, Eigen::MatrixXd m) {
    names_.push_back(name);
    params_.push_back(std::move(m));
  };

  if (cfg_.kind == ArchKind::kWaveform) {
    const int k = cfg_.kernel;
    push("enc1_w", random_init(cfg_.channels1, 1 * k, rng));
    push("enc1_b", Eigen::MatrixXd::Zero(cfg_.channels1, 1));
    push("enc2_w", random_init(cfg_.channels2, cfg_.channels1 * k, rng));
    push("enc2_b", Eigen::MatrixXd::Zero(cfg_.channels2, 1));
    push("dec1_w", random_init(cfg_.channels1, cfg_.channels2 * k, rng));
    push("dec1_b", Eigen::MatrixXd::Zero(cfg_.channels1, 1));
    // Zero final layer: the residual connection makes the model an exact
    // identity at initialization.
    push("dec2_w", Eigen::MatrixXd::Zero(cfg_.outputs, cfg_.channels1 * k));
    push("dec2_b", Eigen::MatrixXd::Zero(cfg_.outputs, 1));
    return;
  }

  check_config(cfg_.stft);
  const int bins = cfg_.stft.bins();
  const int in_dim = (2 * cfg_.context + 1) * bins;
  push("w1", random_init(cfg_.hidden, in_dim, rng));
  push("b1", Eigen::MatrixXd::Zero(cfg_.hidden, 1));
  push("w2", random_init(cfg_.hidden, cfg_.hidden, rng));
  push("b2", Eigen::MatrixXd::Zero(cfg_.hidden, 1));
  if (cfg_.kind == ArchKind::kComplexMask) {
    // Identity mask 1 + 0i at initialization.
    push("w3r", Eigen::MatrixXd::Zero(bins, cfg_.hidden));
    push("b3r", Eigen::MatrixXd::Ones(bins, 1));
    push("w3i", Eigen::MatrixXd::Zero(bins, cfg_.hidden));
    push("b3i", Eigen::MatrixXd::Zero(bins, 1));
  } else {
    // softplus(b3) = 1: identity real mask at initialization.
    const double b0 = std::log(std::exp(1.0) - 1.0);
    push("w3", Eigen::MatrixXd::Zero(bins, cfg_.hidden));
    push("b3", Eigen::MatrixXd::Constant(bins, 1, b0));
  }
}

int64_t EnhancerModel::param_count() const {
  int64_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

EnhancerModel::TapeForward EnhancerModel::forward_on_tape(Tape& t, const Waveform& y) const {
  check_waveform(y);
  TapeForward out;
  out.param_ids.reserve(params_.size());
  for (const auto& p : params_) out.param_ids.push_back(t.param(p));
  const int n = static_cast<int>(y.samples.size());

  if (cfg_.kind == ArchKind::kWaveform) {
    const int s = cfg_.stride;
    const int min_len = cfg_.total_stride() * cfg_.kernel;
    if (n < min_len) {
      throw std::invalid_argument("waveform model: input shorter than the receptive field");
    }
    const int n_pad = (n + cfg_.total_stride() - 1) / cfg_.total_stride() * cfg_.total_stride();
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(1, n_pad);
    for (int i = 0; i < n; ++i) x(0, i) = y.samples[i];
    const NodeId xc = t.constant(x);
    const auto& P = out.param_ids;
    const NodeId e1 = t.tanh_(t.conv1d(xc, P[0], P[1], 1, cfg_.kernel, s));
    const NodeId e2 = t.tanh_(t.conv1d(e1, P[2], P[3], cfg_.channels1, cfg_.kernel, s));
    const NodeId d1 = t.tanh_(t.tconv1d(e2, P[4], P[5], cfg_.channels2, cfg_.kernel, s));
    const NodeId d2 = t.tconv1d(d1, P[6], P[7], cfg_.channels1, cfg_.kernel, s);
    for (int o = 0; o < cfg_.outputs; ++o) {
      NodeId u = t.row(d2, o);
      if (o == 0) u = t.add(u, xc);  // residual to the source estimate
      out.outputs.push_back(t.cols(u, 0, n));
    }
    return out;
  }

  const StftConfig& sc = cfg_.stft;
  if (n < sc.window_size) {
    throw std::invalid_argument("mask model: input shorter than one analysis window");
  }
  // Pad so the inverse transform covers the whole input.
  const int frames = (n - sc.window_size + sc.hop_size - 1) / sc.hop_size + 1;
  const int n_pad = (frames - 1) * sc.hop_size + sc.window_size;
  Waveform y_pad = y;
  y_pad.samples.resize(n_pad, 0.0);
  const ComplexSpectrogram spec = stft(y_pad, sc);
  const int bins = sc.bins();
  const Eigen::MatrixXd yre = spec.values.real();
  const Eigen::MatrixXd yim = spec.values.imag();

  const Eigen::MatrixXd feat =
      ((yre.array().square() + yim.array().square()).sqrt() + kFeatureEps).log();
  const int ctx = cfg_.context;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero((2 * ctx + 1) * bins, frames);
  for (int m = 0; m < frames; ++m) {
    for (int c = -ctx; c <= ctx; ++c) {
      const int src = m + c;
      if (src < 0 || src >= frames) continue;
      x.block((c + ctx) * bins, m, bins, 1) = feat.row(src).transpose();
    }
  }

  const auto& P = out.param_ids;
  const NodeId xc = t.constant(x);
  const NodeId h1 = t.tanh_(t.add_colvec(t.matmul(P[0], xc), P[1]));
  const NodeId h2 = t.tanh_(t.add_colvec(t.matmul(P[2], h1), P[3]));
  const NodeId yre_c = t.constant(yre);
  const NodeId yim_c = t.constant(yim);

  NodeId est_re = -1;
  NodeId est_im = -1;
  if (cfg_.kind == ArchKind::kComplexMask) {
    out.mask_re = t.transpose(t.add_colvec(t.matmul(P[4], h2), P[5]));
    out.mask_im = t.transpose(t.add_colvec(t.matmul(P[6], h2), P[7]));
    est_re = t.sub(t.cmul(out.mask_re, yre_c), t.cmul(out.mask_im, yim_c));
    est_im = t.add(t.cmul(out.mask_re, yim_c), t.cmul(out.mask_im, yre_c));
  } else {
    // Nonnegative mask scales magnitudes and reuses the input phase.
    out.mask_re = t.transpose(t.softplus_(t.add_colvec(t.matmul(P[4], h2), P[5])));
    est_re = t.cmul(out.mask_re, yre_c);
    est_im = t.cmul(out.mask_re, yim_c);
  }
  out.outputs.push_back(t.cols(t.istft(est_re, est_im, sc), 0, n));
  return out;
}

EnhancerModel::ForwardResult EnhancerModel::forward(const Waveform& y) const {
  Tape t;
  const TapeForward f = forward_on_tape(t, y);
  ForwardResult out;
  for (NodeId id : f.outputs) {
    const Eigen::MatrixXd& v = t.value(id);
    Waveform w;
    w.sample_rate_hz = y.sample_rate_hz;
    w.samples.assign(v.data(), v.data() + v.cols());
    out.outputs.push_back(std::move(w));
  }
  if (f.mask_re >= 0) {
    const Eigen::MatrixXd& re = t.value(f.mask_re);
    if (f.mask_im >= 0) {
      out.mask = re.cast<std::complex<double>>() +
                 std::complex<double>(0.0, 1.0) *
                     t.value(f.mask_im).cast<std::complex<double>>();
    } else {
      out.mask = re.cast<std::complex<double>>();
    }
  }
  return out;
}

Waveform EnhancerModel::enhance(const Waveform& y) const { return forward(y).outputs.front(); }

OptimizerState OptimizerState::for_model(const EnhancerModel& model, double lr) {
  OptimizerState s;
  s.lr = lr;
  for (const auto& p : model.params()) {
    s.m.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
    s.v.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
  }
  return s;
}

void optimizer_step(OptimizerState& state, std::vector<Eigen::MatrixXd>& params,
                    const std::vector<Eigen::MatrixXd>& grads) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw std::invalid_argument("optimizer_step: dimension mismatch");
  }
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (size_t i = 0; i < params.size(); ++i) {
    if (params[i].rows() != grads[i].rows() || params[i].cols() != grads[i].cols()) {
      throw std::invalid_argument("optimizer_step: gradient shape mismatch");
    }
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i].array() =
        state.beta2 * state.v[i].array() + (1.0 - state.beta2) * grads[i].array().square();
    const Eigen::ArrayXXd mhat = state.m[i].array() / bc1;
    const Eigen::ArrayXXd vhat = state.v[i].array() / bc2;
    params[i].array() -= state.lr * mhat / (vhat.sqrt() + state.eps);
  }
}

void save_checkpoint(const std::string& path, const EnhancerModel& model,
                     const OptimizerState* opt, int epoch, const std::string& fingerprint) {
  nlohmann::json header;
  header["format"] = "nytt-checkpoint-v1";
  header["config"] = model.config().to_json();
  header["epoch"] = epoch;
  header["fingerprint"] = fingerprint;
  header["has_opt"] = opt != nullptr;
  if (opt != nullptr) {
    header["opt"] = {{"lr", opt->lr},       {"beta1", opt->beta1},
                     {"beta2", opt->beta2}, {"eps", opt->eps},
                     {"step_count", opt->step_count}};
  }
  nlohmann::json segs = nlohmann::json::array();
  for (size_t i = 0; i < model.params().size(); ++i) {
    segs.push_back({{"name", model.param_names()[i]},
                    {"rows", model.params()[i].rows()},
                    {"cols", model.params()[i].cols()}});
  }
  header["segments"] = segs;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  const std::string h = header.dump();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  out.put('\0');
  auto write_all = [&](const std::vector<Eigen::MatrixXd>& mats) {
    for (const auto& m : mats) {
      out.write(reinterpret_cast<const char*>(m.data()),
                static_cast<std::streamsize>(sizeof(double) * m.size()));
    }
  };
  write_all(model.params());
  if (opt != nullptr) {
    write_all(opt->m);
    write_all(opt->v);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot read " + path);
  std::string header_str;
  std::getline(in, header_str, '\0');
  const nlohmann::json header = nlohmann::json::parse(header_str);
  if (header.at("format").get<std::string>() != "nytt-checkpoint-v1") {
    throw std::invalid_argument("checkpoint: unknown format");
  }
  Checkpoint ckpt;
  ckpt.config = ModelConfig::from_json(header.at("config"));
  ckpt.epoch = header.at("epoch").get<int>();
  ckpt.fingerprint = header.at("fingerprint").get<std::string>();
  ckpt.has_opt = header.at("has_opt").get<bool>();

  auto read_all = [&](std::vector<Eigen::MatrixXd>& mats) {
    for (const auto& seg : header.at("segments")) {
      Eigen::MatrixXd m(seg.at("rows").get<Eigen::Index>(), seg.at("cols").get<Eigen::Index>());
      in.read(reinterpret_cast<char*>(m.data()),
              static_cast<std::streamsize>(sizeof(double) * m.size()));
      if (!in) throw std::runtime_error("checkpoint: truncated payload");
      mats.push_back(std::move(m));
    }
  };
  read_all(ckpt.params);
  if (ckpt.has_opt) {
    const auto& o = header.at("opt");
    ckpt.opt.lr = o.at("lr").get<double>();
    ckpt.opt.beta1 = o.at("beta1").get<double>();
    ckpt.opt.beta2 = o.at("beta2").get<double>();
    ckpt.opt.eps = o.at("eps").get<double>();
    ckpt.opt.step_count = o.at("step_count").get<int64_t>();
    read_all(ckpt.opt.m);
    read_all(ckpt.opt.v);
  }
  return ckpt;
}

EnhancerModel model_from_checkpoint(const Checkpoint& ckpt) {
  EnhancerModel model(ckpt.config);
  if (ckpt.params.size() != model.params().size()) {
    throw std::invalid_argument("checkpoint: segment count mismatch");
  }
  for (size_t i = 0; i < ckpt.params.size(); ++i) {
    if (ckpt.params[i].rows() != model.params()[i].rows() ||
        ckpt.params[i].cols() != model.params()[i].cols()) {
      throw std::invalid_argument("checkpoint: segment shape mismatch");
    }
    model.params()[i] = ckpt.params[i];
  }
  return model;
}

}  // namespace nytt
