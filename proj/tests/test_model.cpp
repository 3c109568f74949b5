// Copyright 2026 NyTT-desk Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

#include "nytt/autodiff.h"
#include "nytt/losses.h"
#include "nytt/model.h"
#include "nytt/stft.h"
#include "nytt/wave.h"

using namespace nytt;

namespace {

Waveform random_wave(int n, unsigned seed, double scal = 0.3) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> d(-scal, scal);
  Waveform w;
  w.samples.resize(n);
  for (auto& v : w.samples) v = d(gen);
  return w;
}

StftConfig small_stft() {
  StftConfig cfg;
  cfg.window_size = 64;
  cfg.hop_size = 16;
  cfg.fft_size = 64;
  return cfg;
}

ModelConfig small_mask_config(ArchKind kind) {
  ModelConfig cfg;
  cfg.kind = kind;
  cfg.stft = small_stft();
  cfg.context = 1;
  cfg.hidden = 8;
  cfg.init_seed = 7;
  return cfg;
}

ModelConfig small_wave_config(int outputs = 1) {
  ModelConfig cfg;
  cfg.kind = ArchKind::kWaveform;
  cfg.channels1 = 3;
  cfg.channels2 = 4;
  cfg.kernel = 3;
  cfg.stride = 2;
  cfg.outputs = outputs;
  cfg.init_seed = 9;
  return cfg;
}

// Overwrites every parameter (including the zero-initialized output layers)
// with small random values so gradients flow through the whole graph.
void randomize_params(EnhancerModel& model, unsigned seed, double scal = 0.2) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> d(0.0, scal);
  for (auto& p : model.params()) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      for (Eigen::Index i = 0; i < p.rows(); ++i) p(i, j) = d(gen);
    }
  }
}

double loss_at(const EnhancerModel& model, const Waveform& y, const Waveform& tgt) {
  Tape t;
  const auto f = model.forward_on_tape(t, y);
  return t.value(tape_mse_time(t, f.outputs[0], tgt))(0, 0);
}

// Central-difference check of d(loss)/d(param) at `checks` random parameter
// entries. Relative error must stay below 1e-4 with a 1e-5 step.
void fd_check_model(EnhancerModel& model, const Waveform& y, const Waveform& tgt, int checks,
                    unsigned seed) {
  Tape t;
  const auto f = model.forward_on_tape(t, y);
  t.backward(tape_mse_time(t, f.outputs[0], tgt));

  std::mt19937 gen(seed);
  const double h = 1e-5;
  for (int c = 0; c < checks; ++c) {
    const size_t pi = gen() % model.params().size();
    auto& p = model.params()[pi];
    const Eigen::Index i = static_cast<Eigen::Index>(gen() % p.rows());
    const Eigen::Index j = static_cast<Eigen::Index>(gen() % p.cols());
    const double saved = p(i, j);
    p(i, j) = saved + h;
    const double lp = loss_at(model, y, tgt);
    p(i, j) = saved - h;
    const double lm = loss_at(model, y, tgt);
    p(i, j) = saved;
    const double fd = (lp - lm) / (2.0 * h);
    const double an = t.grad(f.param_ids[pi])(i, j);
    const double denom = std::max({1e-8, std::fabs(fd), std::fabs(an)});
    CHECK(std::fabs(fd - an) / denom < 1e-4);
  }
}

}  // namespace

TEST_CASE("parameter shapes and names") {
  EnhancerModel cm(small_mask_config(ArchKind::kComplexMask));
  CHECK(cm.param_names().size() == 8);
  CHECK(cm.param_names()[0] == "w1");
  CHECK(cm.params()[0].rows() == 8);
  CHECK(cm.params()[0].cols() == 3 * 33);  // context window of 3 frames, 33 bins

  EnhancerModel rm(small_mask_config(ArchKind::kRealMask));
  CHECK(rm.param_names().size() == 6);
  CHECK(rm.param_names()[4] == "w3");

  EnhancerModel wm(small_wave_config(3));
  CHECK(wm.param_names().size() == 8);
  CHECK(wm.params()[6].rows() == 3);  // dec2_w: one row per output
  CHECK(wm.param_count() > 0);

  ModelConfig bad = small_mask_config(ArchKind::kRealMask);
  bad.outputs = 2;
  CHECK_THROWS_AS(EnhancerModel{bad}, std::invalid_argument);
  bad = small_mask_config(ArchKind::kRealMask);
  bad.hidden = 500;
  CHECK_THROWS_AS(EnhancerModel{bad}, std::invalid_argument);
}

TEST_CASE("identity at initialization") {
  const Waveform y = random_wave(300, 11);

  SUBCASE("waveform model is bit-exact") {
    EnhancerModel model(small_wave_config());
    const Waveform out = model.enhance(y);
    REQUIRE(out.samples.size() == y.samples.size());
    for (size_t i = 0; i < y.samples.size(); ++i) CHECK(out.samples[i] == y.samples[i]);
  }

  SUBCASE("mask models reconstruct through the transform") {
    for (ArchKind kind : {ArchKind::kComplexMask, ArchKind::kRealMask}) {
      EnhancerModel model(small_mask_config(kind));
      const Waveform out = model.enhance(y);
      REQUIRE(out.samples.size() == y.samples.size());
      for (size_t i = 0; i < y.samples.size(); ++i) {
        CHECK(out.samples[i] == doctest::Approx(y.samples[i]).epsilon(0).scale(1).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("mask forward against a plain transform oracle") {
  const Waveform y = random_wave(300, 13);
  const StftConfig sc = small_stft();
  // Padded length the model uses internally.
  const int frames = (300 - sc.window_size + sc.hop_size - 1) / sc.hop_size + 1;
  const int n_pad = (frames - 1) * sc.hop_size + sc.window_size;
  Waveform y_pad = y;
  y_pad.samples.resize(n_pad, 0.0);

  for (ArchKind kind : {ArchKind::kComplexMask, ArchKind::kRealMask}) {
    EnhancerModel model(small_mask_config(kind));
    randomize_params(model, 5);
    const auto fwd = model.forward(y);
    REQUIRE(fwd.mask.rows() == frames);
    REQUIRE(fwd.mask.cols() == sc.bins());

    if (kind == ArchKind::kRealMask) {
      // Nonnegative real mask: imaginary part identically zero.
      for (int m = 0; m < frames; ++m) {
        for (int b = 0; b < sc.bins(); ++b) {
          CHECK(fwd.mask(m, b).imag() == 0.0);
          CHECK(fwd.mask(m, b).real() > 0.0);
        }
      }
    }

    // Apply the reported mask with the free-function transform pair.
    ComplexSpectrogram spec = stft(y_pad, sc);
    spec.values = spec.values.cwiseProduct(fwd.mask);
    const Waveform ref = istft(spec);
    for (size_t i = 0; i < y.samples.size(); ++i) {
      CHECK(fwd.outputs[0].samples[i] == doctest::Approx(ref.samples[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("real mask preserves input phase") {
  const Waveform y = random_wave(300, 17);
  EnhancerModel model(small_mask_config(ArchKind::kRealMask));
  randomize_params(model, 3);
  const auto fwd = model.forward(y);

  const StftConfig sc = small_stft();
  const int frames = (300 - sc.window_size + sc.hop_size - 1) / sc.hop_size + 1;
  const int n_pad = (frames - 1) * sc.hop_size + sc.window_size;
  Waveform y_pad = y;
  y_pad.samples.resize(n_pad, 0.0);
  const ComplexSpectrogram spec = stft(y_pad, sc);
  for (int m = 0; m < frames; ++m) {
    for (int b = 0; b < sc.bins(); ++b) {
      const std::complex<double> in = spec.values(m, b);
      if (std::abs(in) < 1e-9) continue;
      const std::complex<double> out = fwd.mask(m, b) * in;
      // Same phase: cross product of the two (re, im) vectors vanishes.
      const double cross = in.real() * out.imag() - in.imag() * out.real();
      CHECK(std::fabs(cross) <= 1e-12 * std::abs(in) * std::abs(out) + 1e-300);
      CHECK(in.real() * out.real() + in.imag() * out.imag() > 0.0);
    }
  }
}

TEST_CASE("zeroed output layer") {
  SUBCASE("mask models emit silence") {
    ModelConfig cfg = small_mask_config(ArchKind::kComplexMask);
    EnhancerModel model(cfg);
    randomize_params(model, 21);
    model.params()[4].setZero();  // w3r
    model.params()[5].setZero();  // b3r
    model.params()[6].setZero();  // w3i
    model.params()[7].setZero();  // b3i
    const Waveform out = model.enhance(random_wave(300, 23));
    for (double v : out.samples) CHECK(v == 0.0);

    EnhancerModel rm(small_mask_config(ArchKind::kRealMask));
    randomize_params(rm, 25);
    rm.params()[4].setZero();
    rm.params()[5].setConstant(-40.0);  // softplus(-40) ~ 4e-18
    const Waveform rout = rm.enhance(random_wave(300, 27));
    for (double v : rout.samples) CHECK(std::fabs(v) < 1e-12);
  }

  SUBCASE("waveform model reduces to the residual path") {
    EnhancerModel model(small_wave_config(2));
    randomize_params(model, 29);
    model.params()[6].setZero();  // dec2_w
    model.params()[7].setZero();  // dec2_b
    const Waveform y = random_wave(200, 31);
    const auto fwd = model.forward(y);
    REQUIRE(fwd.outputs.size() == 2);
    for (size_t i = 0; i < y.samples.size(); ++i) {
      CHECK(fwd.outputs[0].samples[i] == y.samples[i]);
      CHECK(fwd.outputs[1].samples[i] == 0.0);
    }
  }
}

TEST_CASE("waveform model is equivariant to stride-multiple shifts") {
  EnhancerModel model(small_wave_config());
  randomize_params(model, 33, 0.1);
  const int n = 400;
  const int shift = model.config().total_stride();
  const Waveform y = random_wave(n, 35);
  Waveform y_shift;
  y_shift.samples.assign(n, 0.0);
  for (int i = 0; i + shift < n; ++i) y_shift.samples[i + shift] = y.samples[i];

  const Waveform out = model.enhance(y);
  const Waveform out_shift = model.enhance(y_shift);
  // Compare away from both boundaries; causal padding breaks equivariance there.
  for (int i = 100; i + shift < n - 100; ++i) {
    CHECK(out_shift.samples[i + shift] == doctest::Approx(out.samples[i]).epsilon(1e-9));
  }
}

TEST_CASE("too-short inputs throw") {
  EnhancerModel mask(small_mask_config(ArchKind::kComplexMask));
  CHECK_THROWS_AS(mask.enhance(random_wave(63, 41)), std::invalid_argument);
  CHECK_NOTHROW(mask.enhance(random_wave(64, 41)));

  EnhancerModel wave(small_wave_config());
  CHECK_THROWS_AS(wave.enhance(random_wave(7, 43)), std::invalid_argument);
  CHECK_NOTHROW(wave.enhance(random_wave(12, 43)));
}

TEST_CASE("finite differences across architectures") {
  const Waveform tgt = random_wave(200, 51);

  SUBCASE("complex mask") {
    EnhancerModel model(small_mask_config(ArchKind::kComplexMask));
    randomize_params(model, 53);
    fd_check_model(model, random_wave(200, 55), tgt, 24, 57);
  }
  SUBCASE("real mask") {
    EnhancerModel model(small_mask_config(ArchKind::kRealMask));
    randomize_params(model, 59);
    fd_check_model(model, random_wave(200, 61), tgt, 24, 63);
  }
  SUBCASE("waveform") {
    EnhancerModel model(small_wave_config());
    randomize_params(model, 65);
    fd_check_model(model, random_wave(200, 67), tgt, 24, 69);
  }
}

TEST_CASE("gradient scales linearly with the loss") {
  EnhancerModel model(small_mask_config(ArchKind::kRealMask));
  randomize_params(model, 71);
  const Waveform y = random_wave(200, 73);
  const Waveform tgt = random_wave(200, 75);

  Tape t1;
  const auto f1 = model.forward_on_tape(t1, y);
  t1.backward(tape_mse_time(t1, f1.outputs[0], tgt));
  Tape t2;
  const auto f2 = model.forward_on_tape(t2, y);
  t2.backward(t2.scale(tape_mse_time(t2, f2.outputs[0], tgt), 2.0));

  for (size_t i = 0; i < f1.param_ids.size(); ++i) {
    const Eigen::MatrixXd& g1 = t1.grad(f1.param_ids[i]);
    const Eigen::MatrixXd& g2 = t2.grad(f2.param_ids[i]);
    CHECK(((2.0 * g1 - g2).cwiseAbs().maxCoeff()) <=
          1e-12 * std::max(1.0, g2.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("zero loss yields zero gradients") {
  // Identity model and identity target: perfect fit, so every gradient is 0.
  EnhancerModel model(small_wave_config());
  const Waveform y = random_wave(200, 81);
  Tape t;
  const auto f = model.forward_on_tape(t, y);
  const NodeId loss = tape_mse_time(t, f.outputs[0], y);
  CHECK(t.value(loss)(0, 0) == 0.0);
  t.backward(loss);
  for (NodeId pid : f.param_ids) CHECK(t.grad(pid).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adam optimizer") {
  EnhancerModel model(small_wave_config());
  randomize_params(model, 91);

  SUBCASE("zero gradient leaves parameters unchanged") {
    const auto before = model.params();
    OptimizerState opt = OptimizerState::for_model(model, 1e-3);
    std::vector<Eigen::MatrixXd> grads;
    for (const auto& p : model.params()) grads.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
    optimizer_step(opt, model.params(), grads);
    CHECK(opt.step_count == 1);
    for (size_t i = 0; i < before.size(); ++i) CHECK((model.params()[i] - before[i]).norm() == 0.0);
  }

  SUBCASE("first step matches the closed form") {
    const auto before = model.params();
    OptimizerState opt = OptimizerState::for_model(model, 1e-3);
    std::vector<Eigen::MatrixXd> grads;
    std::mt19937 gen(93);
    std::normal_distribution<double> d(0.0, 1.0);
    for (const auto& p : model.params()) {
      Eigen::MatrixXd g(p.rows(), p.cols());
      for (Eigen::Index j = 0; j < g.cols(); ++j) {
        for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = d(gen);
      }
      grads.push_back(std::move(g));
    }
    optimizer_step(opt, model.params(), grads);
    for (size_t k = 0; k < before.size(); ++k) {
      const Eigen::ArrayXXd expected =
          before[k].array() - opt.lr * grads[k].array() / (grads[k].array().abs() + opt.eps);
      CHECK((model.params()[k].array() - expected).abs().maxCoeff() < 1e-15);
    }
  }

  SUBCASE("shape mismatch throws") {
    OptimizerState opt = OptimizerState::for_model(model, 1e-3);
    std::vector<Eigen::MatrixXd> grads(model.params().size() - 1);
    CHECK_THROWS_AS(optimizer_step(opt, model.params(), grads), std::invalid_argument);
  }

  SUBCASE("two runs of the same trajectory are bit-identical") {
    auto run = [](std::vector<Eigen::MatrixXd>* out_params) {
      EnhancerModel m(small_wave_config());
      randomize_params(m, 95);
      OptimizerState opt = OptimizerState::for_model(m, 2e-3);
      const Waveform y = random_wave(120, 97);
      const Waveform tgt = random_wave(120, 99);
      for (int step = 0; step < 5; ++step) {
        Tape t;
        const auto f = m.forward_on_tape(t, y);
        t.backward(tape_mse_time(t, f.outputs[0], tgt));
        std::vector<Eigen::MatrixXd> grads;
        for (NodeId pid : f.param_ids) grads.push_back(t.grad(pid));
        optimizer_step(opt, m.params(), grads);
      }
      *out_params = m.params();
    };
    std::vector<Eigen::MatrixXd> a, b;
    run(&a);
    run(&b);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK((a[i] - b[i]).norm() == 0.0);
  }
}

TEST_CASE("training a single pair reduces the loss") {
  // Noisy input, clean target: 60 optimizer steps must reduce the windowed
  // average loss and the model must beat its identity starting point.
  Waveform x;
  x.samples.resize(400);
  for (int i = 0; i < 400; ++i) x.samples[i] = 0.3 * std::sin(2.0 * M_PI * 440.0 * i / 16000.0);
  Waveform y = x;
  std::mt19937 gen(101);
  std::normal_distribution<double> d(0.0, 0.05);
  for (auto& v : y.samples) v += d(gen);

  EnhancerModel model(small_wave_config());
  OptimizerState opt = OptimizerState::for_model(model, 2e-3);
  std::vector<double> losses;
  for (int step = 0; step < 60; ++step) {
    Tape t;
    const auto f = model.forward_on_tape(t, y);
    const NodeId loss = tape_mse_time(t, f.outputs[0], x);
    losses.push_back(t.value(loss)(0, 0));
    t.backward(loss);
    std::vector<Eigen::MatrixXd> grads;
    for (NodeId pid : f.param_ids) grads.push_back(t.grad(pid));
    optimizer_step(opt, model.params(), grads);
  }
  auto window_mean = [&](int lo) {
    double s = 0.0;
    for (int i = lo; i < lo + 10; ++i) s += losses[static_cast<size_t>(i)];
    return s / 10.0;
  };
  CHECK(window_mean(50) < window_mean(0));
  CHECK(losses.back() < losses.front());
}

TEST_CASE("checkpoint round trip") {
  const std::string path = "test_model_ckpt.bin";
  EnhancerModel model(small_mask_config(ArchKind::kComplexMask));
  randomize_params(model, 111);
  OptimizerState opt = OptimizerState::for_model(model, 3e-4);
  // Push a step through so m/v are nonzero.
  std::vector<Eigen::MatrixXd> grads;
  for (const auto& p : model.params()) {
    grads.push_back(Eigen::MatrixXd::Constant(p.rows(), p.cols(), 0.01));
  }
  optimizer_step(opt, model.params(), grads);

  save_checkpoint(path, model, &opt, 12, "fingerprint-abc");
  const Checkpoint ckpt = load_checkpoint(path);
  CHECK(ckpt.epoch == 12);
  CHECK(ckpt.fingerprint == "fingerprint-abc");
  CHECK(ckpt.has_opt);
  CHECK(ckpt.opt.lr == 3e-4);
  CHECK(ckpt.opt.step_count == 1);
  CHECK(ckpt.config.kind == ArchKind::kComplexMask);
  CHECK(ckpt.config.stft.window_size == 64);
  REQUIRE(ckpt.params.size() == model.params().size());
  for (size_t i = 0; i < ckpt.params.size(); ++i) {
    CHECK((ckpt.params[i] - model.params()[i]).norm() == 0.0);
    CHECK((ckpt.opt.m[i] - opt.m[i]).norm() == 0.0);
    CHECK((ckpt.opt.v[i] - opt.v[i]).norm() == 0.0);
  }

  // Restored model reproduces the original bit for bit.
  const EnhancerModel restored = model_from_checkpoint(ckpt);
  const Waveform y = random_wave(200, 113);
  const Waveform a = model.enhance(y);
  const Waveform b = restored.enhance(y);
  for (size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i] == b.samples[i]);

  // Without optimizer state.
  save_checkpoint(path, model, nullptr, 0, "");
  const Checkpoint bare = load_checkpoint(path);
  CHECK_FALSE(bare.has_opt);
  CHECK(bare.opt.m.empty());

  Checkpoint broken = ckpt;
  broken.params.pop_back();
  CHECK_THROWS_AS(model_from_checkpoint(broken), std::invalid_argument);
  CHECK_THROWS_AS(load_checkpoint("no_such_checkpoint.bin"), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("config json round trip") {
  ModelConfig cfg = small_wave_config(3);
  cfg.init_seed = 1234567;
  const ModelConfig back = ModelConfig::from_json(cfg.to_json());
  CHECK(back.kind == cfg.kind);
  CHECK(back.channels1 == cfg.channels1);
  CHECK(back.channels2 == cfg.channels2);
  CHECK(back.kernel == cfg.kernel);
  CHECK(back.stride == cfg.stride);
  CHECK(back.outputs == cfg.outputs);
  CHECK(back.init_seed == cfg.init_seed);
  CHECK(back.stft.window_size == cfg.stft.window_size);
  CHECK_THROWS_AS(arch_from_string("nope"), std::invalid_argument);
}
