// Copyright 2026 NyTT-desk Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "nytt/autodiff.h"

using namespace nytt;

namespace {

using Build = std::function<NodeId(Tape&, const std::vector<NodeId>&)>;

Eigen::MatrixXd random_matrix(int rows, int cols, std::mt19937& gen, double scal = 1.0) {
  std::uniform_real_distribution<double> d(-scal, scal);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = d(gen);
  }
  return m;
}

double eval_loss(const std::vector<Eigen::MatrixXd>& params, const Build& build) {
  Tape t;
  std::vector<NodeId> ids;
  for (const auto& p : params) ids.push_back(t.param(p));
  return t.value(build(t, ids))(0, 0);
}

// Central-difference check of d(loss)/d(param) at up to max_checks random
// entries per parameter.
void fd_check(const std::vector<Eigen::MatrixXd>& params, const Build& build,
              int max_checks = 25, double step = 1e-5, double tol = 1e-5) {
  Tape t;
  std::vector<NodeId> ids;
  for (const auto& p : params) ids.push_back(t.param(p));
  const NodeId loss = build(t, ids);
  t.backward(loss);

  std::mt19937 gen(1234);
  for (size_t pi = 0; pi < params.size(); ++pi) {
    const Eigen::MatrixXd& g = t.grad(ids[pi]);
    const int total = static_cast<int>(params[pi].size());
    const int checks = std::min(max_checks, total);
    std::uniform_int_distribution<int> pick(0, total - 1);
    for (int c = 0; c < checks; ++c) {
      const int flat = total <= max_checks ? c : pick(gen);
      const int i = flat % params[pi].rows();
      const int j = flat / params[pi].rows();
      auto plus = params;
      auto minus = params;
      plus[pi](i, j) += step;
      minus[pi](i, j) -= step;
      const double fd = (eval_loss(plus, build) - eval_loss(minus, build)) / (2.0 * step);
      const double an = g(i, j);
      const double denom = std::max({1e-8, std::abs(fd), std::abs(an)});
      INFO("param ", pi, " entry (", i, ",", j, ") fd=", fd, " an=", an);
      CHECK(std::abs(fd - an) / denom < tol);
    }
  }
}

}  // namespace

TEST_CASE("gradients of the dense elementwise ops") {
  std::mt19937 gen(7);
  const Eigen::MatrixXd a = random_matrix(3, 4, gen);
  const Eigen::MatrixXd b = random_matrix(3, 4, gen) * 0.5;

  fd_check({a, b}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum(t.cmul(p[0], p[1]));
  });
  fd_check({a, b}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.mean(t.sub(p[0], p[1]));
  });
  fd_check({a, b}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum(t.cdiv(p[0], t.add_scalar(t.square_(p[1]), 1.0)));
  });
  fd_check({a}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum(t.scale(t.add_scalar(p[0], 0.3), -2.5));
  });
  fd_check({a}, [](Tape& t, const std::vector<NodeId>& p) { return t.sum(t.tanh_(p[0])); });
  fd_check({a}, [](Tape& t, const std::vector<NodeId>& p) { return t.sum(t.softplus_(p[0])); });
  fd_check({a}, [](Tape& t, const std::vector<NodeId>& p) { return t.sum(t.square_(p[0])); });
  fd_check({a}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum(t.log_eps(t.square_(p[0]), 1e-3));
  });
  fd_check({a}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum(t.sqrt_(t.add_scalar(t.square_(p[0]), 0.1)));
  });
}

TEST_CASE("gradients of kinked ops away from their kinks") {
  Eigen::MatrixXd a(2, 3);
  a << 0.5, -1.2, 2.0, -0.7, 1.5, -2.2;  // no entries near zero
  fd_check({a}, [](Tape& t, const std::vector<NodeId>& p) { return t.sum(t.relu_(p[0])); });
  fd_check({a}, [](Tape& t, const std::vector<NodeId>& p) { return t.sum(t.abs_(p[0])); });
  fd_check({a}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum(t.max_scalar(p[0], 0.1));
  });
  fd_check({a}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum(t.min_scalar(p[0], 1.0));
  });
  Eigen::MatrixXd b = Eigen::MatrixXd::Constant(2, 3, 0.25);
  fd_check({a, b}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum(t.emax(p[0], p[1]));
  });
}

TEST_CASE("abs subgradient at zero is zero") {
  Tape t;
  const NodeId p = t.param(Eigen::MatrixXd::Zero(1, 1));
  t.backward(t.sum(t.abs_(p)));
  CHECK(t.grad(p)(0, 0) == 0.0);
}

TEST_CASE("gradients of matmul, bias broadcast, and row slicing") {
  std::mt19937 gen(11);
  const Eigen::MatrixXd w = random_matrix(4, 3, gen);
  const Eigen::MatrixXd x = random_matrix(3, 5, gen);
  const Eigen::MatrixXd bias = random_matrix(4, 1, gen);
  fd_check({w, x, bias}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.mean(t.tanh_(t.add_colvec(t.matmul(p[0], p[1]), p[2])));
  });
  fd_check({w, x}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum(t.row(t.matmul(p[0], p[1]), 2));
  });
  fd_check({w, x}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum(t.cols(t.matmul(p[0], p[1]), 1, 3));
  });
  fd_check({w, x}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.mean(t.square_(t.transpose(t.matmul(p[0], p[1]))));
  });
}

TEST_CASE("magnitude gradient, including the zero point") {
  std::mt19937 gen(13);
  const Eigen::MatrixXd re = random_matrix(2, 4, gen) + Eigen::MatrixXd::Constant(2, 4, 2.0);
  const Eigen::MatrixXd im = random_matrix(2, 4, gen);
  fd_check({re, im}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum(t.magnitude(p[0], p[1]));
  });

  Tape t;
  const NodeId zr = t.param(Eigen::MatrixXd::Zero(1, 1));
  const NodeId zi = t.param(Eigen::MatrixXd::Zero(1, 1));
  t.backward(t.sum(t.magnitude(zr, zi)));
  CHECK(t.grad(zr)(0, 0) == 0.0);
  CHECK(t.grad(zi)(0, 0) == 0.0);
}

TEST_CASE("stft adjoints match finite differences") {
  std::mt19937 gen(17);
  StftConfig cfg;
  cfg.window_size = 64;
  cfg.hop_size = 16;
  cfg.fft_size = 64;
  const int n = 128;  // 5 frames
  const Eigen::MatrixXd x = random_matrix(1, n, gen);
  const Eigen::MatrixXd wr = random_matrix(5, cfg.bins(), gen);
  const Eigen::MatrixXd wi = random_matrix(5, cfg.bins(), gen);

  fd_check({x}, [&](Tape& t, const std::vector<NodeId>& p) {
    return t.sum(t.cmul(t.stft_re(p[0], cfg), t.constant(wr)));
  });
  fd_check({x}, [&](Tape& t, const std::vector<NodeId>& p) {
    return t.sum(t.cmul(t.stft_im(p[0], cfg), t.constant(wi)));
  });
  fd_check({x}, [&](Tape& t, const std::vector<NodeId>& p) {
    const NodeId re = t.stft_re(p[0], cfg);
    const NodeId im = t.stft_im(p[0], cfg);
    return t.mean(t.square_(t.magnitude(re, im)));
  });
}

TEST_CASE("istft adjoint matches finite differences, edge bins included") {
  std::mt19937 gen(19);
  StftConfig cfg;
  cfg.window_size = 64;
  cfg.hop_size = 16;
  cfg.fft_size = 64;
  const int frames = 4;
  const Eigen::MatrixXd re = random_matrix(frames, cfg.bins(), gen);
  const Eigen::MatrixXd im = random_matrix(frames, cfg.bins(), gen);
  const auto build = [&](Tape& t, const std::vector<NodeId>& p) {
    return t.mean(t.square_(t.istft(p[0], p[1], cfg)));
  };
  fd_check({re, im}, build, 40);

  // Imaginary parts of bins 0 and fft/2 are outside the real transform's
  // range: both the analytic gradient and the finite difference must vanish.
  Tape t;
  const NodeId pre = t.param(re);
  const NodeId pim = t.param(im);
  t.backward(build(t, {pre, pim}));
  for (int m = 0; m < frames; ++m) {
    CHECK(t.grad(pim)(m, 0) == 0.0);
    CHECK(t.grad(pim)(m, cfg.fft_size / 2) == 0.0);
  }
}

TEST_CASE("stft-istft composition gradient") {
  std::mt19937 gen(23);
  StftConfig cfg;
  cfg.window_size = 32;
  cfg.hop_size = 8;
  cfg.fft_size = 32;
  const Eigen::MatrixXd x = random_matrix(1, 64, gen);
  const Eigen::MatrixXd mask = random_matrix(5, cfg.bins(), gen, 0.5);
  fd_check({x}, [&](Tape& t, const std::vector<NodeId>& p) {
    const NodeId re = t.cmul(t.stft_re(p[0], cfg), t.constant(mask));
    const NodeId im = t.cmul(t.stft_im(p[0], cfg), t.constant(mask));
    return t.mean(t.square_(t.istft(re, im, cfg)));
  });
}

TEST_CASE("causal strided conv gradients") {
  std::mt19937 gen(29);
  const int c_in = 2, c_out = 3, k = 3, stride = 2, t_len = 12;
  const Eigen::MatrixXd x = random_matrix(c_in, t_len, gen);
  const Eigen::MatrixXd w = random_matrix(c_out, c_in * k, gen);
  const Eigen::MatrixXd bias = random_matrix(c_out, 1, gen);
  fd_check({x, w, bias}, [&](Tape& t, const std::vector<NodeId>& p) {
    return t.mean(t.square_(t.conv1d(p[0], p[1], p[2], c_in, k, stride)));
  }, 40);
}

TEST_CASE("transposed conv gradients") {
  std::mt19937 gen(31);
  const int c_in = 3, c_out = 2, k = 4, stride = 2, t_len = 6;
  const Eigen::MatrixXd x = random_matrix(c_in, t_len, gen);
  const Eigen::MatrixXd w = random_matrix(c_out, c_in * k, gen);
  const Eigen::MatrixXd bias = random_matrix(c_out, 1, gen);
  fd_check({x, w, bias}, [&](Tape& t, const std::vector<NodeId>& p) {
    return t.mean(t.square_(t.tconv1d(p[0], p[1], p[2], c_in, k, stride)));
  }, 40);
}

TEST_CASE("conv composition halves then restores length") {
  std::mt19937 gen(37);
  const Eigen::MatrixXd x = random_matrix(1, 16, gen);
  const Eigen::MatrixXd w1 = random_matrix(2, 1 * 3, gen);
  const Eigen::MatrixXd b1 = random_matrix(2, 1, gen);
  const Eigen::MatrixXd w2 = random_matrix(1, 2 * 3, gen);
  const Eigen::MatrixXd b2 = random_matrix(1, 1, gen);
  Tape t;
  const NodeId xx = t.constant(x);
  const NodeId enc = t.conv1d(xx, t.param(w1), t.param(b1), 1, 3, 2);
  const NodeId dec = t.tconv1d(enc, t.param(w2), t.param(b2), 2, 3, 2);
  CHECK(t.value(enc).cols() == 8);
  CHECK(t.value(dec).cols() == 16);
  fd_check({w1, b1, w2, b2}, [&](Tape& tp, const std::vector<NodeId>& p) {
    const NodeId e = tp.conv1d(tp.constant(x), p[0], p[1], 1, 3, 2);
    return tp.mean(tp.square_(tp.tconv1d(e, p[2], p[3], 2, 3, 2)));
  });
}

TEST_CASE("backward is deterministic and repeatable") {
  std::mt19937 gen(41);
  const Eigen::MatrixXd w = random_matrix(4, 4, gen);
  const Eigen::MatrixXd x = random_matrix(4, 6, gen);
  auto run = [&]() {
    Tape t;
    const NodeId pw = t.param(w);
    const NodeId loss = t.mean(t.square_(t.tanh_(t.matmul(pw, t.constant(x)))));
    t.backward(loss);
    return Eigen::MatrixXd(t.grad(pw));
  };
  const Eigen::MatrixXd g1 = run();
  const Eigen::MatrixXd g2 = run();
  for (int i = 0; i < g1.rows(); ++i) {
    for (int j = 0; j < g1.cols(); ++j) CHECK(g1(i, j) == g2(i, j));
  }
}

TEST_CASE("no gradient flows into constants") {
  Tape t;
  const NodeId c = t.constant(Eigen::MatrixXd::Ones(2, 2));
  const NodeId p = t.param(Eigen::MatrixXd::Ones(2, 2));
  const NodeId loss = t.sum(t.cmul(c, p));
  t.backward(loss);
  CHECK(!t.requires_grad(c));
  CHECK_THROWS(t.grad(c));
  CHECK(t.grad(p)(0, 0) == 1.0);
}
