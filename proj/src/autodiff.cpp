// Copyright 2026 NyTT-desk Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "nytt/autodiff.h"

#include <cmath>
#include <complex>
#include <stdexcept>

#include "nytt/fft.h"

namespace nytt {

namespace {

void check_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::logic_error(std::string(op) + ": shape mismatch");
  }
}

Waveform row_to_wave(const Eigen::MatrixXd& v) {
  if (v.rows() != 1) throw std::logic_error("tape: waveform nodes must be 1 x n");
  Waveform w;
  w.samples.assign(v.data(), v.data() + v.cols());
  return w;
}

}  // namespace

NodeId Tape::push(Node&& n) {
  for (NodeId i : n.in) {
    if (i >= 0 && nodes_[i].requires_grad) n.requires_grad = true;
  }
  if (n.op == Op::kParam) n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::constant(const Eigen::MatrixXd& v) {
  Node n;
  n.op = Op::kConst;
  n.value = v;
  return push(std::move(n));
}

NodeId Tape::param(const Eigen::MatrixXd& v) {
  Node n;
  n.op = Op::kParam;
  n.value = v;
  return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  if (nodes_[a].value.cols() != nodes_[b].value.rows()) {
    throw std::logic_error("matmul: inner dimension mismatch");
  }
  Node n;
  n.op = Op::kMatmul;
  n.in = {a, b, -1};
  n.value = nodes_[a].value * nodes_[b].value;
  return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
  check_same_shape(nodes_[a].value, nodes_[b].value, "add");
  Node n;
  n.op = Op::kAdd;
  n.in = {a, b, -1};
  n.value = nodes_[a].value + nodes_[b].value;
  return push(std::move(n));
}

NodeId Tape::sub(NodeId a, NodeId b) {
  check_same_shape(nodes_[a].value, nodes_[b].value, "sub");
  Node n;
  n.op = Op::kSub;
  n.in = {a, b, -1};
  n.value = nodes_[a].value - nodes_[b].value;
  return push(std::move(n));
}

NodeId Tape::cmul(NodeId a, NodeId b) {
  check_same_shape(nodes_[a].value, nodes_[b].value, "cmul");
  Node n;
  n.op = Op::kCmul;
  n.in = {a, b, -1};
  n.value = nodes_[a].value.cwiseProduct(nodes_[b].value);
  return push(std::move(n));
}

NodeId Tape::cdiv(NodeId a, NodeId b) {
  check_same_shape(nodes_[a].value, nodes_[b].value, "cdiv");
  Node n;
  n.op = Op::kCdiv;
  n.in = {a, b, -1};
  n.value = nodes_[a].value.cwiseQuotient(nodes_[b].value);
  return push(std::move(n));
}

NodeId Tape::scale(NodeId a, double g) {
  Node n;
  n.op = Op::kScale;
  n.in = {a, -1, -1};
  n.a0 = g;
  n.value = g * nodes_[a].value;
  return push(std::move(n));
}

NodeId Tape::add_scalar(NodeId a, double c) {
  Node n;
  n.op = Op::kAddScalar;
  n.in = {a, -1, -1};
  n.a0 = c;
  n.value = nodes_[a].value.array() + c;
  return push(std::move(n));
}

NodeId Tape::add_colvec(NodeId a, NodeId bias) {
  if (nodes_[bias].value.cols() != 1 || nodes_[bias].value.rows() != nodes_[a].value.rows()) {
    throw std::logic_error("add_colvec: bias must be rows(a) x 1");
  }
  Node n;
  n.op = Op::kAddColvec;
  n.in = {a, bias, -1};
  n.value = nodes_[a].value.colwise() + Eigen::VectorXd(nodes_[bias].value.col(0));
  return push(std::move(n));
}

NodeId Tape::tanh_(NodeId a) {
  Node n;
  n.op = Op::kTanh;
  n.in = {a, -1, -1};
  n.value = nodes_[a].value.array().tanh();
  return push(std::move(n));
}

NodeId Tape::softplus_(NodeId a) {
  Node n;
  n.op = Op::kSoftplus;
  n.in = {a, -1, -1};
  // log1p(exp(-|x|)) + max(x, 0) is stable in both tails.
  n.value = nodes_[a].value.unaryExpr(
      [](double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); });
  return push(std::move(n));
}

NodeId Tape::relu_(NodeId a) {
  Node n;
  n.op = Op::kRelu;
  n.in = {a, -1, -1};
  n.value = nodes_[a].value.cwiseMax(0.0);
  return push(std::move(n));
}

NodeId Tape::square_(NodeId a) {
  Node n;
  n.op = Op::kSquare;
  n.in = {a, -1, -1};
  n.value = nodes_[a].value.array().square();
  return push(std::move(n));
}

NodeId Tape::abs_(NodeId a) {
  Node n;
  n.op = Op::kAbs;
  n.in = {a, -1, -1};
  n.value = nodes_[a].value.array().abs();
  return push(std::move(n));
}

NodeId Tape::sqrt_(NodeId a) {
  Node n;
  n.op = Op::kSqrt;
  n.in = {a, -1, -1};
  n.value = nodes_[a].value.array().max(0.0).sqrt();
  return push(std::move(n));
}

NodeId Tape::log_eps(NodeId a, double eps) {
  if (eps < 0.0) throw std::logic_error("log_eps: negative eps");
  Node n;
  n.op = Op::kLogEps;
  n.in = {a, -1, -1};
  n.a0 = eps;
  n.value = (nodes_[a].value.array() + eps).log();
  return push(std::move(n));
}

NodeId Tape::magnitude(NodeId re, NodeId im) {
  check_same_shape(nodes_[re].value, nodes_[im].value, "magnitude");
  Node n;
  n.op = Op::kMagnitude;
  n.in = {re, im, -1};
  n.value = (nodes_[re].value.array().square() + nodes_[im].value.array().square()).sqrt();
  return push(std::move(n));
}

NodeId Tape::sum(NodeId a) {
  Node n;
  n.op = Op::kSum;
  n.in = {a, -1, -1};
  n.value = Eigen::MatrixXd::Constant(1, 1, nodes_[a].value.sum());
  return push(std::move(n));
}

NodeId Tape::mean(NodeId a) {
  Node n;
  n.op = Op::kMean;
  n.in = {a, -1, -1};
  n.value = Eigen::MatrixXd::Constant(1, 1, nodes_[a].value.mean());
  return push(std::move(n));
}

NodeId Tape::emax(NodeId a, NodeId b) {
  check_same_shape(nodes_[a].value, nodes_[b].value, "emax");
  Node n;
  n.op = Op::kEmax;
  n.in = {a, b, -1};
  n.value = nodes_[a].value.cwiseMax(nodes_[b].value);
  return push(std::move(n));
}

NodeId Tape::max_scalar(NodeId a, double c) {
  Node n;
  n.op = Op::kMaxScalar;
  n.in = {a, -1, -1};
  n.a0 = c;
  n.value = nodes_[a].value.cwiseMax(c);
  return push(std::move(n));
}

NodeId Tape::min_scalar(NodeId a, double c) {
  Node n;
  n.op = Op::kMinScalar;
  n.in = {a, -1, -1};
  n.a0 = c;
  n.value = nodes_[a].value.cwiseMin(c);
  return push(std::move(n));
}

NodeId Tape::row(NodeId a, int r) {
  if (r < 0 || r >= nodes_[a].value.rows()) throw std::logic_error("row: index out of range");
  Node n;
  n.op = Op::kRow;
  n.in = {a, -1, -1};
  n.i0 = r;
  n.value = nodes_[a].value.row(r);
  return push(std::move(n));
}

NodeId Tape::cols(NodeId a, int c0, int len) {
  if (c0 < 0 || len < 1 || c0 + len > nodes_[a].value.cols()) {
    throw std::logic_error("cols: slice out of range");
  }
  Node n;
  n.op = Op::kCols;
  n.in = {a, -1, -1};
  n.i0 = c0;
  n.i1 = len;
  n.value = nodes_[a].value.middleCols(c0, len);
  return push(std::move(n));
}

NodeId Tape::transpose(NodeId a) {
  Node n;
  n.op = Op::kTranspose;
  n.in = {a, -1, -1};
  n.value = nodes_[a].value.transpose();
  return push(std::move(n));
}

NodeId Tape::stft_re(NodeId x, const StftConfig& cfg) {
  Node n;
  n.op = Op::kStftRe;
  n.in = {x, -1, -1};
  n.cfg = cfg;
  n.value = stft(row_to_wave(nodes_[x].value), cfg).values.real();
  return push(std::move(n));
}

NodeId Tape::stft_im(NodeId x, const StftConfig& cfg) {
  Node n;
  n.op = Op::kStftIm;
  n.in = {x, -1, -1};
  n.cfg = cfg;
  n.value = stft(row_to_wave(nodes_[x].value), cfg).values.imag();
  return push(std::move(n));
}

NodeId Tape::istft(NodeId re, NodeId im, const StftConfig& cfg) {
  check_same_shape(nodes_[re].value, nodes_[im].value, "istft");
  ComplexSpectrogram spec;
  spec.config = cfg;
  spec.values = nodes_[re].value.cast<std::complex<double>>() +
                std::complex<double>(0.0, 1.0) * nodes_[im].value.cast<std::complex<double>>();
  const Waveform y = nytt::istft(spec);
  Node n;
  n.op = Op::kIstft;
  n.in = {re, im, -1};
  n.cfg = cfg;
  n.value = Eigen::Map<const Eigen::MatrixXd>(y.samples.data(), 1,
                                              static_cast<Eigen::Index>(y.samples.size()));
  return push(std::move(n));
}

namespace {

void check_conv_args(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w,
                     const Eigen::MatrixXd& bias, int c_in, int kernel, int stride,
                     const char* op) {
  if (x.rows() != c_in) throw std::logic_error(std::string(op) + ": x rows != c_in");
  if (w.cols() != static_cast<Eigen::Index>(c_in) * kernel) {
    throw std::logic_error(std::string(op) + ": kernel matrix cols != c_in * K");
  }
  if (bias.rows() != w.rows() || bias.cols() != 1) {
    throw std::logic_error(std::string(op) + ": bias must be c_out x 1");
  }
  if (stride < 1 || kernel < 1) throw std::logic_error(std::string(op) + ": bad stride/kernel");
}

}  // namespace

NodeId Tape::conv1d(NodeId x, NodeId w, NodeId bias, int c_in, int kernel, int stride) {
  const Eigen::MatrixXd& X = nodes_[x].value;
  const Eigen::MatrixXd& W = nodes_[w].value;
  const Eigen::MatrixXd& B = nodes_[bias].value;
  check_conv_args(X, W, B, c_in, kernel, stride, "conv1d");
  const int t_in = static_cast<int>(X.cols());
  if (t_in % stride != 0) throw std::logic_error("conv1d: T must be divisible by stride");
  const int t_out = t_in / stride;
  const int c_out = static_cast<int>(W.rows());

  Eigen::MatrixXd Y = B.replicate(1, t_out);
  Eigen::MatrixXd Xk(c_in, t_out);
  for (int k = 0; k < kernel; ++k) {
    Xk.setZero();
    for (int t = 0; t < t_out; ++t) {
      const int src = stride * t - k;
      if (src >= 0) Xk.col(t) = X.col(src);
    }
    Y.noalias() += W.block(0, k * c_in, c_out, c_in) * Xk;
  }
  Node n;
  n.op = Op::kConv1d;
  n.in = {x, w, bias};
  n.i0 = c_in;
  n.i1 = kernel;
  n.i2 = stride;
  n.value = std::move(Y);
  return push(std::move(n));
}

NodeId Tape::tconv1d(NodeId x, NodeId w, NodeId bias, int c_in, int kernel, int stride) {
  const Eigen::MatrixXd& X = nodes_[x].value;
  const Eigen::MatrixXd& W = nodes_[w].value;
  const Eigen::MatrixXd& B = nodes_[bias].value;
  check_conv_args(X, W, B, c_in, kernel, stride, "tconv1d");
  const int t_in = static_cast<int>(X.cols());
  const int t_out = stride * t_in;
  const int c_out = static_cast<int>(W.rows());

  Eigen::MatrixXd Y = B.replicate(1, t_out);
  for (int k = 0; k < kernel; ++k) {
    const Eigen::MatrixXd Wk_X = W.block(0, k * c_in, c_out, c_in) * X;
    for (int t = 0; t < t_in; ++t) {
      const int dst = stride * t + k;
      if (dst < t_out) Y.col(dst) += Wk_X.col(t);
    }
  }
  Node n;
  n.op = Op::kTconv1d;
  n.in = {x, w, bias};
  n.i0 = c_in;
  n.i1 = kernel;
  n.i2 = stride;
  n.value = std::move(Y);
  return push(std::move(n));
}

const Eigen::MatrixXd& Tape::grad(NodeId id) const {
  const Node& n = nodes_[id];
  if (!n.requires_grad || n.grad.size() == 0) {
    throw std::logic_error("grad: node has no gradient (run backward first)");
  }
  return n.grad;
}

void Tape::backward(NodeId loss) {
  if (nodes_[loss].value.size() != 1) throw std::logic_error("backward: loss must be 1x1");
  for (auto& n : nodes_) {
    if (n.requires_grad) n.grad = Eigen::MatrixXd::Zero(n.value.rows(), n.value.cols());
  }
  if (!nodes_[loss].requires_grad) return;  // no parameters feed the loss
  nodes_[loss].grad(0, 0) = 1.0;
  for (NodeId i = loss; i >= 0; --i) {
    const Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    accumulate(n);
  }
}

void Tape::accumulate(const Node& n) {
  const Eigen::MatrixXd& G = n.grad;
  auto wants = [&](int slot) { return n.in[slot] >= 0 && nodes_[n.in[slot]].requires_grad; };
  auto g = [&](int slot) -> Eigen::MatrixXd& { return nodes_[n.in[slot]].grad; };
  auto v = [&](int slot) -> const Eigen::MatrixXd& { return nodes_[n.in[slot]].value; };

  switch (n.op) {
    case Op::kConst:
    case Op::kParam:
      return;
    case Op::kMatmul:
      if (wants(0)) g(0).noalias() += G * v(1).transpose();
      if (wants(1)) g(1).noalias() += v(0).transpose() * G;
      return;
    case Op::kAdd:
      if (wants(0)) g(0) += G;
      if (wants(1)) g(1) += G;
      return;
    case Op::kSub:
      if (wants(0)) g(0) += G;
      if (wants(1)) g(1) -= G;
      return;
    case Op::kCmul:
      if (wants(0)) g(0).array() += G.array() * v(1).array();
      if (wants(1)) g(1).array() += G.array() * v(0).array();
      return;
    case Op::kCdiv:
      if (wants(0)) g(0).array() += G.array() / v(1).array();
      if (wants(1)) g(1).array() -= G.array() * n.value.array() / v(1).array();
      return;
    case Op::kScale:
      if (wants(0)) g(0) += n.a0 * G;
      return;
    case Op::kAddScalar:
      if (wants(0)) g(0) += G;
      return;
    case Op::kAddColvec:
      if (wants(0)) g(0) += G;
      if (wants(1)) g(1) += G.rowwise().sum();
      return;
    case Op::kTanh:
      if (wants(0)) g(0).array() += G.array() * (1.0 - n.value.array().square());
      return;
    case Op::kSoftplus:
      if (wants(0)) {
        g(0).array() += G.array() * v(0).unaryExpr([](double x) {
                                        return 1.0 / (1.0 + std::exp(-x));
                                      }).array();
      }
      return;
    case Op::kRelu:
      if (wants(0)) g(0).array() += G.array() * (v(0).array() > 0.0).cast<double>();
      return;
    case Op::kSquare:
      if (wants(0)) g(0).array() += 2.0 * G.array() * v(0).array();
      return;
    case Op::kAbs:
      if (wants(0)) g(0).array() += G.array() * v(0).array().sign();
      return;
    case Op::kSqrt:
      if (wants(0)) {
        g(0).array() += G.array() * (n.value.array() > 1e-150)
                                        .select(0.5 / n.value.array().max(1e-150), 0.0);
      }
      return;
    case Op::kLogEps:
      if (wants(0)) g(0).array() += G.array() / (v(0).array() + n.a0);
      return;
    case Op::kMagnitude: {
      // Zero magnitude contributes zero gradient (0 / tiny = 0).
      const Eigen::ArrayXXd denom = n.value.array().max(1e-300);
      if (wants(0)) g(0).array() += G.array() * v(0).array() / denom;
      if (wants(1)) g(1).array() += G.array() * v(1).array() / denom;
      return;
    }
    case Op::kSum:
      if (wants(0)) g(0).array() += G(0, 0);
      return;
    case Op::kMean:
      if (wants(0)) g(0).array() += G(0, 0) / static_cast<double>(v(0).size());
      return;
    case Op::kEmax: {
      const Eigen::ArrayXXd take_a = (v(0).array() >= v(1).array()).cast<double>();
      if (wants(0)) g(0).array() += G.array() * take_a;
      if (wants(1)) g(1).array() += G.array() * (1.0 - take_a);
      return;
    }
    case Op::kMaxScalar:
      if (wants(0)) g(0).array() += G.array() * (v(0).array() > n.a0).cast<double>();
      return;
    case Op::kMinScalar:
      if (wants(0)) g(0).array() += G.array() * (v(0).array() < n.a0).cast<double>();
      return;
    case Op::kRow:
      if (wants(0)) g(0).row(n.i0) += G.row(0);
      return;
    case Op::kCols:
      if (wants(0)) g(0).middleCols(n.i0, n.i1) += G;
      return;
    case Op::kTranspose:
      if (wants(0)) g(0) += G.transpose();
      return;
    case Op::kStftRe:
    case Op::kStftIm: {
      if (!wants(0)) return;
      const StftConfig& cfg = n.cfg;
      const std::vector<double> win = make_window(cfg);
      const int frames = static_cast<int>(G.rows());
      const int fft = cfg.fft_size;
      Eigen::MatrixXd& gx = g(0);
      std::vector<std::complex<double>> a(fft);
      for (int m = 0; m < frames; ++m) {
        std::fill(a.begin(), a.end(), std::complex<double>(0.0, 0.0));
        for (int b = 0; b <= fft / 2; ++b) {
          a[b] = n.op == Op::kStftRe ? std::complex<double>(G(m, b), 0.0)
                                     : std::complex<double>(0.0, G(m, b));
        }
        fft_inplace(a, true);
        // sum_b G e^{+i theta}; Re picks cos for the Re path, -sin for Im.
        const int base = m * cfg.hop_size;
        for (int j = 0; j < cfg.window_size; ++j) {
          gx(0, base + j) += win[j] * a[j].real() * fft;
        }
      }
      return;
    }
    case Op::kIstft: {
      const StftConfig& cfg = n.cfg;
      const std::vector<double> win = make_window(cfg);
      const int frames = static_cast<int>(v(0).rows());
      const int fft = cfg.fft_size;
      const int out_len = static_cast<int>(n.value.cols());
      // Window-square normalizer of the forward overlap-add.
      std::vector<double> norm(out_len, 0.0);
      for (int m = 0; m < frames; ++m) {
        for (int j = 0; j < cfg.window_size; ++j) norm[m * cfg.hop_size + j] += win[j] * win[j];
      }
      std::vector<double> frame(fft, 0.0);
      for (int m = 0; m < frames; ++m) {
        std::fill(frame.begin(), frame.end(), 0.0);
        const int base = m * cfg.hop_size;
        for (int j = 0; j < cfg.window_size; ++j) {
          if (norm[base + j] > 1e-12) {
            frame[j] = win[j] * G(0, base + j) / norm[base + j];
          }
        }
        const auto spec = rfft(frame, fft);
        for (int b = 0; b <= fft / 2; ++b) {
          const double kb = (b == 0 || b == fft / 2) ? 1.0 : 2.0;
          if (wants(0)) g(0)(m, b) += kb / fft * spec[b].real();
          // Im of the edge bins is discarded by the real inverse transform.
          if (wants(1) && b != 0 && b != fft / 2) g(1)(m, b) += 2.0 / fft * spec[b].imag();
        }
      }
      return;
    }
    case Op::kConv1d: {
      const int c_in = n.i0, kernel = n.i1, stride = n.i2;
      const Eigen::MatrixXd& X = v(0);
      const Eigen::MatrixXd& W = v(1);
      const int t_out = static_cast<int>(G.cols());
      const int c_out = static_cast<int>(W.rows());
      if (wants(2)) g(2) += G.rowwise().sum();
      Eigen::MatrixXd Xk(c_in, t_out);
      for (int k = 0; k < kernel; ++k) {
        if (wants(1)) {
          Xk.setZero();
          for (int t = 0; t < t_out; ++t) {
            const int src = stride * t - k;
            if (src >= 0) Xk.col(t) = X.col(src);
          }
          g(1).block(0, k * c_in, c_out, c_in).noalias() += G * Xk.transpose();
        }
        if (wants(0)) {
          const Eigen::MatrixXd GXk = W.block(0, k * c_in, c_out, c_in).transpose() * G;
          for (int t = 0; t < t_out; ++t) {
            const int src = stride * t - k;
            if (src >= 0) g(0).col(src) += GXk.col(t);
          }
        }
      }
      return;
    }
    case Op::kTconv1d: {
      const int c_in = n.i0, kernel = n.i1, stride = n.i2;
      const Eigen::MatrixXd& X = v(0);
      const Eigen::MatrixXd& W = v(1);
      const int t_in = static_cast<int>(X.cols());
      const int t_out = static_cast<int>(G.cols());
      const int c_out = static_cast<int>(W.rows());
      if (wants(2)) g(2) += G.rowwise().sum();
      Eigen::MatrixXd Gk(c_out, t_in);
      for (int k = 0; k < kernel; ++k) {
        Gk.setZero();
        for (int t = 0; t < t_in; ++t) {
          const int dst = stride * t + k;
          if (dst < t_out) Gk.col(t) = G.col(dst);
        }
        if (wants(1)) {
          g(1).block(0, k * c_in, c_out, c_in).noalias() += Gk * X.transpose();
        }
        if (wants(0)) {
          g(0).noalias() += W.block(0, k * c_in, c_out, c_in).transpose() * Gk;
        }
      }
      return;
    }
  }
  throw std::logic_error("accumulate: unhandled op");
}

}  // namespace nytt
