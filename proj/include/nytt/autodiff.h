// Copyright 2026 NyTT-desk Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NYTT_AUTODIFF_H_
#define NYTT_AUTODIFF_H_

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "nytt/stft.h"

namespace nytt {

using NodeId = int;

// Define-by-run reverse-mode tape. Values are computed eagerly when an op is
// recorded; backward() fills gradients for every node reachable from a
// parameter. Waveforms are 1 x n row vectors; spectrograms are a pair of
// frames x bins real matrices (Re, Im).
class Tape {
 public:
  NodeId constant(const Eigen::MatrixXd& v);
  NodeId param(const Eigen::MatrixXd& v);

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId cmul(NodeId a, NodeId b);
  NodeId cdiv(NodeId a, NodeId b);
  NodeId scale(NodeId a, double g);
  NodeId add_scalar(NodeId a, double c);
  // bias is a column vector added to every column of a
  NodeId add_colvec(NodeId a, NodeId bias);

  NodeId tanh_(NodeId a);
  NodeId softplus_(NodeId a);
  NodeId relu_(NodeId a);
  NodeId square_(NodeId a);
  NodeId abs_(NodeId a);
  NodeId sqrt_(NodeId a);
  NodeId log_eps(NodeId a, double eps);
  NodeId magnitude(NodeId re, NodeId im);

  NodeId sum(NodeId a);
  NodeId mean(NodeId a);
  NodeId emax(NodeId a, NodeId b);
  NodeId max_scalar(NodeId a, double c);
  NodeId min_scalar(NodeId a, double c);
  NodeId row(NodeId a, int r);
  NodeId cols(NodeId a, int c0, int len);
  NodeId transpose(NodeId a);

  NodeId stft_re(NodeId x, const StftConfig& cfg);
  NodeId stft_im(NodeId x, const StftConfig& cfg);
  NodeId istft(NodeId re, NodeId im, const StftConfig& cfg);

  // Causal strided convolution: x is C_in x T with T divisible by stride,
  // w is C_out x (C_in * K), bias C_out x 1.
  // y[:, t] = bias + sum_k W_k x[:, stride*t - k], negative indices are zero.
  NodeId conv1d(NodeId x, NodeId w, NodeId bias, int c_in, int kernel, int stride);
  // Transposed counterpart: y[:, stride*t + k] += W_k x[:, t]; output length
  // is stride * T with the overhang dropped.
  NodeId tconv1d(NodeId x, NodeId w, NodeId bias, int c_in, int kernel, int stride);

  const Eigen::MatrixXd& value(NodeId id) const { return nodes_[id].value; }
  const Eigen::MatrixXd& grad(NodeId id) const;
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }
  int size() const { return static_cast<int>(nodes_.size()); }

  // loss must be 1x1; seeds d(loss)/d(loss) = 1 and back-propagates.
  void backward(NodeId loss);

 private:
  enum class Op {
    kConst, kParam, kMatmul, kAdd, kSub, kCmul, kCdiv, kScale, kAddScalar,
    kAddColvec, kTanh, kSoftplus, kRelu, kSquare, kAbs, kSqrt, kLogEps,
    kMagnitude, kSum, kMean, kEmax, kMaxScalar, kMinScalar, kRow, kCols,
    kTranspose, kStftRe, kStftIm, kIstft, kConv1d, kTconv1d,
  };
  struct Node {
    Op op;
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    std::array<NodeId, 3> in{-1, -1, -1};
    double a0 = 0.0;
    int i0 = 0, i1 = 0, i2 = 0;  // op-specific (stride, kernel, c_in, row...)
    StftConfig cfg;
    bool requires_grad = false;
  };

  NodeId push(Node&& n);
  void accumulate(const Node& n);

  std::vector<Node> nodes_;
};

}  // namespace nytt

#endif  // NYTT_AUTODIFF_H_
