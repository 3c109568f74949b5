// Copyright 2026 NyTT-desk Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NYTT_MODEL_H_
#define NYTT_MODEL_H_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "nytt/autodiff.h"
#include "nytt/stft.h"
#include "nytt/wave.h"

namespace nytt {

enum class ArchKind { kComplexMask, kRealMask, kWaveform };
std::string to_string(ArchKind k);
ArchKind arch_from_string(const std::string& s);

struct ModelConfig {
  ArchKind kind = ArchKind::kComplexMask;
  // mask kinds
  StftConfig stft;
  int context = 2;  // +- frames of feature context
  int hidden = 64;  // two hidden layers of this width
  // waveform kind
  int channels1 = 8;
  int channels2 = 12;
  int kernel = 9;
  int stride = 2;   // per stage; two encoder stages -> total stride 4
  int outputs = 1;  // >1 only for the waveform kind (mixture decomposition)
  uint64_t init_seed = 1;

  int total_stride() const { return stride * stride; }
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

// Parameters live in named segments; order is fixed at construction and the
// tape registers them in the same order.
class EnhancerModel {
 public:
  explicit EnhancerModel(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  const std::vector<std::string>& param_names() const { return names_; }
  std::vector<Eigen::MatrixXd>& params() { return params_; }
  const std::vector<Eigen::MatrixXd>& params() const { return params_; }
  int64_t param_count() const;

  struct TapeForward {
    std::vector<NodeId> outputs;    // cropped to the input length
    std::vector<NodeId> param_ids;  // same order as params()
    NodeId mask_re = -1;            // mask kinds: frames x bins
    NodeId mask_im = -1;            // complex-mask only
  };
  TapeForward forward_on_tape(Tape& t, const Waveform& y) const;

  struct ForwardResult {
    std::vector<Waveform> outputs;
    Eigen::MatrixXcd mask;  // mask kinds; empty for the waveform kind
  };
  ForwardResult forward(const Waveform& y) const;
  // outputs[0]: the enhanced estimate
  Waveform enhance(const Waveform& y) const;

 private:
  ModelConfig cfg_;
  std::vector<std::string> names_;
  std::vector<Eigen::MatrixXd> params_;
};

struct OptimizerState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t step_count = 0;
  std::vector<Eigen::MatrixXd> m;
  std::vector<Eigen::MatrixXd> v;

  static OptimizerState for_model(const EnhancerModel& model, double lr);
};

// One Adam update; dimensions of grads must match params.
void optimizer_step(OptimizerState& state, std::vector<Eigen::MatrixXd>& params,
                    const std::vector<Eigen::MatrixXd>& grads);

// Versioned binary container: JSON header, '\0', then raw little-endian
// doubles for parameters and optimizer moments. Bit-exact round trip.
struct Checkpoint {
  ModelConfig config;
  std::vector<Eigen::MatrixXd> params;
  OptimizerState opt;
  bool has_opt = false;
  int epoch = 0;
  std::string fingerprint;
};

void save_checkpoint(const std::string& path, const EnhancerModel& model,
                     const OptimizerState* opt, int epoch, const std::string& fingerprint);
Checkpoint load_checkpoint(const std::string& path);
EnhancerModel model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace nytt

#endif  // NYTT_MODEL_H_
