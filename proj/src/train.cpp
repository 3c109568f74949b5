// Copyright 2026 NyTT-desk Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "nytt/train.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "nytt/autodiff.h"
#include "nytt/dsp.h"
#include "nytt/losses.h"
#include "nytt/rng.h"

namespace nytt {

namespace {

constexpr double kDivergenceLimit = 1e6;
constexpr uint64_t kTagShuffle = 0x5A0FULL;
constexpr uint64_t kTagEpochDraw = 0xE90CULL;
constexpr uint64_t kTagValDraw = 0x7A1DULL;
constexpr uint64_t kTagMixSnr = 0x3117ULL;
constexpr uint64_t kTagIterInit = 0x17E2ULL;
constexpr uint64_t kTagIterTrain = 0x17E3ULL;

void check_common(const std::vector<Waveform>& targets, const TrainConfig& cfg) {
  if (targets.empty()) throw std::invalid_argument("train: empty target list");
  if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (cfg.batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
  if (cfg.learning_rate < 0.0) throw std::invalid_argument("train: negative learning rate");
  if (cfg.validation_size < 0 || cfg.validation_cadence < 1) {
    throw std::invalid_argument("train: bad validation settings");
  }
  if (cfg.validation_size >= static_cast<int>(targets.size())) {
    throw std::invalid_argument("train: validation split leaves no training items");
  }
  if (!is_pairwise_loss(cfg.loss)) {
    throw std::invalid_argument("train: unknown pairwise loss " + cfg.loss);
  }
}

void check_divergence(double loss, int epoch, int item) {
  if (!std::isfinite(loss) || loss > kDivergenceLimit) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "training diverged at epoch %d item %d: loss %g", epoch,
                  item, loss);
    throw std::runtime_error(buf);
  }
}

void accumulate_grads(const Tape& t, const std::vector<NodeId>& param_ids,
                      std::vector<Eigen::MatrixXd>& acc) {
  if (acc.empty()) {
    for (NodeId id : param_ids) acc.push_back(t.grad(id));
    return;
  }
  for (size_t i = 0; i < param_ids.size(); ++i) acc[i] += t.grad(param_ids[i]);
}

void write_artifacts(const TrainConfig& cfg, const TrainResult& res, const EnhancerModel& last,
                     const OptimizerState& opt) {
  if (cfg.checkpoint_dir.empty()) return;
  std::filesystem::create_directories(cfg.checkpoint_dir);
  const std::string fp = config_fingerprint(cfg.to_json());
  save_checkpoint(cfg.checkpoint_dir + "/best.ckpt", res.best_model, nullptr, res.best_epoch, fp);
  save_checkpoint(cfg.checkpoint_dir + "/last.ckpt", last, &opt,
                  static_cast<int>(res.train_loss.size()), fp);
  std::ofstream csv(cfg.checkpoint_dir + "/curves.csv");
  csv << res.curves_csv();
}

// Shared epoch scaffolding for train and run_mixit. step(epoch, item_index)
// returns the per-item loss after accumulating gradients.
template <typename StepFn, typename ValFn>
TrainResult run_epochs(const EnhancerModel& init, int n_train, const TrainConfig& cfg,
                       StepFn step, ValFn val_fn) {
  EnhancerModel model = init;
  OptimizerState opt = OptimizerState::for_model(model, cfg.learning_rate);
  TrainResult res(init);
  double best_val = std::numeric_limits<double>::infinity();

  std::vector<int> order(static_cast<size_t>(n_train));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive_stream(cfg.seed, {kTagShuffle, static_cast<uint64_t>(epoch)}));
    for (size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<size_t>(shuffle_rng.uniform_int(i))]);
    }

    double epoch_loss = 0.0;
    size_t cursor = 0;
    while (cursor < order.size()) {
      const size_t end = std::min(cursor + static_cast<size_t>(cfg.batch_size), order.size());
      std::vector<Eigen::MatrixXd> grads;
      for (size_t k = cursor; k < end; ++k) {
        const double item_loss = step(model, epoch, order[k], grads);
        check_divergence(item_loss, epoch, order[k]);
        epoch_loss += item_loss;
      }
      const double inv = 1.0 / static_cast<double>(end - cursor);
      for (auto& g : grads) g *= inv;
      optimizer_step(opt, model.params(), grads);
      cursor = end;
    }
    res.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));

    const bool do_val = cfg.validation_size > 0 &&
                        (epoch % cfg.validation_cadence == 0 || epoch == cfg.epochs);
    if (do_val) {
      const double v = val_fn(model);
      res.val_loss.emplace_back(epoch, v);
      if (v < best_val) {
        best_val = v;
        res.best_epoch = epoch;
        res.best_model.params() = model.params();
      }
      if (cfg.patience > 0 && epoch - res.best_epoch >= cfg.patience) break;
    }
  }

  if (cfg.validation_size == 0) {
    // No selection split: the final model stands in for the best one.
    res.best_epoch = static_cast<int>(res.train_loss.size());
    res.best_model.params() = model.params();
  }
  write_artifacts(cfg, res, model, opt);
  return res;
}

}  // namespace

std::string to_string(TrainMode m) {
  switch (m) {
    case TrainMode::kCTT: return "ctt";
    case TrainMode::kNyTT: return "nytt";
    case TrainMode::kMixIT: return "mixit";
  }
  throw std::logic_error("unknown train mode");
}

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "ctt") return TrainMode::kCTT;
  if (s == "nytt") return TrainMode::kNyTT;
  if (s == "mixit") return TrainMode::kMixIT;
  throw std::invalid_argument("unknown train mode: " + s);
}

nlohmann::json TrainConfig::to_json() const {
  return {{"mode", to_string(mode)},
          {"loss", loss},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"seed", seed},
          {"add_spec", add_spec.to_json()},
          {"validation_size", validation_size},
          {"validation_cadence", validation_cadence},
          {"patience", patience}};
}

// Only mode and add_spec are mandatory; everything else falls back to the
// struct defaults so configs stay minimal.
TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.mode = train_mode_from_string(j.at("mode").get<std::string>());
  c.loss = j.value("loss", c.loss);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.seed = j.value("seed", c.seed);
  c.add_spec = CorruptionSpec::from_json(j.at("add_spec"));
  c.validation_size = j.value("validation_size", c.validation_size);
  c.validation_cadence = j.value("validation_cadence", c.validation_cadence);
  c.patience = j.value("patience", c.patience);
  return c;
}

std::string TrainResult::curves_csv() const {
  std::string out = "epoch,train_loss,val_loss\n";
  char buf[80];
  for (size_t e = 0; e < train_loss.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,", e + 1, train_loss[e]);
    out += buf;
    for (const auto& [epoch, v] : val_loss) {
      if (epoch == static_cast<int>(e + 1)) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out += buf;
        break;
      }
    }
    out += '\n';
  }
  return out;
}

TrainResult train(const EnhancerModel& init, const std::vector<Waveform>& targets,
                  const TrainConfig& cfg) {
  check_common(targets, cfg);
  if (cfg.mode == TrainMode::kMixIT) {
    throw std::invalid_argument("train: MixIT runs through run_mixit");
  }
  CorruptionSpec spec = cfg.add_spec;
  prepare_spec(spec, targets.front().sample_rate_hz);

  const int n_train = static_cast<int>(targets.size()) - cfg.validation_size;
  std::vector<ValPair> val_pairs;
  for (int i = 0; i < cfg.validation_size; ++i) {
    const Waveform& tgt = targets[static_cast<size_t>(n_train + i)];
    val_pairs.emplace_back(
        corrupt(tgt, spec, derive_stream(cfg.seed, {kTagValDraw}), static_cast<uint64_t>(i))
            .corrupted,
        tgt);
  }

  auto step = [&](EnhancerModel& model, int epoch, int idx,
                  std::vector<Eigen::MatrixXd>& grads) {
    const Waveform& tgt = targets[static_cast<size_t>(idx)];
    const Waveform y = corrupt(tgt, spec,
                               derive_stream(cfg.seed, {kTagEpochDraw,
                                                        static_cast<uint64_t>(epoch)}),
                               static_cast<uint64_t>(idx))
                           .corrupted;
    Tape t;
    const auto f = model.forward_on_tape(t, y);
    const NodeId loss = tape_pairwise(t, f.outputs[0], tgt, cfg.loss);
    const double value = t.value(loss)(0, 0);
    t.backward(loss);
    accumulate_grads(t, f.param_ids, grads);
    return value;
  };
  auto val_fn = [&](const EnhancerModel& model) { return validate(model, val_pairs, cfg.loss); };
  return run_epochs(init, n_train, cfg, step, val_fn);
}

TrainResult run_mixit(const EnhancerModel& init, const std::vector<Waveform>& targets,
                      const TrainConfig& cfg) {
  check_common(targets, cfg);
  if (init.config().outputs != 3) {
    throw std::invalid_argument("run_mixit: model must emit three outputs");
  }
  const CorruptionSpec& spec = cfg.add_spec;
  if (spec.kind != CorruptionSpec::Kind::kAdditive || !spec.noise.has_value()) {
    throw std::invalid_argument("run_mixit: add_spec must be additive noise");
  }

  // One fresh (snr, noise) draw per target per epoch; 0 is the frozen
  // validation epoch.
  auto draw_pair = [&](const Waveform& x, int epoch, int idx) {
    Rng rng(derive_stream(cfg.seed, {kTagMixSnr, static_cast<uint64_t>(epoch),
                                     static_cast<uint64_t>(idx)}));
    const double snr = draw_snr(spec.snr_db, rng);
    const uint64_t noise_seed =
        epoch == 0 ? derive_stream(cfg.seed, {kTagValDraw})
                   : derive_stream(cfg.seed, {kTagEpochDraw, static_cast<uint64_t>(epoch)});
    const Waveform noise = generate_noise(*spec.noise, x.duration_s(), noise_seed,
                                          static_cast<uint64_t>(idx), x.sample_rate_hz);
    return mix_at_snr(x, noise, snr);
  };

  const int n_train = static_cast<int>(targets.size()) - cfg.validation_size;
  struct MixVal {
    Waveform y, x, n_add;
  };
  std::vector<MixVal> val_items;
  for (int i = 0; i < cfg.validation_size; ++i) {
    const Waveform& x = targets[static_cast<size_t>(n_train + i)];
    MixResult mix = draw_pair(x, 0, i);
    val_items.push_back({std::move(mix.mixture), x, std::move(mix.scaled_noise)});
  }

  std::vector<int> assignments;
  auto step = [&](EnhancerModel& model, int epoch, int idx,
                  std::vector<Eigen::MatrixXd>& grads) {
    const Waveform& x = targets[static_cast<size_t>(idx)];
    const MixResult mix = draw_pair(x, epoch, idx);
    Tape t;
    const auto f = model.forward_on_tape(t, mix.mixture);
    int assignment = 0;
    const NodeId loss = tape_mixit(t, f.outputs[0], f.outputs[1], f.outputs[2], x,
                                   mix.scaled_noise, cfg.loss, &assignment);
    assignments.push_back(assignment);
    const double value = t.value(loss)(0, 0);
    t.backward(loss);
    accumulate_grads(t, f.param_ids, grads);
    return value;
  };
  auto val_fn = [&](const EnhancerModel& model) {
    double sum = 0.0;
    for (const MixVal& item : val_items) {
      const auto fwd = model.forward(item.y);
      sum += mixit_loss(fwd.outputs[0], fwd.outputs[1], fwd.outputs[2], item.x, item.n_add,
                        cfg.loss)
                 .loss.scalar;
    }
    return sum / static_cast<double>(val_items.size());
  };
  TrainResult res = run_epochs(init, n_train, cfg, step, val_fn);
  res.mixit_assignments = std::move(assignments);
  return res;
}

nlohmann::json IterNyttConfig::to_json() const {
  nlohmann::json j{{"model", model.to_json()},
                   {"train", train.to_json()},
                   {"iterations", iterations},
                   {"warm_start", warm_start}};
  if (later_add_spec.has_value()) j["later_add_spec"] = later_add_spec->to_json();
  return j;
}

IterNyttConfig IterNyttConfig::from_json(const nlohmann::json& j) {
  IterNyttConfig c;
  c.model = ModelConfig::from_json(j.at("model"));
  c.train = TrainConfig::from_json(j.at("train"));
  c.iterations = j.value("iterations", c.iterations);
  c.warm_start = j.value("warm_start", c.warm_start);
  if (j.contains("later_add_spec")) {
    c.later_add_spec = CorruptionSpec::from_json(j.at("later_add_spec"));
  }
  return c;
}

std::vector<IterationState> run_iternytt(const std::vector<Waveform>& x,
                                         const IterNyttConfig& cfg) {
  if (cfg.iterations < 1) throw std::invalid_argument("run_iternytt: iterations must be >= 1");
  if (x.empty()) throw std::invalid_argument("run_iternytt: empty corpus");

  CorruptionSpec later = cfg.later_add_spec.value_or(cfg.train.add_spec);
  if (!cfg.later_add_spec.has_value() &&
      later.kind == CorruptionSpec::Kind::kAdditive && !later.is_noop()) {
    later.snr_db = SnrDistribution::grid({0.0, 5.0, 10.0, 15.0});
  }

  const uint64_t hash_x = hash_waveforms(x);
  std::vector<IterationState> states;
  std::vector<Waveform> targets = x;
  for (int i = 1; i <= cfg.iterations; ++i) {
    TrainConfig tcfg = cfg.train;
    ModelConfig mcfg = cfg.model;
    if (i >= 2) {
      // Iteration 1 is untouched so a one-iteration run is plain NyTT.
      tcfg.seed = derive_stream(cfg.train.seed, {kTagIterTrain, static_cast<uint64_t>(i)});
      tcfg.add_spec = later;
      mcfg.init_seed = derive_stream(cfg.model.init_seed, {kTagIterInit,
                                                           static_cast<uint64_t>(i)});
    }
    if (!tcfg.checkpoint_dir.empty()) {
      tcfg.checkpoint_dir += "/iter_" + std::to_string(i);
    }
    const EnhancerModel init = (cfg.warm_start && i >= 2) ? states.back().result.best_model
                                                          : EnhancerModel(mcfg);

    IterationState state(i, train(init, targets, tcfg));
    state.input_hash = hash_x;
    for (const Waveform& orig : x) {
      state.enhanced_targets.push_back(state.result.best_model.enhance(orig));
    }
    targets = state.enhanced_targets;
    states.push_back(std::move(state));
  }
  return states;
}

Waveform enhance(const EnhancerModel& model, const Waveform& y) { return model.enhance(y); }

double validate(const EnhancerModel& model, const std::vector<ValPair>& pairs,
                const std::string& loss_name) {
  if (pairs.empty()) throw std::invalid_argument("validate: empty split");
  double sum = 0.0;
  for (const auto& [y, tgt] : pairs) {
    sum += pairwise_objective(model.enhance(y), tgt, loss_name).scalar;
  }
  return sum / static_cast<double>(pairs.size());
}

uint64_t hash_waveforms(const std::vector<Waveform>& waves) {
  uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
  auto mix = [&h](uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xFF;
      h *= 0x100000001B3ULL;
    }
  };
  mix(waves.size());
  for (const Waveform& w : waves) {
    mix(static_cast<uint64_t>(w.sample_rate_hz));
    mix(w.samples.size());
    for (double s : w.samples) {
      uint64_t bits;
      static_assert(sizeof(bits) == sizeof(s));
      std::memcpy(&bits, &s, sizeof(bits));
      mix(bits);
    }
  }
  return h;
}

std::string config_fingerprint(const nlohmann::json& j) {
  const std::string dump = j.dump();
  uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace nytt
