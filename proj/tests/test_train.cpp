// Copyright 2026 NyTT-desk Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <stdexcept>

#include "nytt/losses.h"
#include "nytt/model.h"
#include "nytt/synthesis.h"
#include "nytt/train.h"
#include "nytt/wave.h"

using namespace nytt;

namespace {

ModelConfig toy_model() {
  ModelConfig cfg;
  cfg.kind = ArchKind::kWaveform;
  cfg.channels1 = 4;
  cfg.channels2 = 6;
  cfg.kernel = 5;
  cfg.stride = 2;
  cfg.init_seed = 3;
  return cfg;
}

TrainConfig toy_train(int epochs = 4) {
  TrainConfig cfg;
  cfg.mode = TrainMode::kNyTT;
  cfg.loss = "mse_time";
  cfg.epochs = epochs;
  cfg.batch_size = 2;
  cfg.learning_rate = 1e-3;
  cfg.seed = 77;
  cfg.add_spec = CorruptionSpec::additive(make_noise_family("band", Partition::kAdd),
                                          SnrDistribution::range(-5.0, 5.0));
  cfg.validation_size = 2;
  cfg.validation_cadence = 1;
  return cfg;
}

std::vector<Waveform> toy_corpus(int n = 8) { return generate_clean_corpus(n, 0.25, 11); }

bool params_equal(const EnhancerModel& a, const EnhancerModel& b) {
  if (a.params().size() != b.params().size()) return false;
  for (size_t i = 0; i < a.params().size(); ++i) {
    if ((a.params()[i] - b.params()[i]).norm() != 0.0) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("frozen optimizer keeps the initialization") {
  const auto corpus = toy_corpus();
  EnhancerModel init((toy_model()));
  TrainConfig cfg = toy_train(1);
  cfg.learning_rate = 0.0;
  const TrainResult res = train(init, corpus, cfg);
  CHECK(res.best_epoch == 1);
  CHECK(params_equal(res.best_model, init));
}

TEST_CASE("training reduces the loss on a toy corpus") {
  const auto corpus = toy_corpus();
  const TrainResult res = train(EnhancerModel(toy_model()), corpus, toy_train(8));
  REQUIRE(res.train_loss.size() == 8);
  CHECK(res.train_loss.back() < res.train_loss.front());
}

TEST_CASE("identical seeds give identical runs") {
  const auto corpus = toy_corpus();
  const TrainResult a = train(EnhancerModel(toy_model()), corpus, toy_train());
  const TrainResult b = train(EnhancerModel(toy_model()), corpus, toy_train());
  REQUIRE(a.train_loss.size() == b.train_loss.size());
  for (size_t i = 0; i < a.train_loss.size(); ++i) CHECK(a.train_loss[i] == b.train_loss[i]);
  REQUIRE(a.val_loss.size() == b.val_loss.size());
  for (size_t i = 0; i < a.val_loss.size(); ++i) CHECK(a.val_loss[i] == b.val_loss[i]);
  CHECK(params_equal(a.best_model, b.best_model));

  TrainConfig other = toy_train();
  other.seed = 78;
  const TrainResult c = train(EnhancerModel(toy_model()), corpus, other);
  CHECK(c.train_loss.front() != a.train_loss.front());
}

TEST_CASE("clean-target and noisy-target modes share one path") {
  // Same targets, same seed: the mode label alone must not change a bit.
  const auto corpus = toy_corpus();
  TrainConfig nytt = toy_train();
  TrainConfig ctt = toy_train();
  ctt.mode = TrainMode::kCTT;
  const TrainResult a = train(EnhancerModel(toy_model()), corpus, nytt);
  const TrainResult b = train(EnhancerModel(toy_model()), corpus, ctt);
  CHECK(params_equal(a.best_model, b.best_model));
  for (size_t i = 0; i < a.train_loss.size(); ++i) CHECK(a.train_loss[i] == b.train_loss[i]);
}

TEST_CASE("best epoch attains the minimum validation loss") {
  const auto corpus = toy_corpus();
  const TrainResult res = train(EnhancerModel(toy_model()), corpus, toy_train(6));
  REQUIRE_FALSE(res.val_loss.empty());
  double min_val = res.val_loss.front().second;
  int first_min_epoch = res.val_loss.front().first;
  for (const auto& [epoch, v] : res.val_loss) {
    if (v < min_val) {
      min_val = v;
      first_min_epoch = epoch;
    }
  }
  CHECK(res.best_epoch == first_min_epoch);
  for (const auto& [epoch, v] : res.val_loss) CHECK(min_val <= v);
}

TEST_CASE("divergence guard") {
  const auto corpus = toy_corpus();
  TrainConfig cfg = toy_train(4);
  cfg.learning_rate = 1e8;  // explodes after the first update
  CHECK_THROWS_AS(train(EnhancerModel(toy_model()), corpus, cfg), std::runtime_error);
}

TEST_CASE("config validation") {
  const auto corpus = toy_corpus();
  EnhancerModel init((toy_model()));
  TrainConfig cfg = toy_train();
  cfg.epochs = 0;
  CHECK_THROWS_AS(train(init, corpus, cfg), std::invalid_argument);
  cfg = toy_train();
  cfg.batch_size = 0;
  CHECK_THROWS_AS(train(init, corpus, cfg), std::invalid_argument);
  cfg = toy_train();
  cfg.loss = "mixit";  // not pairwise
  CHECK_THROWS_AS(train(init, corpus, cfg), std::invalid_argument);
  cfg = toy_train();
  cfg.validation_size = static_cast<int>(corpus.size());
  CHECK_THROWS_AS(train(init, corpus, cfg), std::invalid_argument);
  cfg = toy_train();
  cfg.mode = TrainMode::kMixIT;
  CHECK_THROWS_AS(train(init, corpus, cfg), std::invalid_argument);
  CHECK_THROWS_AS(train(init, {}, toy_train()), std::invalid_argument);
}

TEST_CASE("validate operation") {
  EnhancerModel model((toy_model()));  // identity at init
  const auto corpus = toy_corpus(4);
  std::vector<ValPair> pairs;
  for (const auto& w : corpus) pairs.emplace_back(w, w);
  CHECK(validate(model, pairs, "mse_time") == 0.0);

  // Mean of per-pair losses.
  std::vector<ValPair> mixed;
  mixed.emplace_back(corpus[0], corpus[1]);
  mixed.emplace_back(corpus[2], corpus[3]);
  const double expected = 0.5 * (pairwise_objective(corpus[0], corpus[1], "mse_time").scalar +
                                 pairwise_objective(corpus[2], corpus[3], "mse_time").scalar);
  CHECK(validate(model, mixed, "mse_time") == doctest::Approx(expected).epsilon(1e-12));
  CHECK(validate(model, mixed, "mse_time") == validate(model, mixed, "mse_time"));
  CHECK_THROWS_AS(validate(model, {}, "mse_time"), std::invalid_argument);
}

TEST_CASE("enhance free function is a pure forward pass") {
  EnhancerModel model((toy_model()));
  const Waveform y = toy_corpus(1).front();
  const Waveform a = enhance(model, y);
  const Waveform b = enhance(model, y);
  REQUIRE(a.samples.size() == y.samples.size());
  for (size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i] == b.samples[i]);
    CHECK(a.samples[i] == y.samples[i]);  // identity at init
  }
}

TEST_CASE("mixit training") {
  ModelConfig mc = toy_model();
  mc.outputs = 3;
  const auto corpus = toy_corpus();
  TrainConfig cfg = toy_train(10);
  cfg.mode = TrainMode::kMixIT;
  // Fixed mixing level keeps the per-epoch loss scale comparable; the noise
  // waveform itself is still drawn fresh each epoch.
  cfg.add_spec.snr_db = SnrDistribution::fixed(0.0);
  cfg.learning_rate = 2e-3;

  const TrainResult res = run_mixit(EnhancerModel(mc), corpus, cfg);
  const int n_train = static_cast<int>(corpus.size()) - cfg.validation_size;
  REQUIRE(res.mixit_assignments.size() == static_cast<size_t>(cfg.epochs * n_train));
  for (int a : res.mixit_assignments) CHECK((a == 1 || a == 2));
  auto mean3 = [&](size_t lo) {
    return (res.train_loss[lo] + res.train_loss[lo + 1] + res.train_loss[lo + 2]) / 3.0;
  };
  CHECK(mean3(res.train_loss.size() - 3) < mean3(0));

  const TrainResult rerun = run_mixit(EnhancerModel(mc), corpus, cfg);
  CHECK(params_equal(res.best_model, rerun.best_model));
  CHECK(res.mixit_assignments == rerun.mixit_assignments);

  // A single-output model cannot be trained with the mixture objective.
  CHECK_THROWS_AS(run_mixit(EnhancerModel(toy_model()), corpus, cfg), std::invalid_argument);
  TrainConfig bad = cfg;
  bad.add_spec = CorruptionSpec::noop();
  CHECK_THROWS_AS(run_mixit(EnhancerModel(mc), corpus, bad), std::invalid_argument);
}

TEST_CASE("iterative retargeting") {
  const auto corpus = toy_corpus(6);
  IterNyttConfig cfg;
  cfg.model = toy_model();
  cfg.train = toy_train(3);
  cfg.train.validation_size = 1;
  cfg.iterations = 2;

  SUBCASE("one iteration equals plain training") {
    IterNyttConfig one = cfg;
    one.iterations = 1;
    const auto states = run_iternytt(corpus, one);
    REQUIRE(states.size() == 1);
    const TrainResult plain = train(EnhancerModel(cfg.model), corpus, cfg.train);
    CHECK(params_equal(states[0].result.best_model, plain.best_model));
    CHECK(states[0].result.best_epoch == plain.best_epoch);
  }

  SUBCASE("identity model is a fixed point and inputs never change") {
    IterNyttConfig frozen = cfg;
    frozen.iterations = 3;
    frozen.train.learning_rate = 0.0;
    const auto states = run_iternytt(corpus, frozen);
    REQUIRE(states.size() == 3);
    const uint64_t hx = hash_waveforms(corpus);
    for (const auto& st : states) {
      CHECK(st.input_hash == hx);
      CHECK(hash_waveforms(st.enhanced_targets) == hx);  // identity: targets unchanged
    }
  }

  SUBCASE("deterministic across reruns") {
    const auto a = run_iternytt(corpus, cfg);
    const auto b = run_iternytt(corpus, cfg);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
      CHECK(hash_waveforms(a[i].enhanced_targets) == hash_waveforms(b[i].enhanced_targets));
      CHECK(params_equal(a[i].result.best_model, b[i].result.best_model));
    }
    // Fresh models per iteration: iteration 2 differs from iteration 1.
    CHECK_FALSE(params_equal(a[0].result.best_model, a[1].result.best_model));
  }

  CHECK_THROWS_AS(run_iternytt({}, cfg), std::invalid_argument);
  IterNyttConfig bad = cfg;
  bad.iterations = 0;
  CHECK_THROWS_AS(run_iternytt(corpus, bad), std::invalid_argument);
}

TEST_CASE("checkpoint artifacts and loss curves") {
  namespace fs = std::filesystem;
  const std::string dir = "test_train_artifacts";
  fs::remove_all(dir);
  const auto corpus = toy_corpus();
  TrainConfig cfg = toy_train(3);
  cfg.checkpoint_dir = dir;
  const TrainResult res = train(EnhancerModel(toy_model()), corpus, cfg);

  REQUIRE(fs::exists(dir + "/best.ckpt"));
  REQUIRE(fs::exists(dir + "/last.ckpt"));
  REQUIRE(fs::exists(dir + "/curves.csv"));
  const Checkpoint best = load_checkpoint(dir + "/best.ckpt");
  CHECK(best.epoch == res.best_epoch);
  CHECK(best.fingerprint == config_fingerprint(cfg.to_json()));
  const EnhancerModel restored = model_from_checkpoint(best);
  CHECK(params_equal(restored, res.best_model));
  const Checkpoint last = load_checkpoint(dir + "/last.ckpt");
  CHECK(last.has_opt);
  CHECK(last.opt.step_count > 0);

  const std::string csv = res.curves_csv();
  CHECK(csv.rfind("epoch,train_loss,val_loss\n", 0) == 0);
  size_t rows = 0;
  for (char c : csv) rows += c == '\n' ? 1 : 0;
  CHECK(rows == res.train_loss.size() + 1);
  fs::remove_all(dir);
}

TEST_CASE("hashes and fingerprints") {
  const auto corpus = toy_corpus(2);
  const uint64_t h = hash_waveforms(corpus);
  CHECK(h == hash_waveforms(corpus));
  auto tweaked = corpus;
  tweaked[1].samples[5] += 1e-12;
  CHECK(h != hash_waveforms(tweaked));
  auto rate = corpus;
  rate[0].sample_rate_hz = 8000;
  CHECK(h != hash_waveforms(rate));

  const nlohmann::json a = {{"x", 1}};
  const nlohmann::json b = {{"x", 2}};
  CHECK(config_fingerprint(a) == config_fingerprint(a));
  CHECK(config_fingerprint(a) != config_fingerprint(b));
  CHECK(config_fingerprint(a).size() == 16);
}

TEST_CASE("train config json round trip") {
  TrainConfig cfg = toy_train(9);
  cfg.mode = TrainMode::kCTT;
  cfg.patience = 5;
  const TrainConfig back = TrainConfig::from_json(cfg.to_json());
  CHECK(back.mode == cfg.mode);
  CHECK(back.loss == cfg.loss);
  CHECK(back.epochs == cfg.epochs);
  CHECK(back.batch_size == cfg.batch_size);
  CHECK(back.learning_rate == cfg.learning_rate);
  CHECK(back.seed == cfg.seed);
  CHECK(back.validation_size == cfg.validation_size);
  CHECK(back.patience == cfg.patience);
  CHECK(back.add_spec.to_json() == cfg.add_spec.to_json());

  IterNyttConfig icfg;
  icfg.model = toy_model();
  icfg.train = cfg;
  icfg.iterations = 4;
  icfg.later_add_spec = CorruptionSpec::additive(make_noise_family("tonal", Partition::kAdd),
                                                 SnrDistribution::grid({0.0, 5.0}));
  const IterNyttConfig iback = IterNyttConfig::from_json(icfg.to_json());
  CHECK(iback.iterations == 4);
  CHECK(iback.later_add_spec.has_value());
  CHECK(iback.later_add_spec->to_json() == icfg.later_add_spec->to_json());
  CHECK(iback.model.to_json() == icfg.model.to_json());
  CHECK_THROWS_AS(train_mode_from_string("nope"), std::invalid_argument);
}
