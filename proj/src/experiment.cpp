// Copyright 2026 NyTT-desk Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "nytt/experiment.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "nytt/losses.h"
#include "nytt/metrics.h"
#include "nytt/rng.h"

namespace fs = std::filesystem;

namespace nytt {

namespace {

constexpr uint64_t kTagTrainCorpus = 0x7CA1ULL;
constexpr uint64_t kTagTestCorpus = 0x7CB2ULL;
constexpr uint64_t kTagObsDraw = 0x0B5DULL;
constexpr uint64_t kTagTestDraw = 0x7E5DULL;
constexpr uint64_t kTagTrainRun = 0x7124ULL;
constexpr uint64_t kTagStage1 = 0x57A6ULL;
constexpr uint64_t kTagTriplet = 0x7219ULL;
constexpr uint64_t kTagModelInit = 0x30D5ULL;

const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> k{"unprocessed", "ctt", "nytt", "mixit", "iternytt"};
  return k;
}

bool is_volume_method(const std::string& m) { return m.rfind("volume_", 0) == 0; }

std::string format_g(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '.' || c == '=' || c == '+' || c == '-';
    out += ok ? c : '_';
  }
  return out;
}

nlohmann::json row_to_json(const ResultRow& r) {
  return {{"condition", r.condition}, {"seed", r.seed},     {"method", r.method},
          {"metrics", r.metrics},     {"failed", r.failed}, {"error", r.error},
          {"provenance", r.provenance}};
}

ResultRow row_from_json(const nlohmann::json& j) {
  ResultRow r;
  r.condition = j.at("condition").get<std::string>();
  r.seed = j.at("seed").get<uint64_t>();
  r.method = j.at("method").get<std::string>();
  r.metrics = j.at("metrics").get<std::map<std::string, double>>();
  r.failed = j.at("failed").get<bool>();
  r.error = j.at("error").get<std::string>();
  r.provenance = j.at("provenance").get<std::string>();
  return r;
}

// Clean references plus everything derived from them for one (config, seed).
struct CellData {
  std::vector<Waveform> x_train;
  std::vector<Waveform> test_inputs;
  AuditedReferences train_refs;
  AuditedReferences test_refs;
  DatasetManifest obs_manifest;
  DatasetManifest test_manifest;
};

CellData make_cell_data(const ExperimentConfig& cfg, uint64_t seed) {
  std::vector<Waveform> clean_train =
      generate_clean_corpus(cfg.train_items, cfg.item_s, derive_stream(seed, {kTagTrainCorpus}));
  std::vector<Waveform> clean_test =
      generate_clean_corpus(cfg.test_items, cfg.item_s, derive_stream(seed, {kTagTestCorpus}));
  Dataset obs = build_dataset(clean_train, cfg.obs_spec, derive_stream(seed, {kTagObsDraw}));
  Dataset test = build_dataset(clean_test, cfg.test_spec, derive_stream(seed, {kTagTestDraw}));
  return CellData{std::move(obs.targets),
                  std::move(test.targets),
                  AuditedReferences(std::move(clean_train)),
                  AuditedReferences(std::move(clean_test)),
                  std::move(obs.manifest),
                  std::move(test.manifest)};
}

std::map<std::string, double> eval_against(const std::vector<Waveform>& estimates,
                                           const std::vector<Waveform>& references) {
  std::vector<EvalPair> pairs;
  char id[32];
  for (size_t i = 0; i < estimates.size(); ++i) {
    std::snprintf(id, sizeof(id), "item_%05zu", i);
    pairs.push_back({id, estimates[i], references[i]});
  }
  const MetricsReport rep = evaluate_corpus(pairs, {"si_sdr", "lsd"});
  return {{"si_sdr_db", rep.aggregate.at("si_sdr")}, {"lsd", rep.aggregate.at("lsd")}};
}

std::vector<Waveform> enhance_all(const EnhancerModel& model, const std::vector<Waveform>& in) {
  std::vector<Waveform> out;
  out.reserve(in.size());
  for (const Waveform& y : in) out.push_back(model.enhance(y));
  return out;
}

// Guard object: lock on entry, unlock on every exit path.
class ScopedLock {
 public:
  ScopedLock(AuditedReferences& a, AuditedReferences& b) : a_(a), b_(b) {
    a_.lock();
    b_.lock();
  }
  ~ScopedLock() {
    a_.unlock();
    b_.unlock();
  }

 private:
  AuditedReferences& a_;
  AuditedReferences& b_;
};

TrainConfig cell_train_config(const ExperimentConfig& cfg, uint64_t seed, TrainMode mode,
                              const std::string& ckpt_dir, size_t n_targets) {
  TrainConfig tc = cfg.train;
  tc.mode = mode;
  tc.seed = derive_stream(seed, {kTagTrainRun});
  tc.checkpoint_dir = ckpt_dir;
  // Tiny corpora (volume arms, smoke grids) still need a non-degenerate split.
  if (tc.validation_size >= static_cast<int>(n_targets)) {
    tc.validation_size = std::max(1, static_cast<int>(n_targets) / 4);
  }
  return tc;
}

ModelConfig cell_model_config(const ExperimentConfig& cfg, uint64_t seed, uint64_t stage) {
  ModelConfig mc = cfg.model;
  mc.init_seed = derive_stream(seed, {kTagModelInit, cfg.model.init_seed, stage});
  return mc;
}

std::string cell_id_for(const ExperimentConfig& cfg, const std::string& condition, uint64_t seed,
                        const std::string& method) {
  return sanitize(cfg.name + "_" + condition + "_s" + std::to_string(seed) + "_" + method);
}

std::string cell_fingerprint(const ExperimentConfig& cfg, const std::string& condition,
                             uint64_t seed, const std::string& method) {
  return config_fingerprint(nlohmann::json{{"experiment", cfg.to_json()},
                                           {"condition", condition},
                                           {"seed", seed},
                                           {"method", method}});
}

// Computes the rows of one grid cell; throws on failure (caller records it).
std::vector<ResultRow> compute_cell(const ExperimentConfig& cfg, const std::string& condition,
                                    uint64_t seed, const std::string& method,
                                    const std::string& cell_id, const std::string& provenance) {
  CellData data = make_cell_data(cfg, seed);
  const std::map<std::string, double> unproc = eval_against(data.test_inputs, data.test_refs.get());
  const std::string ckpt_dir =
      cfg.save_checkpoints ? cfg.out_dir + "/cells/" + cell_id + "_ckpt" : "";

  auto make_row = [&](const std::string& row_method, std::map<std::string, double> metrics) {
    ResultRow row;
    row.condition = condition;
    row.seed = seed;
    row.method = row_method;
    row.metrics = std::move(metrics);
    row.metrics["unprocessed_si_sdr_db"] = unproc.at("si_sdr_db");
    row.metrics["improvement_db"] = row.metrics.at("si_sdr_db") - unproc.at("si_sdr_db");
    row.provenance = provenance;
    return row;
  };

  if (!cfg.out_dir.empty()) {
    nlohmann::json manifests{{"obs", data.obs_manifest.to_json()},
                             {"test", data.test_manifest.to_json()}};
    std::ofstream out(cfg.out_dir + "/cells/" + cell_id + "_manifest.json");
    out << manifests.dump(2) << '\n';
  }

  if (method == "unprocessed") {
    return {make_row(method, unproc)};
  }

  if (method == "ctt" || method == "nytt") {
    const bool supervised = method == "ctt";
    const std::vector<Waveform> targets = supervised ? data.train_refs.get() : data.x_train;
    const TrainConfig tc = cell_train_config(
        cfg, seed, supervised ? TrainMode::kCTT : TrainMode::kNyTT, ckpt_dir, targets.size());
    const EnhancerModel init(cell_model_config(cfg, seed, 0));
    TrainResult tr = [&] {
      if (supervised) return train(init, targets, tc);
      ScopedLock guard(data.train_refs, data.test_refs);
      return train(init, targets, tc);
    }();
    return {make_row(method, eval_against(enhance_all(tr.best_model, data.test_inputs),
                                          data.test_refs.get()))};
  }

  if (method == "mixit") {
    ModelConfig mc = cell_model_config(cfg, seed, 0);
    mc.outputs = 3;
    const TrainConfig tc =
        cell_train_config(cfg, seed, TrainMode::kMixIT, ckpt_dir, data.x_train.size());
    TrainResult tr = [&] {
      ScopedLock guard(data.train_refs, data.test_refs);
      return run_mixit(EnhancerModel(mc), data.x_train, tc);
    }();
    return {make_row(method, eval_against(enhance_all(tr.best_model, data.test_inputs),
                                          data.test_refs.get()))};
  }

  if (method == "iternytt") {
    IterNyttConfig icfg;
    icfg.model = cell_model_config(cfg, seed, 0);
    icfg.train =
        cell_train_config(cfg, seed, TrainMode::kNyTT, ckpt_dir, data.x_train.size());
    icfg.later_add_spec = cfg.later_add_spec;
    icfg.iterations = cfg.iterations;
    const std::vector<IterationState> states = [&] {
      ScopedLock guard(data.train_refs, data.test_refs);
      return run_iternytt(data.x_train, icfg);
    }();
    std::vector<ResultRow> rows;
    for (const IterationState& st : states) {
      auto metrics = eval_against(enhance_all(st.result.best_model, data.test_inputs),
                                  data.test_refs.get());
      metrics["target_si_sdr_db"] =
          eval_against(st.enhanced_targets, data.train_refs.get()).at("si_sdr_db");
      metrics["iteration"] = st.iteration;
      rows.push_back(make_row("iternytt_iter" + std::to_string(st.iteration),
                              std::move(metrics)));
    }
    return rows;
  }

  if (is_volume_method(method)) {
    const std::string comp = method.substr(7);
    const int n_clean = std::max(1, cfg.train_items / 4);
    const std::vector<Waveform>& clean_all = data.train_refs.get();
    const std::vector<Waveform> clean_part(clean_all.begin(), clean_all.begin() + n_clean);
    const std::vector<Waveform> noisy_part(data.x_train.begin() + n_clean, data.x_train.end());

    std::vector<Waveform> targets;
    if (comp == "clean_only") {
      targets = clean_part;
    } else if (comp == "noisy_only") {
      targets = noisy_part;
    } else if (comp == "clean_noisy") {
      targets = clean_part;
      targets.insert(targets.end(), noisy_part.begin(), noisy_part.end());
    } else if (comp == "clean_enhanced_noisy") {
      // Stage 1: enhance the noisy portion with a model trained on it alone.
      const TrainConfig tc1 = [&] {
        TrainConfig t = cell_train_config(cfg, seed, TrainMode::kNyTT, "", noisy_part.size());
        t.seed = derive_stream(seed, {kTagStage1});
        return t;
      }();
      TrainResult stage1 = [&] {
        ScopedLock guard(data.train_refs, data.test_refs);
        return train(EnhancerModel(cell_model_config(cfg, seed, 1)), noisy_part, tc1);
      }();
      targets = clean_part;
      for (const Waveform& x : noisy_part) {
        targets.push_back(stage1.best_model.enhance(x));
      }
    } else {
      throw std::invalid_argument("unknown volume composition: " + comp);
    }

    const TrainConfig tc =
        cell_train_config(cfg, seed, TrainMode::kNyTT, ckpt_dir, targets.size());
    TrainResult tr = [&] {
      ScopedLock guard(data.train_refs, data.test_refs);
      return train(EnhancerModel(cell_model_config(cfg, seed, 0)), targets, tc);
    }();
    return {make_row(method, eval_against(enhance_all(tr.best_model, data.test_inputs),
                                          data.test_refs.get()))};
  }

  throw std::invalid_argument("unknown method: " + method);
}

// Resumable wrapper: a matching completed-cell record short-circuits the work;
// failures become failed rows and are retried on the next run.
std::vector<ResultRow> run_cell(const ExperimentConfig& cfg, const std::string& condition,
                                uint64_t seed, const std::string& method) {
  const std::string cell_id = cell_id_for(cfg, condition, seed, method);
  const std::string fp = cell_fingerprint(cfg, condition, seed, method);
  const std::string record_path = cfg.out_dir + "/cells/" + cell_id + ".json";

  if (fs::exists(record_path)) {
    std::ifstream in(record_path);
    nlohmann::json record;
    in >> record;
    if (record.at("fingerprint").get<std::string>() == fp) {
      std::vector<ResultRow> rows;
      for (const auto& rj : record.at("rows")) rows.push_back(row_from_json(rj));
      return rows;
    }
  }

  std::vector<ResultRow> rows;
  try {
    rows = compute_cell(cfg, condition, seed, method, cell_id, fp + "/" + cell_id);
  } catch (const std::exception& e) {
    ResultRow row;
    row.condition = condition;
    row.seed = seed;
    row.method = method;
    row.failed = true;
    row.error = e.what();
    row.provenance = fp + "/" + cell_id;
    return {row};
  }

  nlohmann::json record{{"id", cell_id}, {"fingerprint", fp}, {"rows", nlohmann::json::array()}};
  for (const ResultRow& r : rows) record["rows"].push_back(row_to_json(r));
  std::ofstream out(record_path);
  out << record.dump(2) << '\n';
  return rows;
}

void save_table_files(const ResultsTable& table, const std::string& out_dir) {
  emit_report(table, "csv", out_dir);
  emit_report(table, "json", out_dir);
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  const size_t n = v.size();
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;  // average 1-based rank
    for (size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

// --- minimal deterministic SVG plotting ---

const std::vector<std::string>& palette() {
  static const std::vector<std::string> p{"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  return p;
}

std::string svg_text(double x, double y, const std::string& s, int size,
                     const std::string& anchor) {
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%.1f\" y=\"%.1f\" font-size=\"%d\" font-family=\"sans-serif\" "
                "text-anchor=\"%s\">",
                x, y, size, anchor.c_str());
  return std::string(buf) + s + "</text>\n";
}

std::string svg_line_chart(const std::string& title, const std::vector<std::string>& x_labels,
                           const std::map<std::string, std::vector<double>>& series) {
  const double w = 720, h = 420, l = 70, r = 180, t = 40, b = 60;
  double ymin = 1e300, ymax = -1e300;
  for (const auto& [name, ys] : series) {
    for (double y : ys) {
      if (std::isfinite(y)) {
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
    }
  }
  if (ymin > ymax) {
    ymin = 0.0;
    ymax = 1.0;
  }
  if (ymax - ymin < 1e-12) {
    ymin -= 1.0;
    ymax += 1.0;
  }
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  const size_t n = x_labels.size();
  auto xpos = [&](size_t i) {
    return n <= 1 ? l + (w - l - r) / 2
                  : l + (w - l - r) * static_cast<double>(i) / static_cast<double>(n - 1);
  };
  auto ypos = [&](double v) { return h - b - (h - t - b) * (v - ymin) / (ymax - ymin); };

  std::string svg;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\">\n", w,
                h);
  svg += buf;
  svg += svg_text(w / 2, 22, title, 14, "middle");
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n", l,
                h - b, w - r, h - b);
  svg += buf;
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n", l, t,
                l, h - b);
  svg += buf;
  for (int k = 0; k <= 4; ++k) {
    const double v = ymin + (ymax - ymin) * k / 4.0;
    svg += svg_text(l - 8, ypos(v) + 4, format_g(v), 10, "end");
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#cccccc\"/>\n",
                  l, ypos(v), w - r, ypos(v));
    svg += buf;
  }
  for (size_t i = 0; i < n; ++i) {
    svg += svg_text(xpos(i), h - b + 16, x_labels[i], 9, "middle");
  }

  size_t si = 0;
  double legend_y = t + 10;
  for (const auto& [name, ys] : series) {
    const std::string color = palette()[si % palette().size()];
    const bool dashed = name == "unprocessed";
    std::string points;
    for (size_t i = 0; i < ys.size() && i < n; ++i) {
      if (!std::isfinite(ys[i])) continue;
      std::snprintf(buf, sizeof(buf), "%.1f,%.1f ", xpos(i), ypos(ys[i]));
      points += buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "<polyline fill=\"none\" stroke=\"%s\" stroke-width=\"2\"%s points=\"%s\"/>\n",
                  color.c_str(), dashed ? " stroke-dasharray=\"6,3\"" : "", points.c_str());
    svg += buf;
    for (size_t i = 0; i < ys.size() && i < n; ++i) {
      if (!std::isfinite(ys[i])) continue;
      std::snprintf(buf, sizeof(buf),
                    "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"3\" fill=\"%s\"/>\n", xpos(i),
                    ypos(ys[i]), color.c_str());
      svg += buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"12\" height=\"12\" fill=\"%s\"/>\n",
                  w - r + 10, legend_y - 10, color.c_str());
    svg += buf;
    svg += svg_text(w - r + 28, legend_y, name, 11, "start");
    legend_y += 18;
    ++si;
  }
  svg += "</svg>\n";
  return svg;
}

std::string svg_grid(const std::string& title, const std::vector<std::string>& row_labels,
                     const std::vector<std::string>& col_labels,
                     const std::map<std::pair<size_t, size_t>, double>& values) {
  const double cw = 110, ch = 30, l = 170, t = 70;
  const double w = l + cw * static_cast<double>(col_labels.size()) + 20;
  const double h = t + ch * static_cast<double>(row_labels.size()) + 20;
  double vmin = 1e300, vmax = -1e300;
  for (const auto& [key, v] : values) {
    if (std::isfinite(v)) {
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
    }
  }
  if (vmin > vmax) {
    vmin = 0.0;
    vmax = 1.0;
  }

  std::string svg;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\">\n", w,
                h);
  svg += buf;
  svg += svg_text(w / 2, 24, title, 14, "middle");
  for (size_t c = 0; c < col_labels.size(); ++c) {
    svg += svg_text(l + cw * (static_cast<double>(c) + 0.5), t - 10, col_labels[c], 10, "middle");
  }
  for (size_t rw = 0; rw < row_labels.size(); ++rw) {
    svg += svg_text(l - 8, t + ch * (static_cast<double>(rw) + 0.65), row_labels[rw], 10, "end");
    for (size_t c = 0; c < col_labels.size(); ++c) {
      const auto it = values.find({rw, c});
      const double x = l + cw * static_cast<double>(c);
      const double y = t + ch * static_cast<double>(rw);
      if (it == values.end() || !std::isfinite(it->second)) {
        std::snprintf(buf, sizeof(buf),
                      "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" "
                      "fill=\"#eeeeee\" stroke=\"white\"/>\n",
                      x, y, cw, ch);
        svg += buf;
        continue;
      }
      const double frac = vmax > vmin ? (it->second - vmin) / (vmax - vmin) : 0.5;
      const int red = static_cast<int>(40 + 200 * frac);
      const int blue = static_cast<int>(240 - 200 * frac);
      std::snprintf(buf, sizeof(buf),
                    "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" "
                    "fill=\"rgb(%d,80,%d)\" stroke=\"white\"/>\n",
                    x, y, cw, ch, red, blue);
      svg += buf;
      std::snprintf(buf, sizeof(buf), "%.2f", it->second);
      svg += svg_text(x + cw / 2, y + ch * 0.65, buf, 10, "middle");
    }
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace

std::string to_string(Task t) {
  switch (t) {
    case Task::kDenoise: return "denoise";
    case Task::kDereverb: return "dereverb";
    case Task::kDeclip: return "declip";
  }
  throw std::logic_error("unknown task");
}

Task task_from_string(const std::string& s) {
  if (s == "denoise") return Task::kDenoise;
  if (s == "dereverb") return Task::kDereverb;
  if (s == "declip") return Task::kDeclip;
  throw std::invalid_argument("unknown task: " + s);
}

const std::vector<Waveform>& AuditedReferences::get() const {
  if (locked_) {
    throw std::logic_error("clean references accessed during unsupervised training");
  }
  return clean_;
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j{{"name", name},
                   {"task", to_string(task)},
                   {"obs_spec", obs_spec.to_json()},
                   {"test_spec", test_spec.to_json()},
                   {"methods", methods},
                   {"iterations", iterations},
                   {"seeds", seeds},
                   {"train_items", train_items},
                   {"test_items", test_items},
                   {"item_s", item_s},
                   {"model", model.to_json()},
                   {"train", train.to_json()},
                   {"save_checkpoints", save_checkpoints}};
  if (later_add_spec.has_value()) j["later_add_spec"] = later_add_spec->to_json();
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.name = j.value("name", c.name);
  c.task = task_from_string(j.at("task").get<std::string>());
  c.obs_spec = CorruptionSpec::from_json(j.at("obs_spec"));
  c.test_spec = CorruptionSpec::from_json(j.at("test_spec"));
  if (j.contains("methods")) c.methods = j.at("methods").get<std::vector<std::string>>();
  c.iterations = j.value("iterations", c.iterations);
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<uint64_t>>();
  c.train_items = j.value("train_items", c.train_items);
  c.test_items = j.value("test_items", c.test_items);
  c.item_s = j.value("item_s", c.item_s);
  c.model = ModelConfig::from_json(j.at("model"));
  c.train = TrainConfig::from_json(j.at("train"));
  c.save_checkpoints = j.value("save_checkpoints", c.save_checkpoints);
  if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("later_add_spec")) {
    c.later_add_spec = CorruptionSpec::from_json(j.at("later_add_spec"));
  }
  return c;
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.name.empty()) throw std::invalid_argument("experiment: empty name");
  if (cfg.seeds.empty()) throw std::invalid_argument("experiment: empty seed list");
  if (cfg.methods.empty()) throw std::invalid_argument("experiment: empty method list");
  for (const std::string& m : cfg.methods) {
    if (is_volume_method(m)) continue;
    if (std::find(known_methods().begin(), known_methods().end(), m) == known_methods().end()) {
      throw std::invalid_argument("experiment: unknown method " + m);
    }
  }
  if (cfg.train_items < 2 || cfg.test_items < 1 || cfg.item_s <= 0.0) {
    throw std::invalid_argument("experiment: bad corpus sizes");
  }
  if (cfg.iterations < 1) throw std::invalid_argument("experiment: iterations must be >= 1");
  if (cfg.test_spec.role != Partition::kTest ||
      (cfg.test_spec.noise.has_value() && cfg.test_spec.noise->partition != Partition::kTest)) {
    throw std::invalid_argument("experiment: test_spec must draw from the TEST partition");
  }
  validate_spec(cfg.obs_spec);
  validate_spec(cfg.test_spec);
  validate_spec(cfg.train.add_spec);
}

void ResultsTable::sort_rows() {
  std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    if (a.condition != b.condition) return a.condition < b.condition;
    if (a.seed != b.seed) return a.seed < b.seed;
    return a.method < b.method;
  });
}

std::string ResultsTable::to_csv() const {
  std::set<std::string> keys;
  for (const ResultRow& r : rows) {
    for (const auto& [k, v] : r.metrics) keys.insert(k);
  }
  std::string out = "condition,seed,method,failed,error";
  for (const std::string& k : keys) out += "," + k;
  out += ",provenance\n";
  for (const ResultRow& r : rows) {
    std::string err = r.error;
    std::string quoted;
    for (char c : err) {
      quoted += c;
      if (c == '"') quoted += '"';
    }
    out += r.condition + "," + std::to_string(r.seed) + "," + r.method + "," +
           (r.failed ? "1" : "0") + ",\"" + quoted + "\"";
    for (const std::string& k : keys) {
      out += ",";
      const auto it = r.metrics.find(k);
      if (it != r.metrics.end()) out += format_g(it->second);
    }
    out += "," + r.provenance + "\n";
  }
  return out;
}

nlohmann::json ResultsTable::to_json() const {
  nlohmann::json j{{"name", name},
                   {"fingerprint", fingerprint},
                   {"trend", trend},
                   {"rows", nlohmann::json::array()}};
  for (const ResultRow& r : rows) j["rows"].push_back(row_to_json(r));
  return j;
}

ResultsTable ResultsTable::from_json(const nlohmann::json& j) {
  ResultsTable t;
  t.name = j.at("name").get<std::string>();
  t.fingerprint = j.at("fingerprint").get<std::string>();
  t.trend = j.at("trend");
  for (const auto& rj : j.at("rows")) t.rows.push_back(row_from_json(rj));
  return t;
}

void ResultsTable::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("results table: cannot write " + path);
  out << to_json().dump(2) << '\n';
}

ResultsTable ResultsTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("results table: cannot read " + path);
  nlohmann::json j;
  in >> j;
  return from_json(j);
}

std::optional<double> ResultsTable::mean_metric(const std::string& condition,
                                                const std::string& method,
                                                const std::string& metric) const {
  std::vector<double> vals;
  for (const ResultRow& r : rows) {
    if (r.failed || r.condition != condition || r.method != method) continue;
    const auto it = r.metrics.find(metric);
    if (it != r.metrics.end()) vals.push_back(it->second);
  }
  if (vals.empty()) return std::nullopt;
  return mean_of(vals);
}

namespace {

// Seed-stamped record of the run; rerunning from it reproduces the tables
// byte for byte because the fingerprint ignores out_dir.
void write_run_manifest(const ExperimentConfig& cfg, const SweepAxisConfig* axis) {
  nlohmann::json j{{"experiment", cfg.to_json()}};
  if (axis != nullptr) j["axis"] = axis->to_json();
  std::ofstream out(cfg.out_dir + "/manifest.json");
  out << j.dump(2) << '\n';
}

}  // namespace

ResultsTable run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  fs::create_directories(cfg.out_dir + "/cells");
  write_run_manifest(cfg, nullptr);

  ResultsTable table;
  table.name = cfg.name;
  table.fingerprint = config_fingerprint(cfg.to_json());
  for (uint64_t seed : cfg.seeds) {
    for (const std::string& method : cfg.methods) {
      for (ResultRow& row : run_cell(cfg, "base", seed, method)) {
        table.rows.push_back(std::move(row));
      }
    }
  }
  table.sort_rows();
  save_table_files(table, cfg.out_dir);
  return table;
}

ResultsTable analyze_triplet(const EnhancerModel& model, const std::vector<Waveform>& clean_refs,
                             const std::vector<Waveform>& noisy_targets,
                             const CorruptionSpec& add_spec, uint64_t seed) {
  if (clean_refs.empty() || clean_refs.size() != noisy_targets.size()) {
    throw std::invalid_argument("analyze_triplet: missing or mismatched references");
  }
  CorruptionSpec spec = add_spec;
  prepare_spec(spec, clean_refs.front().sample_rate_hz);

  std::vector<Waveform> y;
  y.reserve(noisy_targets.size());
  for (size_t i = 0; i < noisy_targets.size(); ++i) {
    y.push_back(
        corrupt(noisy_targets[i], spec, derive_stream(seed, {kTagTriplet}), i).corrupted);
  }

  ResultsTable table;
  table.name = "triplet";
  table.fingerprint = config_fingerprint(
      nlohmann::json{{"add_spec", add_spec.to_json()}, {"seed", seed}});
  auto push = [&](const std::string& method, const std::vector<Waveform>& est) {
    ResultRow row;
    row.condition = "triplet";
    row.seed = seed;
    row.method = method;
    row.metrics = eval_against(est, clean_refs);
    row.provenance = table.fingerprint;
    table.rows.push_back(std::move(row));
  };
  push("x", noisy_targets);
  push("y", y);
  push("f(y)", enhance_all(model, y));
  return table;
}

nlohmann::json SweepAxisConfig::to_json() const { return {{"axis", axis}, {"points", points}}; }

SweepAxisConfig SweepAxisConfig::from_json(const nlohmann::json& j) {
  SweepAxisConfig a;
  a.axis = j.at("axis").get<std::string>();
  a.points = j.at("points");
  return a;
}

ResultsTable sweep(const ExperimentConfig& cfg, const SweepAxisConfig& axis) {
  validate_config(cfg);
  if (!axis.points.is_array() || axis.points.empty()) {
    throw std::invalid_argument("sweep: axis needs a non-empty point list");
  }
  const std::set<std::string> known{"snr_x", "snr_y", "rt60", "clip_snr", "volume"};
  if (known.find(axis.axis) == known.end()) {
    throw std::invalid_argument("sweep: unknown axis " + axis.axis);
  }
  fs::create_directories(cfg.out_dir + "/cells");
  write_run_manifest(cfg, &axis);

  ResultsTable table;
  table.name = cfg.name + "_" + axis.axis;
  table.fingerprint = config_fingerprint(
      nlohmann::json{{"experiment", cfg.to_json()}, {"axis", axis.to_json()}});

  struct Point {
    ExperimentConfig cfg;
    std::string condition;
    double value = 0.0;
    std::vector<std::string> methods;
  };
  std::vector<Point> points;
  for (const auto& pj : axis.points) {
    Point p{cfg, "", 0.0, cfg.methods};
    if (axis.axis == "snr_x" || axis.axis == "clip_snr") {
      const double v = pj.get<double>();
      p.value = v;
      p.condition = axis.axis + "=" + format_g(v);
      // Both axes grade the quality of the training targets; the test
      // corruption stays as configured so every cell shares one test set.
      p.cfg.obs_spec.snr_db = SnrDistribution::fixed(v);
    } else if (axis.axis == "snr_y") {
      const double lo = pj.at(0).get<double>(), hi = pj.at(1).get<double>();
      p.value = 0.5 * (lo + hi);
      p.condition = "snr_y=[" + format_g(lo) + "," + format_g(hi) + ")";
      p.cfg.train.add_spec.snr_db = SnrDistribution::range(lo, hi);
    } else if (axis.axis == "rt60") {
      const double lo = pj.at(0).get<double>(), hi = pj.at(1).get<double>();
      p.value = 0.5 * (lo + hi);
      p.condition = "rt60=[" + format_g(lo) + "," + format_g(hi) + ")";
      p.cfg.obs_spec.rir_pool_spec.rt60_lo_s = lo;
      p.cfg.obs_spec.rir_pool_spec.rt60_hi_s = hi;
      p.cfg.obs_spec.rir_pool.clear();
    } else {  // volume
      const std::string comp = pj.get<std::string>();
      p.condition = comp;
      p.methods = {"unprocessed", "volume_" + comp};
    }
    points.push_back(std::move(p));
  }

  for (const Point& p : points) {
    for (uint64_t seed : cfg.seeds) {
      for (const std::string& method : p.methods) {
        for (ResultRow& row : run_cell(p.cfg, p.condition, seed, method)) {
          table.rows.push_back(std::move(row));
        }
      }
    }
  }
  table.sort_rows();

  if (axis.axis != "volume") {
    std::set<std::string> row_methods;
    for (const ResultRow& r : table.rows) {
      if (!r.failed) row_methods.insert(r.method);
    }
    for (const std::string& method : row_methods) {
      std::vector<double> xs, ys;
      for (const Point& p : points) {
        const auto m = table.mean_metric(p.condition, method, "si_sdr_db");
        if (!m.has_value()) continue;
        xs.push_back(p.value);
        ys.push_back(*m);
      }
      if (xs.size() < 2) continue;
      table.trend[method] = {{"axis", axis.axis},
                             {"axis_values", xs},
                             {"mean_si_sdr_db", ys},
                             {"spearman", spearman_rank_correlation(xs, ys)}};
    }
  }
  save_table_files(table, cfg.out_dir);
  return table;
}

void emit_report(const ResultsTable& table, const std::string& kind, const std::string& dir) {
  if (table.rows.empty()) throw std::invalid_argument("emit_report: empty table");
  fs::create_directories(dir);
  const std::string base = dir + "/" + sanitize(table.name);

  if (kind == "csv") {
    std::ofstream out(base + ".csv");
    if (!out) throw std::runtime_error("emit_report: cannot write " + base + ".csv");
    out << table.to_csv();
    return;
  }
  if (kind == "json") {
    std::ofstream out(base + ".json");
    if (!out) throw std::runtime_error("emit_report: cannot write " + base + ".json");
    out << table.to_json().dump(2) << '\n';
    return;
  }
  if (kind != "plots") throw std::invalid_argument("emit_report: unknown kind " + kind);

  std::vector<std::string> conditions;
  std::vector<std::string> methods;
  for (const ResultRow& r : table.rows) {
    if (std::find(conditions.begin(), conditions.end(), r.condition) == conditions.end()) {
      conditions.push_back(r.condition);
    }
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
      methods.push_back(r.method);
    }
  }
  std::sort(conditions.begin(), conditions.end());
  std::sort(methods.begin(), methods.end());

  std::vector<std::string> log_lines;
  for (const std::string metric : {"si_sdr_db", "lsd"}) {
    std::map<std::string, std::vector<double>> series;
    bool any = false;
    for (const std::string& method : methods) {
      std::vector<double> ys;
      for (const std::string& cond : conditions) {
        const auto m = table.mean_metric(cond, method, metric);
        ys.push_back(m.value_or(std::numeric_limits<double>::quiet_NaN()));
        any = any || m.has_value();
      }
      series[method] = std::move(ys);
    }
    if (!any) {
      log_lines.push_back("warning: metric " + metric + " empty; omitted from plots");
      continue;
    }
    std::ofstream out(base + "_chart_" + metric + ".svg");
    if (!out) throw std::runtime_error("emit_report: cannot write chart for " + metric);
    out << svg_line_chart(table.name + ": " + metric, conditions, series);
  }

  std::map<std::pair<size_t, size_t>, double> grid;
  for (size_t c = 0; c < conditions.size(); ++c) {
    for (size_t m = 0; m < methods.size(); ++m) {
      const auto v = table.mean_metric(conditions[c], methods[m], "si_sdr_db");
      if (v.has_value()) grid[{c, m}] = *v;
    }
  }
  {
    std::ofstream out(base + "_grid.svg");
    if (!out) throw std::runtime_error("emit_report: cannot write grid");
    out << svg_grid(table.name + ": mean si_sdr_db", conditions, methods, grid);
  }
  {
    std::ofstream out(base + "_report_log.txt");
    for (const std::string& line : log_lines) out << line << '\n';
    out << "plotted " << conditions.size() << " conditions x " << methods.size() << " methods\n";
  }
}

double spearman_rank_correlation(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw std::invalid_argument("spearman: need two same-length series");
  }
  const std::vector<double> rx = average_ranks(xs);
  const std::vector<double> ry = average_ranks(ys);
  const double mx = mean_of(rx), my = mean_of(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace nytt
