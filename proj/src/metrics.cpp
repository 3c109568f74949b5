// Copyright 2026 NyTT-desk Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "nytt/metrics.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace nytt {

double si_sdr(const Waveform& estimate, const Waveform& reference) {
  if (estimate.samples.size() != reference.samples.size())
    throw std::invalid_argument("si_sdr: length mismatch");
  const double er = energy(reference);
  if (er <= 0.0) throw std::invalid_argument("si_sdr: zero-energy reference");

  double dot = 0.0;
  for (size_t i = 0; i < reference.samples.size(); ++i)
    dot += estimate.samples[i] * reference.samples[i];
  const double alpha = dot / er;

  double proj2 = 0.0, res2 = 0.0;
  for (size_t i = 0; i < reference.samples.size(); ++i) {
    const double p = alpha * reference.samples[i];
    const double d = p - estimate.samples[i];
    proj2 += p * p;
    res2 += d * d;
  }
  if (res2 < 1e-20 * proj2 || proj2 <= 0.0) return 100.0;
  return std::min(10.0 * std::log10(proj2 / res2), 100.0);
}

double log_spectral_distance(const Waveform& estimate, const Waveform& reference,
                             const StftConfig& cfg) {
  if (estimate.samples.size() != reference.samples.size())
    throw std::invalid_argument("log_spectral_distance: length mismatch");
  constexpr double kEps = 1e-8;
  const Eigen::MatrixXd me = magnitude(stft(estimate, cfg));
  const Eigen::MatrixXd mr = magnitude(stft(reference, cfg));

  double acc = 0.0;
  for (Eigen::Index t = 0; t < me.rows(); ++t) {
    for (Eigen::Index b = 0; b < me.cols(); ++b) {
      const double d = 20.0 * (std::log10(me(t, b) + kEps) - std::log10(mr(t, b) + kEps));
      acc += d * d;
    }
  }
  return std::sqrt(acc / (static_cast<double>(me.rows()) * me.cols()));
}

MetricsReport evaluate_corpus(const std::vector<EvalPair>& pairs,
                              const std::set<std::string>& metrics,
                              const StftConfig& cfg) {
  if (pairs.empty()) throw std::invalid_argument("evaluate_corpus: empty corpus");

  MetricsReport report;
  for (const auto& p : pairs) {
    MetricsReport::Item item;
    item.item_id = p.item_id;
    for (const auto& m : metrics) {
      if (m == "si_sdr") {
        item.values[m] = si_sdr(p.estimate, p.reference);
      } else if (m == "lsd") {
        item.values[m] = log_spectral_distance(p.estimate, p.reference, cfg);
      } else {
        throw std::invalid_argument("evaluate_corpus: unknown metric " + m);
      }
    }
    report.per_item.push_back(std::move(item));
  }
  std::sort(report.per_item.begin(), report.per_item.end(),
            [](const auto& a, const auto& b) { return a.item_id < b.item_id; });

  report.count = static_cast<int>(report.per_item.size());
  for (const auto& m : metrics) {
    double acc = 0.0;
    for (const auto& item : report.per_item) acc += item.values.at(m);
    report.aggregate[m] = acc / report.count;
  }
  return report;
}

std::string MetricsReport::to_csv() const {
  std::ostringstream os;
  os.precision(9);
  os << "item_id";
  for (const auto& [name, _] : aggregate) os << "," << name;
  os << "\n";
  for (const auto& item : per_item) {
    os << item.item_id;
    for (const auto& [name, _] : aggregate) os << "," << item.values.at(name);
    os << "\n";
  }
  os << "aggregate";
  for (const auto& [_, value] : aggregate) os << "," << value;
  os << "\n";
  return os.str();
}

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  j["count"] = count;
  j["aggregate"] = aggregate;
  j["per_item"] = nlohmann::json::array();
  for (const auto& item : per_item) {
    nlohmann::json ji;
    ji["item_id"] = item.item_id;
    ji["values"] = item.values;
    j["per_item"].push_back(ji);
  }
  return j.dump(2);
}

}  // namespace nytt
