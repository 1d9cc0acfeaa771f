#pragma once

#include <bit>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "apt/engine/common.hpp"
#include "apt/eval/sample_set.hpp"
#include "apt/simulators/simulator.hpp"

namespace apt {

struct NegLogProb {
  double value = kInf;
  bool outside_support = false;
};

/// -log q(theta* | x_o) for the estimate truncated to the prior support; the
/// truncation constant is the estimate's acceptance rate.
inline NegLogProb neg_log_prob_true_params(const PosteriorEstimate& est, const Vec& theta_true) {
  if (!est.prior.contains(theta_true)) return {kInf, true};
  const double lp = est.normalized_log_prob(theta_true);
  if (!std::isfinite(lp)) return {kInf, true};
  return {-lp, false};
}

struct MedianDistance {
  double value = kNaN;
  int failures = 0;  // simulations that threw or came back invalid
};

/// Simulates once per posterior draw and returns the median Euclidean
/// distance between x and x_o, both divided elementwise by `scale`. The
/// simulation stream of a draw is keyed by its value and occurrence count, so
/// the result does not depend on row order.
inline MedianDistance median_distance(const SampleSet& samples, const Simulator& sim, const Vec& x_o, const Vec& scale,
                                      std::uint64_t seed) {
  samples.check();
  if (scale.size() != x_o.size() || (scale.array() <= 0.0).any())
    throw ConfigError("median distance: scale must be positive with one entry per data dimension");
  MedianDistance out;
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(samples.size()));
  std::unordered_map<std::uint64_t, std::uint64_t> seen;
  for (Eigen::Index i = 0; i < samples.size(); ++i) {
    std::uint64_t key = 0;
    for (Eigen::Index c = 0; c < samples.dim(); ++c) key = mix64(key ^ std::bit_cast<std::uint64_t>(samples.draws(i, c)));
    Rng rng = make_rng(seed, {stream::kEval, key, seen[key]++});
    try {
      const SimOutcome o = sim.run(samples.draws.row(i).transpose(), rng);
      if (!o.valid || !o.x.allFinite()) {
        ++out.failures;
        continue;
      }
      d.push_back(((o.x - x_o).array() / scale.array()).matrix().norm());
    } catch (const SimulationError&) {
      ++out.failures;
    }
  }
  if (!d.empty()) out.value = median(std::move(d));
  return out;
}

/// One metric value, serialized as a JSON line.
struct MetricRecord {
  std::string experiment;
  int round = 0;
  std::string metric;
  double value = kNaN;

  nlohmann::json to_json() const {
    nlohmann::json j = {{"experiment", experiment}, {"round", round}, {"metric", metric}};
    if (std::isfinite(value)) j["value"] = value;
    else j["value"] = std::isnan(value) ? "nan" : (value > 0 ? "inf" : "-inf");
    return j;
  }
};

}  // namespace apt
