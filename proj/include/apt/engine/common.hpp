#pragma once

#include <map>
#include <optional>
#include <string>

#include "apt/density/estimator.hpp"
#include "apt/engine/config.hpp"
#include "apt/engine/losses.hpp"
#include "apt/engine/sim_table.hpp"
#include "apt/simulators/registry.hpp"
#include "apt/transform/truncation.hpp"

namespace apt {

/// Posterior estimate at x_o handed to metric hooks. Either a sampler with
/// an optional density (neural posteriors) or a fixed sample set (MCMC and
/// particle posteriors).
struct PosteriorEstimate {
  Prior prior;
  BatchSampler sampler;                          // untruncated draws
  std::function<double(const Vec&)> log_prob;    // untruncated density; may be empty
  double acceptance_rate = 1.0;                  // in-support mass of the untruncated estimate
  std::optional<Mat> fixed_samples;

  bool has_log_prob() const { return static_cast<bool>(log_prob); }

  /// Density of the estimate truncated to the prior support.
  double normalized_log_prob(const Vec& theta) const {
    if (!has_log_prob()) throw ConfigError("posterior estimate has no density");
    if (!prior.contains(theta)) return -kInf;
    return log_prob(theta) - std::log(acceptance_rate);
  }

  /// Draws inside the prior support.
  Mat sample(int n, Rng& rng, long max_draws) const {
    if (fixed_samples) {
      const Mat& s = *fixed_samples;
      if (s.rows() == 0) throw ConfigError("posterior estimate has no samples");
      if (s.rows() >= n) {
        Mat out(n, s.cols());
        for (int i = 0; i < n; ++i) out.row(i) = s.row(static_cast<Eigen::Index>(i) * s.rows() / n);
        return out;
      }
      std::uniform_int_distribution<Eigen::Index> pick(0, s.rows() - 1);
      Mat out(n, s.cols());
      for (int i = 0; i < n; ++i) out.row(i) = s.row(pick(rng));
      return out;
    }
    return truncated_posterior_sample(sampler, prior, rng, n, max_draws).samples;
  }
};

struct RoundRecord {
  int round = 0;
  nlohmann::json proposal;
  std::optional<ParamVector> params;
  nlohmann::json architecture;
  Mat samples;  // posterior draws at x_o
  double acceptance_rate = 1.0;
  bool truncated = false;
  std::map<std::string, double> metrics;
  TrainResult training;
  int simulations = 0;
  int invalid = 0;
  long cumulative_simulations = 0;
};

struct RunResult {
  std::string algorithm;
  std::vector<RoundRecord> rounds;
  SimTable table;
  Vec x_o;
  std::optional<std::string> failure;
  Vec importance_weights;  // snpe-b: raw p/p~ per table row
  Mat particles;           // smc-abc final population
  Vec particle_weights;
  long simulations = 0;
};

struct RunHooks {
  /// Called once per round after the posterior at x_o is available.
  std::function<void(RoundRecord&, const PosteriorEstimate&)> on_round;
  std::function<void(const std::string&)> log;
};

namespace detail {

inline void log_line(const RunHooks& h, const std::string& s) {
  if (h.log) h.log(s);
}

inline Vec resolve_x_o(const Simulator& sim, const ExperimentConfig& cfg) {
  if (!cfg.x_o) return sim.observed();
  if (cfg.x_o->size() != sim.x_dim())
    throw ConfigError("config field 'x_o' has " + std::to_string(cfg.x_o->size()) + " entries, simulator '" +
                      sim.name() + "' produces " + std::to_string(sim.x_dim()));
  return *cfg.x_o;
}

inline CondDensityEstimator build_estimator(const ExperimentConfig& cfg, int context_dim, int target_dim,
                                            std::optional<int> components = std::nullopt) {
  if (cfg.estimator.kind == "mdn")
    return CondDensityEstimator::mdn(
        MdnSpec{context_dim, target_dim, components.value_or(cfg.estimator.components), cfg.estimator.hidden});
  return CondDensityEstimator::maf(MafSpec{target_dim, context_dim, cfg.estimator.n_mades, cfg.estimator.hidden,
                                           derive_seed(cfg.seed, {stream::kPermutation})});
}

inline void initialize(CondDensityEstimator& est, const ExperimentConfig& cfg, int round) {
  Rng rng = make_rng(cfg.seed, {stream::kInit, static_cast<std::uint64_t>(round)});
  est.initialize(rng);
}

inline BatchSampler mog_sampler(MoGDist d) {
  return [d = std::move(d)](int n, Rng& rng) {
    Mat out(n, d.dim());
    for (int i = 0; i < n; ++i) out.row(i) = d.sample(rng).transpose();
    return out;
  };
}

inline BatchSampler estimator_sampler(const CondDensityEstimator& est, const Vec& x) {
  return [est, x](int n, Rng& rng) { return est.sample(x, n, rng); };
}

inline nlohmann::json describe(const MoGDist& d) {
  auto vec = [](const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::json j = {{"kind", "mog"}, {"components", d.components()}, {"weights", vec(d.weights)}};
  j["means"] = nlohmann::json::array();
  for (const auto& m : d.means) j["means"].push_back(vec(m));
  j["mean"] = vec(d.mean());
  j["covariance_diagonal"] = vec(d.covariance().diagonal());
  return j;
}

/// Posterior estimate from a sampler and an optional density; estimates the
/// in-support mass when the prior is a box.
inline PosteriorEstimate make_estimate(const ExperimentConfig& cfg, const Prior& prior, BatchSampler sampler,
                                       std::function<double(const Vec&)> log_prob, int round) {
  PosteriorEstimate e;
  e.prior = prior;
  e.sampler = std::move(sampler);
  e.log_prob = std::move(log_prob);
  if (prior.is_uniform()) {
    Rng rng = make_rng(cfg.seed, {stream::kEval, static_cast<std::uint64_t>(round), 0});
    e.acceptance_rate = support_acceptance_rate(e.sampler, prior, rng, cfg.acceptance_draws);
    if (e.acceptance_rate <= 0.0)
      throw LeakageTooHigh("round " + std::to_string(round) + ": no estimate draws fall inside the prior support",
                           TruncatedSample{});
  }
  return e;
}

/// Fills the posterior samples of a record and runs the metric hook.
inline void finish_round(RoundRecord& rec, const PosteriorEstimate& est, const ExperimentConfig& cfg,
                         const RunHooks& hooks) {
  Rng rng = make_rng(cfg.seed, {stream::kPosterior, static_cast<std::uint64_t>(rec.round)});
  if (est.fixed_samples) {
    rec.samples = *est.fixed_samples;
  } else {
    const auto ts = truncated_posterior_sample(est.sampler, est.prior, rng, cfg.posterior_samples, cfg.max_proposal_draws);
    rec.samples = ts.samples;
    rec.acceptance_rate = est.acceptance_rate;
    rec.truncated = est.prior.is_uniform();
  }
  if (hooks.on_round) hooks.on_round(rec, est);
}

/// Draws the next round's simulation parameters from `sampler`, rejecting
/// draws outside the prior support.
inline Mat draw_proposal(const BatchSampler& sampler, const Prior& prior, const ExperimentConfig& cfg, int round) {
  Rng rng = make_rng(cfg.seed, {stream::kProposal, static_cast<std::uint64_t>(round)});
  try {
    return truncated_posterior_sample(sampler, prior, rng, cfg.simulations_per_round, cfg.max_proposal_draws).samples;
  } catch (const LeakageTooHigh& e) {
    throw LeakageTooHigh("round " + std::to_string(round) + " proposal: " + e.what() + " (acceptance rate " +
                             std::to_string(e.partial().acceptance_rate) + ")",
                         e.partial());
  }
}

/// Simulates and appends one round to the table.
inline SimBatch simulate_round(const Simulator& sim, SimTable& table, const Mat& thetas, const ExperimentConfig& cfg,
                               int round, int proposal_id) {
  const auto first = static_cast<std::uint64_t>(table.size());
  SimBatch b = simulate_batch(sim, thetas, cfg.seed, static_cast<std::uint64_t>(round), first);
  table.append(round, thetas, b.x, proposal_id, b.valid);
  return b;
}

inline std::string round_failure(int round, const std::exception& e) {
  return "round " + std::to_string(round) + ": " + e.what();
}

}  // namespace detail
}  // namespace apt
