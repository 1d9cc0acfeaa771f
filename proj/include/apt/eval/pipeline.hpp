#pragma once

// Per-experiment evaluation: ground-truth references, per-round metric
// records and the prior baseline reported as round 0.

#include <filesystem>
#include <optional>

#include "apt/density/standardizer.hpp"
#include "apt/engine/common.hpp"
#include "apt/eval/metrics.hpp"
#include "apt/eval/mmd.hpp"
#include "apt/eval/reference.hpp"
#include "apt/io/csv.hpp"
#include "apt/io/config_file.hpp"
#include "apt/io/manifest.hpp"
#include "apt/simulators/registry.hpp"

namespace apt {

/// Ground-truth posterior draws at x_o for simulators that have one, or
/// nullopt. `warnings` collects sampler diagnostics.
inline std::optional<SampleSet> reference_posterior(const Simulator& sim, const Vec& x_o, int n, std::uint64_t seed,
                                                    std::vector<std::string>* warnings = nullptr) {
  if (const auto* lg = dynamic_cast<const LinearGaussian*>(&sim)) {
    const GaussianDist post = lg->posterior(x_o);
    Rng rng = make_rng(seed, {stream::kEval});
    Mat draws(n, post.dim());
    for (int i = 0; i < n; ++i) draws.row(i) = post.sample(rng).transpose();
    return SampleSet(std::move(draws), "linear_gaussian closed form");
  }
  if (dynamic_cast<const TwoMoons*>(&sim) != nullptr)
    return two_moons_reference_posterior(x_o, 512, n, seed).samples;
  if (const auto* slcp = dynamic_cast<const Slcp*>(&sim)) {
    Vec informative = x_o;
    if (const auto* d = dynamic_cast<const SlcpDistractors*>(&sim)) informative = d->unpermute(x_o).head(8);
    auto ref = slcp_reference_posterior(informative, slcp->theta_true(), n, seed);
    if (warnings != nullptr) warnings->insert(warnings->end(), ref.warnings.begin(), ref.warnings.end());
    return std::move(ref.samples);
  }
  return std::nullopt;
}

/// As above, with a CSV cache in `cache_dir`. Each cached file has a JSON
/// sidecar recording the simulator, options, x_o, size and seed it was made
/// with; a mismatch recomputes.
inline std::optional<SampleSet> cached_reference_posterior(const Simulator& sim, const Vec& x_o, int n,
                                                           std::uint64_t seed, const std::string& cache_dir,
                                                           std::vector<std::string>* warnings = nullptr) {
  if (cache_dir.empty()) return reference_posterior(sim, x_o, n, seed, warnings);
  const nlohmann::json key = {{"simulator", sim.name()},
                              {"options", sim.options()},
                              {"x_o", std::vector<double>(x_o.data(), x_o.data() + x_o.size())},
                              {"samples", n},
                              {"seed", seed}};
  const std::filesystem::path dir(cache_dir);
  const std::string stem = sim.name() + "_" + config_hash(key);
  const auto csv = dir / (stem + ".csv"), side = dir / (stem + ".json");
  if (std::filesystem::exists(csv) && std::filesystem::exists(side)) {
    try {
      if (read_json_file(side.string()).value("key", nlohmann::json()) == key) {
        auto t = read_csv(csv.string());
        if (t.values.rows() == n) return SampleSet(std::move(t.values), "cache " + csv.filename().string());
      }
    } catch (const Error& e) {
      warn(std::string("ignoring unreadable reference cache: ") + e.what());
    }
  }
  auto ref = reference_posterior(sim, x_o, n, seed, warnings);
  if (!ref) return ref;
  std::filesystem::create_directories(dir);
  write_csv(csv.string(), column_names("theta", ref->dim()), ref->draws);
  write_json_file(side.string(), {{"key", key}, {"provenance", ref->provenance}, {"file", csv.filename().string()}});
  return ref;
}

struct EvalContext {
  std::string experiment;
  std::optional<ReferenceMmd> mmd;
  std::vector<std::string> warnings;
  Vec x_scale;  // prior-predictive sd per output, for median distances
  Vec theta_true;
};

inline EvalContext make_eval_context(const Simulator& sim, const ExperimentConfig& cfg, const Vec& x_o) {
  EvalContext ctx;
  ctx.experiment = cfg.name;
  ctx.theta_true = sim.theta_true();
  if (cfg.eval.mmd) {
    auto ref = cached_reference_posterior(sim, x_o, cfg.eval.reference_samples, cfg.eval.reference_seed,
                                          cfg.eval.reference_cache, &ctx.warnings);
    if (ref) {
      double h = 0.0;
      if (cfg.eval.mmd_bandwidth) {
        h = *cfg.eval.mmd_bandwidth;
      } else {
        Rng rng = make_rng(cfg.eval.reference_seed, {stream::kEval, 1});
        h = median_heuristic_bandwidth(*ref, SampleSet(sim.prior().sample(cfg.eval.metric_samples, rng)));
      }
      ctx.mmd.emplace(std::move(*ref), h);
    }
  }
  if (cfg.eval.median_distance) {
    constexpr int kScaleDraws = 1000;
    Rng rng = make_rng(cfg.seed, {stream::kEval, 2});
    std::vector<Vec> xs;
    for (int i = 0; i < kScaleDraws; ++i) {
      Rng sim_rng = make_rng(cfg.seed, {stream::kEval, 3, static_cast<std::uint64_t>(i)});
      try {
        const SimOutcome o = sim.run(sim.prior().sample(rng), sim_rng);
        if (o.valid && o.x.allFinite()) xs.push_back(o.x);
      } catch (const SimulationError&) {
      }
    }
    if (xs.size() < 2) throw SimulationError("median distance: prior predictive simulations all failed");
    Mat m(static_cast<Eigen::Index>(xs.size()), sim.x_dim());
    for (std::size_t i = 0; i < xs.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = xs[i].transpose();
    ctx.x_scale = Standardizer::fit(m).scale;
  }
  return ctx;
}

namespace detail {

inline SampleSet metric_subset(const Mat& samples, int n, std::string tag) {
  const Eigen::Index k = std::min<Eigen::Index>(n, samples.rows());
  return SampleSet(samples.topRows(k), std::move(tag));
}

}  // namespace detail

/// Baseline metrics of the prior, reported as round 0.
inline std::vector<MetricRecord> prior_metrics(const EvalContext& ctx, const Simulator& sim,
                                               const ExperimentConfig& cfg, const Vec& x_o) {
  std::vector<MetricRecord> out;
  Rng rng = make_rng(cfg.seed, {stream::kEval, 4});
  const SampleSet prior(sim.prior().sample(cfg.eval.metric_samples, rng), "prior");
  if (ctx.mmd) out.push_back({ctx.experiment, 0, "mmd", (*ctx.mmd)(prior)});
  if (cfg.eval.nlp && ctx.theta_true.size() == sim.theta_dim())
    out.push_back({ctx.experiment, 0, "nlp", -sim.prior().log_prob(ctx.theta_true)});
  if (cfg.eval.median_distance)
    out.push_back({ctx.experiment, 0, "median_distance",
                   median_distance(prior, sim, x_o, ctx.x_scale, derive_seed(cfg.seed, {stream::kEval, 0})).value});
  return out;
}

inline std::vector<MetricRecord> round_metrics(const EvalContext& ctx, const Simulator& sim,
                                               const ExperimentConfig& cfg, const Vec& x_o, const RoundRecord& rec,
                                               const PosteriorEstimate& est) {
  std::vector<MetricRecord> out;
  const int r = rec.round;
  const SampleSet s = detail::metric_subset(rec.samples, cfg.eval.metric_samples, cfg.algorithm);
  if (ctx.mmd && s.size() >= 2) out.push_back({ctx.experiment, r, "mmd", (*ctx.mmd)(s)});
  if (cfg.eval.nlp && est.has_log_prob() && ctx.theta_true.size() == sim.theta_dim())
    out.push_back({ctx.experiment, r, "nlp", neg_log_prob_true_params(est, ctx.theta_true).value});
  if (cfg.eval.median_distance && s.size() >= 1) {
    const auto d = median_distance(s, sim, x_o, ctx.x_scale, derive_seed(cfg.seed, {stream::kEval, 0,
                                   static_cast<std::uint64_t>(r)}));
    out.push_back({ctx.experiment, r, "median_distance", d.value});
    if (d.failures > 0) out.push_back({ctx.experiment, r, "median_distance_failures", static_cast<double>(d.failures)});
  }
  out.push_back({ctx.experiment, r, "acceptance_rate", rec.acceptance_rate});
  out.push_back({ctx.experiment, r, "simulations", static_cast<double>(rec.cumulative_simulations)});
  for (const auto& [k, v] : rec.metrics) out.push_back({ctx.experiment, r, k, v});
  return out;
}

}  // namespace apt
