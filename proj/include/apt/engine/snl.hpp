#pragma once

// Sequential likelihood estimation: a MAF models x given theta, and the
// posterior prior(theta) q(x_o | theta) is sampled by slice sampling.

#include "apt/engine/common.hpp"
#include "apt/engine/losses.hpp"
#include "apt/engine/slice_sampler.hpp"

namespace apt {

/// Unnormalized log posterior prior(theta) + log q(x_o | theta).
inline LogDensity snl_log_posterior(const CondDensityEstimator& lik, const Prior& prior, const Vec& x_o) {
  return [&lik, &prior, x_o](const Vec& theta) {
    const double lp = prior.log_prob(theta);
    if (!std::isfinite(lp)) return -kInf;
    return lp + lik.log_prob(theta, x_o);
  };
}

inline RunResult run_snl(const Simulator& sim, const ExperimentConfig& cfg, const RunHooks& hooks = {}) {
  if (cfg.algorithm != "snl") throw ConfigError("run_snl: algorithm must be snl");
  const Prior& prior = sim.prior();
  const int n = cfg.simulations_per_round;
  RunResult res;
  res.algorithm = cfg.algorithm;
  res.x_o = detail::resolve_x_o(sim, cfg);
  res.table = SimTable(sim.theta_dim(), sim.x_dim());
  CondDensityEstimator lik = detail::build_estimator(cfg, sim.theta_dim(), sim.x_dim());
  detail::initialize(lik, cfg, 1);
  Mat next;

  for (int r = 1; r <= cfg.rounds; ++r) {
    try {
      Mat thetas;
      if (r == 1) {
        Rng rng = make_rng(cfg.seed, {stream::kProposal, 1});
        thetas = prior.sample(n, rng);
      } else {
        thetas = next;
      }
      detail::log_line(hooks, "snl round " + std::to_string(r) + ": simulating");
      const SimBatch batch = detail::simulate_round(sim, res.table, thetas, cfg, r, r == 1 ? -1 : r - 1);
      res.simulations += n;
      if (r == 1) {
        const auto rows = res.table.rows(1, 1);
        if (rows.size() < 2) throw TrainingError("round 1 produced fewer than 2 valid simulations");
        lik.set_standardizers(Standardizer::fit(res.table.theta_rows(rows)), Standardizer::fit(res.table.x_rows(rows)));
      } else if (cfg.training.reinitialize_each_round) {
        detail::initialize(lik, cfg, r);
      }
      const auto rows = res.table.rows(1, r);
      WeightedNllLoss loss{&lik, lik.context_standardizer().apply_rows(res.table.theta()),
                           lik.target_standardizer().apply_rows(res.table.x()), Vec::Ones(res.table.size())};
      Rng train_rng = make_rng(cfg.seed, {stream::kTrain, static_cast<std::uint64_t>(r)});
      detail::log_line(hooks, "snl round " + std::to_string(r) + ": training on " + std::to_string(rows.size()) + " rows");
      const TrainResult tr = train_estimator(lik.params(), rows, loss, cfg.training, train_rng);

      const bool last = r == cfg.rounds;
      const int wanted = last ? cfg.posterior_samples : std::max(n, cfg.posterior_samples);
      const Vec widths = cfg.snl.slice_width * lik.context_standardizer().scale;
      SliceStats stats;
      const Mat chain_samples = slice_sample_chains(
          snl_log_posterior(lik, prior, res.x_o), [&prior](Rng& rng) { return prior.sample(rng); }, wanted,
          cfg.snl.chains, cfg.snl.burn_in, cfg.snl.thin, widths, cfg.seed, {stream::kMcmc, static_cast<std::uint64_t>(r)},
          &stats);
      auto strided = [&](int count) {
        Mat out(count, chain_samples.cols());
        for (int i = 0; i < count; ++i) out.row(i) = chain_samples.row(static_cast<Eigen::Index>(i) * chain_samples.rows() / count);
        return out;
      };
      if (!last) next = strided(n);

      RoundRecord rec;
      rec.round = r;
      rec.training = tr;
      rec.simulations = n;
      rec.invalid = batch.invalid_count();
      rec.cumulative_simulations = res.simulations;
      rec.params = lik.params();
      rec.architecture = lik.architecture();
      rec.proposal = r == 1 ? nlohmann::json{{"kind", "prior"}, {"prior", prior.to_json()}}
                            : nlohmann::json{{"kind", "mcmc"}, {"round", r - 1}};
      rec.metrics["mcmc_restarts"] = static_cast<double>(stats.restarts);
      PosteriorEstimate pe;
      pe.prior = prior;
      pe.fixed_samples = strided(cfg.posterior_samples);
      detail::finish_round(rec, pe, cfg, hooks);
      res.rounds.push_back(std::move(rec));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      res.failure = detail::round_failure(r, e);
      detail::log_line(hooks, "snl stopped: " + *res.failure);
      break;
    }
  }
  return res;
}

}  // namespace apt
