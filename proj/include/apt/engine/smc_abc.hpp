#pragma once

// Sequential Monte Carlo ABC with Gaussian perturbation kernels and
// importance reweighting. Distances are Euclidean on data scaled by the
// prior-predictive standard deviation of the first generation.

#include <algorithm>

#include "apt/engine/common.hpp"

namespace apt {

/// Effective sample size of (unnormalized) weights.
inline double effective_sample_size(const Vec& w) {
  const double s = w.sum();
  return s * s / w.squaredNorm();
}

inline RunResult run_smc_abc(const Simulator& sim, const ExperimentConfig& cfg, const RunHooks& hooks = {}) {
  if (cfg.algorithm != "smc-abc") throw ConfigError("run_smc_abc: algorithm must be smc-abc");
  const Prior& prior = sim.prior();
  const auto& ac = cfg.abc;
  const int np = ac.particles, d = sim.theta_dim();
  RunResult res;
  res.algorithm = cfg.algorithm;
  res.x_o = detail::resolve_x_o(sim, cfg);
  res.table = SimTable(d, sim.x_dim());
  Vec x_scale = Vec::Ones(sim.x_dim());

  Mat particles(0, d);
  Vec weights;
  Vec distances;
  double tolerance = ac.initial_tolerance;

  for (int g = 0; g < ac.generations; ++g) {
    const auto gen = static_cast<std::uint64_t>(g + 1);
    Mat next(np, d), next_x(np, sim.x_dim());
    Vec next_d(np);
    int accepted = 0;
    long attempts = 0;
    Rng rng = make_rng(cfg.seed, {stream::kAbc, gen});
    Mat kernel_chol;
    std::discrete_distribution<int> pick;
    if (g > 0) {
      const Vec wn = weights / weights.sum();
      const Vec mean = particles.transpose() * wn;
      const Mat centered = particles.rowwise() - mean.transpose();
      const Mat cov = centered.transpose() * wn.asDiagonal() * centered;
      auto l = cholesky_lower(ac.kernel_scale * cov + 1e-12 * Mat::Identity(d, d));
      if (!l) throw NumericError("smc-abc: perturbation covariance is not positive definite");
      kernel_chol = *l;
      pick = std::discrete_distribution<int>(weights.data(), weights.data() + weights.size());
    }
    bool halted = false;
    while (accepted < np) {
      if (attempts >= ac.max_attempts_per_generation || res.simulations >= ac.max_simulations) {
        halted = true;
        break;
      }
      Vec th(d);
      if (g == 0) {
        th = prior.sample(rng);
      } else {
        Vec z(d);
        for (int i = 0; i < d; ++i) z[i] = std_normal(rng);
        th = particles.row(pick(rng)).transpose() + kernel_chol * z;
        if (!prior.contains(th)) {
          ++attempts;
          continue;
        }
      }
      Rng srng = make_rng(cfg.seed, {stream::kAbc, gen, static_cast<std::uint64_t>(attempts) + 1});
      const SimOutcome out = sim.run(th, srng);
      ++attempts;
      ++res.simulations;
      if (!out.valid || !out.x.allFinite()) continue;
      const double dist = (out.x - res.x_o).cwiseQuotient(x_scale).norm();
      if (!(dist <= tolerance)) continue;
      next.row(accepted) = th.transpose();
      next_x.row(accepted) = out.x.transpose();
      next_d[accepted] = dist;
      ++accepted;
    }
    if (halted) {
      res.failure = "generation " + std::to_string(g + 1) + ": " + std::to_string(accepted) + " of " +
                    std::to_string(np) + " particles accepted at tolerance " + std::to_string(tolerance) +
                    " before the budget ran out; schedule halted";
      detail::log_line(hooks, "smc-abc " + *res.failure);
      if (g == 0 && accepted > 0) {
        particles = next.topRows(accepted);
        weights = Vec::Ones(accepted);
      }
      break;
    }

    if (g == 0 && sim.x_dim() > 0) {
      // Distance scale from the prior predictive; distances are recomputed.
      const Standardizer s = Standardizer::fit(next_x);
      x_scale = s.scale;
      for (int i = 0; i < np; ++i) next_d[i] = (next_x.row(i).transpose() - res.x_o).cwiseQuotient(x_scale).norm();
    }
    Vec new_w = Vec::Ones(np);
    if (g > 0) {
      const Vec wn = weights / weights.sum();
      for (int i = 0; i < np; ++i) {
        const Vec th = next.row(i).transpose();
        double denom = 0.0;
        for (Eigen::Index j = 0; j < particles.rows(); ++j)
          denom += wn[j] * std::exp(gaussian_log_prob(th, particles.row(j).transpose(), kernel_chol));
        new_w[i] = std::exp(prior.log_prob(th)) / denom;
      }
      if (!new_w.allFinite() || !(new_w.sum() > 0.0)) throw NumericError("smc-abc: degenerate importance weights");
    }
    particles = next;
    weights = new_w / new_w.sum();
    distances = next_d;

    RoundRecord rec;
    rec.round = g + 1;
    rec.proposal = {{"kind", g == 0 ? "prior" : "particles"}, {"tolerance", std::isinf(tolerance) ? -1.0 : tolerance}};
    rec.simulations = static_cast<int>(attempts);
    rec.cumulative_simulations = res.simulations;
    rec.metrics["ess"] = effective_sample_size(weights);
    rec.metrics["tolerance"] = tolerance;
    PosteriorEstimate pe;
    pe.prior = prior;
    {
      Rng prng = make_rng(cfg.seed, {stream::kPosterior, gen});
      std::discrete_distribution<int> rs(weights.data(), weights.data() + weights.size());
      Mat s(cfg.posterior_samples, d);
      for (int i = 0; i < cfg.posterior_samples; ++i) s.row(i) = particles.row(rs(prng));
      pe.fixed_samples = s;
    }
    detail::finish_round(rec, pe, cfg, hooks);
    res.rounds.push_back(std::move(rec));
    detail::log_line(hooks, "smc-abc generation " + std::to_string(g + 1) + ": tolerance " + std::to_string(tolerance) +
                                ", " + std::to_string(attempts) + " simulations");

    std::vector<double> sorted(distances.data(), distances.data() + distances.size());
    std::sort(sorted.begin(), sorted.end());
    tolerance = quantile_sorted(sorted, ac.quantile);
  }
  res.particles = particles;
  res.particle_weights = weights;
  return res;
}

}  // namespace apt
