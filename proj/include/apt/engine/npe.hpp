#pragma once

// Sequential posterior-estimation loops: apt-mog, apt-atomic, snpe-a and
// snpe-b share simulation, standardization and bookkeeping and differ in
// the training loss, the rows they train on and how the next proposal is
// derived.

#include "apt/engine/common.hpp"
#include "apt/engine/losses.hpp"
#include "apt/transform/proposal_posterior.hpp"
#include "apt/transform/snpe.hpp"

namespace apt {

namespace detail {

/// Copies a one-component MDN into a K-component MDN of the same trunk:
/// every component starts as the single Gaussian, with jittered means so the
/// components can separate.
inline void expand_mdn(const CondDensityEstimator& one, CondDensityEstimator& many, Rng& rng) {
  const Mdn* a = one.as_mdn();
  const Mdn* b = many.as_mdn();
  if (a == nullptr || b == nullptr || a->spec().components != 1) throw ConfigError("expand_mdn: need a 1-component MDN");
  const auto& src = one.params();
  auto& dst = many.params();
  const int last = static_cast<int>(a->spec().hidden.size());
  for (int l = 0; l < last; ++l)
    for (const char* part : {".weight", ".bias"}) {
      const std::string name = "mdn.layer" + std::to_string(l) + part;
      dst.block(dst.find(name)) = src.block(src.find(name));
    }
  const std::string ln = "mdn.layer" + std::to_string(last);
  const auto sw = src.block(src.find(ln + ".weight"));
  const auto sb = src.block(src.find(ln + ".bias"));
  auto dw = dst.block(dst.find(ln + ".weight"));
  auto db = dst.block(dst.find(ln + ".bias"));
  dw.setZero();
  db.setZero();
  const auto& h1 = a->head_layout();
  const auto& hk = b->head_layout();
  const int n = h1.dim, t = tril_size(n);
  for (int k = 0; k < hk.components; ++k) {
    for (int i = 0; i < n; ++i) {
      dw.row(hk.mean_offset(k) + i) = sw.row(h1.mean_offset(0) + i);
      db(0, hk.mean_offset(k) + i) = sb(0, h1.mean_offset(0) + i) + 0.1 * std_normal(rng);
    }
    for (int i = 0; i < t; ++i) {
      dw.row(hk.factor_offset(k) + i) = sw.row(h1.factor_offset(0) + i);
      db(0, hk.factor_offset(k) + i) = sb(0, h1.factor_offset(0) + i);
    }
  }
  many.set_standardizers(one.context_standardizer(), one.target_standardizer());
}

}  // namespace detail

/// Runs apt-mog, apt-atomic, snpe-a or snpe-b on `sim`.
inline RunResult run_npe(const Simulator& sim, const ExperimentConfig& cfg, const RunHooks& hooks = {}) {
  const std::string& alg = cfg.algorithm;
  const bool mog = alg == "apt-mog", atomic = alg == "apt-atomic", snpe_a = alg == "snpe-a", snpe_b = alg == "snpe-b";
  if (!(mog || atomic || snpe_a || snpe_b)) throw ConfigError("run_npe: unsupported algorithm '" + alg + "'");
  const Prior& prior = sim.prior();
  const int d = sim.theta_dim();
  const int n = cfg.simulations_per_round;
  RunResult res;
  res.algorithm = alg;
  res.x_o = detail::resolve_x_o(sim, cfg);
  res.table = SimTable(d, sim.x_dim());
  const Vec& x_o = res.x_o;

  auto components_for = [&](int r) { return snpe_a && r < cfg.rounds ? 1 : cfg.estimator.components; };
  CondDensityEstimator est = detail::build_estimator(cfg, sim.x_dim(), d, components_for(1));
  detail::initialize(est, cfg, 1);

  std::vector<MoGDist> mog_proposals;  // apt-mog: proposal id -> mixture
  BatchSampler next_sampler;
  std::function<double(const Vec&)> next_log_density;  // snpe-b: truncated proposal density
  std::optional<GaussianDist> gaussian_proposal;       // snpe-a
  std::vector<double> weights;

  for (int r = 1; r <= cfg.rounds; ++r) {
    try {
      detail::log_line(hooks, alg + " round " + std::to_string(r) + ": simulating");
      Mat thetas;
      int pid = -1;
      if (r == 1) {
        Rng rng = make_rng(cfg.seed, {stream::kProposal, 1});
        thetas = prior.sample(n, rng);
      } else {
        thetas = detail::draw_proposal(next_sampler, prior, cfg, r);
        if (mog) pid = static_cast<int>(mog_proposals.size()) - 1;
      }
      for (Eigen::Index i = 0; i < thetas.rows(); ++i) {
        double w = 1.0;
        if (snpe_b && r > 1) {
          const Vec th = thetas.row(i).transpose();
          w = snpe_b_weight(th, prior, next_log_density(th));
          if (!std::isfinite(w) || w > cfg.max_importance_weight) {
            warn("snpe-b: importance weight " + std::to_string(w) + " clipped to " +
                 std::to_string(cfg.max_importance_weight));
            w = cfg.max_importance_weight;
          }
        }
        weights.push_back(w);
      }
      const SimBatch batch = detail::simulate_round(sim, res.table, thetas, cfg, r, pid);
      res.simulations += n;

      if (r == 1) {
        const auto rows = res.table.rows(1, 1);
        if (rows.size() < 2) throw TrainingError("round 1 produced fewer than 2 valid simulations");
        est.set_standardizers(Standardizer::fit(res.table.x_rows(rows)), Standardizer::fit(res.table.theta_rows(rows)));
      } else if (snpe_a && components_for(r) != components_for(r - 1)) {
        CondDensityEstimator wide = detail::build_estimator(cfg, sim.x_dim(), d, components_for(r));
        Rng rng = make_rng(cfg.seed, {stream::kInit, static_cast<std::uint64_t>(r)});
        detail::expand_mdn(est, wide, rng);
        est = std::move(wide);
      } else if (cfg.training.reinitialize_each_round) {
        detail::initialize(est, cfg, r);
      }

      const auto rows = snpe_a ? res.table.rows(r, r) : res.table.rows(1, r);
      TrainingConfig tc = cfg.training;
      Rng train_rng = make_rng(cfg.seed, {stream::kTrain, static_cast<std::uint64_t>(r)});
      TrainResult tr;
      detail::log_line(hooks, alg + " round " + std::to_string(r) + ": training on " + std::to_string(rows.size()) +
                                  " rows");
      if (mog) {
        const auto loss = AptMogLoss::build(est, res.table, prior, mog_proposals);
        tr = train_estimator(est.params(), rows, loss, tc, train_rng);
      } else if (atomic) {
        tc.batch_size = std::min<int>(cfg.atoms, static_cast<int>(rows.size()));
        const auto loss = AtomicLoss::build(est, res.table, prior, rows);
        tr = train_estimator(est.params(), rows, loss, tc, train_rng, 2);
      } else {
        WeightedNllLoss loss{&est, est.context_standardizer().apply_rows(res.table.x()),
                             est.target_standardizer().apply_rows(res.table.theta()), Vec::Ones(res.table.size())};
        if (snpe_b) {
          // Rescale to unit mean over the training rows; relative weights are unchanged.
          double mean = 0.0;
          for (int i : rows) mean += weights[static_cast<std::size_t>(i)];
          mean /= static_cast<double>(rows.size());
          for (int i : rows) loss.weights[i] = weights[static_cast<std::size_t>(i)] / mean;
        }
        tr = train_estimator(est.params(), rows, loss, tc, train_rng);
      }

      RoundRecord rec;
      rec.round = r;
      rec.training = tr;
      rec.simulations = n;
      rec.invalid = batch.invalid_count();
      rec.cumulative_simulations = res.simulations;
      rec.params = est.params();
      rec.architecture = est.architecture();
      if (r == 1) rec.proposal = {{"kind", "prior"}, {"prior", prior.to_json()}};
      else if (mog) rec.proposal = detail::describe(mog_proposals.back());
      else if (snpe_a) rec.proposal = detail::describe(gaussian_proposal->to_mog());
      else rec.proposal = {{"kind", est.is_mdn() ? "mdn" : "maf"}, {"round", r - 1}};

      PosteriorEstimate pe;
      if (snpe_a) {
        const MoGDist q = *est.mog_at(x_o);
        MoGDist post = q;
        if (r > 1) post = snpe_a_correct(q, *gaussian_proposal, prior);
        else if (const auto* g = prior.as_gaussian()) post = snpe_a_correct(q, *g, prior);
        pe = detail::make_estimate(cfg, prior, detail::mog_sampler(post),
                                   [post](const Vec& t) { return post.log_prob(t); }, r);
        if (r < cfg.rounds) {
          if (post.components() != 1) throw ConfigError("snpe-a intermediate rounds need a single component");
          gaussian_proposal = GaussianDist::from_chol(post.means[0], post.chols[0]);
        }
      } else if (const auto q = est.mog_at(x_o)) {
        pe = detail::make_estimate(cfg, prior, detail::mog_sampler(*q),
                                   [q = *q](const Vec& t) { return q.log_prob(t); }, r);
        if (mog) mog_proposals.push_back(*q);
      } else {
        pe = detail::make_estimate(cfg, prior, detail::estimator_sampler(est, x_o),
                                   [e = est, x_o](const Vec& t) { return e.log_prob(x_o, t); }, r);
      }
      detail::finish_round(rec, pe, cfg, hooks);
      res.rounds.push_back(std::move(rec));
      next_sampler = pe.sampler;
      const double log_acc = std::log(pe.acceptance_rate);
      next_log_density = [lp = pe.log_prob, log_acc](const Vec& t) { return lp(t) - log_acc; };
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      res.failure = detail::round_failure(r, e);
      detail::log_line(hooks, alg + " stopped: " + *res.failure);
      break;
    }
  }
  res.importance_weights = Eigen::Map<const Vec>(weights.data(), static_cast<Eigen::Index>(weights.size()));
  return res;
}

}  // namespace apt
