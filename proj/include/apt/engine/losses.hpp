#pragma once

// Training losses as callables loss(ctx, rows) -> summed 1 x 1 loss over the
// given row indices. All data is held in the estimator's standardized space.

#include "apt/density/estimator.hpp"
#include "apt/engine/sim_table.hpp"
#include "apt/transform/atomic.hpp"
#include "apt/transform/mog_normalizer.hpp"

namespace apt {

namespace detail {

/// Prior expressed in the standardized parameter space.
inline Prior standardize_prior(const Prior& p, const Standardizer& s) {
  if (const auto* b = p.as_box()) return Prior::box(s.apply(b->lower), s.apply(b->upper));
  const auto* g = p.as_gaussian();
  const Vec inv = s.scale.cwiseInverse();
  return Prior::gaussian(s.apply(g->mean()), inv.asDiagonal() * g->cov() * inv.asDiagonal());
}

/// Mixture expressed in the standardized parameter space.
inline MoGDist standardize_mog(const MoGDist& d, const Standardizer& s) {
  return d.affine(-s.shift.cwiseQuotient(s.scale), s.scale.cwiseInverse());
}

}  // namespace detail

/// -sum_j w_j log q(target_j | context_j); unit weights give the plain
/// negative log-likelihood.
struct WeightedNllLoss {
  const CondDensityEstimator* est = nullptr;
  Mat contexts;  // standardized
  Mat targets;   // standardized
  Vec weights;

  template <class Ctx>
  typename Ctx::Value operator()(Ctx& ctx, const std::vector<int>& rows) const {
    const Mat c = contexts(rows, Eigen::all);
    const Mat t = targets(rows, Eigen::all);
    Mat w(static_cast<Eigen::Index>(rows.size()), 1);
    for (std::size_t i = 0; i < rows.size(); ++i) w(static_cast<Eigen::Index>(i), 0) = weights[rows[i]];
    using ad::scale;
    using ad::weighted_sum;
    return scale(weighted_sum(est->log_prob_rows(ctx, ctx.constant(c), t), w), -1.0);
  }
};

/// Loss of the analytic-proposal variant: each row's density is the MDN
/// posterior transformed by the proposal the row was drawn from,
///   log q~(theta) = log q(theta) + log p~(theta) - log p(theta) - log Z,
/// with the prior term dropped for a uniform prior (it is constant and the
/// normalizer omits it too). Proposal id -1 marks prior rows (q~ = q).
struct AptMogLoss {
  const Mdn* mdn = nullptr;
  Mat contexts;
  Mat targets;
  std::vector<int> proposal_of_row;
  std::vector<detail::MogTerms> proposals;
  detail::PriorTerms prior;
  Vec offset;  // log p~ - log p per row (0 for prior rows)

  template <class Ctx>
  typename Ctx::Value operator()(Ctx& ctx, const std::vector<int>& rows) const {
    using ad::add;
    using ad::sub;
    using ad::sum_all;
    const Mat c = contexts(rows, Eigen::all);
    const Mat t = targets(rows, Eigen::all);
    std::vector<int> pid, ident;
    double off = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      pid.push_back(proposal_of_row[static_cast<std::size_t>(rows[i])]);
      ident.push_back(static_cast<int>(i));
      off += offset[rows[i]];
    }
    const auto heads = mdn->heads(ctx, ctx.constant(c));
    const auto lp = mog_head_log_prob(heads, mdn->head_layout(), t, ident);
    const auto lz = apt_mog_log_normalizer(heads, mdn->head_layout(), proposals, pid, prior);
    return sub(sum_all(lz), add(sum_all(lp), ctx.constant(Mat::Constant(1, 1, off))));
  }

  /// Builds the loss for every row of `table`. `proposals[i]` is the mixture
  /// (original space) rows with proposal id i were drawn from.
  static AptMogLoss build(const CondDensityEstimator& est, const SimTable& table, const Prior& prior,
                          const std::vector<MoGDist>& proposals_orig) {
    AptMogLoss l;
    l.mdn = est.as_mdn();
    if (l.mdn == nullptr) throw ConfigError("apt-mog requires an MDN estimator");
    const auto& ts = est.target_standardizer();
    l.contexts = est.context_standardizer().apply_rows(table.x());
    l.targets = ts.apply_rows(table.theta());
    const Prior prior_std = detail::standardize_prior(prior, ts);
    l.prior = detail::PriorTerms::from(prior_std);
    std::vector<MoGDist> props_std;
    for (const auto& p : proposals_orig) {
      props_std.push_back(detail::standardize_mog(p, ts));
      l.proposals.push_back(detail::MogTerms::from(props_std.back()));
    }
    l.offset = Vec::Zero(table.size());
    for (int i = 0; i < table.size(); ++i) {
      const int p = table.proposal_of(i);
      l.proposal_of_row.push_back(p);
      if (p < 0 || !table.valid(i)) continue;
      const Vec th = l.targets.row(i).transpose();
      l.offset[i] = props_std[static_cast<std::size_t>(p)].log_prob(th) - (prior_std.is_uniform() ? 0.0 : prior_std.log_prob(th));
    }
    return l;
  }
};

/// Atomic loss: every minibatch is its own atom set.
struct AtomicLoss {
  const CondDensityEstimator* est = nullptr;
  Mat contexts;
  Mat targets;
  Vec log_prior;  // per row, original space

  template <class Ctx>
  typename Ctx::Value operator()(Ctx& ctx, const std::vector<int>& rows) const {
    const Mat c = contexts(rows, Eigen::all);
    const Mat t = targets(rows, Eigen::all);
    const Vec lp = log_prior(rows);
    return atomic_loss_minibatch(ctx, *est, ctx.constant(c), t, lp);
  }

  static AtomicLoss build(const CondDensityEstimator& est, const SimTable& table, const Prior& prior,
                          const std::vector<int>& rows) {
    AtomicLoss l;
    l.est = &est;
    l.contexts = est.context_standardizer().apply_rows(table.x());
    l.targets = est.target_standardizer().apply_rows(table.theta());
    l.log_prior = Vec::Zero(table.size());
    if (!prior.is_uniform())
      for (int r : rows) l.log_prior[r] = prior.log_prob(table.theta().row(r).transpose());
    return l;
  }
};

}  // namespace apt
