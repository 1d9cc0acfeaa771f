#pragma once

// Atomic proposal posterior: with the proposal uniform over a finite atom
// set, the proposal posterior of atom j is the categorical
//   q~(theta_j) = (q(theta_j) / p(theta_j)) / sum_m q(theta_m) / p(theta_m).
// Per-context normalization constants of q cancel, so any estimator that
// yields log-densities up to a context-dependent shift can be trained.
//
// Minibatch cost: M contexts, each evaluated against all M atoms (M^2
// density evaluations; an MDN needs only M forward passes).

#include <functional>
#include <set>

#include "apt/density/estimator.hpp"
#include "apt/transform/prior.hpp"

namespace apt {

/// Finite candidate set: atoms as rows plus the table rows they came from.
struct AtomSet {
  Mat atoms;
  std::vector<int> source;

  int size() const { return static_cast<int>(atoms.rows()); }

  void validate() const {
    if (atoms.rows() < 2) throw ConfigError("atom set needs at least 2 atoms");
    if (!source.empty()) {
      if (static_cast<Eigen::Index>(source.size()) != atoms.rows())
        throw ConfigError("atom set: source index count differs from atom count");
      if (std::set<int>(source.begin(), source.end()).size() != source.size())
        throw ConfigError("atom set: source indices must be distinct");
    }
  }
};

/// log p(theta_m) for every atom; zeros for a uniform prior, whose constant
/// density cancels. Atoms outside the support raise InvalidAtom.
inline Vec atom_log_prior(const Prior& prior, const Mat& atoms) {
  Vec lp = Vec::Zero(atoms.rows());
  for (Eigen::Index m = 0; m < atoms.rows(); ++m) {
    const Vec a = atoms.row(m).transpose();
    if (!prior.contains(a)) throw InvalidAtom("atom " + std::to_string(m) + " lies outside the prior support");
    if (!prior.is_uniform()) lp[m] = prior.log_prob(a);
  }
  return lp;
}

/// log q~ of atom `index` given log q at every atom.
inline double atomic_log_prob(const Vec& q_log_probs, const Vec& log_prior, int index) {
  if (q_log_probs.size() != log_prior.size() || q_log_probs.size() < 2)
    throw ConfigError("atomic_log_prob: need >= 2 atoms with matching prior values");
  if (index < 0 || index >= q_log_probs.size()) throw ConfigError("atomic_log_prob: index outside atom set");
  const Vec logits = q_log_probs - log_prior;
  return logits[index] - log_sum_exp(logits);
}

inline double atomic_log_prob(const std::function<double(const Vec&)>& q_log_prob, const Prior& prior,
                              const AtomSet& atoms, int index) {
  atoms.validate();
  const Vec lp = atom_log_prior(prior, atoms.atoms);
  Vec q(atoms.size());
  for (int m = 0; m < atoms.size(); ++m) q[m] = q_log_prob(atoms.atoms.row(m).transpose());
  return atomic_log_prob(q, lp, index);
}

/// Sum over rows b of -log q~_b(theta_b), given the M x M matrix of
/// log q(theta_c | x_b) and the log prior of each atom. Works on either
/// backend.
template <class Ctx, class V>
V atomic_loss_from_pairs(Ctx& ctx, const V& pairs, const Vec& log_prior) {
  using ad::add;
  using ad::diagonal;
  using ad::logsumexp_rows;
  using ad::sub;
  using ad::sum_all;
  const auto m = log_prior.size();
  const V logits = add(pairs, ctx.constant(Mat((-log_prior).transpose().replicate(m, 1))));
  return sub(sum_all(logsumexp_rows(logits)), sum_all(diagonal(logits)));
}

/// Atomic loss for a minibatch whose contexts and targets are already in the
/// estimator's standardized space; `log_prior` is evaluated in the original
/// space (the standardization Jacobian is constant and cancels).
template <class Ctx, class V>
V atomic_loss_minibatch(Ctx& ctx, const CondDensityEstimator& est, const V& contexts_std, const Mat& targets_std,
                        const Vec& log_prior) {
  if (targets_std.rows() < 2) throw ConfigError("atomic loss needs a minibatch of at least 2 rows");
  return atomic_loss_from_pairs(ctx, est.log_prob_pairs(ctx, contexts_std, targets_std), log_prior);
}

/// Convenience value-backend loss in the original space.
inline double atomic_loss_minibatch(const CondDensityEstimator& est, const Prior& prior, const Mat& contexts,
                                    const Mat& targets) {
  if (contexts.rows() != targets.rows()) throw ConfigError("atomic loss: row count mismatch");
  const Vec lp = atom_log_prior(prior, targets);
  ad::ValueContext ctx(est.params());
  const Mat c = est.context_standardizer().apply_rows(contexts);
  return atomic_loss_minibatch(ctx, est, c, est.target_standardizer().apply_rows(targets), lp)(0, 0);
}

}  // namespace apt
