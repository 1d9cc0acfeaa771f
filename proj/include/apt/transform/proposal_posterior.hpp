#pragma once

// Closed-form conversion between a posterior estimate q and the proposal
// posterior q(theta) p~(theta) / p(theta) / Z when q, the proposal p~ and
// the prior p are Gaussian (or mixtures of Gaussians), plus the inverse
// correction that recovers q from a fitted proposal posterior.
//
// Everything is done in precision form. For a posterior component
// N(mu_i, S_i), a proposal component N(mu~_k, S~_k) and a Gaussian prior
// N(mu_0, S_0):
//   P*_ik = S_i^-1 + S~_k^-1 - S_0^-1
//   h*_ik = S_i^-1 mu_i + S~_k^-1 mu~_k - S_0^-1 mu_0,   mu*_ik = P*^-1 h*
// and the product N_i N~_k / N_0 = c_ik N(mu*_ik, P*_ik^-1) with
//   log c_ik = 1/2 [logdet S*_ik - logdet S_i - logdet S~_k + logdet S_0]
//            - 1/2 [mu_i' P_i mu_i + mu~_k' P~_k mu~_k - mu_0' P_0 mu_0 - h*' S* h*].
// A uniform prior has zero precision; its constant density cancels after
// normalization and contributes -n/2 log(2 pi) to log c.

#include <optional>
#include <string>

#include "apt/transform/prior.hpp"

namespace apt {

namespace detail {

/// Precision-form summary of one Gaussian.
struct GaussTerms {
  Vec mean;
  Mat prec;
  Vec prec_mean;
  double quad = 0.0;        // mean' prec mean
  double logdet_cov = 0.0;

  static GaussTerms from_chol(const Vec& mean, const Mat& chol) {
    GaussTerms t;
    t.mean = mean;
    t.prec = inverse_from_chol(chol);
    t.prec_mean = t.prec * mean;
    t.quad = mean.dot(t.prec_mean);
    t.logdet_cov = logdet_from_chol(chol);
    return t;
  }
};

struct PriorTerms {
  bool uniform = true;
  int dim = 0;
  GaussTerms g;

  static PriorTerms from(const Prior& p) {
    PriorTerms t;
    t.dim = p.dim();
    if (const auto* g = p.as_gaussian()) {
      t.uniform = false;
      t.g = GaussTerms::from_chol(g->mean(), g->chol());
    }
    return t;
  }
};

struct MogTerms {
  Vec log_weights;
  std::vector<GaussTerms> comps;

  static MogTerms from(const MoGDist& d) {
    MogTerms t;
    t.log_weights = d.weights.array().log();
    for (int k = 0; k < d.components(); ++k)
      t.comps.push_back(GaussTerms::from_chol(d.means[static_cast<std::size_t>(k)], d.chols[static_cast<std::size_t>(k)]));
    return t;
  }
};

struct Product {
  double log_c = 0.0;
  Vec mean;
  Mat cov;
  Mat prec_chol;
};

/// Product of a posterior and a proposal component divided by the prior.
/// Returns nullopt if the combined precision is not positive definite.
inline std::optional<Product> product(const GaussTerms& post, const GaussTerms& prop, const PriorTerms& prior) {
  Mat p = post.prec + prop.prec;
  Vec h = post.prec_mean + prop.prec_mean;
  if (!prior.uniform) {
    p -= prior.g.prec;
    h -= prior.g.prec_mean;
  }
  Eigen::LLT<Mat> llt(0.5 * (p + p.transpose()));
  if (llt.info() != Eigen::Success || !(llt.matrixL().toDenseMatrix().diagonal().array() > 0.0).all())
    return std::nullopt;
  Product out;
  out.prec_chol = llt.matrixL();
  out.mean = llt.solve(h);
  out.cov = llt.solve(Mat::Identity(p.rows(), p.cols()));
  const double logdet_cov = -logdet_from_chol(out.prec_chol);
  double quad = post.quad + prop.quad - h.dot(out.mean);
  double logdet = logdet_cov - post.logdet_cov - prop.logdet_cov;
  if (prior.uniform) {
    out.log_c = 0.5 * logdet - 0.5 * quad - 0.5 * static_cast<double>(prior.dim) * kLog2Pi;
  } else {
    quad -= prior.g.quad;
    logdet += prior.g.logdet_cov;
    out.log_c = 0.5 * logdet - 0.5 * quad;
  }
  if (!std::isfinite(out.log_c) || !out.mean.allFinite()) return std::nullopt;
  return out;
}

}  // namespace detail

/// Gaussian proposal posterior for a Gaussian posterior estimate.
inline GaussianDist gaussian_proposal_posterior(const GaussianDist& post, const Prior& prior,
                                                const GaussianDist& proposal) {
  if (post.dim() != prior.dim() || proposal.dim() != prior.dim())
    throw ConfigError("proposal posterior: dimension mismatch");
  const auto pr = detail::product(detail::GaussTerms::from_chol(post.mean(), post.chol()),
                                  detail::GaussTerms::from_chol(proposal.mean(), proposal.chol()),
                                  detail::PriorTerms::from(prior));
  if (!pr) throw PrecisionNotPD("proposal posterior precision is not positive definite", 0, 0);
  return GaussianDist(pr->mean, pr->cov);
}

/// Mixture proposal posterior. Component (i, k) pairs posterior component i
/// with proposal component k and is stored at index i * L + k.
inline MoGDist mog_proposal_posterior(const MoGDist& post, const Prior& prior, const MoGDist& proposal) {
  if (post.dim() != prior.dim() || proposal.dim() != prior.dim())
    throw ConfigError("proposal posterior: dimension mismatch");
  const auto pt = detail::MogTerms::from(post);
  const auto qt = detail::MogTerms::from(proposal);
  const auto prt = detail::PriorTerms::from(prior);
  const int kk = post.components(), ll = proposal.components();
  Vec logw(kk * ll);
  std::vector<Vec> means;
  std::vector<Mat> chols;
  for (int i = 0; i < kk; ++i)
    for (int k = 0; k < ll; ++k) {
      const auto pr = detail::product(pt.comps[static_cast<std::size_t>(i)], qt.comps[static_cast<std::size_t>(k)], prt);
      if (!pr)
        throw PrecisionNotPD("proposal posterior precision of component pair (" + std::to_string(i) + ", " +
                                 std::to_string(k) + ") is not positive definite",
                             i, k);
      logw[i * ll + k] = pt.log_weights[i] + qt.log_weights[k] + pr->log_c;
      means.push_back(pr->mean);
      auto l = cholesky_lower(pr->cov);
      if (!l) throw PrecisionNotPD("proposal posterior covariance factorization failed", i, k);
      chols.push_back(std::move(*l));
    }
  const double z = log_sum_exp(logw);
  return MoGDist((logw.array() - z).exp().matrix(), std::move(means), std::move(chols));
}

/// log of the normalizer Z = integral of q p~ / p, for a mixture posterior
/// estimate. For a uniform prior the prior density itself is left out, so
/// the proposal posterior is q p~ / Z.
inline double mog_log_normalizer(const MoGDist& post, const Prior& prior, const MoGDist& proposal) {
  const auto pt = detail::MogTerms::from(post);
  const auto qt = detail::MogTerms::from(proposal);
  const auto prt = detail::PriorTerms::from(prior);
  Vec terms(post.components() * proposal.components());
  for (int i = 0; i < post.components(); ++i)
    for (int k = 0; k < proposal.components(); ++k) {
      const auto pr = detail::product(pt.comps[static_cast<std::size_t>(i)], qt.comps[static_cast<std::size_t>(k)], prt);
      if (!pr) throw PrecisionNotPD("proposal posterior precision is not positive definite", i, k);
      terms[i * proposal.components() + k] = pt.log_weights[i] + qt.log_weights[k] + pr->log_c;
    }
  return log_sum_exp(terms);
}

/// Recovers the posterior from a fitted proposal posterior by removing a
/// Gaussian proposal and re-inserting the prior, component by component.
/// Mixture weights are obtained by running the product weighting in reverse.
inline MoGDist snpe_a_correct(const MoGDist& prop_post, const GaussianDist& proposal, const Prior& prior) {
  if (prop_post.dim() != prior.dim() || proposal.dim() != prior.dim())
    throw ConfigError("posterior correction: dimension mismatch");
  const auto prt = detail::PriorTerms::from(prior);
  const auto qt = detail::GaussTerms::from_chol(proposal.mean(), proposal.chol());
  const auto pp = detail::MogTerms::from(prop_post);
  const int kk = prop_post.components();
  Vec logw(kk);
  std::vector<Vec> means;
  std::vector<Mat> chols;
  for (int j = 0; j < kk; ++j) {
    const auto& c = pp.comps[static_cast<std::size_t>(j)];
    Mat p = c.prec - qt.prec;
    Vec h = c.prec_mean - qt.prec_mean;
    if (!prt.uniform) {
      p += prt.g.prec;
      h += prt.g.prec_mean;
    }
    Eigen::LLT<Mat> llt(0.5 * (p + p.transpose()));
    if (llt.info() != Eigen::Success || !(llt.matrixL().toDenseMatrix().diagonal().array() > 0.0).all())
      throw NonPositiveDefinite("corrected covariance of component " + std::to_string(j) +
                                    " is not positive definite",
                                j);
    const Vec mu = llt.solve(h);
    const Mat cov = llt.solve(Mat::Identity(p.rows(), p.cols()));
    auto l = cholesky_lower(0.5 * (cov + cov.transpose()));
    if (!l || !mu.allFinite())
      throw NonPositiveDefinite("corrected covariance of component " + std::to_string(j) + " is degenerate", j);
    const auto fwd = detail::product(detail::GaussTerms::from_chol(mu, *l), qt, prt);
    if (!fwd) throw NonPositiveDefinite("corrected component " + std::to_string(j) + " does not round-trip", j);
    logw[j] = pp.log_weights[j] - fwd->log_c;
    means.push_back(mu);
    chols.push_back(std::move(*l));
  }
  const double z = log_sum_exp(logw);
  return MoGDist((logw.array() - z).exp().matrix(), std::move(means), std::move(chols));
}

}  // namespace apt
