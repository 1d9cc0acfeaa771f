#pragma once

// Fused training kernel for the analytic-proposal loss: log of the
// normalizer of q p~ / p for a batch of MDN head rows, each paired with the
// proposal that generated its training row.
//
// With zeta_ik the normalized product weights, the derivatives are
//   d logZ / d logit_i = sum_k zeta_ik - alpha_i
//   d logZ / d mu_i    = sum_k zeta_ik P_i (mu*_ik - mu_i)
//   d logZ / d P_i     = sum_k zeta_ik G_ik,
//   G_ik = 1/2 (S_i - S*_ik) - 1/2 (mu_i - mu*_ik)(mu_i - mu*_ik)'
// and, for the covariance factor L_i, d logZ / d L_i = tril(-2 P_i G P_i L_i).

#include "apt/density/mog_head.hpp"
#include "apt/transform/proposal_posterior.hpp"

namespace apt {

namespace detail {

struct NormalizerRow {
  double log_z = 0.0;
  Mat zeta;                                 // K x L
  std::vector<GaussTerms> post;             // per posterior component
  std::vector<std::vector<Product>> prods;  // [i][k]
};

inline NormalizerRow normalizer_row(const DecodedMog& d, const MogTerms& prop, const PriorTerms& prior) {
  NormalizerRow r;
  const auto kk = d.log_weights.size();
  const auto ll = prop.log_weights.size();
  r.zeta.resize(kk, ll);
  r.prods.resize(static_cast<std::size_t>(kk));
  for (Eigen::Index i = 0; i < kk; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    r.post.push_back(GaussTerms::from_chol(d.means[iu], d.chols[iu]));
    for (Eigen::Index k = 0; k < ll; ++k) {
      auto pr = product(r.post.back(), prop.comps[static_cast<std::size_t>(k)], prior);
      if (!pr)
        throw PrecisionNotPD("proposal posterior precision of component pair (" + std::to_string(i) + ", " +
                                 std::to_string(k) + ") is not positive definite",
                             static_cast<int>(i), static_cast<int>(k));
      r.zeta(i, k) = d.log_weights[i] + prop.log_weights[k] + pr->log_c;
      r.prods[iu].push_back(std::move(*pr));
    }
  }
  r.log_z = r.zeta.maxCoeff();
  r.log_z += std::log((r.zeta.array() - r.log_z).exp().sum());
  r.zeta = (r.zeta.array() - r.log_z).exp().matrix();
  return r;
}

}  // namespace detail

/// log Z for every head row. Rows whose proposal index is negative were
/// drawn from the prior itself and get log Z = 0.
inline Mat apt_mog_log_normalizer(const Mat& heads, const MogHeadLayout& h,
                                  const std::vector<detail::MogTerms>& proposals,
                                  const std::vector<int>& proposal_of_row, const detail::PriorTerms& prior) {
  Mat out = Mat::Zero(heads.rows(), 1);
  for (Eigen::Index r = 0; r < heads.rows(); ++r) {
    const int p = proposal_of_row[static_cast<std::size_t>(r)];
    if (p < 0) continue;
    out(r, 0) = detail::normalizer_row(decode_head(h, heads.row(r)), proposals[static_cast<std::size_t>(p)], prior).log_z;
  }
  return out;
}

inline ad::Var apt_mog_log_normalizer(const ad::Var& heads, const MogHeadLayout& h,
                                      const std::vector<detail::MogTerms>& proposals,
                                      const std::vector<int>& proposal_of_row, const detail::PriorTerms& prior) {
  ad::Tape& t = *heads.tape();
  const int hi = heads.id();
  Mat value = apt_mog_log_normalizer(heads.value(), h, proposals, proposal_of_row, prior);
  return t.record(
      std::move(value), "apt_mog_log_normalizer", t.needs_grad(heads),
      [hi, h, proposals, proposal_of_row, prior](ad::Tape& tp, const Mat& g) {
        const Mat& hv = tp.value(hi);
        Mat dh = Mat::Zero(hv.rows(), hv.cols());
        for (Eigen::Index r = 0; r < hv.rows(); ++r) {
          const int p = proposal_of_row[static_cast<std::size_t>(r)];
          if (p < 0 || g(r, 0) == 0.0) continue;
          const auto d = decode_head(h, hv.row(r));
          const auto nr = detail::normalizer_row(d, proposals[static_cast<std::size_t>(p)], prior);
          const double gr = g(r, 0);
          for (int i = 0; i < h.components; ++i) {
            const auto iu = static_cast<std::size_t>(i);
            const double rho = nr.zeta.row(i).sum();
            dh(r, i) += gr * (rho - std::exp(d.log_weights[i]));
            const auto& pt = nr.post[iu];
            const Mat cov_i = d.chols[iu] * d.chols[iu].transpose();
            Vec dmu = Vec::Zero(h.dim);
            Mat gp = Mat::Zero(h.dim, h.dim);
            for (Eigen::Index k = 0; k < nr.zeta.cols(); ++k) {
              const auto& pr = nr.prods[iu][static_cast<std::size_t>(k)];
              const double z = nr.zeta(i, k);
              const Vec diff = pt.mean - pr.mean;
              dmu -= z * (pt.prec * diff);
              gp += z * (0.5 * (cov_i - pr.cov) - 0.5 * diff * diff.transpose());
            }
            Mat dl = (-2.0 * pt.prec * gp * pt.prec * d.chols[iu]).triangularView<Eigen::Lower>();
            detail::add_component_adjoint(dh.row(r), h, i, gr * dmu, gr * dl, d.chols[iu]);
          }
        }
        tp.accumulate(hi, dh);
      });
}

}  // namespace apt
