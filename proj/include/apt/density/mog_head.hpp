#pragma once

// Decoding of mixture-density-network outputs into mixtures of Gaussians,
// and the fused log-density kernel used during training.
//
// Head row layout for K components over R^n:
//   [ logits (K) | means (K*n) | factor entries (K * n(n+1)/2) ]
// Factor entries fill each lower-triangular covariance factor in row-major
// triangle order; diagonal entries pass through exp.

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "apt/core/errors.hpp"
#include "apt/density/mog.hpp"
#include "apt/diffcore/ops.hpp"

namespace apt {

struct MogHeadLayout {
  int components = 1;
  int dim = 1;

  int size() const { return components * (1 + dim + tril_size(dim)); }
  int mean_offset(int k) const { return components + k * dim; }
  int factor_offset(int k) const { return components + components * dim + k * tril_size(dim); }
};

struct DecodedMog {
  Vec log_weights;
  std::vector<Vec> means;
  std::vector<Mat> chols;

  MoGDist to_mog() const {
    return MoGDist(log_weights.array().exp().matrix(), means, chols);
  }
};

template <class Row>
DecodedMog decode_head(const MogHeadLayout& h, const Row& row) {
  DecodedMog d;
  const int k_n = h.components, n = h.dim;
  Vec logits(k_n);
  for (int k = 0; k < k_n; ++k) logits[k] = row(k);
  d.log_weights = logits.array() - log_sum_exp(logits);
  d.means.resize(static_cast<std::size_t>(k_n));
  d.chols.resize(static_cast<std::size_t>(k_n));
  for (int k = 0; k < k_n; ++k) {
    Vec mu(n);
    for (int i = 0; i < n; ++i) mu[i] = row(h.mean_offset(k) + i);
    Mat l = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) {
        const double raw = row(h.factor_offset(k) + tril_index(i, j));
        l(i, j) = (i == j) ? std::exp(raw) : raw;
      }
    d.means[static_cast<std::size_t>(k)] = std::move(mu);
    d.chols[static_cast<std::size_t>(k)] = std::move(l);
  }
  return d;
}

namespace detail {

/// Adds the adjoint of one component (w.r.t. its mean and full lower factor)
/// into a head-row adjoint, chaining through the exp on the diagonal.
template <class Row>
void add_component_adjoint(Row&& dhead, const MogHeadLayout& h, int k, const Vec& dmean, const Mat& dchol,
                           const Mat& chol) {
  const int n = h.dim;
  for (int i = 0; i < n; ++i) dhead(h.mean_offset(k) + i) += dmean[i];
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      const double g = (i == j) ? dchol(i, j) * chol(i, i) : dchol(i, j);
      dhead(h.factor_offset(k) + tril_index(i, j)) += g;
    }
}


// Components further than this below the mixture total are dropped; their
// terms would be subnormal, which is both meaningless and very slow.
inline constexpr double kNegligibleLog = -600.0;

/// Pairs grouped by head row. For row r, `resp` and each `z[i]` are
/// (pairs of r) x K: responsibilities and whitened residuals L_c^{-1}(theta - mu_c).
struct RowPairs {
  std::vector<Eigen::Index> idx;
  Mat resp;
  std::vector<Mat> z;
};

inline std::vector<RowPairs> group_pairs(Eigen::Index rows, const std::vector<int>& row_of) {
  std::vector<RowPairs> out(static_cast<std::size_t>(rows));
  for (std::size_t j = 0; j < row_of.size(); ++j) {
    if (row_of[j] < 0 || row_of[j] >= rows) throw ConfigError("mog_head_log_prob: pair row out of range");
    out[static_cast<std::size_t>(row_of[j])].idx.push_back(static_cast<Eigen::Index>(j));
  }
  return out;
}

/// Evaluates all pairs of one head row, writing log densities into `value`.
/// With `keep` set, responsibilities and residuals stay in `rp`.
inline void eval_row(const DecodedMog& d, const Mat& targets, RowPairs& rp, Mat& value, bool keep) {
  const auto cnt = static_cast<Eigen::Index>(rp.idx.size());
  if (cnt == 0) return;
  const auto k_n = d.log_weights.size();
  const auto n = targets.cols();
  Mat t(cnt, n);
  for (Eigen::Index q = 0; q < cnt; ++q) t.row(q) = targets.row(rp.idx[static_cast<std::size_t>(q)]);
  rp.z.assign(static_cast<std::size_t>(n), Mat(cnt, k_n));
  Mat lp(cnt, k_n);
  for (Eigen::Index c = 0; c < k_n; ++c) {
    const auto& l = d.chols[static_cast<std::size_t>(c)];
    const auto& mu = d.means[static_cast<std::size_t>(c)];
    auto acc = lp.col(c).array();
    acc.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      auto zi = rp.z[static_cast<std::size_t>(i)].col(c).array();
      zi = t.col(i).array() - mu[i];
      for (Eigen::Index j = 0; j < i; ++j) zi -= l(i, j) * rp.z[static_cast<std::size_t>(j)].col(c).array();
      zi /= l(i, i);
      acc += zi.square();
    }
    const double log_norm = d.log_weights[c] - l.diagonal().array().log().sum() - 0.5 * static_cast<double>(n) * kLog2Pi;
    acc = log_norm - 0.5 * acc;
  }
  const Vec mx = lp.rowwise().maxCoeff();
  lp.colwise() -= mx;
  auto e = lp.array();
  e = e.max(kNegligibleLog);
  e = e.exp();
  const double floor = std::exp(kNegligibleLog);
  for (double& v : lp.reshaped())
    if (v <= floor) v = 0.0;
  const Vec s = lp.rowwise().sum();
  for (Eigen::Index q = 0; q < cnt; ++q)
    value(rp.idx[static_cast<std::size_t>(q)], 0) = std::isfinite(mx[q]) ? mx[q] + std::log(s[q]) : mx[q];
  if (keep) rp.resp = lp.array().colwise() / s.array();
  else rp.z.clear();
}

}  // namespace detail

/// log q(targets_j) under the mixture decoded from heads.row(row_of[j]).
inline Mat mog_head_log_prob(const Mat& heads, const MogHeadLayout& h, const Mat& targets,
                             const std::vector<int>& row_of) {
  auto groups = detail::group_pairs(heads.rows(), row_of);
  Mat out(targets.rows(), 1);
  for (Eigen::Index r = 0; r < heads.rows(); ++r)
    if (!groups[static_cast<std::size_t>(r)].idx.empty())
      detail::eval_row(decode_head(h, heads.row(r)), targets, groups[static_cast<std::size_t>(r)], out, false);
  return out;
}

/// Taped version; gradients flow into `heads` only. The forward pass keeps
/// responsibilities and whitened residuals for the backward pass.
inline ad::Var mog_head_log_prob(const ad::Var& heads, const MogHeadLayout& h, const Mat& targets,
                                 const std::vector<int>& row_of) {
  ad::Tape& t = *heads.tape();
  if (!t.needs_grad(heads))
    return t.record(mog_head_log_prob(heads.value(), h, targets, row_of), "mog_log_prob", false, nullptr);
  struct Cache {
    std::vector<DecodedMog> dec;
    std::vector<detail::RowPairs> groups;
  };
  auto cache = std::make_shared<Cache>();
  const Mat& hv = heads.value();
  cache->groups = detail::group_pairs(hv.rows(), row_of);
  Mat value(targets.rows(), 1);
  for (Eigen::Index r = 0; r < hv.rows(); ++r) {
    cache->dec.push_back(decode_head(h, hv.row(r)));
    detail::eval_row(cache->dec.back(), targets, cache->groups[static_cast<std::size_t>(r)], value, true);
  }
  return t.record(std::move(value), "mog_log_prob", true, [hi = heads.id(), h, cache](ad::Tape& tp, const Mat& g) {
    const Mat& hv = tp.value(hi);
    const int k_n = h.components, n = h.dim;
    Mat dh = Mat::Zero(hv.rows(), hv.cols());
    for (Eigen::Index r = 0; r < hv.rows(); ++r) {
      const auto& rp = cache->groups[static_cast<std::size_t>(r)];
      const auto cnt = static_cast<Eigen::Index>(rp.idx.size());
      if (cnt == 0) continue;
      const auto& d = cache->dec[static_cast<std::size_t>(r)];
      Vec gr(cnt);
      for (Eigen::Index q = 0; q < cnt; ++q) gr[q] = g(rp.idx[static_cast<std::size_t>(q)], 0);
      const Mat w = rp.resp.array().colwise() * gr.array();
      const double g_total = gr.sum();
      Mat u(cnt, n);
      for (int c = 0; c < k_n; ++c) {
        const auto cu = static_cast<std::size_t>(c);
        const auto wc = w.col(c).array();
        dh(r, c) = wc.sum() - g_total * std::exp(d.log_weights[c]);
        const auto& l = d.chols[cu];
        // u = L^{-T} z
        for (int i = n - 1; i >= 0; --i) {
          auto ui = u.col(i).array();
          ui = rp.z[static_cast<std::size_t>(i)].col(c).array();
          for (int k = i + 1; k < n; ++k) ui -= l(k, i) * u.col(k).array();
          ui /= l(i, i);
        }
        for (int i = 0; i < n; ++i) {
          const auto wu = wc * u.col(i).array();
          dh(r, h.mean_offset(c) + i) = wu.sum();
          for (int k = 0; k < i; ++k)
            dh(r, h.factor_offset(c) + tril_index(i, k)) = (wu * rp.z[static_cast<std::size_t>(k)].col(c).array()).sum();
          // diagonal entries pass through exp
          dh(r, h.factor_offset(c) + tril_index(i, i)) =
              (wu * rp.z[static_cast<std::size_t>(i)].col(c).array()).sum() * l(i, i) - wc.sum();
        }
      }
    }
    tp.accumulate(hi, dh);
  });
}

}  // namespace apt
