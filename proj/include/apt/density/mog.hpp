#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "apt/core/errors.hpp"
#include "apt/core/linalg.hpp"
#include "apt/core/rng.hpp"

namespace apt {

/// Finite Gaussian mixture sum_k w_k N(mean_k, L_k L_k^T).
struct MoGDist {
  Vec weights;
  std::vector<Vec> means;
  std::vector<Mat> chols;  // lower triangular, positive diagonal

  MoGDist() = default;
  MoGDist(Vec w, std::vector<Vec> mu, std::vector<Mat> l)
      : weights(std::move(w)), means(std::move(mu)), chols(std::move(l)) {}

  /// Single Gaussian component.
  static MoGDist gaussian(const Vec& mean, const Mat& chol) { return MoGDist(Vec::Ones(1), {mean}, {chol}); }

  int components() const { return static_cast<int>(weights.size()); }
  int dim() const { return means.empty() ? 0 : static_cast<int>(means.front().size()); }

  Mat covariance(int k) const { return chols[static_cast<std::size_t>(k)] * chols[static_cast<std::size_t>(k)].transpose(); }
  Mat precision(int k) const { return inverse_from_chol(chols[static_cast<std::size_t>(k)]); }

  void validate() const {
    const int k = components();
    if (k < 1 || static_cast<int>(means.size()) != k || static_cast<int>(chols.size()) != k)
      throw ConfigError("MoG: inconsistent component count");
    if (std::abs(weights.sum() - 1.0) > 1e-12 || (weights.array() < 0.0).any())
      throw ConfigError("MoG: weights must lie on the simplex");
    for (int i = 0; i < k; ++i) {
      const auto& l = chols[static_cast<std::size_t>(i)];
      if (means[static_cast<std::size_t>(i)].size() != dim() || l.rows() != dim() || l.cols() != dim())
        throw ConfigError("MoG: component " + std::to_string(i) + " has wrong dimension");
      if ((l.diagonal().array() <= 0.0).any())
        throw ConfigError("MoG: component " + std::to_string(i) + " factor has non-positive diagonal");
    }
  }

  double log_prob(const Vec& theta) const {
    if (theta.size() != dim()) throw ConfigError("MoG log_prob: dimension mismatch");
    Vec terms(components());
    for (int k = 0; k < components(); ++k) {
      const auto ku = static_cast<std::size_t>(k);
      terms[k] = std::log(weights[k]) + gaussian_log_prob(theta, means[ku], chols[ku]);
    }
    return log_sum_exp(terms);
  }

  /// Ancestral sampling: component index, then Gaussian.
  Vec sample(Rng& rng) const {
    double u = uniform01(rng);
    int k = 0;
    for (; k < components() - 1; ++k) {
      u -= weights[k];
      if (u < 0.0) break;
    }
    Vec z(dim());
    for (int i = 0; i < dim(); ++i) z[i] = std_normal(rng);
    const auto ku = static_cast<std::size_t>(k);
    return means[ku] + chols[ku].triangularView<Eigen::Lower>() * z;
  }

  Vec mean() const {
    Vec m = Vec::Zero(dim());
    for (int k = 0; k < components(); ++k) m += weights[k] * means[static_cast<std::size_t>(k)];
    return m;
  }

  Mat covariance() const {
    const Vec m = mean();
    Mat c = Mat::Zero(dim(), dim());
    for (int k = 0; k < components(); ++k) {
      const Vec d = means[static_cast<std::size_t>(k)] - m;
      c += weights[k] * (covariance(k) + d * d.transpose());
    }
    return c;
  }

  /// CDF of the 1D marginal along coordinate `i`.
  double marginal_cdf(int i, double v) const {
    double p = 0.0;
    for (int k = 0; k < components(); ++k) {
      const double sd = std::sqrt(covariance(k)(i, i));
      p += weights[k] * normal_cdf((v - means[static_cast<std::size_t>(k)][i]) / sd);
    }
    return p;
  }

  /// Distribution of shift + scale .* theta.
  MoGDist affine(const Vec& shift, const Vec& scale) const {
    MoGDist out = *this;
    for (int k = 0; k < components(); ++k) {
      const auto ku = static_cast<std::size_t>(k);
      out.means[ku] = shift + scale.cwiseProduct(means[ku]);
      out.chols[ku] = scale.asDiagonal() * chols[ku];
    }
    return out;
  }
};

inline double mog_log_prob(const MoGDist& d, const Vec& theta) { return d.log_prob(theta); }
inline Vec mog_sample(const MoGDist& d, Rng& rng) { return d.sample(rng); }

}  // namespace apt
