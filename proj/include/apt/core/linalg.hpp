#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

namespace apt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)
inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <class Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

/// log(sum(exp(v))) without overflow; -inf for an empty or all -inf input.
template <class Derived>
double log_sum_exp(const Eigen::DenseBase<Derived>& v) {
  if (v.size() == 0) return -kInf;
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.derived().array() - m).exp().sum());
}

inline double log_sum_exp(const std::vector<double>& v) {
  return log_sum_exp(Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())));
}

/// Number of entries in the lower triangle of an n x n matrix.
constexpr int tril_size(int n) { return n * (n + 1) / 2; }

/// Packs/unpacks lower-triangular matrices in row-major triangle order
/// (0,0),(1,0),(1,1),(2,0),...
inline int tril_index(int i, int j) { return i * (i + 1) / 2 + j; }

/// Cholesky factor of a symmetric matrix, or nullopt when it is not
/// numerically positive definite.
inline std::optional<Mat> cholesky_lower(const Mat& a) {
  Eigen::LLT<Mat> llt(0.5 * (a + a.transpose()));
  if (llt.info() != Eigen::Success) return std::nullopt;
  Mat l = llt.matrixL();
  if (!l.allFinite() || (l.diagonal().array() <= 0.0).any()) return std::nullopt;
  return l;
}

/// log det(L L^T) for lower-triangular L with positive diagonal.
inline double logdet_from_chol(const Mat& l) { return 2.0 * l.diagonal().array().log().sum(); }

/// Inverse of L L^T given its Cholesky factor.
inline Mat inverse_from_chol(const Mat& l) {
  const auto n = l.rows();
  Mat linv = l.triangularView<Eigen::Lower>().solve(Mat::Identity(n, n));
  return linv.transpose() * linv;
}

/// log N(x; mean, L L^T).
inline double gaussian_log_prob(const Vec& x, const Vec& mean, const Mat& chol) {
  const Vec z = chol.triangularView<Eigen::Lower>().solve(x - mean);
  return -0.5 * z.squaredNorm() - chol.diagonal().array().log().sum() - 0.5 * static_cast<double>(x.size()) * kLog2Pi;
}

/// Standard normal CDF.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Kolmogorov-Smirnov statistic of a sample against a continuous CDF.
template <class Cdf>
double ks_statistic(std::vector<double> xs, Cdf&& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

/// Sample quantile with linear interpolation between order statistics
/// (type 7). `sorted` must be ascending.
inline double quantile_sorted(const std::vector<double>& sorted, double level) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = level * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, 0.5);
}

}  // namespace apt
