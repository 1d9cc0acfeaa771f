#pragma once

// Maximum mean discrepancy with a Gaussian kernel
// k(x, y) = exp(-|x - y|^2 / (2 h^2)).

#include <algorithm>
#include <vector>

#include "apt/eval/sample_set.hpp"

namespace apt {

namespace detail {

/// Sum of k(x_i, y_j) over all pairs, accumulated in fixed row blocks.
inline double kernel_sum(const Mat& x, const Mat& y, double bandwidth) {
  constexpr Eigen::Index kBlock = 256;
  const double scale = -0.5 / (bandwidth * bandwidth);
  const Vec xn = x.rowwise().squaredNorm();
  const Vec yn = y.rowwise().squaredNorm();
  double total = 0.0;
  for (Eigen::Index r0 = 0; r0 < x.rows(); r0 += kBlock) {
    const Eigen::Index nr = std::min(kBlock, x.rows() - r0);
    Mat d = -2.0 * x.middleRows(r0, nr) * y.transpose();
    d.colwise() += xn.segment(r0, nr);
    d.rowwise() += yn.transpose();
    total += (d.array().max(0.0) * scale).exp().sum();
  }
  return total;
}

/// Strict total order on matrices by shape, then column-major contents.
inline bool matrix_less(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows()) return a.rows() < b.rows();
  if (a.cols() != b.cols()) return a.cols() < b.cols();
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

}  // namespace detail

namespace detail {

inline double mmd_from_sums(double kxx, double kyy, double kxy, double n, double m) {
  return std::sqrt(std::max(0.0, kxx / (n * n) + kyy / (m * m) - 2.0 * (kxy / (n * m))));
}

inline void check_mmd_inputs(const SampleSet& a, const SampleSet& b, double bandwidth) {
  a.check(2);
  b.check(2);
  if (a.dim() != b.dim())
    throw ConfigError("mmd: dimension mismatch (" + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()) + ")");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw ConfigError("mmd: bandwidth must be positive");
}

}  // namespace detail

/// Square root of the biased (V-statistic) squared MMD. The cross term is
/// always accumulated in the same argument order, so mmd(a, b) == mmd(b, a)
/// bit for bit, and mmd(a, a) is exactly 0.
inline double mmd(const SampleSet& a, const SampleSet& b, double bandwidth) {
  detail::check_mmd_inputs(a, b, bandwidth);
  const bool swap = detail::matrix_less(b.draws, a.draws);
  const Mat& x = swap ? b.draws : a.draws;
  const Mat& y = swap ? a.draws : b.draws;
  return detail::mmd_from_sums(detail::kernel_sum(x, x, bandwidth), detail::kernel_sum(y, y, bandwidth),
                               detail::kernel_sum(x, y, bandwidth), static_cast<double>(x.rows()),
                               static_cast<double>(y.rows()));
}

/// MMD against a fixed reference set whose self-similarity term is computed
/// once. Returns exactly what mmd(s, reference, bandwidth) returns.
class ReferenceMmd {
 public:
  ReferenceMmd(SampleSet reference, double bandwidth) : ref_(std::move(reference)), h_(bandwidth) {
    detail::check_mmd_inputs(ref_, ref_, h_);
    krr_ = detail::kernel_sum(ref_.draws, ref_.draws, h_);
  }

  double operator()(const SampleSet& s) const {
    detail::check_mmd_inputs(s, ref_, h_);
    const double kss = detail::kernel_sum(s.draws, s.draws, h_);
    const bool ref_first = detail::matrix_less(ref_.draws, s.draws);
    const double n = static_cast<double>(s.size()), m = static_cast<double>(ref_.size());
    return ref_first ? detail::mmd_from_sums(krr_, kss, detail::kernel_sum(ref_.draws, s.draws, h_), m, n)
                     : detail::mmd_from_sums(kss, krr_, detail::kernel_sum(s.draws, ref_.draws, h_), n, m);
  }

  const SampleSet& reference() const { return ref_; }
  double bandwidth() const { return h_; }

 private:
  SampleSet ref_;
  double h_;
  double krr_ = 0.0;
};

/// Median pairwise Euclidean distance over the union of the two sets. Sets
/// with more than 1000 points in total are thinned to 1000 evenly strided rows.
inline double median_heuristic_bandwidth(const Mat& points) {
  constexpr Eigen::Index kMaxPoints = 1000;
  if (points.rows() < 2) throw ConfigError("median heuristic needs at least two points");
  const Eigen::Index n = std::min(kMaxPoints, points.rows());
  Mat p(n, points.cols());
  for (Eigen::Index i = 0; i < n; ++i) p.row(i) = points.row(i * points.rows() / n);
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d.push_back((p.row(i) - p.row(j)).norm());
  const double h = median(std::move(d));
  if (!(h > 0.0) || !std::isfinite(h))
    throw BandwidthError("median heuristic bandwidth is " + std::to_string(h) + " (points identical or degenerate)");
  return h;
}

inline double median_heuristic_bandwidth(const SampleSet& a, const SampleSet& b) {
  if (a.dim() != b.dim()) throw ConfigError("median heuristic: dimension mismatch");
  Mat all(a.size() + b.size(), a.dim());
  all << a.draws, b.draws;
  return median_heuristic_bandwidth(all);
}

}  // namespace apt
