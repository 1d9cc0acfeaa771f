#pragma once

#include <cmath>
#include <string>

#include "apt/core/errors.hpp"
#include "apt/core/linalg.hpp"
#include "apt/core/log.hpp"

namespace apt {

/// Per-dimension affine whitening: v_std = (v - shift) / scale.
struct Standardizer {
  Vec shift;
  Vec scale;

  static Standardizer identity(int dim) { return {Vec::Zero(dim), Vec::Ones(dim)}; }

  /// Column means and standard deviations of `data` (rows = samples).
  /// Zero-variance columns keep scale 1.
  static Standardizer fit(const Mat& data) {
    if (data.rows() < 2) throw ConfigError("standardize_fit needs at least 2 rows");
    if (!data.allFinite()) throw InputError("standardize_fit: non-finite data");
    Standardizer s;
    s.shift = data.colwise().mean().transpose();
    s.scale = Vec(data.cols());
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      const double var = (data.col(j).array() - s.shift[j]).square().sum() / static_cast<double>(data.rows() - 1);
      const double sd = std::sqrt(var);
      if (!(sd > 1e-12 * std::max(1.0, std::abs(s.shift[j])))) {
        warn("standardizer: column " + std::to_string(j) + " has zero variance; scale clamped to 1");
        s.scale[j] = 1.0;
      } else {
        s.scale[j] = sd;
      }
    }
    return s;
  }

  int dim() const { return static_cast<int>(shift.size()); }

  Vec apply(const Vec& v) const { return (v - shift).cwiseQuotient(scale); }
  Vec invert(const Vec& v) const { return v.cwiseProduct(scale) + shift; }

  Mat apply_rows(const Mat& m) const {
    return (m.rowwise() - shift.transpose()).array().rowwise() / scale.transpose().array();
  }
  Mat invert_rows(const Mat& m) const {
    return (m.array().rowwise() * scale.transpose().array()).matrix().rowwise() + shift.transpose();
  }

  /// log |d v_std / d v| = -sum log scale.
  double log_jacobian() const { return -scale.array().log().sum(); }
};

}  // namespace apt
