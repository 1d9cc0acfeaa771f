#pragma once

#include <cmath>
#include <functional>

#include "apt/core/errors.hpp"
#include "apt/core/linalg.hpp"

namespace apt {

/// Central-difference gradient of f at `at`.
inline Vec central_difference(const std::function<double(const Vec&)>& f, const Vec& at, double h) {
  if (!(h > 0.0)) throw ConfigError("finite difference step must be positive");
  Vec g(at.size());
  Vec p = at;
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    p[i] = at[i] + h;
    const double fp = f(p);
    p[i] = at[i] - h;
    const double fm = f(p);
    p[i] = at[i];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericError("finite difference: non-finite evaluation at coordinate " + std::to_string(i));
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// max_i |g_i - fd_i| / (|g_i| + |fd_i| + 1e-12) for an analytic gradient g.
inline double finite_diff_check(const std::function<double(const Vec&)>& f, const Vec& analytic, const Vec& at,
                                double h = 1e-5) {
  if (analytic.size() != at.size()) throw ConfigError("finite_diff_check: gradient size mismatch");
  const Vec fd = central_difference(f, at, h);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    const double err = std::abs(analytic[i] - fd[i]) / (std::abs(analytic[i]) + std::abs(fd[i]) + 1e-12);
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace apt
