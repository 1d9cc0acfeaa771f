#pragma once

#include <numbers>

#include "apt/simulators/simulator.hpp"

namespace apt {

/// Crescent-shaped noise p = (r cos a + 0.25, r sin a), a ~ U(-pi/2, pi/2),
/// r ~ N(0.1, 0.01^2), shifted and rotated by theta:
///   x = p + (-|theta1 + theta2| / sqrt 2, (theta2 - theta1) / sqrt 2).
/// The likelihood is available by the polar change of variables
///   p(x | theta) = (1/pi) N(r; 0.1, 0.01^2) / r  for r cos a > 0.
class TwoMoons final : public Simulator {
 public:
  static constexpr double kRadiusMean = 0.1;
  static constexpr double kRadiusSd = 0.01;
  static constexpr double kOffset = 0.25;

  explicit TwoMoons(const nlohmann::json& opts = {}) {
    prior_ = Prior::box(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0));
    observed_ = option_vec(opts, "x_o", Vec::Zero(2));
    // A parameter that generates x_o = (0, 0) at a = 0, r = 0.1.
    theta_true_ = option_vec(opts, "theta_true", Vec::Constant(2, (kOffset + kRadiusMean) / std::numbers::sqrt2));
  }

  std::string name() const override { return "two_moons"; }
  int theta_dim() const override { return 2; }
  int x_dim() const override { return 2; }

  SimOutcome run(const Vec& theta, Rng& rng) const override {
    check_theta(theta);
    const double a = std::numbers::pi * (uniform01(rng) - 0.5);
    const double r = kRadiusMean + kRadiusSd * std_normal(rng);
    return {simulate_with(theta, a, r), true};
  }

  /// Deterministic map for given latent angle and radius.
  static Vec simulate_with(const Vec& theta, double a, double r) {
    Vec x(2);
    x << r * std::cos(a) + kOffset - std::abs(theta[0] + theta[1]) / std::numbers::sqrt2,
        r * std::sin(a) + (theta[1] - theta[0]) / std::numbers::sqrt2;
    return x;
  }

  bool has_log_likelihood() const override { return true; }
  double log_likelihood(const Vec& theta, const Vec& x) const override {
    const double u = x[0] + std::abs(theta[0] + theta[1]) / std::numbers::sqrt2 - kOffset;
    const double v = x[1] - (theta[1] - theta[0]) / std::numbers::sqrt2;
    if (!(u > 0.0)) return -kInf;
    const double r = std::hypot(u, v);
    const double z = (r - kRadiusMean) / kRadiusSd;
    return -std::log(std::numbers::pi) - 0.5 * z * z - std::log(kRadiusSd) - 0.5 * kLog2Pi - std::log(r);
  }
};

}  // namespace apt
