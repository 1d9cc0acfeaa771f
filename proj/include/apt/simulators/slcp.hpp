#pragma once

#include <cmath>

#include "apt/simulators/simulator.hpp"

namespace apt {

/// Four iid draws from a bivariate Gaussian with mean (theta1, theta2) and
/// covariance [[theta3^2, theta3 theta4 tanh theta5], [., theta4^2]].
/// Output order: (x1, y1, x2, y2, ..., x4, y4).
class Slcp : public Simulator {
 public:
  explicit Slcp(const nlohmann::json& opts = {}, bool read_observed = true) {
    prior_ = Prior::box(Vec::Constant(5, -3.0), Vec::Constant(5, 3.0));
    theta_true_ = option_vec(opts, "theta_true", (Vec(5) << 0.7, -2.9, -1.0, -0.9, 0.6).finished());
    observed_seed_ = option<std::uint64_t>(opts, "observed_seed", 1);
    options_ = {{"observed_seed", observed_seed_}};
    if (read_observed && opts.is_object() && opts.contains("x_o")) {
      observed_ = option_vec(opts, "x_o", Vec::Zero(8));
    } else {
      Rng rng = make_rng(observed_seed_, {stream::kObserved});
      observed_ = informative(theta_true_, rng);
    }
  }

  std::string name() const override { return "slcp"; }
  int theta_dim() const override { return 5; }
  int x_dim() const override { return 8; }

  SimOutcome run(const Vec& theta, Rng& rng) const override {
    check_theta(theta);
    return {informative(theta, rng), true};
  }

  bool has_log_likelihood() const override { return true; }
  double log_likelihood(const Vec& theta, const Vec& x) const override { return informative_log_likelihood(theta, x); }

  /// The 8 outputs of x_o that depend on theta.
  virtual Vec informative_observed() const { return observed_; }

  /// Lower Cholesky factor of the 2x2 covariance.
  static Mat chol(const Vec& theta) {
    const double s1 = theta[2] * theta[2], s2 = theta[3] * theta[3];
    const double rho = std::tanh(theta[4]);
    if (!(s1 > 0.0) || !(s2 > 0.0))
      throw SimulationError("slcp: covariance is degenerate (theta3 or theta4 is zero)");
    Mat l = Mat::Zero(2, 2);
    l(0, 0) = std::abs(theta[2]);
    l(1, 0) = rho * std::abs(theta[3]) * (theta[2] * theta[3] >= 0 ? 1.0 : -1.0);
    l(1, 1) = std::abs(theta[3]) * std::sqrt(1.0 - rho * rho);
    if (!(l(1, 1) > 0.0)) throw SimulationError("slcp: covariance is degenerate (|tanh theta5| = 1)");
    return l;
  }

  static Vec informative(const Vec& theta, Rng& rng) {
    const Mat l = chol(theta);
    Vec x(8);
    for (int i = 0; i < 4; ++i) {
      const double z0 = std_normal(rng), z1 = std_normal(rng);
      x[2 * i] = theta[0] + l(0, 0) * z0;
      x[2 * i + 1] = theta[1] + l(1, 0) * z0 + l(1, 1) * z1;
    }
    return x;
  }

  static double informative_log_likelihood(const Vec& theta, const Vec& x) {
    Mat l;
    try {
      l = chol(theta);
    } catch (const SimulationError&) {
      return -kInf;
    }
    const Vec mu = theta.head(2);
    double total = 0.0;
    for (int i = 0; i < 4; ++i) total += gaussian_log_prob(x.segment(2 * i, 2), mu, l);
    return total;
  }

 protected:
  std::uint64_t observed_seed_ = 1;
};

}  // namespace apt
