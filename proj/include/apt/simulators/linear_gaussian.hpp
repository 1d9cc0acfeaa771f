#pragma once

#include "apt/simulators/simulator.hpp"

namespace apt {

/// x = theta + N(0, noise_sd^2 I) with prior N(0, prior_sd^2 I). The
/// posterior is Gaussian and known in closed form.
class LinearGaussian final : public Simulator {
 public:
  explicit LinearGaussian(const nlohmann::json& opts = {}) {
    dim_ = option<int>(opts, "dim", 1);
    if (dim_ < 1) throw ConfigError("linear_gaussian: dim must be >= 1");
    prior_sd_ = option<double>(opts, "prior_sd", 3.0);
    noise_sd_ = option<double>(opts, "noise_sd", 1.0);
    if (!(prior_sd_ > 0.0) || !(noise_sd_ > 0.0)) throw ConfigError("linear_gaussian: scales must be positive");
    prior_ = Prior::gaussian(Vec::Zero(dim_), prior_sd_ * prior_sd_ * Mat::Identity(dim_, dim_));
    observed_ = option_vec(opts, "x_o", Vec::Constant(dim_, 2.0));
    theta_true_ = option_vec(opts, "theta_true", posterior(observed_).mean());
    options_ = {{"dim", dim_}, {"prior_sd", prior_sd_}, {"noise_sd", noise_sd_}};
  }

  std::string name() const override { return "linear_gaussian"; }
  int theta_dim() const override { return dim_; }
  int x_dim() const override { return dim_; }

  SimOutcome run(const Vec& theta, Rng& rng) const override {
    check_theta(theta);
    Vec x(dim_);
    for (int i = 0; i < dim_; ++i) x[i] = theta[i] + noise_sd_ * std_normal(rng);
    return {x, true};
  }

  bool has_log_likelihood() const override { return true; }
  double log_likelihood(const Vec& theta, const Vec& x) const override {
    return gaussian_log_prob(x, theta, noise_sd_ * Mat::Identity(dim_, dim_));
  }

  /// Exact posterior given x.
  GaussianDist posterior(const Vec& x) const {
    const double v0 = prior_sd_ * prior_sd_, vn = noise_sd_ * noise_sd_;
    const double var = 1.0 / (1.0 / v0 + 1.0 / vn);
    return GaussianDist(var / vn * x, var * Mat::Identity(dim_, dim_));
  }

 private:
  int dim_ = 1;
  double prior_sd_ = 3.0;
  double noise_sd_ = 1.0;
};

}  // namespace apt
