#pragma once

// Bernoulli generalized linear model of a spiking neuron: a bias plus a
// length-9 temporal filter applied to a frozen white-noise stimulus over
// 100 time bins. The summaries x = D' z (spike count and spike-triggered
// stimulus sums) are sufficient, so the posterior is available up to a
// constant:  log p(theta | x) = log p(theta) + theta' x - sum_t log(1 + e^{eta_t}).

#include "apt/simulators/simulator.hpp"

namespace apt {

class Glm final : public Simulator {
 public:
  static constexpr int kFilter = 9;

  explicit Glm(const nlohmann::json& opts = {}) {
    bins_ = option<int>(opts, "bins", 100);
    if (bins_ < kFilter) throw ConfigError("glm: need at least as many bins as filter taps");
    noise_seed_ = option<std::uint64_t>(opts, "noise_seed", 3);
    observed_seed_ = option<std::uint64_t>(opts, "observed_seed", 1);
    const double prior_sd = option<double>(opts, "prior_sd", 1.0);
    prior_ = Prior::gaussian(Vec::Zero(10), prior_sd * prior_sd * Mat::Identity(10, 10));
    Vec truth(10);
    truth << -1.0, 0.1, 0.6, 1.1, 0.8, 0.3, -0.1, -0.3, -0.2, -0.1;
    theta_true_ = option_vec(opts, "theta_true", truth);

    Rng rng = make_rng(noise_seed_, {stream::kSimulatorSetup});
    Vec stim(bins_);
    for (auto& v : stim) v = std_normal(rng);
    design_ = Mat::Zero(bins_, 10);
    for (int t = 0; t < bins_; ++t) {
      design_(t, 0) = 1.0;
      for (int j = 0; j < kFilter; ++j)
        if (t - j >= 0) design_(t, 1 + j) = stim[t - j];
    }
    options_ = {{"bins", bins_}, {"noise_seed", noise_seed_}, {"observed_seed", observed_seed_}, {"prior_sd", prior_sd}};
    if (opts.is_object() && opts.contains("x_o")) {
      observed_ = option_vec(opts, "x_o", Vec::Zero(10));
    } else {
      Rng obs = make_rng(observed_seed_, {stream::kObserved});
      observed_ = simulate(theta_true_, obs);
    }
  }

  std::string name() const override { return "glm"; }
  int theta_dim() const override { return 10; }
  int x_dim() const override { return 10; }

  /// Rows: time bins; columns: bias and lagged stimulus.
  const Mat& design() const { return design_; }

  SimOutcome run(const Vec& theta, Rng& rng) const override {
    check_theta(theta);
    return {statistics(spikes(theta, rng)), true};
  }

  Vec spikes(const Vec& theta, Rng& rng) const {
    const Vec eta = design_ * theta;
    Vec z(bins_);
    for (int t = 0; t < bins_; ++t) z[t] = uniform01(rng) < 1.0 / (1.0 + std::exp(-eta[t])) ? 1.0 : 0.0;
    return z;
  }

  Vec statistics(const Vec& z) const { return design_.transpose() * z; }

  /// log p(theta | x) up to a constant, including the prior.
  double log_posterior_unnormalized(const Vec& theta, const Vec& x) const {
    const Vec eta = design_ * theta;
    double a = 0.0;
    for (int t = 0; t < bins_; ++t) a += eta[t] > 0 ? eta[t] + std::log1p(std::exp(-eta[t])) : std::log1p(std::exp(eta[t]));
    return prior_.log_prob(theta) + theta.dot(x) - a;
  }

  /// Gradient and Hessian of the unnormalized log posterior.
  std::pair<Vec, Mat> log_posterior_derivatives(const Vec& theta, const Vec& x) const {
    const Vec eta = design_ * theta;
    const Vec mu = (1.0 + (-eta.array()).exp()).inverse();
    const auto* g = prior_.as_gaussian();
    const Mat p0 = g->precision();
    Vec grad = x - design_.transpose() * mu - p0 * (theta - g->mean());
    Mat hess = -(design_.transpose() * (mu.array() * (1.0 - mu.array())).matrix().asDiagonal() * design_) - p0;
    return {grad, hess};
  }

 private:
  int bins_ = 100;
  std::uint64_t noise_seed_ = 3, observed_seed_ = 1;
  Mat design_;
};

}  // namespace apt
