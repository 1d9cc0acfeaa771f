#pragma once

// Single-server first-come-first-served queue. Service times are
// U(theta1, theta1 + theta2), inter-arrival times Exp(rate theta3). The
// summaries are quantiles of the inter-departure times.

#include <algorithm>

#include "apt/simulators/simulator.hpp"

namespace apt {

class MG1 final : public Simulator {
 public:
  explicit MG1(const nlohmann::json& opts = {}) {
    prior_ = Prior::box(Vec::Zero(3), (Vec(3) << 10.0, 10.0, 1.0 / 3.0).finished());
    theta_true_ = option_vec(opts, "theta_true", (Vec(3) << 1.0, 5.0, 0.2).finished());
    customers_ = option<int>(opts, "customers", 50);
    levels_ = option<std::vector<double>>(opts, "quantiles", {0.0, 0.25, 0.5, 0.75, 1.0});
    observed_seed_ = option<std::uint64_t>(opts, "observed_seed", 1);
    if (customers_ < 2) throw ConfigError("mg1: need at least 2 customers");
    if (levels_.empty() || !std::is_sorted(levels_.begin(), levels_.end()) || levels_.front() < 0.0 ||
        levels_.back() > 1.0)
      throw ConfigError("mg1: quantile levels must be sorted and within [0, 1]");
    options_ = {{"customers", customers_}, {"quantiles", levels_}, {"observed_seed", observed_seed_}};
    if (opts.is_object() && opts.contains("x_o")) {
      observed_ = option_vec(opts, "x_o", Vec::Zero(x_dim()));
    } else {
      Rng rng = make_rng(observed_seed_, {stream::kObserved});
      observed_ = simulate(theta_true_, rng);
    }
  }

  std::string name() const override { return "mg1"; }
  int theta_dim() const override { return 3; }
  int x_dim() const override { return static_cast<int>(levels_.size()); }

  SimOutcome run(const Vec& theta, Rng& rng) const override {
    check_theta(theta);
    return {summaries(inter_departures(theta, rng)), true};
  }

  std::vector<double> inter_departures(const Vec& theta, Rng& rng) const {
    if (!(theta[2] > 0.0)) throw SimulationError("mg1: arrival rate must be positive");
    std::exponential_distribution<double> arrival(theta[2]);
    double arrive = 0.0, depart = 0.0;
    std::vector<double> gaps(static_cast<std::size_t>(customers_));
    for (int i = 0; i < customers_; ++i) {
      arrive += arrival(rng);
      const double service = theta[0] + theta[1] * uniform01(rng);
      const double next = std::max(arrive, depart) + service;
      gaps[static_cast<std::size_t>(i)] = next - depart;
      depart = next;
    }
    return gaps;
  }

  Vec summaries(std::vector<double> gaps) const {
    std::sort(gaps.begin(), gaps.end());
    Vec x(x_dim());
    for (std::size_t i = 0; i < levels_.size(); ++i) x[static_cast<Eigen::Index>(i)] = quantile_sorted(gaps, levels_[i]);
    return x;
  }

  const std::vector<double>& levels() const { return levels_; }

 private:
  int customers_ = 50;
  std::vector<double> levels_;
  std::uint64_t observed_seed_ = 1;
};

}  // namespace apt
