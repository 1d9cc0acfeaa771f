#pragma once

// Stochastic predator-prey Markov jump process simulated exactly
// (Gillespie). With X predators, Y prey and rates c = exp(theta):
//   predator born  c1 X Y      predator dies  c2 X
//   prey born      c3 Y        prey eaten     c4 X Y
// Populations are recorded on an even time grid and reduced to 9 summary
// statistics, which are standardized with moments from pilot runs drawn
// from the prior.

#include <cmath>

#include "apt/core/log.hpp"
#include "apt/simulators/simulator.hpp"

namespace apt {

struct LvTrajectory {
  Mat series;  // 2 x T: row 0 predators, row 1 prey
  bool truncated = false;
  long events = 0;
};

class LotkaVolterra final : public Simulator {
 public:
  explicit LotkaVolterra(const nlohmann::json& opts = {}) {
    prior_ = Prior::box(Vec::Constant(4, -5.0), Vec::Constant(4, 2.0));
    theta_true_ = option_vec(opts, "theta_true",
                             (Vec(4) << std::log(0.01), std::log(0.5), std::log(1.0), std::log(0.01)).finished());
    init_predators_ = option<double>(opts, "initial_predators", 50.0);
    init_prey_ = option<double>(opts, "initial_prey", 100.0);
    duration_ = option<double>(opts, "duration", 30.0);
    dt_ = option<double>(opts, "dt", 0.2);
    pop_cap_ = option<double>(opts, "population_cap", 1e5);
    max_events_ = option<long>(opts, "max_events", 10000000L);
    pilot_runs_ = option<int>(opts, "pilot_runs", 1000);
    pilot_seed_ = option<std::uint64_t>(opts, "pilot_seed", 11);
    observed_seed_ = option<std::uint64_t>(opts, "observed_seed", 1);
    if (!(dt_ > 0.0) || !(duration_ >= dt_)) throw ConfigError("lotka_volterra: need 0 < dt <= duration");
    steps_ = static_cast<int>(std::lround(duration_ / dt_)) + 1;
    options_ = {{"initial_predators", init_predators_}, {"initial_prey", init_prey_}, {"duration", duration_},
                {"dt", dt_}, {"population_cap", pop_cap_}, {"max_events", max_events_},
                {"pilot_runs", pilot_runs_}, {"pilot_seed", pilot_seed_}, {"observed_seed", observed_seed_}};

    shift_ = Vec::Zero(9);
    scale_ = Vec::Ones(9);
    if (pilot_runs_ > 0) fit_standardization();
    if (opts.is_object() && opts.contains("x_o")) {
      observed_ = option_vec(opts, "x_o", Vec::Zero(9));
    } else {
      // Stochastic extinction is common at the ground truth; the observation
      // is the first draw in which both populations survive untruncated.
      for (std::uint64_t attempt = 0;; ++attempt) {
        Rng rng = make_rng(observed_seed_, {stream::kObserved, attempt});
        const auto traj = trajectory(theta_true_, rng);
        if ((!traj.truncated && traj.series.col(steps_ - 1).minCoeff() > 0.0) || attempt == 99) {
          if (traj.truncated) warn("lotka_volterra: observed simulation was truncated");
          observed_series_ = traj.series;
          observed_ = standardize(raw_summaries(traj.series));
          break;
        }
      }
    }
  }

  std::string name() const override { return "lotka_volterra"; }
  int theta_dim() const override { return 4; }
  int x_dim() const override { return 9; }
  int time_points() const { return steps_; }
  const Mat& observed_series() const { return observed_series_; }

  SimOutcome run(const Vec& theta, Rng& rng) const override {
    check_theta(theta);
    const auto traj = trajectory(theta, rng);
    return {standardize(raw_summaries(traj.series)), !traj.truncated};
  }

  LvTrajectory trajectory(const Vec& theta, Rng& rng) const {
    const Vec c = theta.array().exp();
    LvTrajectory out;
    out.series.resize(2, steps_);
    double x = init_predators_, y = init_prey_, t = 0.0;
    int next = 0;
    while (next < steps_) {
      const double r1 = c[0] * x * y, r2 = c[1] * x, r3 = c[2] * y, r4 = c[3] * x * y;
      const double total = r1 + r2 + r3 + r4;
      const double t_next = total > 0.0 ? t + std::exponential_distribution<double>(total)(rng) : kInf;
      while (next < steps_ && next * dt_ < t_next) {
        out.series(0, next) = x;
        out.series(1, next) = y;
        ++next;
      }
      if (next >= steps_) break;
      if (x > pop_cap_ || y > pop_cap_ || out.events >= max_events_) {
        out.truncated = true;
        for (; next < steps_; ++next) {
          out.series(0, next) = x;
          out.series(1, next) = y;
        }
        break;
      }
      t = t_next;
      const double u = uniform01(rng) * total;
      if (u < r1) {
        x += 1;
      } else if (u < r1 + r2) {
        x -= 1;
      } else if (u < r1 + r2 + r3) {
        y += 1;
      } else {
        y -= 1;
      }
      ++out.events;
    }
    return out;
  }

  /// Unstandardized summaries of a 2 x T series: means, log(variance + 1),
  /// lag-1 and lag-2 autocorrelations of each population, and their
  /// correlation. Constant series have autocorrelation and correlation 0.
  static Vec raw_summaries(const Mat& series) {
    const auto n = series.cols();
    Vec s(9);
    Mat centred(2, n);
    Vec var(2);
    for (int p = 0; p < 2; ++p) {
      const double mean = series.row(p).mean();
      centred.row(p) = series.row(p).array() - mean;
      var[p] = centred.row(p).squaredNorm() / static_cast<double>(n);
      s[p] = mean;
      s[2 + p] = std::log(var[p] + 1.0);
    }
    auto autocorr = [&](int p, int lag) {
      const double denom = centred.row(p).squaredNorm();
      if (!(denom > 0.0)) return 0.0;
      return centred.row(p).head(n - lag).dot(centred.row(p).tail(n - lag)) / denom;
    };
    s[4] = autocorr(0, 1);
    s[5] = autocorr(0, 2);
    s[6] = autocorr(1, 1);
    s[7] = autocorr(1, 2);
    const double denom = std::sqrt(centred.row(0).squaredNorm() * centred.row(1).squaredNorm());
    s[8] = denom > 0.0 ? centred.row(0).dot(centred.row(1)) / denom : 0.0;
    return s;
  }

  Vec standardize(const Vec& raw) const { return (raw - shift_).cwiseQuotient(scale_); }
  const Vec& summary_shift() const { return shift_; }
  const Vec& summary_scale() const { return scale_; }

 private:
  void fit_standardization() {
    Mat rows(pilot_runs_, 9);
    int kept = 0;
    for (int i = 0; i < pilot_runs_; ++i) {
      Rng rng = make_rng(pilot_seed_, {stream::kSimulatorSetup, static_cast<std::uint64_t>(i)});
      const Vec theta = prior_.sample(rng);
      const auto traj = trajectory(theta, rng);
      if (traj.truncated) continue;
      rows.row(kept++) = raw_summaries(traj.series).transpose();
    }
    if (kept < 2) throw SimulationError("lotka_volterra: fewer than 2 pilot runs finished");
    const Mat used = rows.topRows(kept);
    shift_ = used.colwise().mean().transpose();
    for (int j = 0; j < 9; ++j) {
      const double sd = std::sqrt((used.col(j).array() - shift_[j]).square().sum() / (kept - 1.0));
      scale_[j] = sd > 0.0 ? sd : 1.0;
    }
  }

  double init_predators_ = 50, init_prey_ = 100, duration_ = 30, dt_ = 0.2, pop_cap_ = 1e5;
  long max_events_ = 10000000L;
  int pilot_runs_ = 1000;
  std::uint64_t pilot_seed_ = 11, observed_seed_ = 1;
  int steps_ = 151;
  Vec shift_, scale_;
  Mat observed_series_;
};

}  // namespace apt
