#pragma once

// SLCP with uninformative outputs appended: m extra dimensions drawn from a
// fixed mixture of 20 multivariate t distributions (2 degrees of freedom),
// independent of theta, after which all 8 + m outputs are shuffled by a
// fixed permutation.

#include <algorithm>
#include <numeric>

#include "apt/simulators/slcp.hpp"

namespace apt {

class SlcpDistractors final : public Slcp {
 public:
  static constexpr int kComponents = 20;
  static constexpr double kDof = 2.0;

  explicit SlcpDistractors(const nlohmann::json& opts = {}) : Slcp(opts, false) {
    m_ = option<int>(opts, "distractors", 32);
    if (m_ < 0) throw ConfigError("slcp_distractors: distractors must be >= 0");
    setup_seed_ = option<std::uint64_t>(opts, "setup_seed", 7);
    Rng rng = make_rng(setup_seed_, {stream::kSimulatorSetup});
    std::uniform_real_distribution<double> um(-5.0, 5.0);
    for (int c = 0; c < kComponents; ++c) {
      Vec mean(m_);
      for (auto& v : mean) v = um(rng);
      Mat a(m_, m_);
      for (auto& v : a.reshaped()) v = std_normal(rng);
      const Mat cov = a * a.transpose() + Mat::Identity(m_, m_);
      means_.push_back(mean);
      chols_.push_back(*cholesky_lower(cov));
    }
    perm_.resize(static_cast<std::size_t>(8 + m_));
    std::iota(perm_.begin(), perm_.end(), 0);
    std::shuffle(perm_.begin(), perm_.end(), rng);
    options_ = {{"observed_seed", observed_seed_}, {"distractors", m_}, {"setup_seed", setup_seed_}};
    if (!(opts.is_object() && opts.contains("x_o"))) {
      Rng obs = make_rng(observed_seed_, {stream::kObserved, 1});
      observed_ = permute(observed_, draw_noise(obs));
    } else {
      observed_ = option_vec(opts, "x_o", Vec::Zero(8 + m_));
    }
  }

  std::string name() const override { return "slcp_distractors"; }
  int x_dim() const override { return 8 + m_; }
  int distractors() const { return m_; }
  Vec informative_observed() const override { return unpermute(observed_).head(8); }
  /// Output position j holds unshuffled coordinate permutation()[j].
  const std::vector<int>& permutation() const { return perm_; }
  const std::vector<Vec>& component_means() const { return means_; }
  const std::vector<Mat>& component_chols() const { return chols_; }

  SimOutcome run(const Vec& theta, Rng& rng) const override {
    check_theta(theta);
    const Vec info = informative(theta, rng);
    return {permute(info, draw_noise(rng)), true};
  }

  double log_likelihood(const Vec& theta, const Vec& x) const override {
    const Vec raw = unpermute(x);
    return informative_log_likelihood(theta, raw.head(8)) + noise_log_density(raw.tail(m_));
  }

  /// Log-density of the distractor mixture.
  double noise_log_density(const Vec& v) const {
    if (m_ == 0) return 0.0;
    Vec terms(kComponents);
    const double half = 0.5 * (kDof + m_);
    const double base = std::lgamma(half) - std::lgamma(0.5 * kDof) - 0.5 * m_ * std::log(kDof * M_PI);
    for (int c = 0; c < kComponents; ++c) {
      const auto cu = static_cast<std::size_t>(c);
      const Vec z = chols_[cu].triangularView<Eigen::Lower>().solve(v - means_[cu]);
      terms[c] = -std::log(static_cast<double>(kComponents)) + base - 0.5 * logdet_from_chol(chols_[cu]) -
                 half * std::log1p(z.squaredNorm() / kDof);
    }
    return log_sum_exp(terms);
  }

  Vec draw_noise(Rng& rng) const {
    if (m_ == 0) return Vec(0);
    const auto c = static_cast<std::size_t>(std::uniform_int_distribution<int>(0, kComponents - 1)(rng));
    Vec z(m_);
    for (auto& v : z) v = std_normal(rng);
    const double g = std::chi_squared_distribution<double>(kDof)(rng);
    return means_[c] + chols_[c].triangularView<Eigen::Lower>() * z / std::sqrt(g / kDof);
  }

  Vec permute(const Vec& info, const Vec& noise) const {
    Vec raw(8 + m_);
    raw << info, noise;
    Vec out(raw.size());
    for (std::size_t j = 0; j < perm_.size(); ++j) out[static_cast<Eigen::Index>(j)] = raw[perm_[j]];
    return out;
  }

  Vec unpermute(const Vec& x) const {
    Vec raw(x.size());
    for (std::size_t j = 0; j < perm_.size(); ++j) raw[perm_[j]] = x[static_cast<Eigen::Index>(j)];
    return raw;
  }

 private:
  int m_ = 32;
  std::uint64_t setup_seed_ = 7;
  std::vector<Vec> means_;
  std::vector<Mat> chols_;
  std::vector<int> perm_;
};

}  // namespace apt
