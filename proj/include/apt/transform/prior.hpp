#pragma once

#include <cmath>
#include <variant>

#include <json.hpp>

#include "apt/density/mog.hpp"

namespace apt {

/// Multivariate normal stored with its lower Cholesky factor.
class GaussianDist {
 public:
  GaussianDist() = default;

  GaussianDist(Vec mean, const Mat& cov) : mean_(std::move(mean)), cov_(0.5 * (cov + cov.transpose())) {
    if (cov_.rows() != mean_.size() || cov_.cols() != mean_.size())
      throw ConfigError("Gaussian: covariance shape does not match mean");
    auto l = cholesky_lower(cov_);
    if (!l) throw ConfigError("Gaussian: covariance is not positive definite");
    chol_ = std::move(*l);
  }

  static GaussianDist from_chol(Vec mean, const Mat& chol) {
    GaussianDist g;
    g.mean_ = std::move(mean);
    g.chol_ = chol.triangularView<Eigen::Lower>();
    g.cov_ = g.chol_ * g.chol_.transpose();
    return g;
  }

  int dim() const { return static_cast<int>(mean_.size()); }
  const Vec& mean() const { return mean_; }
  const Mat& cov() const { return cov_; }
  const Mat& chol() const { return chol_; }
  Mat precision() const { return inverse_from_chol(chol_); }

  double log_prob(const Vec& theta) const { return gaussian_log_prob(theta, mean_, chol_); }

  Vec sample(Rng& rng) const {
    Vec z(dim());
    for (int i = 0; i < dim(); ++i) z[i] = std_normal(rng);
    return mean_ + chol_.triangularView<Eigen::Lower>() * z;
  }

  MoGDist to_mog() const { return MoGDist::gaussian(mean_, chol_); }

 private:
  Vec mean_;
  Mat cov_;
  Mat chol_;
};

/// Uniform density on an axis-aligned box.
struct UniformBox {
  Vec lower;
  Vec upper;

  UniformBox() = default;
  UniformBox(Vec lo, Vec hi) : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size() || lower.size() == 0) throw ConfigError("box: bound dimensions differ");
    for (Eigen::Index i = 0; i < lower.size(); ++i)
      if (!(lower[i] < upper[i]) || !std::isfinite(lower[i]) || !std::isfinite(upper[i]))
        throw ConfigError("box: need finite lower < upper in dimension " + std::to_string(i));
  }

  int dim() const { return static_cast<int>(lower.size()); }
  double log_volume() const { return (upper - lower).array().log().sum(); }
  bool contains(const Vec& theta) const {
    return ((theta.array() >= lower.array()) && (theta.array() <= upper.array())).all();
  }
  double log_prob(const Vec& theta) const { return contains(theta) ? -log_volume() : -kInf; }
  Vec sample(Rng& rng) const {
    Vec v(dim());
    for (int i = 0; i < dim(); ++i) v[i] = lower[i] + (upper[i] - lower[i]) * uniform01(rng);
    return v;
  }
};

/// Prior over parameters: Gaussian or uniform on a box.
class Prior {
 public:
  Prior() = default;
  Prior(GaussianDist g) : v_(std::move(g)) {}
  Prior(UniformBox b) : v_(std::move(b)) {}

  static Prior gaussian(const Vec& mean, const Mat& cov) { return Prior(GaussianDist(mean, cov)); }
  static Prior box(const Vec& lower, const Vec& upper) { return Prior(UniformBox(lower, upper)); }

  bool is_uniform() const { return std::holds_alternative<UniformBox>(v_); }
  const GaussianDist* as_gaussian() const { return std::get_if<GaussianDist>(&v_); }
  const UniformBox* as_box() const { return std::get_if<UniformBox>(&v_); }

  int dim() const {
    return std::visit([](const auto& d) { return d.dim(); }, v_);
  }

  bool contains(const Vec& theta) const {
    const auto* b = as_box();
    return b == nullptr ? theta.allFinite() : b->contains(theta);
  }

  double log_prob(const Vec& theta) const {
    if (theta.size() != dim()) throw ConfigError("prior: parameter dimension mismatch");
    return std::visit([&](const auto& d) { return d.log_prob(theta); }, v_);
  }

  Vec sample(Rng& rng) const {
    return std::visit([&](const auto& d) { return d.sample(rng); }, v_);
  }

  /// `count` draws as rows.
  Mat sample(int count, Rng& rng) const {
    Mat out(count, dim());
    for (int i = 0; i < count; ++i) out.row(i) = sample(rng).transpose();
    return out;
  }

  Vec mean() const {
    if (const auto* b = as_box()) return 0.5 * (b->lower + b->upper);
    return as_gaussian()->mean();
  }

  Mat covariance() const {
    if (const auto* b = as_box()) return Mat((b->upper - b->lower).array().square().matrix() / 12.0).asDiagonal();
    return as_gaussian()->cov();
  }

  /// Per-dimension support bounds (infinite for a Gaussian).
  Vec lower() const { return is_uniform() ? as_box()->lower : Vec::Constant(dim(), -kInf); }
  Vec upper() const { return is_uniform() ? as_box()->upper : Vec::Constant(dim(), kInf); }

  nlohmann::json to_json() const {
    auto vec = [](const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    if (const auto* b = as_box()) return {{"kind", "uniform"}, {"lower", vec(b->lower)}, {"upper", vec(b->upper)}};
    const auto* g = as_gaussian();
    std::vector<std::vector<double>> cov;
    for (int i = 0; i < g->dim(); ++i) cov.push_back(vec(g->cov().row(i).transpose()));
    return {{"kind", "gaussian"}, {"mean", vec(g->mean())}, {"cov", cov}};
  }

 private:
  std::variant<GaussianDist, UniformBox> v_;
};

}  // namespace apt
