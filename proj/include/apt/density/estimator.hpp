#pragma once

#include <optional>
#include <variant>

#include <json.hpp>

#include "apt/density/maf.hpp"
#include "apt/density/mdn.hpp"
#include "apt/density/standardizer.hpp"

namespace apt {

/// Conditional density estimator q(target | context) backed by an MDN or a
/// MAF. Networks operate on standardized inputs; the value-level methods take
/// and return original-space quantities.
class CondDensityEstimator {
 public:
  CondDensityEstimator() = default;

  static CondDensityEstimator mdn(const MdnSpec& spec) {
    CondDensityEstimator e;
    e.net_ = Mdn(spec);
    e.context_std_ = Standardizer::identity(spec.context_dim);
    e.target_std_ = Standardizer::identity(spec.target_dim);
    return e;
  }

  static CondDensityEstimator maf(const MafSpec& spec) {
    CondDensityEstimator e;
    e.net_ = Maf(spec);
    e.context_std_ = Standardizer::identity(spec.context_dim);
    e.target_std_ = Standardizer::identity(spec.target_dim);
    return e;
  }

  bool is_mdn() const { return std::holds_alternative<Mdn>(net_); }
  const Mdn* as_mdn() const { return std::get_if<Mdn>(&net_); }
  const Maf* as_maf() const { return std::get_if<Maf>(&net_); }

  ParamVector& params() {
    return std::visit([](auto& n) -> ParamVector& { return n.params(); }, net_);
  }
  const ParamVector& params() const {
    return std::visit([](const auto& n) -> const ParamVector& { return n.params(); }, net_);
  }

  void initialize(Rng& rng) {
    std::visit([&](auto& n) { n.initialize(rng); }, net_);
  }

  int context_dim() const { return context_std_.dim(); }
  int target_dim() const { return target_std_.dim(); }

  void set_standardizers(Standardizer context, Standardizer target) {
    if (context.dim() != context_dim() || target.dim() != target_dim())
      throw ConfigError("standardizer dimension mismatch");
    context_std_ = std::move(context);
    target_std_ = std::move(target);
  }
  const Standardizer& context_standardizer() const { return context_std_; }
  const Standardizer& target_standardizer() const { return target_std_; }

  // ---- standardized space, either backend

  template <class Ctx, class V>
  V log_prob_rows(Ctx& ctx, const V& contexts, const Mat& targets) const {
    return std::visit([&](const auto& n) { return n.log_prob_rows(ctx, contexts, targets); }, net_);
  }

  template <class Ctx, class V>
  V log_prob_pairs(Ctx& ctx, const V& contexts, const Mat& targets) const {
    return std::visit([&](const auto& n) { return n.log_prob_pairs(ctx, contexts, targets); }, net_);
  }

  // ---- original space, value backend

  /// log q(targets_i | context) for every row of `targets`.
  Vec log_prob(const Vec& context, const Mat& targets) const {
    check_context(context);
    ad::ValueContext ctx(params());
    const Mat c = context_std_.apply(context).transpose().replicate(targets.rows(), 1);
    Mat lp = log_prob_rows(ctx, c, target_std_.apply_rows(targets));
    return lp.col(0).array() + target_std_.log_jacobian();
  }

  double log_prob(const Vec& context, const Vec& target) const {
    return log_prob(context, Mat(target.transpose()))[0];
  }

  Mat sample(const Vec& context, int count, Rng& rng) const {
    check_context(context);
    const Vec c = context_std_.apply(context);
    if (const auto* m = as_mdn()) {
      const MoGDist d = m->emit(c);
      Mat out(count, target_dim());
      for (int i = 0; i < count; ++i) out.row(i) = d.sample(rng).transpose();
      return target_std_.invert_rows(out);
    }
    return target_std_.invert_rows(std::get<Maf>(net_).sample(c, count, rng));
  }

  /// Mixture in original space (MDN only).
  std::optional<MoGDist> mog_at(const Vec& context) const {
    const auto* m = as_mdn();
    if (m == nullptr) return std::nullopt;
    check_context(context);
    return m->emit(context_std_.apply(context)).affine(target_std_.shift, target_std_.scale);
  }

  nlohmann::json architecture() const {
    nlohmann::json j;
    if (const auto* m = as_mdn()) {
      j = {{"kind", "mdn"}, {"context_dim", m->spec().context_dim}, {"target_dim", m->spec().target_dim},
           {"components", m->spec().components}, {"hidden", m->spec().hidden}};
    } else {
      const auto& s = std::get<Maf>(net_).spec();
      j = {{"kind", "maf"}, {"context_dim", s.context_dim}, {"target_dim", s.target_dim}, {"n_mades", s.n_mades},
           {"hidden", s.hidden}, {"permutation_seed", s.permutation_seed},
           {"random_permutations", s.random_permutations}};
    }
    auto vec = [](const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    j["context_shift"] = vec(context_std_.shift);
    j["context_scale"] = vec(context_std_.scale);
    j["target_shift"] = vec(target_std_.shift);
    j["target_scale"] = vec(target_std_.scale);
    return j;
  }

  /// Rebuilds an estimator (untrained parameters) from architecture().
  static CondDensityEstimator from_architecture(const nlohmann::json& j) {
    try {
      CondDensityEstimator e;
      const std::string kind = j.at("kind");
      if (kind == "mdn") {
        e = mdn(MdnSpec{j.at("context_dim"), j.at("target_dim"), j.at("components"), j.at("hidden")});
      } else if (kind == "maf") {
        MafSpec s;
        s.context_dim = j.at("context_dim");
        s.target_dim = j.at("target_dim");
        s.n_mades = j.at("n_mades");
        s.hidden = j.at("hidden").get<std::vector<int>>();
        s.permutation_seed = j.at("permutation_seed");
        s.random_permutations = j.value("random_permutations", true);
        e = maf(s);
      } else {
        throw ConfigError("unknown estimator kind '" + kind + "'");
      }
      auto vec = [&](const char* key) {
        const auto v = j.at(key).get<std::vector<double>>();
        return Vec(Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())));
      };
      e.set_standardizers({vec("context_shift"), vec("context_scale")}, {vec("target_shift"), vec("target_scale")});
      return e;
    } catch (const nlohmann::json::exception& ex) {
      throw ConfigError(std::string("malformed estimator architecture: ") + ex.what());
    }
  }

 private:
  void check_context(const Vec& context) const {
    if (context.size() != context_dim()) throw ConfigError("estimator context has wrong dimension");
    if (!context.allFinite()) throw InputError("estimator context contains non-finite values");
  }

  std::variant<Mdn, Maf> net_;
  Standardizer context_std_;
  Standardizer target_std_;
};

}  // namespace apt
