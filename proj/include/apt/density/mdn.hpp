#pragma once

#include "apt/density/mog_head.hpp"
#include "apt/diffcore/mlp.hpp"

namespace apt {

struct MdnSpec {
  int context_dim = 1;   // conditioning input (data x)
  int target_dim = 1;    // density variable (parameters theta)
  int components = 8;
  std::vector<int> hidden = {50, 50};
};

/// Mixture density network: tanh trunk with a linear head emitting the
/// parameters of a K-component Gaussian mixture.
class Mdn {
 public:
  Mdn() = default;

  explicit Mdn(const MdnSpec& spec) : spec_(spec) {
    if (spec.components < 1 || spec.target_dim < 1 || spec.context_dim < 1)
      throw ConfigError("MDN dimensions must be >= 1");
    head_ = MogHeadLayout{spec.components, spec.target_dim};
    net_spec_ = MLPSpec{spec.context_dim, spec.hidden, Activation::Tanh, head_.size()};
    layout_ = add_mlp(params_, net_spec_, "mdn.");
  }

  void initialize(Rng& rng) { init_mlp(params_, layout_, rng); }

  const MdnSpec& spec() const { return spec_; }
  const MogHeadLayout& head_layout() const { return head_; }
  ParamVector& params() { return params_; }
  const ParamVector& params() const { return params_; }

  /// Raw head outputs for a batch of contexts (rows).
  template <class Ctx, class V>
  V heads(Ctx& ctx, const V& contexts) const {
    return mlp_apply(ctx, layout_, contexts);
  }

  /// Mixture for one context.
  MoGDist emit(const Vec& context) const {
    if (context.size() != spec_.context_dim) throw ConfigError("MDN context has wrong dimension");
    if (!context.allFinite()) throw InputError("MDN context contains non-finite values");
    ad::ValueContext ctx(params_);
    const Mat h = heads(ctx, Mat(context.transpose()));
    return decode_head(head_, h.row(0)).to_mog();
  }

  /// log q(target_j | context_j) per row.
  template <class Ctx, class V>
  V log_prob_rows(Ctx& ctx, const V& contexts, const Mat& targets) const {
    std::vector<int> rows(static_cast<std::size_t>(targets.rows()));
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int>(i);
    return mog_head_log_prob(heads(ctx, contexts), head_, targets, rows);
  }

  /// M x M matrix with entry (b, c) = log q(targets_c | contexts_b). Each
  /// context is pushed through the network once.
  template <class Ctx, class V>
  V log_prob_pairs(Ctx& ctx, const V& contexts, const Mat& targets) const {
    using ad::reshape;
    const auto m = targets.rows();
    Mat tiled(m * m, targets.cols());
    std::vector<int> row_of(static_cast<std::size_t>(m * m));
    for (Eigen::Index b = 0; b < m; ++b)
      for (Eigen::Index c = 0; c < m; ++c) {
        tiled.row(b * m + c) = targets.row(c);
        row_of[static_cast<std::size_t>(b * m + c)] = static_cast<int>(b);
      }
    return reshape(mog_head_log_prob(heads(ctx, contexts), head_, tiled, row_of), m, m);
  }

 private:
  MdnSpec spec_;
  MogHeadLayout head_;
  MLPSpec net_spec_;
  MlpLayout layout_;
  ParamVector params_;
};

}  // namespace apt
