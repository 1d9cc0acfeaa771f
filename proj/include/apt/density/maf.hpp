#pragma once

// Conditional masked autoregressive flow. Each block is a MADE over the
// (permuted) target coordinates whose first hidden layer also receives the
// context; it emits a shift m_i and log-scale a_i for every coordinate i.
// Density direction: u_i = (z_i - m_i(z_<i, c)) exp(-a_i(z_<i, c)); the last
// block's output is standard normal.

#include <algorithm>
#include <numeric>

#include "apt/diffcore/mlp.hpp"

namespace apt {

struct MafSpec {
  int target_dim = 1;
  int context_dim = 1;
  int n_mades = 5;
  std::vector<int> hidden = {50, 50};
  std::uint64_t permutation_seed = 0;
  bool random_permutations = true;  // false: identity ordering in every block
};

class Maf {
 public:
  Maf() = default;

  explicit Maf(const MafSpec& spec) : spec_(spec) {
    if (spec.target_dim < 1 || spec.context_dim < 1 || spec.n_mades < 1 || spec.hidden.empty())
      throw ConfigError("MAF dimensions must be >= 1");
    for (int w : spec.hidden)
      if (w < 1) throw ConfigError("MAF hidden widths must be >= 1");
    const int n = spec.target_dim;
    Rng perm_rng = make_rng(spec.permutation_seed, {stream::kPermutation});
    for (int k = 0; k < spec.n_mades; ++k) {
      Made m;
      m.perm.resize(static_cast<std::size_t>(n));
      std::iota(m.perm.begin(), m.perm.end(), 0);
      if (spec.random_permutations && k > 0) std::shuffle(m.perm.begin(), m.perm.end(), perm_rng);
      const std::string p = "made" + std::to_string(k) + ".";
      int in = n;
      std::vector<int> prev_deg(static_cast<std::size_t>(n));
      std::iota(prev_deg.begin(), prev_deg.end(), 1);
      for (std::size_t l = 0; l < spec.hidden.size(); ++l) {
        const int width = spec.hidden[l];
        std::vector<int> deg(static_cast<std::size_t>(width));
        for (int u = 0; u < width; ++u) deg[static_cast<std::size_t>(u)] = n > 1 ? (u % (n - 1)) + 1 : 0;
        Mat mask(width, in);
        for (int u = 0; u < width; ++u)
          for (int v = 0; v < in; ++v)
            mask(u, v) = prev_deg[static_cast<std::size_t>(v)] <= deg[static_cast<std::size_t>(u)] ? 1.0 : 0.0;
        m.masks.push_back(std::move(mask));
        m.w.push_back(params_.add_segment(p + "layer" + std::to_string(l) + ".weight", width, in));
        m.b.push_back(params_.add_segment(p + "layer" + std::to_string(l) + ".bias", 1, width));
        if (l == 0) m.ctx_w = params_.add_segment(p + "context.weight", width, spec.context_dim);
        prev_deg = std::move(deg);
        in = width;
      }
      m.out_mask = Mat(2 * n, in);
      for (int o = 0; o < 2 * n; ++o)
        for (int v = 0; v < in; ++v)
          m.out_mask(o, v) = prev_deg[static_cast<std::size_t>(v)] < (o % n) + 1 ? 1.0 : 0.0;
      m.out_w = params_.add_segment(p + "out.weight", 2 * n, in);
      m.out_b = params_.add_segment(p + "out.bias", 1, 2 * n);
      mades_.push_back(std::move(m));
    }
  }

  void initialize(Rng& rng) {
    for (const auto& m : mades_) {
      for (std::size_t l = 0; l < m.w.size(); ++l) {
        init_uniform_fan_in(params_, m.w[l], rng);
        params_.block(m.b[l]).setZero();
      }
      init_uniform_fan_in(params_, m.ctx_w, rng);
      init_uniform_fan_in(params_, m.out_w, rng);
      params_.block(m.out_b).setZero();
    }
  }

  const MafSpec& spec() const { return spec_; }
  ParamVector& params() { return params_; }
  const ParamVector& params() const { return params_; }
  int n_blocks() const { return static_cast<int>(mades_.size()); }
  const std::vector<int>& permutation(int block) const { return mades_[static_cast<std::size_t>(block)].perm; }
  int out_bias_segment(int block) const { return mades_[static_cast<std::size_t>(block)].out_b; }

  /// log q(target_j | context_j) per row.
  template <class Ctx, class V>
  V log_prob_rows(Ctx& ctx, const V& contexts, const Mat& targets) const {
    using ad::linear_nobias;
    return density(ctx, targets, [&](const Made& m) { return linear_nobias(contexts, ctx.param(m.ctx_w)); });
  }

  /// M x M matrix with entry (b, c) = log q(targets_c | contexts_b). The
  /// context projection is computed once per context and then gathered.
  template <class Ctx, class V>
  V log_prob_pairs(Ctx& ctx, const V& contexts, const Mat& targets) const {
    using ad::gather_rows;
    using ad::linear_nobias;
    using ad::reshape;
    const auto mm = targets.rows();
    Mat tiled(mm * mm, targets.cols());
    std::vector<int> ctx_row(static_cast<std::size_t>(mm * mm));
    for (Eigen::Index b = 0; b < mm; ++b)
      for (Eigen::Index c = 0; c < mm; ++c) {
        tiled.row(b * mm + c) = targets.row(c);
        ctx_row[static_cast<std::size_t>(b * mm + c)] = static_cast<int>(b);
      }
    V lp = density(ctx, tiled, [&](const Made& m) {
      return gather_rows(linear_nobias(contexts, ctx.param(m.ctx_w)), ctx_row);
    });
    return reshape(lp, mm, mm);
  }

  /// Maps targets to base noise (value backend); contexts has one row per
  /// target row.
  Mat to_base(const Mat& contexts, const Mat& targets) const {
    ad::ValueContext ctx(params_);
    Mat y = targets;
    for (const auto& m : mades_) {
      Mat z = ad::permute_cols(y, m.perm);
      const Mat out = made_outputs(ctx, m, z, Mat(contexts * ctx.param(m.ctx_w).transpose()));
      const int n = spec_.target_dim;
      y = (z - out.leftCols(n)).cwiseProduct((-out.rightCols(n)).array().exp().matrix());
    }
    return y;
  }

  /// Inverts the flow for given base noise by sequential coordinate passes
  /// through each block, last block first.
  Mat from_base(const Mat& contexts, const Mat& base) const {
    ad::ValueContext ctx(params_);
    const int n = spec_.target_dim;
    Mat y = base;
    for (auto it = mades_.rbegin(); it != mades_.rend(); ++it) {
      const auto& m = *it;
      const Mat proj = contexts * ctx.param(m.ctx_w).transpose();
      Mat z = Mat::Zero(y.rows(), n);
      for (int i = 0; i < n; ++i) {
        const Mat out = made_outputs(ctx, m, z, proj);
        z.col(i) = y.col(i).cwiseProduct(out.col(n + i).array().exp().matrix()) + out.col(i);
      }
      Mat prev(y.rows(), n);
      for (int j = 0; j < n; ++j) prev.col(m.perm[static_cast<std::size_t>(j)]) = z.col(j);
      y = std::move(prev);
    }
    return y;
  }

  Mat sample(const Vec& context, int count, Rng& rng) const {
    Mat base(count, spec_.target_dim);
    for (Eigen::Index i = 0; i < base.rows(); ++i)
      for (Eigen::Index j = 0; j < base.cols(); ++j) base(i, j) = std_normal(rng);
    return from_base(context.transpose().replicate(count, 1), base);
  }

  /// Block outputs (shift | log-scale) for a batch, exposed for the
  /// autoregressive-mask property tests.
  Mat block_outputs(int block, const Mat& z, const Mat& contexts) const {
    ad::ValueContext ctx(params_);
    const auto& m = mades_[static_cast<std::size_t>(block)];
    return made_outputs(ctx, m, z, Mat(contexts * ctx.param(m.ctx_w).transpose()));
  }

 private:
  struct Made {
    std::vector<int> perm;  // block input column j is previous column perm[j]
    std::vector<int> w, b;
    int ctx_w = -1;
    int out_w = -1, out_b = -1;
    std::vector<Mat> masks;
    Mat out_mask;
  };

  template <class Ctx, class V>
  V made_outputs(Ctx& ctx, const Made& m, const V& z, const V& context_proj) const {
    using ad::add;
    using ad::linear;
    using ad::tanh;
    V h = z;
    for (std::size_t l = 0; l < m.w.size(); ++l) {
      h = linear(h, ctx.masked_param(m.w[l], m.masks[l]), ctx.param(m.b[l]));
      if (l == 0) h = add(h, context_proj);
      h = tanh(h);
    }
    return linear(h, ctx.masked_param(m.out_w, m.out_mask), ctx.param(m.out_b));
  }

  template <class Ctx, class ProjFn>
  auto density(Ctx& ctx, const Mat& targets, ProjFn&& proj) const {
    using ad::add;
    using ad::cols;
    using ad::exp;
    using ad::mul;
    using ad::permute_cols;
    using ad::row_sum;
    using ad::scale;
    using ad::square;
    using ad::sub;
    const int n = spec_.target_dim;
    auto y = ctx.constant(targets);
    auto log_scale_sum = ctx.constant(Mat::Zero(targets.rows(), 1));
    for (const auto& m : mades_) {
      auto z = permute_cols(y, m.perm);
      auto out = made_outputs(ctx, m, z, proj(m));
      auto shift = cols(out, 0, n);
      auto log_scale = cols(out, n, n);
      y = mul(sub(z, shift), exp(scale(log_scale, -1.0)));
      log_scale_sum = add(log_scale_sum, row_sum(log_scale));
    }
    auto base = add(scale(row_sum(square(y)), -0.5),
                    ctx.constant(Mat::Constant(targets.rows(), 1, -0.5 * n * kLog2Pi)));
    return sub(base, log_scale_sum);
  }

  MafSpec spec_;
  std::vector<Made> mades_;
  ParamVector params_;
};

}  // namespace apt
