#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "apt/core/rng.hpp"
#include "apt/diffcore/ops.hpp"

namespace apt {

enum class Activation { Tanh };

/// Fully-connected network: tanh hidden layers followed by a linear output
/// layer.
struct MLPSpec {
  int input_dim = 1;
  std::vector<int> hidden_layers;
  Activation activation = Activation::Tanh;
  int output_dim = 1;

  void validate() const {
    if (input_dim < 1 || output_dim < 1) throw ConfigError("MLP dimensions must be >= 1");
    for (int h : hidden_layers)
      if (h < 1) throw ConfigError("MLP hidden widths must be >= 1");
  }
};

/// Segment indices of an MLP inside a ParamVector.
struct MlpLayout {
  std::vector<int> weights;  // (out x in) per layer
  std::vector<int> biases;   // (1 x out) per layer
};

inline MlpLayout add_mlp(ParamVector& params, const MLPSpec& spec, const std::string& prefix = "") {
  spec.validate();
  MlpLayout layout;
  int in = spec.input_dim;
  std::vector<int> widths = spec.hidden_layers;
  widths.push_back(spec.output_dim);
  for (std::size_t l = 0; l < widths.size(); ++l) {
    const std::string name = prefix + "layer" + std::to_string(l);
    layout.weights.push_back(params.add_segment(name + ".weight", widths[l], in));
    layout.biases.push_back(params.add_segment(name + ".bias", 1, widths[l]));
    in = widths[l];
  }
  return layout;
}

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases zero.
inline void init_uniform_fan_in(ParamVector& params, int weight_segment, Rng& rng) {
  auto w = params.block(weight_segment);
  const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols()));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = u(rng);
}

inline void init_mlp(ParamVector& params, const MlpLayout& layout, Rng& rng) {
  for (std::size_t l = 0; l < layout.weights.size(); ++l) {
    init_uniform_fan_in(params, layout.weights[l], rng);
    params.block(layout.biases[l]).setZero();
  }
}

/// Applies the network to a batch (rows = samples) on either backend.
template <class Ctx, class V>
V mlp_apply(Ctx& ctx, const MlpLayout& layout, V x) {
  using ad::linear;
  using ad::tanh;
  const std::size_t n = layout.weights.size();
  for (std::size_t l = 0; l < n; ++l) {
    x = linear(x, ctx.param(layout.weights[l]), ctx.param(layout.biases[l]));
    if (l + 1 < n) x = tanh(x);
  }
  return x;
}

/// Single-input evaluation. `params` must have been laid out by add_mlp with
/// the same spec and an empty prefix.
inline Vec mlp_forward(const MLPSpec& spec, const ParamVector& params, const Vec& input) {
  spec.validate();
  ParamVector expected;
  const MlpLayout layout = add_mlp(expected, spec);
  if (!params.same_layout(expected)) throw ConfigError("parameter layout does not match MLP spec");
  if (input.size() != spec.input_dim) throw ConfigError("MLP input has wrong dimension");
  ad::ValueContext ctx(params);
  Mat out = mlp_apply(ctx, layout, Mat(input.transpose()));
  return out.row(0).transpose();
}

}  // namespace apt
