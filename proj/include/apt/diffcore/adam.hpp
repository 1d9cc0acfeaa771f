#pragma once

#include <cmath>

#include "apt/core/errors.hpp"
#include "apt/core/linalg.hpp"

namespace apt {

struct AdamHyper {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  Vec first_moment;
  Vec second_moment;
  long step_count = 0;
  AdamHyper hyper;

  AdamState() = default;
  AdamState(Eigen::Index n, AdamHyper h) : first_moment(Vec::Zero(n)), second_moment(Vec::Zero(n)), hyper(h) {}
};

/// One bias-corrected Adam update in place. Non-finite gradients reject the
/// step and leave both params and state untouched.
inline void adam_step(Vec& params, const Vec& grads, AdamState& state) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size())
    throw ConfigError("adam_step: shape mismatch");
  if (!grads.allFinite()) throw NumericError("adam_step: non-finite gradient");
  const auto& h = state.hyper;
  state.step_count += 1;
  state.first_moment = h.beta1 * state.first_moment + (1.0 - h.beta1) * grads;
  state.second_moment = h.beta2 * state.second_moment + (1.0 - h.beta2) * grads.cwiseAbs2();
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  params.array() -= h.learning_rate * (state.first_moment.array() / c1) /
                    ((state.second_moment.array() / c2).sqrt() + h.epsilon);
}

}  // namespace apt
