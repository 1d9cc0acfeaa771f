#pragma once

#include <functional>

#include "apt/transform/prior.hpp"

namespace apt {

/// Importance weight p(theta) / p~(theta) given the proposal log-density at
/// theta. A proposal density of zero violates the support requirement.
inline double snpe_b_weight(const Vec& theta, const Prior& prior, double proposal_log_density) {
  if (!(proposal_log_density > -kInf)) throw NumericError("importance weight: proposal density is zero at theta");
  if (std::isnan(proposal_log_density)) throw NumericError("importance weight: proposal density is NaN");
  return std::exp(prior.log_prob(theta) - proposal_log_density);
}

inline double snpe_b_weight(const Vec& theta, const Prior& prior,
                            const std::function<double(const Vec&)>& proposal_log_density) {
  return snpe_b_weight(theta, prior, proposal_log_density(theta));
}

}  // namespace apt
