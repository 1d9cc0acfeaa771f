#pragma once

// Rejection of posterior draws that leak outside a bounded prior support.
// The acceptance rate estimates the mass of the estimate inside the
// support, so log q(theta) - log(acceptance) is the normalized log-density
// of the truncated estimate.

#include <functional>

#include "apt/transform/prior.hpp"

namespace apt {

struct TruncatedSample {
  Mat samples;
  double acceptance_rate = 1.0;
  long drawn = 0;
  long accepted = 0;
};

/// Raised when the draw budget is exhausted; carries what was collected.
class LeakageTooHigh : public Error {
 public:
  LeakageTooHigh(const std::string& what, TruncatedSample partial) : Error(what), partial_(std::move(partial)) {}
  const TruncatedSample& partial() const { return partial_; }

 private:
  TruncatedSample partial_;
};

using BatchSampler = std::function<Mat(int count, Rng& rng)>;

/// Draws from `sampler` in batches, keeping rows inside the prior support,
/// until `n_wanted` rows are accepted or `max_draws` raw draws are used.
inline TruncatedSample truncated_posterior_sample(const BatchSampler& sampler, const Prior& prior, Rng& rng,
                                                  int n_wanted, long max_draws) {
  if (n_wanted < 0 || max_draws < n_wanted) throw ConfigError("truncated sampling: need 0 <= n_wanted <= max_draws");
  TruncatedSample out;
  out.samples.resize(n_wanted, prior.dim());
  while (out.accepted < n_wanted) {
    const long remaining = max_draws - out.drawn;
    if (remaining <= 0) {
      out.samples.conservativeResize(out.accepted, prior.dim());
      out.acceptance_rate = out.drawn > 0 ? static_cast<double>(out.accepted) / static_cast<double>(out.drawn) : 0.0;
      throw LeakageTooHigh("truncated sampling accepted " + std::to_string(out.accepted) + " of " +
                               std::to_string(out.drawn) + " draws before the budget ran out",
                           std::move(out));
    }
    // Size the next batch from the running acceptance rate.
    const double rate = out.drawn > 0 ? std::max(static_cast<double>(out.accepted) / static_cast<double>(out.drawn), 0.01) : 1.0;
    const long need = n_wanted - out.accepted;
    const long batch = std::min<long>(remaining, std::max<long>(64, static_cast<long>(1.1 * static_cast<double>(need) / rate)));
    const Mat draws = sampler(static_cast<int>(batch), rng);
    for (Eigen::Index i = 0; i < draws.rows(); ++i) {
      ++out.drawn;
      if (!prior.contains(draws.row(i).transpose())) continue;
      if (out.accepted < n_wanted) out.samples.row(out.accepted) = draws.row(i);
      ++out.accepted;
      if (out.accepted == n_wanted) break;
    }
  }
  out.acceptance_rate = static_cast<double>(out.accepted) / static_cast<double>(out.drawn);
  return out;
}

/// Fraction of `draws` estimate samples inside the prior support (1 for a
/// Gaussian prior without drawing).
inline double support_acceptance_rate(const BatchSampler& sampler, const Prior& prior, Rng& rng, int draws) {
  if (!prior.is_uniform()) return 1.0;
  if (draws < 1) throw ConfigError("acceptance estimate needs at least one draw");
  const Mat s = sampler(draws, rng);
  long inside = 0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) inside += prior.contains(s.row(i).transpose()) ? 1 : 0;
  return static_cast<double>(inside) / static_cast<double>(draws);
}

}  // namespace apt
