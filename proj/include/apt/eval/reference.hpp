#pragma once

// Ground-truth posterior samplers for the benchmarks with a tractable
// likelihood.

#include <random>
#include <string>
#include <vector>

#include "apt/core/log.hpp"
#include "apt/engine/slice_sampler.hpp"
#include "apt/eval/sample_set.hpp"
#include "apt/simulators/slcp.hpp"
#include "apt/simulators/two_moons.hpp"

namespace apt {

struct TwoMoonsReference {
  int resolution = 0;
  double lower = -1.0, upper = 1.0;
  Mat mass;  // mass(i, j): cell with theta1 index i, theta2 index j; sums to 1
  SampleSet samples;

  double cell_width() const { return (upper - lower) / resolution; }
  double cell_center(int i) const { return lower + (i + 0.5) * cell_width(); }
};

/// Posterior on a resolution x resolution grid of cell centres over [-1, 1]^2
/// (uniform prior), normalized to unit mass. Samples pick a cell from the
/// categorical distribution and jitter uniformly inside it.
inline TwoMoonsReference two_moons_reference_posterior(const Vec& x_o, int resolution, int n, std::uint64_t seed) {
  if (resolution < 2) throw ConfigError("two moons reference: resolution must be >= 2");
  if (x_o.size() != 2) throw ConfigError("two moons reference: x_o must have 2 entries");
  TwoMoonsReference ref;
  ref.resolution = resolution;
  TwoMoons sim;
  Mat lp(resolution, resolution);
  Vec theta(2);
  for (int i = 0; i < resolution; ++i) {
    for (int j = 0; j < resolution; ++j) {
      theta << ref.cell_center(i), ref.cell_center(j);
      lp(i, j) = sim.log_likelihood(theta, x_o);
    }
  }
  const double top = lp.maxCoeff();
  if (!std::isfinite(top)) throw ResolutionError("two moons reference: no grid cell has positive likelihood");
  ref.mass = (lp.array() - top).exp().matrix();
  ref.mass /= ref.mass.sum();
  const double peak = ref.mass.maxCoeff();
  if (peak > 0.05)
    throw ResolutionError("two moons reference: one cell holds " + std::to_string(peak) +
                          " of the mass; increase the grid resolution");

  Rng rng = make_rng(seed, {stream::kEval});
  std::discrete_distribution<Eigen::Index> cell(ref.mass.data(), ref.mass.data() + ref.mass.size());
  Mat draws(n, 2);
  const double w = ref.cell_width();
  for (int s = 0; s < n; ++s) {
    const Eigen::Index c = cell(rng);
    const Eigen::Index i = c % resolution, j = c / resolution;  // column-major storage
    draws(s, 0) = ref.lower + (static_cast<double>(i) + uniform01(rng)) * w;
    draws(s, 1) = ref.lower + (static_cast<double>(j) + uniform01(rng)) * w;
  }
  ref.samples = SampleSet(std::move(draws), "two_moons grid " + std::to_string(resolution));
  return ref;
}

struct SlcpReference {
  SampleSet samples;
  std::vector<double> quadrant_fraction;  // (+,+), (+,-), (-,+), (-,-) in (theta3, theta4)
  double folded_fraction = 0.0;  // draws a chain produced outside its own quadrant
  std::vector<std::string> warnings;
};

inline int slcp_quadrant(const Vec& theta) { return (theta[2] < 0.0 ? 2 : 0) + (theta[3] < 0.0 ? 1 : 0); }

/// Maps theta into the (theta3, theta4) sign quadrant `q` with the exact
/// symmetries of the model: flipping theta3 or theta4 alone together with
/// theta5 leaves the covariance theta3 theta4 tanh(theta5) unchanged.
inline Vec slcp_fold(Vec theta, int q) {
  const double s3 = q & 2 ? -1.0 : 1.0, s4 = q & 1 ? -1.0 : 1.0;
  if (theta[2] * s3 < 0.0) {
    theta[2] = -theta[2];
    theta[4] = -theta[4];
  }
  if (theta[3] * s4 < 0.0) {
    theta[3] = -theta[3];
    theta[4] = -theta[4];
  }
  return theta;
}

/// Slice sampling of prior x likelihood given the 8 informative outputs
/// `x_o`. One chain per (theta3, theta4) sign quadrant starts at the image of
/// the true parameter there. Slice steps can jump across theta3 = 0 or
/// theta4 = 0 into a neighbouring mode, so each chain's draws are folded back
/// into its own quadrant; the posterior is invariant under the fold and the
/// prior box is symmetric, so every quadrant gets exactly a quarter of the
/// mass. `folded_fraction` reports how often a chain had wandered.
inline SlcpReference slcp_reference_posterior(const Vec& x_o, const Vec& theta_true, int n, std::uint64_t seed,
                                              int burn_in = 200, int thin = 5) {
  if (n < 4) throw ConfigError("slcp reference: need at least 4 samples");
  if (x_o.size() != 8 || theta_true.size() != 5) throw ConfigError("slcp reference: expected 8 outputs and 5 parameters");
  const Slcp sim;
  const Prior& prior = sim.prior();
  const LogDensity target = [&](const Vec& th) {
    const double lp = prior.log_prob(th);
    return std::isfinite(lp) ? lp + Slcp::informative_log_likelihood(th, x_o) : -kInf;
  };
  const Vec widths = Vec::Constant(5, 0.5);
  SlcpReference ref;
  Mat draws(n, 5);
  int row = 0;
  for (int q = 0; q < 4; ++q) {
    const Vec start = slcp_fold(theta_true, q);
    const int count = n / 4 + (q < n % 4 ? 1 : 0);
    Rng rng = make_rng(seed, {stream::kMcmc, static_cast<std::uint64_t>(q)});
    const Mat chain = slice_sample(target, start, count, burn_in, thin, widths, rng);
    for (int i = 0; i < count; ++i) {
      const Vec t = chain.row(i).transpose();
      if (slcp_quadrant(t) != q) ref.folded_fraction += 1.0 / n;
      draws.row(row + i) = slcp_fold(t, q).transpose();
    }
    row += count;
  }
  ref.quadrant_fraction.assign(4, 0.0);
  for (int s = 0; s < n; ++s) ref.quadrant_fraction[slcp_quadrant(draws.row(s).transpose())] += 1.0 / n;
  ref.samples = SampleSet(std::move(draws), "slcp slice mcmc");
  return ref;
}

inline SlcpReference slcp_reference_posterior(const Slcp& sim, int n, std::uint64_t seed) {
  return slcp_reference_posterior(sim.informative_observed(), sim.theta_true(), n, seed);
}

}  // namespace apt
