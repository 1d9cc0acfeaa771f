#pragma once

// Coordinate-wise slice sampling with stepping out and shrinkage. Each sweep
// updates the coordinates in order 0..n-1.

#include <functional>

#include "apt/core/errors.hpp"
#include "apt/core/linalg.hpp"
#include "apt/core/rng.hpp"

namespace apt {

using LogDensity = std::function<double(const Vec&)>;

struct SliceStats {
  long evaluations = 0;
  long restarts = 0;
};

class SliceSampler {
 public:
  SliceSampler(LogDensity f, Vec widths, int max_steps_out = 50)
      : f_(std::move(f)), widths_(std::move(widths)), max_steps_out_(max_steps_out) {
    if ((widths_.array() <= 0.0).any()) throw ConfigError("slice sampler widths must be positive");
  }

  /// Log-density with NaN mapped to -inf.
  double eval(const Vec& x) {
    ++stats_.evaluations;
    const double v = f_(x);
    return std::isnan(v) ? -kInf : v;
  }

  /// One sweep over all coordinates. `logp` must hold the finite log-density
  /// at `x`; both are updated in place.
  void sweep(Vec& x, double& logp, Rng& rng) {
    if (!std::isfinite(logp)) throw NumericError("slice sampler: starting point has non-finite log-density");
    std::exponential_distribution<double> expo(1.0);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double level = logp - expo(rng);
      const double w = widths_[i];
      const double x0 = x[i];
      double lo = x0 - w * uniform01(rng);
      double hi = lo + w;
      int j = static_cast<int>(std::floor(max_steps_out_ * uniform01(rng)));
      int k = max_steps_out_ - 1 - j;
      Vec probe = x;
      auto at = [&](double v) {
        probe[i] = v;
        return eval(probe);
      };
      while (j-- > 0 && at(lo) > level) lo -= w;
      while (k-- > 0 && at(hi) > level) hi += w;
      for (int tries = 0;; ++tries) {
        if (tries > 500) throw NumericError("slice sampler: shrinkage did not terminate");
        const double v = lo + (hi - lo) * uniform01(rng);
        const double lp = at(v);
        if (lp > level) {
          x[i] = v;
          logp = lp;
          break;
        }
        if (v < x0) lo = v;
        else hi = v;
      }
    }
  }

  const SliceStats& stats() const { return stats_; }
  SliceStats& stats() { return stats_; }

 private:
  LogDensity f_;
  Vec widths_;
  int max_steps_out_;
  SliceStats stats_;
};

/// Single chain: `n` samples after `burn_in` sweeps, keeping every `thin`-th.
inline Mat slice_sample(const LogDensity& f, const Vec& x0, int n, int burn_in, int thin, const Vec& widths, Rng& rng,
                        SliceStats* stats = nullptr) {
  SliceSampler s(f, widths);
  Vec x = x0;
  double lp = s.eval(x);
  Mat out(n, x.size());
  for (int b = 0; b < burn_in; ++b) s.sweep(x, lp, rng);
  for (int i = 0; i < n; ++i) {
    for (int t = 0; t < thin; ++t) s.sweep(x, lp, rng);
    out.row(i) = x.transpose();
  }
  if (stats != nullptr) *stats = s.stats();
  return out;
}

/// Independent chains, each with its own generator derived from (seed, tag,
/// chain). `init(rng)` draws a starting point; it is also used to restart a
/// chain whose state becomes non-finite. Rows are ordered chain by chain.
inline Mat slice_sample_chains(const LogDensity& f, const std::function<Vec(Rng&)>& init, int n_total, int chains,
                               int burn_in, int thin, const Vec& widths, std::uint64_t seed,
                               std::initializer_list<std::uint64_t> tag, SliceStats* stats = nullptr) {
  if (chains < 1 || n_total < 1) throw ConfigError("slice sampling needs at least one chain and one sample");
  constexpr int kMaxInitTries = 1000;
  Mat out(n_total, widths.size());
  SliceStats total;
  int row = 0;
  for (int c = 0; c < chains; ++c) {
    const int n = n_total / chains + (c < n_total % chains ? 1 : 0);
    std::vector<std::uint64_t> counters(tag);
    counters.push_back(static_cast<std::uint64_t>(c));
    std::uint64_t s = seed;
    for (auto v : counters) s = derive_seed(s, {v});
    Rng rng(s);
    SliceSampler sampler(f, widths);
    auto start = [&](Vec& x, double& lp) {
      for (int t = 0; t < kMaxInitTries; ++t) {
        x = init(rng);
        lp = sampler.eval(x);
        if (std::isfinite(lp)) return;
        ++sampler.stats().restarts;
      }
      throw NumericError("slice sampler: no starting point with finite log-density");
    };
    Vec x;
    double lp = -kInf;
    start(x, lp);
    auto step = [&]() {
      try {
        sampler.sweep(x, lp, rng);
        if (std::isfinite(lp)) return;
      } catch (const NumericError&) {
      }
      ++sampler.stats().restarts;
      start(x, lp);
    };
    for (int b = 0; b < burn_in; ++b) step();
    for (int i = 0; i < n; ++i) {
      for (int t = 0; t < thin; ++t) step();
      out.row(row++) = x.transpose();
    }
    total.evaluations += sampler.stats().evaluations;
    total.restarts += sampler.stats().restarts;
  }
  if (stats != nullptr) *stats = total;
  return out;
}

}  // namespace apt
