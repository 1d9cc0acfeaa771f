#pragma once

#include <memory>
#include <string>

#include <json.hpp>

#include "apt/transform/prior.hpp"

namespace apt {

/// Result of one simulator call. `valid` is false when the simulation was
/// cut short (for example by a population cap); x is still filled.
struct SimOutcome {
  Vec x;
  bool valid = true;
};

/// A stochastic simulator together with its prior, ground-truth parameters
/// and observed data. Simulators are pure functions of (theta, rng state).
class Simulator {
 public:
  virtual ~Simulator() = default;

  virtual std::string name() const = 0;
  virtual int theta_dim() const = 0;
  virtual int x_dim() const = 0;
  virtual SimOutcome run(const Vec& theta, Rng& rng) const = 0;

  virtual bool has_log_likelihood() const { return false; }
  virtual double log_likelihood(const Vec& /*theta*/, const Vec& /*x*/) const {
    throw ConfigError(name() + " has no tractable likelihood");
  }

  Vec simulate(const Vec& theta, Rng& rng) const { return run(theta, rng).x; }

  const Prior& prior() const { return prior_; }
  const Vec& theta_true() const { return theta_true_; }
  const Vec& observed() const { return observed_; }
  void set_observed(const Vec& x) {
    if (x.size() != x_dim()) throw ConfigError(name() + ": observed data has dimension " + std::to_string(x.size()) +
                                               ", expected " + std::to_string(x_dim()));
    observed_ = x;
  }
  /// Options the simulator was built with (recorded in run manifests).
  const nlohmann::json& options() const { return options_; }

 protected:
  void check_theta(const Vec& theta) const {
    if (theta.size() != theta_dim())
      throw ConfigError(name() + ": parameter has dimension " + std::to_string(theta.size()) + ", expected " +
                        std::to_string(theta_dim()));
  }

  Prior prior_;
  Vec theta_true_;
  Vec observed_;
  nlohmann::json options_ = nlohmann::json::object();
};

using SimulatorPtr = std::shared_ptr<const Simulator>;

struct SimBatch {
  Mat x;
  std::vector<bool> valid;
  int invalid_count() const { return static_cast<int>(std::count(valid.begin(), valid.end(), false)); }
};

/// Simulates every row of `thetas`. Row i uses its own generator derived
/// from (seed, round, first_row + i), so the result does not depend on the
/// order or grouping of calls.
inline SimBatch simulate_batch(const Simulator& sim, const Mat& thetas, std::uint64_t seed, std::uint64_t round,
                               std::uint64_t first_row = 0) {
  SimBatch b;
  b.x.resize(thetas.rows(), sim.x_dim());
  b.valid.resize(static_cast<std::size_t>(thetas.rows()));
  for (Eigen::Index i = 0; i < thetas.rows(); ++i) {
    Rng rng = make_rng(seed, {stream::kSimulate, round, first_row + static_cast<std::uint64_t>(i)});
    auto out = sim.run(thetas.row(i).transpose(), rng);
    b.valid[static_cast<std::size_t>(i)] = out.valid && out.x.allFinite();
    b.x.row(i) = out.x.transpose();
  }
  return b;
}

/// Reads option `key` from `j` with a default.
template <class T>
T option(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("simulator option '") + key + "': " + e.what());
  }
}

inline Vec option_vec(const nlohmann::json& j, const char* key, const Vec& fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  const auto v = option<std::vector<double>>(j, key, {});
  if (static_cast<Eigen::Index>(v.size()) != fallback.size())
    throw ConfigError(std::string("simulator option '") + key + "' must have " + std::to_string(fallback.size()) +
                      " entries");
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace apt
