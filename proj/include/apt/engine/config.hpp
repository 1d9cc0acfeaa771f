#pragma once

// Experiment configuration and its JSON schema. Unknown keys and out-of-range
// values raise ConfigError naming the offending field.

#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "apt/core/errors.hpp"
#include "apt/core/linalg.hpp"
#include "apt/engine/train.hpp"

namespace apt {

inline const std::vector<std::string>& algorithm_names() {
  static const std::vector<std::string> names = {"apt-mog", "apt-atomic", "snpe-a", "snpe-b", "snl", "smc-abc"};
  return names;
}

struct EstimatorConfig {
  std::string kind = "mdn";  // "mdn" or "maf"
  int components = 8;
  std::vector<int> hidden = {50, 50};
  int n_mades = 5;
};

struct SnlConfig {
  int chains = 10;
  int burn_in = 200;
  int thin = 1;
  double slice_width = 0.5;  // initial bracket width in standardized units
};

struct AbcConfig {
  int particles = 1000;
  int generations = 10;
  double quantile = 0.5;
  double initial_tolerance = kInf;
  double kernel_scale = 2.0;
  long max_simulations = 2000000;
  long max_attempts_per_generation = 1000000;
};

struct EvalConfig {
  bool mmd = true;
  bool nlp = true;
  bool median_distance = false;
  int metric_samples = 1000;  // posterior draws used per round for metrics
  int reference_samples = 10000;
  std::uint64_t reference_seed = 1;
  std::optional<double> mmd_bandwidth;  // median heuristic when unset
  std::string reference_cache;          // directory for reference samples, empty: no cache
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string simulator;
  nlohmann::json simulator_options = nlohmann::json::object();
  std::string algorithm;
  EstimatorConfig estimator;
  TrainingConfig training;
  int rounds = 1;
  int simulations_per_round = 1000;
  int atoms = 100;
  bool atoms_fallback = false;  // allow minibatches of min(atoms, table size)
  std::uint64_t seed = 0;
  std::optional<Vec> x_o;
  int posterior_samples = 1000;
  long max_proposal_draws = 10000000;
  int acceptance_draws = 100000;  // draws used to estimate the in-support mass
  double max_importance_weight = 1e6;
  SnlConfig snl;
  AbcConfig abc;
  EvalConfig eval;

  bool atomic() const { return algorithm == "apt-atomic"; }
  int batch_size() const { return atomic() ? atoms : training.batch_size; }
};

namespace detail {

class ObjectReader {
 public:
  ObjectReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError("config field '" + path_ + "' must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config field '" + field(key) + "' has the wrong type");
    }
  }

  void get_double(const char* key, double& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    if (v.is_string() && (v == "inf" || v == "infinity")) {
      out = kInf;
      return;
    }
    if (!v.is_number()) throw ConfigError("config field '" + field(key) + "' must be a number");
    out = v.get<double>();
  }

  const nlohmann::json* sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown config field '" + field(k.c_str()) + "'");
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError("config field '" + field + "' " + what);
}

}  // namespace detail

inline void validate(const ExperimentConfig& c) {
  using detail::require;
  require(!c.simulator.empty(), "simulator", "is required");
  require(std::find(algorithm_names().begin(), algorithm_names().end(), c.algorithm) != algorithm_names().end(),
          "algorithm", "must be one of apt-mog, apt-atomic, snpe-a, snpe-b, snl, smc-abc");
  require(c.rounds >= 1, "rounds", "must be >= 1");
  require(c.simulations_per_round >= 1, "simulations_per_round", "must be >= 1");
  require(c.estimator.kind == "mdn" || c.estimator.kind == "maf", "estimator.kind", "must be mdn or maf");
  require(c.estimator.components >= 1, "estimator.components", "must be >= 1");
  require(!c.estimator.hidden.empty(), "estimator.hidden", "must list at least one layer");
  for (int h : c.estimator.hidden) require(h >= 1, "estimator.hidden", "widths must be >= 1");
  require(c.estimator.n_mades >= 1, "estimator.n_mades", "must be >= 1");
  require(c.training.learning_rate > 0.0, "training.learning_rate", "must be positive");
  require(c.training.batch_size >= 1, "training.batch_size", "must be >= 1");
  require(c.training.max_epochs >= 1, "training.max_epochs", "must be >= 1");
  require(c.training.patience >= 1, "training.patience", "must be >= 1");
  require(c.training.validation_fraction >= 0.0 && c.training.validation_fraction < 1.0,
          "training.validation_fraction", "must lie in [0, 1)");
  require(c.training.max_rejections >= 1, "training.max_rejections", "must be >= 1");
  require(c.posterior_samples >= 1, "posterior_samples", "must be >= 1");
  require(c.max_proposal_draws >= c.simulations_per_round && c.max_proposal_draws >= c.posterior_samples,
          "max_proposal_draws", "must be at least the number of samples requested");
  require(c.acceptance_draws >= 1, "acceptance_draws", "must be >= 1");
  require(c.max_importance_weight > 0.0, "max_importance_weight", "must be positive");
  if (c.algorithm == "apt-mog" || c.algorithm == "snpe-a")
    require(c.estimator.kind == "mdn", "estimator.kind", "must be mdn for " + c.algorithm);
  if (c.algorithm == "snl") require(c.estimator.kind == "maf", "estimator.kind", "must be maf for snl");
  if (c.atomic()) {
    require(c.atoms >= 2, "atoms", "must be >= 2");
    require(c.atoms <= c.simulations_per_round || c.atoms_fallback, "atoms",
            "exceeds the " + std::to_string(c.simulations_per_round) +
                " simulations available in round 1; lower it or set atoms_fallback");
  }
  require(c.snl.chains >= 1, "snl.chains", "must be >= 1");
  require(c.snl.burn_in >= 0, "snl.burn_in", "must be >= 0");
  require(c.snl.thin >= 1, "snl.thin", "must be >= 1");
  require(c.snl.slice_width > 0.0, "snl.slice_width", "must be positive");
  require(c.abc.particles >= 2, "abc.particles", "must be >= 2");
  require(c.abc.generations >= 1, "abc.generations", "must be >= 1");
  require(c.abc.quantile > 0.0 && c.abc.quantile < 1.0, "abc.quantile", "must lie in (0, 1)");
  require(c.abc.initial_tolerance > 0.0, "abc.initial_tolerance", "must be positive");
  require(c.abc.kernel_scale > 0.0, "abc.kernel_scale", "must be positive");
  require(c.abc.max_simulations >= c.abc.particles, "abc.max_simulations", "must be >= abc.particles");
  require(c.eval.metric_samples >= 2, "eval.metric_samples", "must be >= 2");
  require(c.eval.reference_samples >= 2, "eval.reference_samples", "must be >= 2");
  if (c.eval.mmd_bandwidth) require(*c.eval.mmd_bandwidth > 0.0, "eval.mmd_bandwidth", "must be positive");
}

/// Parses and validates a configuration document.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
  ExperimentConfig c;
  detail::ObjectReader r(j, "");
  r.get("name", c.name);
  r.get("simulator", c.simulator);
  if (const auto* s = r.sub("simulator_options")) {
    if (!s->is_object()) throw ConfigError("config field 'simulator_options' must be an object");
    c.simulator_options = *s;
  }
  r.get("algorithm", c.algorithm);
  r.get("rounds", c.rounds);
  r.get("simulations_per_round", c.simulations_per_round);
  r.get("atoms", c.atoms);
  r.get("atoms_fallback", c.atoms_fallback);
  r.get("seed", c.seed);
  r.get("posterior_samples", c.posterior_samples);
  r.get("max_proposal_draws", c.max_proposal_draws);
  r.get("acceptance_draws", c.acceptance_draws);
  r.get_double("max_importance_weight", c.max_importance_weight);
  if (const auto* x = r.sub("x_o")) {
    std::vector<double> v;
    try {
      v = x->get<std::vector<double>>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config field 'x_o' must be a list of numbers");
    }
    c.x_o = Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  if (const auto* e = r.sub("estimator")) {
    detail::ObjectReader er(*e, "estimator");
    er.get("kind", c.estimator.kind);
    er.get("components", c.estimator.components);
    er.get("hidden", c.estimator.hidden);
    er.get("n_mades", c.estimator.n_mades);
    er.finish();
  }
  if (const auto* t = r.sub("training")) {
    detail::ObjectReader tr(*t, "training");
    tr.get_double("learning_rate", c.training.learning_rate);
    tr.get("batch_size", c.training.batch_size);
    tr.get("max_epochs", c.training.max_epochs);
    tr.get("patience", c.training.patience);
    tr.get_double("validation_fraction", c.training.validation_fraction);
    tr.get("max_rejections", c.training.max_rejections);
    tr.get("reinitialize_each_round", c.training.reinitialize_each_round);
    tr.finish();
  }
  if (const auto* s = r.sub("snl")) {
    detail::ObjectReader sr(*s, "snl");
    sr.get("chains", c.snl.chains);
    sr.get("burn_in", c.snl.burn_in);
    sr.get("thin", c.snl.thin);
    sr.get_double("slice_width", c.snl.slice_width);
    sr.finish();
  }
  if (const auto* a = r.sub("abc")) {
    detail::ObjectReader ar(*a, "abc");
    ar.get("particles", c.abc.particles);
    ar.get("generations", c.abc.generations);
    ar.get_double("quantile", c.abc.quantile);
    ar.get_double("initial_tolerance", c.abc.initial_tolerance);
    ar.get_double("kernel_scale", c.abc.kernel_scale);
    ar.get("max_simulations", c.abc.max_simulations);
    ar.get("max_attempts_per_generation", c.abc.max_attempts_per_generation);
    ar.finish();
  }
  if (const auto* e = r.sub("eval")) {
    detail::ObjectReader er(*e, "eval");
    er.get("mmd", c.eval.mmd);
    er.get("nlp", c.eval.nlp);
    er.get("median_distance", c.eval.median_distance);
    er.get("metric_samples", c.eval.metric_samples);
    er.get("reference_samples", c.eval.reference_samples);
    er.get("reference_seed", c.eval.reference_seed);
    if (const auto* b = er.sub("mmd_bandwidth"); b != nullptr && !b->is_null()) {
      if (!b->is_number()) throw ConfigError("config field 'eval.mmd_bandwidth' must be a number");
      c.eval.mmd_bandwidth = b->get<double>();
    }
    er.get("reference_cache", c.eval.reference_cache);
    er.finish();
  }
  r.finish();
  validate(c);
  return c;
}

/// Canonical JSON form (all fields, defaults filled in).
inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["name"] = c.name;
  j["simulator"] = c.simulator;
  j["simulator_options"] = c.simulator_options;
  j["algorithm"] = c.algorithm;
  j["rounds"] = c.rounds;
  j["simulations_per_round"] = c.simulations_per_round;
  j["atoms"] = c.atoms;
  j["atoms_fallback"] = c.atoms_fallback;
  j["seed"] = c.seed;
  j["posterior_samples"] = c.posterior_samples;
  j["max_proposal_draws"] = c.max_proposal_draws;
  j["acceptance_draws"] = c.acceptance_draws;
  j["max_importance_weight"] = c.max_importance_weight;
  if (c.x_o) j["x_o"] = std::vector<double>(c.x_o->data(), c.x_o->data() + c.x_o->size());
  j["estimator"] = {{"kind", c.estimator.kind},
                    {"components", c.estimator.components},
                    {"hidden", c.estimator.hidden},
                    {"n_mades", c.estimator.n_mades}};
  j["training"] = {{"learning_rate", c.training.learning_rate},
                   {"batch_size", c.training.batch_size},
                   {"max_epochs", c.training.max_epochs},
                   {"patience", c.training.patience},
                   {"validation_fraction", c.training.validation_fraction},
                   {"max_rejections", c.training.max_rejections},
                   {"reinitialize_each_round", c.training.reinitialize_each_round}};
  j["snl"] = {{"chains", c.snl.chains}, {"burn_in", c.snl.burn_in}, {"thin", c.snl.thin},
              {"slice_width", c.snl.slice_width}};
  auto num = [](double v) -> nlohmann::json { return std::isinf(v) ? nlohmann::json("inf") : nlohmann::json(v); };
  j["abc"] = {{"particles", c.abc.particles},
              {"generations", c.abc.generations},
              {"quantile", c.abc.quantile},
              {"initial_tolerance", num(c.abc.initial_tolerance)},
              {"kernel_scale", c.abc.kernel_scale},
              {"max_simulations", c.abc.max_simulations},
              {"max_attempts_per_generation", c.abc.max_attempts_per_generation}};
  j["eval"] = {{"mmd", c.eval.mmd},
               {"nlp", c.eval.nlp},
               {"median_distance", c.eval.median_distance},
               {"metric_samples", c.eval.metric_samples},
               {"reference_samples", c.eval.reference_samples},
               {"reference_seed", c.eval.reference_seed},
               {"mmd_bandwidth", c.eval.mmd_bandwidth ? nlohmann::json(*c.eval.mmd_bandwidth) : nlohmann::json()},
               {"reference_cache", c.eval.reference_cache}};
  return j;
}

}  // namespace apt
