#pragma once

#include "apt/engine/npe.hpp"
#include "apt/engine/smc_abc.hpp"
#include "apt/engine/snl.hpp"

namespace apt {

/// Runs the configured algorithm on an existing simulator.
inline RunResult run_experiment(const Simulator& sim, const ExperimentConfig& cfg, const RunHooks& hooks = {}) {
  validate(cfg);
  if (cfg.algorithm == "snl") return run_snl(sim, cfg, hooks);
  if (cfg.algorithm == "smc-abc") return run_smc_abc(sim, cfg, hooks);
  return run_npe(sim, cfg, hooks);
}

inline RunResult run_experiment(const ExperimentConfig& cfg, const RunHooks& hooks = {}) {
  const auto sim = make_simulator(cfg.simulator, cfg.simulator_options);
  return run_experiment(*sim, cfg, hooks);
}

}  // namespace apt
