#pragma once

// Runs an experiment end to end: engine, per-round metrics and persistence.

#include <fstream>
#include <functional>
#include <iostream>

#include "apt/engine/run.hpp"
#include "apt/eval/pipeline.hpp"
#include "apt/io/run_store.hpp"

namespace apt {

struct StoredRun {
  RunResult result;
  std::vector<MetricRecord> metrics;
  std::string status;  // "ok" or "failed"
};

/// Line logger that appends to `<dir>/run.log` and optionally echoes.
class RunLog {
 public:
  RunLog(const std::filesystem::path& file, std::ostream* echo) : out_(file, std::ios::trunc), echo_(echo) {}
  void operator()(const std::string& line) {
    out_ << line << '\n';
    out_.flush();
    if (echo_ != nullptr) *echo_ << line << '\n';
  }

 private:
  std::ofstream out_;
  std::ostream* echo_;
};

/// Validates `cfg`, runs it and writes the run directory. Configuration
/// problems throw ConfigError before anything is written; engine failures are
/// recorded (status "failed") with all completed rounds kept on disk.
inline StoredRun run_and_store(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                               std::ostream* echo = nullptr) {
  validate(cfg);
  const SimulatorPtr sim = make_simulator(cfg.simulator, cfg.simulator_options);
  const Vec x_o = detail::resolve_x_o(*sim, cfg);

  RunWriter writer(dir, cfg);
  RunLog log(dir / "run.log", echo);
  writer.add_file("run.log");
  write_json_file((dir / "observation.json").string(),
                  {{"simulator", sim->name()},
                   {"options", sim->options()},
                   {"x_o", std::vector<double>(x_o.data(), x_o.data() + x_o.size())},
                   {"theta_true", std::vector<double>(sim->theta_true().data(),
                                                      sim->theta_true().data() + sim->theta_true().size())}});
  writer.add_file("observation.json");

  StoredRun out;
  const ScopedWarningHandler sink([&](std::string_view w) { log("warning: " + std::string(w)); });
  try {
    EvalContext ctx = make_eval_context(*sim, cfg, x_o);
    for (const auto& w : ctx.warnings) log("warning: " + w);
    auto base = prior_metrics(ctx, *sim, cfg, x_o);
    writer.write_metrics(base);
    out.metrics = base;

    RunHooks hooks;
    hooks.log = [&](const std::string& line) { log(line); };
    hooks.on_round = [&](RoundRecord& rec, const PosteriorEstimate& est) {
      writer.write_round(rec);
      auto m = round_metrics(ctx, *sim, cfg, x_o, rec, est);
      writer.write_metrics(m);
      out.metrics.insert(out.metrics.end(), m.begin(), m.end());
    };
    out.result = run_experiment(*sim, cfg, hooks);
  } catch (const ConfigError&) {
    writer.finish(out.result, "failed");
    throw;
  } catch (const std::exception& e) {
    out.result.failure = e.what();
  }
  out.status = out.result.failure ? "failed" : "ok";
  if (out.result.failure) log("error: " + *out.result.failure);
  writer.finish(out.result, out.status);
  log("finished with status " + out.status);
  return out;
}

/// Posterior density of a stored round, rebuilt from its parameter snapshot.
/// Only algorithms whose networks model the posterior have one.
inline PosteriorEstimate load_round_estimate(const std::filesystem::path& dir, int round) {
  const ExperimentConfig cfg = parse_config(read_json_file((dir / "config.json").string()));
  if (cfg.algorithm == "snl" || cfg.algorithm == "smc-abc")
    throw ConfigError("algorithm '" + cfg.algorithm + "' stores no posterior density");
  const auto obs = read_json_file((dir / "observation.json").string());
  const auto xv = obs.at("x_o").get<std::vector<double>>();
  const Vec x_o = Eigen::Map<const Vec>(xv.data(), static_cast<Eigen::Index>(xv.size()));
  const std::filesystem::path sub = dir / ("round_" + std::to_string(round));
  const auto layout = read_json_file((sub / "params.json").string());
  auto est = std::make_shared<CondDensityEstimator>(CondDensityEstimator::from_architecture(layout.at("architecture")));
  est->params().assign(load_params(sub / "params").values());
  const auto info = read_json_file((sub / "round.json").string());
  const SimulatorPtr sim = make_simulator(cfg.simulator, cfg.simulator_options);

  PosteriorEstimate pe;
  pe.prior = sim->prior();
  pe.acceptance_rate = info.at("acceptance_rate");
  pe.log_prob = [est, x_o](const Vec& theta) { return est->log_prob(x_o, theta); };
  pe.sampler = detail::estimator_sampler(*est, x_o);
  pe.fixed_samples = read_csv((sub / "samples.csv").string()).values;
  return pe;
}

}  // namespace apt
