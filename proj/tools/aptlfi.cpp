// aptlfi: command-line front end for running, simulating, evaluating and
// reproducing experiments.
//
// Exit codes: 0 success, 2 invalid input or configuration, 3 runtime failure.
// APT_OUTPUT_ROOT overrides the default output root ("runs").

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "apt/core/memory.hpp"
#include "apt/io/driver.hpp"
#include "apt/io/presets.hpp"

#ifndef APT_PRESET_DIR
#define APT_PRESET_DIR "presets"
#endif

namespace fs = std::filesystem;
using namespace apt;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 2;
constexpr int kRuntime = 3;

fs::path output_root() {
  if (const char* env = std::getenv("APT_OUTPUT_ROOT"); env != nullptr && *env != '\0') return env;
  return "runs";
}

fs::path preset_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("APT_PRESETS"); env != nullptr && *env != '\0') return env;
  return APT_PRESET_DIR;
}

/// Appends one line to a log file, creating its directory.
void append_log(const fs::path& file, const std::string& line) {
  std::error_code ec;
  fs::create_directories(file.parent_path().empty() ? fs::path(".") : file.parent_path(), ec);
  std::ofstream(file, std::ios::app) << line << '\n';
}

int fail(int code, const std::string& msg, const fs::path& log_file) {
  std::cerr << "error: " << msg << '\n';
  append_log(log_file, "error: " + msg);
  return code;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::string fmt(double v) { return std::isnan(v) ? "" : format_double(v); }

// ---- run

struct RunArgs {
  std::string config;
  std::string out;
  bool quiet = false;
};

int cmd_run(const RunArgs& a) {
  const fs::path fallback_log = output_root() / "aptlfi.log";
  ExperimentConfig cfg;
  try {
    cfg = load_config(a.config);
  } catch (const ConfigError& e) {
    return fail(kInvalid, e.what(), fallback_log);
  } catch (const IoError& e) {
    return fail(kInvalid, e.what(), fallback_log);
  }
  const fs::path dir = a.out.empty() ? output_root() / cfg.name : fs::path(a.out);
  try {
    const StoredRun r = run_and_store(cfg, dir, a.quiet ? nullptr : &std::cerr);
    if (r.status != "ok") {
      std::cerr << "error: " << r.result.failure.value_or("run failed") << '\n';
      return kRuntime;
    }
    std::cout << dir.string() << '\n';
    return kOk;
  } catch (const ConfigError& e) {
    return fail(kInvalid, e.what(), dir / "run.log");
  } catch (const std::exception& e) {
    return fail(kRuntime, e.what(), dir / "run.log");
  }
}

// ---- simulate

struct SimulateArgs {
  std::string simulator;
  std::string options = "{}";
  std::string theta_file;
  bool prior = false;
  int n = 0;
  std::uint64_t seed = 1;
  bool loglik = false;
  std::string out;
};

int cmd_simulate(const SimulateArgs& a) {
  const fs::path log_file = a.out.empty() ? output_root() / "aptlfi.log" : fs::path(a.out + ".log");
  SimulatorPtr sim;
  try {
    sim = make_simulator(a.simulator, nlohmann::json::parse(a.options));
  } catch (const nlohmann::json::exception& e) {
    return fail(kInvalid, std::string("--options: ") + e.what(), log_file);
  } catch (const ConfigError& e) {
    return fail(kInvalid, e.what(), log_file);
  }
  if (a.prior == !a.theta_file.empty()) return fail(kInvalid, "give exactly one of --prior and --theta", log_file);
  if (a.loglik && !sim->has_log_likelihood())
    return fail(kInvalid, "simulator '" + sim->name() + "' has no analytic likelihood", log_file);

  Mat thetas;
  if (a.prior) {
    if (a.n < 1) return fail(kInvalid, "--n must be >= 1 with --prior", log_file);
    Rng rng = make_rng(a.seed, {stream::kProposal, 0});
    thetas = sim->prior().sample(a.n, rng);
  } else {
    try {
      CsvTable t = read_csv(a.theta_file);
      std::vector<std::string> theta_cols;
      for (const auto& h : t.header)
        if (h.rfind("theta_", 0) == 0) theta_cols.push_back(h);
      thetas = theta_cols.empty() ? t.values : t.values.leftCols(static_cast<Eigen::Index>(theta_cols.size()));
    } catch (const Error& e) {
      return fail(kInvalid, e.what(), log_file);
    }
    if (thetas.cols() != sim->theta_dim())
      return fail(kInvalid,
                  "theta file has " + std::to_string(thetas.cols()) + " columns, simulator needs " +
                      std::to_string(sim->theta_dim()),
                  log_file);
    if (a.n > 0 && a.n < thetas.rows()) thetas.conservativeResize(a.n, Eigen::NoChange);
    std::vector<std::string> bad;
    for (Eigen::Index i = 0; i < thetas.rows(); ++i)
      if (!thetas.row(i).allFinite() || !sim->prior().contains(thetas.row(i).transpose()))
        bad.push_back(std::to_string(i + 1));
    if (!bad.empty()) {
      std::string rows;
      for (std::size_t i = 0; i < bad.size(); ++i) rows += (i ? "," : "") + bad[i];
      return fail(kInvalid, "theta rows outside the prior support: " + rows, log_file);
    }
  }

  const Eigen::Index n = thetas.rows();
  const Eigen::Index td = sim->theta_dim(), xd = sim->x_dim();
  // Invalid simulations are written as NaN outputs.
  Mat out(n, td + xd + (a.loglik ? 1 : 0));
  try {
    for (Eigen::Index i = 0; i < n; ++i) {
      Rng rng = make_rng(a.seed, {stream::kSimulate, 0, static_cast<std::uint64_t>(i)});
      const Vec th = thetas.row(i).transpose();
      SimOutcome o;
      try {
        o = sim->run(th, rng);
      } catch (const SimulationError&) {
        o = {Vec::Constant(xd, kNaN), false};
      }
      out.block(i, 0, 1, td) = th.transpose();
      if (o.valid) out.block(i, td, 1, xd) = o.x.transpose();
      else out.block(i, td, 1, xd).setConstant(kNaN);
      if (a.loglik) out(i, td + xd) = o.valid ? sim->log_likelihood(th, o.x) : kNaN;
    }
    auto header = column_names("theta", td);
    for (const auto& h : column_names("x", xd)) header.push_back(h);
    if (a.loglik) header.push_back("loglik");
    if (a.out.empty()) {
      write_csv(std::cout, header, out);
      return kOk;
    }
    const fs::path path(a.out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_csv(a.out, header, out);
    RunManifest m;
    m.seed = a.seed;
    m.config_hash = config_hash({{"simulator", sim->name()},
                                 {"options", sim->options()},
                                 {"seed", a.seed},
                                 {"source", a.prior ? "prior" : a.theta_file},
                                 {"rows", n},
                                 {"loglik", a.loglik}});
    m.started = m.finished = utc_timestamp();
    m.status = "ok";
    m.files = {path.filename().string()};
    write_json_file(a.out + ".manifest.json", m.to_json());
    return kOk;
  } catch (const std::exception& e) {
    return fail(kRuntime, e.what(), log_file);
  }
}

// ---- eval

struct EvalArgs {
  std::string a, b, oracle, options = "{}";
  std::string metrics = "mmd";
  std::string run_dir;
  int round = 0;
  double bandwidth = 0.0;
  int reference_samples = 10000;
  std::uint64_t seed = 1;
  std::string cache;
  std::string out;
};

int cmd_eval(const EvalArgs& a) {
  const fs::path log_file = output_root() / "aptlfi.log";
  std::vector<MetricRecord> records;
  try {
    const auto wanted = split(a.metrics, ',');
    if (wanted.empty()) return fail(kInvalid, "--metrics is empty", log_file);
    for (const auto& m : wanted)
      if (m != "mmd" && m != "nlp" && m != "median_distance")
        return fail(kInvalid, "unknown metric '" + m + "'", log_file);
    const SampleSet samples = read_sample_set(a.a);
    const std::string experiment = fs::path(a.a).stem().string();

    SimulatorPtr sim;
    Vec x_o;
    if (!a.run_dir.empty()) {
      const auto obs = read_json_file((fs::path(a.run_dir) / "observation.json").string());
      sim = make_simulator(obs.at("simulator"), obs.at("options"));
      const auto xv = obs.at("x_o").get<std::vector<double>>();
      x_o = Eigen::Map<const Vec>(xv.data(), static_cast<Eigen::Index>(xv.size()));
    } else if (!a.oracle.empty()) {
      sim = make_simulator(a.oracle, nlohmann::json::parse(a.options));
      x_o = sim->observed();
    }
    if (sim && samples.dim() != sim->theta_dim())
      return fail(kInvalid,
                  "samples have " + std::to_string(samples.dim()) + " columns, simulator '" + sim->name() +
                      "' has " + std::to_string(sim->theta_dim()) + " parameters",
                  log_file);

    for (const auto& m : wanted) {
      if (m == "mmd") {
        std::optional<SampleSet> other;
        if (!a.b.empty()) {
          other = read_sample_set(a.b);
        } else if (sim) {
          const std::string cache = a.cache.empty() ? (output_root() / "reference_cache").string() : a.cache;
          other = cached_reference_posterior(*sim, x_o, a.reference_samples, a.seed, cache);
          if (!other) return fail(kInvalid, "simulator '" + sim->name() + "' has no reference posterior", log_file);
        } else {
          return fail(kInvalid, "mmd needs --b or --oracle", log_file);
        }
        if (other->dim() != samples.dim())
          return fail(kInvalid,
                      "dimension mismatch: " + std::to_string(samples.dim()) + " vs " + std::to_string(other->dim()),
                      log_file);
        const double h = a.bandwidth > 0.0 ? a.bandwidth : median_heuristic_bandwidth(samples, *other);
        records.push_back({experiment, a.round, "mmd", mmd(samples, *other, h)});
      } else if (m == "nlp") {
        if (a.run_dir.empty()) return fail(kInvalid, "nlp needs --run and --round", log_file);
        const PosteriorEstimate est = load_round_estimate(a.run_dir, a.round);
        records.push_back({experiment, a.round, "nlp", neg_log_prob_true_params(est, sim->theta_true()).value});
      } else {
        if (!sim) return fail(kInvalid, "median_distance needs --run or --oracle", log_file);
        ExperimentConfig cfg;
        cfg.seed = a.seed;
        cfg.eval.mmd = false;
        cfg.eval.median_distance = true;
        const EvalContext ctx = make_eval_context(*sim, cfg, x_o);
        const auto d = median_distance(samples, *sim, x_o, ctx.x_scale, derive_seed(a.seed, {stream::kEval, 0}));
        records.push_back({experiment, a.round, "median_distance", d.value});
      }
    }
  } catch (const ConfigError& e) {
    return fail(kInvalid, e.what(), log_file);
  } catch (const IoError& e) {
    return fail(kInvalid, e.what(), log_file);
  } catch (const nlohmann::json::exception& e) {
    return fail(kInvalid, e.what(), log_file);
  } catch (const std::exception& e) {
    return fail(kRuntime, e.what(), log_file);
  }
  std::ofstream file;
  if (!a.out.empty()) file.open(a.out, std::ios::app);
  for (const auto& r : records) {
    std::cout << r.to_json().dump() << '\n';
    if (file) file << r.to_json().dump() << '\n';
  }
  return kOk;
}

// ---- reproduce

struct ReproduceArgs {
  std::string figure;
  bool quick = false;
  std::string out;
  std::string presets;
  std::string algorithms;
};

int cmd_reproduce(const ReproduceArgs& a) {
  const fs::path dir = (a.out.empty() ? output_root() : fs::path(a.out)) / (a.figure + (a.quick ? "-quick" : ""));
  const fs::path log_file = dir / "reproduce.log";
  FigurePreset preset;
  try {
    if (std::find(figure_ids().begin(), figure_ids().end(), a.figure) == figure_ids().end())
      throw ConfigError("unknown figure '" + a.figure + "'");
    preset = load_preset(preset_dir(a.presets), a.figure, a.quick);
    for (const auto& c : preset.configs) validate(c);
  } catch (const Error& e) {
    return fail(kInvalid, e.what(), log_file);
  }
  const auto only = split(a.algorithms, ',');
  fs::create_directories(dir);

  const std::vector<std::string> metric_cols = {"mmd", "nlp", "median_distance", "acceptance_rate"};
  std::vector<std::string> header = {"algorithm", "round", "simulations"};
  header.insert(header.end(), metric_cols.begin(), metric_cols.end());
  header.push_back("status");
  std::vector<std::vector<std::string>> rows;
  bool any_failed = false;
  for (const auto& cfg : preset.configs) {
    if (!only.empty() && std::find(only.begin(), only.end(), cfg.algorithm) == only.end()) continue;
    const fs::path run_dir = dir / cfg.algorithm;
    append_log(log_file, "running " + cfg.algorithm + " into " + run_dir.string());
    StoredRun r;
    try {
      r = run_and_store(cfg, run_dir, &std::cerr);
    } catch (const std::exception& e) {
      r.status = "failed";
      r.result.failure = e.what();
    }
    if (r.result.failure) {
      any_failed = true;
      append_log(log_file, cfg.algorithm + " failed: " + *r.result.failure);
    }
    std::map<int, std::map<std::string, double>> by_round;
    for (const auto& m : r.metrics) by_round[m.round][m.metric] = m.value;
    const int last = r.result.rounds.empty() ? 0 : r.result.rounds.back().round;
    for (auto& [round, vals] : by_round) {
      std::vector<std::string> row = {cfg.algorithm, std::to_string(round)};
      row.push_back(vals.count("simulations") ? fmt(vals["simulations"]) : "0");
      for (const auto& c : metric_cols) row.push_back(vals.count(c) ? fmt(vals[c]) : "");
      std::string status = round == 0 ? "prior" : "ok";
      if (r.result.failure && round == last) status = "failed after this round: " + *r.result.failure;
      row.push_back(status);
      rows.push_back(std::move(row));
    }
    if (r.result.failure && by_round.size() <= 1)
      rows.push_back({cfg.algorithm, "1", "", "", "", "", "", "failed: " + *r.result.failure});
  }
  try {
    write_text_csv((dir / "table.csv").string(), header, rows);
  } catch (const std::exception& e) {
    return fail(kRuntime, e.what(), log_file);
  }
  std::cout << (dir / "table.csv").string() << '\n';
  if (any_failed) std::cerr << "some algorithms failed; see the status column\n";
  return kOk;
}

int cmd_list() {
  std::cout << "simulators:";
  for (const auto& [name, _] : simulator_registry()) std::cout << ' ' << name;
  std::cout << "\nalgorithms:";
  for (const auto& a : algorithm_names()) std::cout << ' ' << a;
  std::cout << "\nfigures:";
  for (const auto& f : figure_ids()) std::cout << ' ' << f;
  std::cout << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  apt::retain_freed_memory();
  CLI::App app{"Sequential simulation-based inference experiments"};
  app.require_subcommand(1);

  RunArgs run;
  auto* r = app.add_subcommand("run", "Run one experiment from a config file");
  r->add_option("config", run.config, "Config file (JSON, comments allowed)")->required();
  r->add_option("-o,--out", run.out, "Output directory (default: $APT_OUTPUT_ROOT/<name>)");
  r->add_flag("-q,--quiet", run.quiet, "Do not echo the log to stderr");

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Simulate (theta, x) pairs to CSV");
  s->add_option("simulator", sim.simulator, "Simulator name")->required();
  s->add_option("--options", sim.options, "Simulator options as JSON");
  s->add_option("--theta", sim.theta_file, "CSV of parameters (theta_* columns, or all columns)");
  s->add_flag("--prior", sim.prior, "Draw parameters from the prior");
  s->add_option("-n", sim.n, "Number of rows");
  s->add_option("--seed", sim.seed, "Master seed");
  s->add_flag("--loglik", sim.loglik, "Append the analytic log-likelihood");
  s->add_option("-o,--out", sim.out, "Output CSV (default: stdout)");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Compare posterior samples");
  e->add_option("a", ev.a, "Samples CSV")->required();
  e->add_option("--b", ev.b, "Second samples CSV");
  e->add_option("--oracle", ev.oracle, "Simulator whose reference posterior to compare against");
  e->add_option("--options", ev.options, "Simulator options for --oracle as JSON");
  e->add_option("--metrics", ev.metrics, "Comma-separated: mmd,nlp,median_distance");
  e->add_option("--run", ev.run_dir, "Run directory (for nlp and median_distance)");
  e->add_option("--round", ev.round, "Round of --run to evaluate");
  e->add_option("--bandwidth", ev.bandwidth, "MMD bandwidth (default: median heuristic)");
  e->add_option("--reference-samples", ev.reference_samples, "Reference posterior size");
  e->add_option("--seed", ev.seed, "Seed for reference sampling and simulations");
  e->add_option("--cache", ev.cache, "Reference cache directory");
  e->add_option("-o,--out", ev.out, "Append records to this JSON-lines file");

  ReproduceArgs rep;
  auto* p = app.add_subcommand("reproduce", "Run every algorithm of a benchmark preset");
  p->add_option("figure", rep.figure, "two-moons, slcp, slcp-distractors, lv, mg1 or glm")->required();
  p->add_flag("--quick", rep.quick, "Reduced rounds and simulations");
  p->add_option("-o,--out", rep.out, "Output root (default: $APT_OUTPUT_ROOT)");
  p->add_option("--presets", rep.presets, "Preset directory");
  p->add_option("--algorithms", rep.algorithms, "Comma-separated subset of algorithms");

  app.add_subcommand("list", "List simulators, algorithms and figures");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kInvalid;
  }
  if (*r) return cmd_run(run);
  if (*s) return cmd_simulate(sim);
  if (*e) return cmd_eval(ev);
  if (*p) return cmd_reproduce(rep);
  return cmd_list();
}
