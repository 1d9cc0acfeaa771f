#pragma once

// On-disk layout of a run directory:
//   config.json            canonical config
//   manifest.json          RunManifest, rewritten after every round
//   metrics.jsonl          one MetricRecord per line
//   round_<r>/samples.csv  posterior draws at x_o
//   round_<r>/params.{bin,json}
//   simulations.csv        the simulation table
//   particles.csv          smc-abc only: final particles and weights

#include <filesystem>
#include <fstream>

#include "apt/diffcore/serialize.hpp"
#include "apt/engine/common.hpp"
#include "apt/eval/metrics.hpp"
#include "apt/io/config_file.hpp"
#include "apt/io/csv.hpp"
#include "apt/io/manifest.hpp"

namespace apt {

inline void write_sim_table(const std::string& path, const SimTable& t) {
  std::vector<std::string> header{"round", "proposal", "valid"};
  for (const auto& n : column_names("theta", t.theta().cols())) header.push_back(n);
  for (const auto& n : column_names("x", t.x().cols())) header.push_back(n);
  Mat m(t.size(), 3 + t.theta().cols() + t.x().cols());
  for (int i = 0; i < t.size(); ++i) {
    m(i, 0) = t.round_of(i);
    m(i, 1) = t.proposal_of(i);
    m(i, 2) = t.valid(i) ? 1.0 : 0.0;
  }
  m.middleCols(3, t.theta().cols()) = t.theta();
  m.rightCols(t.x().cols()) = t.x();
  write_csv(path, header, m);
}

inline SimTable read_sim_table(const std::string& path) {
  const CsvTable c = read_csv(path);
  const auto starts = [](const std::string& s, const char* p) { return s.rfind(p, 0) == 0; };
  int td = 0, xd = 0;
  for (const auto& h : c.header) {
    if (starts(h, "theta_")) ++td;
    else if (starts(h, "x_")) ++xd;
  }
  if (c.header.size() != static_cast<std::size_t>(3 + td + xd) || c.header[0] != "round")
    throw ConfigError(path + ": not a simulation table");
  SimTable t(td, xd);
  Eigen::Index i = 0;
  while (i < c.values.rows()) {
    // Consecutive rows with the same round and proposal form one append.
    Eigen::Index j = i;
    while (j < c.values.rows() && c.values(j, 0) == c.values(i, 0) && c.values(j, 1) == c.values(i, 1)) ++j;
    std::vector<bool> valid;
    for (Eigen::Index k = i; k < j; ++k) valid.push_back(c.values(k, 2) != 0.0);
    t.append(static_cast<int>(c.values(i, 0)), c.values.block(i, 3, j - i, td), c.values.block(i, 3 + td, j - i, xd),
             static_cast<int>(c.values(i, 1)), valid);
    i = j;
  }
  return t;
}

inline SampleSet read_sample_set(const std::string& path) {
  CsvTable c = read_csv(path);
  return SampleSet(std::move(c.values), path);
}

class RunWriter {
 public:
  RunWriter(std::filesystem::path dir, const ExperimentConfig& cfg) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
    const nlohmann::json canonical = to_json(cfg);
    write_json_file((dir_ / "config.json").string(), canonical);
    manifest_.config_hash = config_hash(canonical);
    manifest_.seed = cfg.seed;
    manifest_.started = utc_timestamp();
    manifest_.files = {"config.json", "metrics.jsonl"};
    std::ofstream(dir_ / "metrics.jsonl", std::ios::trunc);
    save_manifest();
  }

  const std::filesystem::path& dir() const { return dir_; }
  const RunManifest& manifest() const { return manifest_; }

  void write_metrics(const std::vector<MetricRecord>& records) {
    std::ofstream out(dir_ / "metrics.jsonl", std::ios::app);
    if (!out) throw IoError("cannot append to " + (dir_ / "metrics.jsonl").string());
    for (const auto& r : records) out << r.to_json().dump() << '\n';
  }

  void write_round(const RoundRecord& rec) {
    const std::string sub = "round_" + std::to_string(rec.round);
    std::filesystem::create_directories(dir_ / sub);
    RoundArtifacts a{rec.round, {}};
    write_csv((dir_ / sub / "samples.csv").string(), column_names("theta", rec.samples.cols()), rec.samples);
    a.paths.push_back(sub + "/samples.csv");
    if (rec.params) {
      save_params(*rec.params, dir_ / sub / "params", rec.architecture);
      a.paths.push_back(sub + "/params.bin");
      a.paths.push_back(sub + "/params.json");
    }
    nlohmann::json info = {{"round", rec.round},
                           {"proposal", rec.proposal},
                           {"acceptance_rate", rec.acceptance_rate},
                           {"truncated", rec.truncated},
                           {"simulations", rec.simulations},
                           {"invalid", rec.invalid},
                           {"cumulative_simulations", rec.cumulative_simulations},
                           {"training",
                            {{"epochs", rec.training.epochs},
                             {"steps", rec.training.steps},
                             {"rejected_steps", rec.training.rejected_steps},
                             {"rows_touched", rec.training.rows_touched}}}};
    write_json_file((dir_ / sub / "round.json").string(), info);
    a.paths.push_back(sub + "/round.json");
    manifest_.rounds.push_back(std::move(a));
    save_manifest();
  }

  void finish(const RunResult& res, const std::string& status) {
    if (res.table.size() > 0) {
      write_sim_table((dir_ / "simulations.csv").string(), res.table);
      manifest_.files.push_back("simulations.csv");
    }
    if (res.particles.rows() > 0) {
      Mat m(res.particles.rows(), res.particles.cols() + 1);
      m << res.particles, res.particle_weights;
      auto header = column_names("theta", res.particles.cols());
      header.push_back("weight");
      write_csv((dir_ / "particles.csv").string(), header, m);
      manifest_.files.push_back("particles.csv");
    }
    manifest_.status = status;
    manifest_.finished = utc_timestamp();
    save_manifest();
  }

  void add_file(const std::string& relative) {
    manifest_.files.push_back(relative);
    save_manifest();
  }

 private:
  void save_manifest() const { write_json_file((dir_ / "manifest.json").string(), manifest_.to_json()); }

  std::filesystem::path dir_;
  RunManifest manifest_;
};

}  // namespace apt
