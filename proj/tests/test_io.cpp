#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "apt/io/driver.hpp"
#include "apt/io/presets.hpp"

using namespace apt;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("apt_test_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

bool bitwise_equal(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return std::memcmp(a.data(), b.data(), static_cast<std::size_t>(a.size()) * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("csv values round-trip bit for bit", "[io][csv]") {
  Rng rng(5);
  Mat m(50, 4);
  for (auto& v : m.reshaped()) v = std::ldexp(std_normal(rng), static_cast<int>(std_normal(rng) * 200));
  m(0, 0) = std::numeric_limits<double>::denorm_min();
  m(0, 1) = std::numeric_limits<double>::max();
  m(0, 2) = -0.0;
  m(0, 3) = 0.1;
  m(1, 0) = kInf;
  m(1, 1) = -kInf;
  std::stringstream ss;
  write_csv(ss, column_names("c", 4), m);
  const CsvTable t = read_csv(ss);
  CHECK(t.header == std::vector<std::string>{"c_0", "c_1", "c_2", "c_3"});
  CHECK(bitwise_equal(t.values, m));
  std::stringstream bad("a,b\n1,2\n3\n");
  CHECK_THROWS_AS(read_csv(bad), ConfigError);
  std::stringstream junk("a\n1x\n");
  CHECK_THROWS_AS(read_csv(junk), ConfigError);
}

TEST_CASE("simulation tables and sample sets round-trip", "[io][csv]") {
  const fs::path dir = scratch("table");
  SimTable t(2, 3);
  Rng rng(2);
  Mat th1(4, 2), x1(4, 3), th2(3, 2), x2(3, 3);
  for (auto* m : {&th1, &x1, &th2, &x2})
    for (auto& v : m->reshaped()) v = std_normal(rng);
  t.append(1, th1, x1, -1, {true, true, false, true});
  t.append(2, th2, x2, 0, {true, true, true});
  write_sim_table((dir / "sims.csv").string(), t);
  const SimTable u = read_sim_table((dir / "sims.csv").string());
  REQUIRE(u.size() == t.size());
  CHECK(bitwise_equal(u.theta(), t.theta()));
  CHECK(bitwise_equal(u.x(), t.x()));
  for (int i = 0; i < t.size(); ++i) {
    CHECK(u.round_of(i) == t.round_of(i));
    CHECK(u.proposal_of(i) == t.proposal_of(i));
    CHECK(u.valid(i) == t.valid(i));
  }
  write_csv((dir / "s.csv").string(), column_names("theta", 2), th1);
  CHECK(bitwise_equal(read_sample_set((dir / "s.csv").string()).draws, th1));
}

TEST_CASE("text tables quote awkward cells", "[io][csv]") {
  const fs::path dir = scratch("text");
  write_text_csv((dir / "t.csv").string(), {"a", "b"}, {{"x,y", "say \"hi\""}, {"1", ""}});
  std::ifstream in(dir / "t.csv");
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == "a,b\n\"x,y\",\"say \"\"hi\"\"\"\n1,\n");
}

TEST_CASE("config hash ignores key order and whitespace", "[io][manifest]") {
  const auto a = nlohmann::json::parse(R"({"seed": 1, "algorithm": "snl", "estimator": {"kind": "maf", "n_mades": 2}})");
  const auto b = nlohmann::json::parse("{ \"estimator\":{\"n_mades\":2,\n \"kind\":\"maf\"},\n\"algorithm\":\"snl\",   \"seed\":1}");
  CHECK(config_hash(a) == config_hash(b));
  auto c = a;
  c["seed"] = 2;
  CHECK(config_hash(a) != config_hash(c));
  CHECK(config_hash(a).size() == 16);
}

TEST_CASE("config files allow comments", "[io][config]") {
  const fs::path dir = scratch("config");
  {
    std::ofstream f(dir / "c.json");
    f << "// leading comment\n{\n  \"simulator\": \"two_moons\", /* inline */\n  \"algorithm\": \"apt-atomic\",\n"
         "  \"rounds\": 2, \"simulations_per_round\": 200, \"atoms\": 10 // trailing\n}\n";
  }
  const ExperimentConfig c = load_config((dir / "c.json").string());
  CHECK(c.simulator == "two_moons");
  CHECK(c.atoms == 10);
  {
    std::ofstream f(dir / "bad.json");
    f << "{\"simulator\": \"two_moons\", \"algorithm\": \"apt-atomic\", \"rounds\": 1, \"colour\": 3}";
  }
  CHECK_THROWS_WITH(load_config((dir / "bad.json").string()), Catch::Matchers::ContainsSubstring("colour"));
  CHECK_THROWS_AS(load_config((dir / "missing.json").string()), IoError);
}

TEST_CASE("manifest survives a json round trip", "[io][manifest]") {
  RunManifest m;
  m.config_hash = "0123456789abcdef";
  m.seed = 42;
  m.started = "2026-01-01T00:00:00Z";
  m.rounds = {{1, {"round_1/samples.csv"}}, {2, {"round_2/samples.csv", "round_2/params.bin"}}};
  m.files = {"config.json"};
  const RunManifest r = RunManifest::from_json(nlohmann::json::parse(m.to_json().dump()));
  CHECK(r.to_json() == m.to_json());
}

TEST_CASE("presets expand into validated configs", "[io][presets]") {
  const auto doc = nlohmann::json::parse(R"({
    "figure": "demo",
    "base": {"simulator": "two_moons", "rounds": 4, "simulations_per_round": 300, "atoms": 50,
             "estimator": {"kind": "mdn", "components": 20}},
    "algorithms": [{"algorithm": "apt-atomic"},
                   {"algorithm": "snl", "estimator": {"kind": "maf"}, "quick_overrides": {"rounds": 1}}],
    "quick": {"rounds": 2, "simulations_per_round": 100}
  })");
  const FigurePreset full = expand_preset(doc, false);
  REQUIRE(full.configs.size() == 2);
  CHECK(full.configs[0].rounds == 4);
  CHECK(full.configs[1].estimator.kind == "maf");
  CHECK(full.configs[1].estimator.components == 20);
  CHECK(full.configs[0].name == "demo-apt-atomic");
  const FigurePreset quick = expand_preset(doc, true);
  CHECK(quick.configs[0].rounds == 2);
  CHECK(quick.configs[0].simulations_per_round == 100);
  CHECK(quick.configs[1].rounds == 1);
}

TEST_CASE("shipped presets parse", "[io][presets]") {
  for (const auto& id : figure_ids()) {
    INFO(id);
    for (bool quick : {false, true}) {
      const FigurePreset p = load_preset(APT_PRESET_DIR, id, quick);
      CHECK(p.figure == id);
      CHECK_FALSE(p.configs.empty());
    }
  }
  const FigurePreset tm = load_preset(APT_PRESET_DIR, "two-moons", false);
  CHECK(tm.configs[0].estimator.components == 20);
  CHECK(tm.configs[0].atoms == 100);
  const FigurePreset slcp = load_preset(APT_PRESET_DIR, "slcp", false);
  CHECK(slcp.configs[0].estimator.kind == "maf");
  CHECK(slcp.configs[0].estimator.n_mades == 5);
  CHECK(slcp.configs[1].estimator.components == 8);
}

TEST_CASE("stored runs reload their posterior", "[io][driver]") {
  const fs::path dir = scratch("run");
  ExperimentConfig c;
  c.name = "reload";
  c.simulator = "linear_gaussian";
  c.algorithm = "apt-mog";
  c.rounds = 2;
  c.simulations_per_round = 200;
  c.estimator.components = 1;
  c.seed = 3;
  c.posterior_samples = 100;
  c.eval.metric_samples = 100;
  c.eval.reference_samples = 500;
  const StoredRun r = run_and_store(c, dir);
  REQUIRE(r.status == "ok");
  REQUIRE(r.result.rounds.size() == 2);
  for (const auto& rel : {"config.json", "manifest.json", "metrics.jsonl", "simulations.csv", "run.log",
                          "round_1/samples.csv", "round_2/params.bin"})
    CHECK(fs::exists(dir / rel));
  const auto manifest = RunManifest::from_json(read_json_file((dir / "manifest.json").string()));
  CHECK(manifest.status == "ok");
  CHECK(manifest.config_hash == config_hash(to_json(c)));
  for (const auto& rd : manifest.rounds)
    for (const auto& p : rd.paths) CHECK(fs::exists(dir / p));

  const SimTable t = read_sim_table((dir / "simulations.csv").string());
  CHECK(bitwise_equal(t.theta(), r.result.table.theta()));
  CHECK(bitwise_equal(read_sample_set((dir / "round_2/samples.csv").string()).draws, r.result.rounds[1].samples));

  const PosteriorEstimate est = load_round_estimate(dir, 2);
  const auto rec = r.result.rounds[1];
  const auto orig = CondDensityEstimator::from_architecture(rec.architecture);
  CondDensityEstimator e2 = orig;
  e2.params().assign(rec.params->values());
  const Vec th = Vec::Constant(1, 1.3);
  CHECK(est.log_prob(th) == e2.log_prob(r.result.x_o, th));

  std::ifstream metrics(dir / "metrics.jsonl");
  std::string line;
  int n = 0;
  while (std::getline(metrics, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("experiment"));
    CHECK(j.contains("round"));
    CHECK(j.contains("metric"));
    CHECK(j.contains("value"));
    ++n;
  }
  CHECK(n == static_cast<int>(r.metrics.size()));
}

TEST_CASE("reference posteriors are cached on disk", "[io][eval]") {
  const fs::path dir = scratch("cache");
  TwoMoons tm;
  const auto a = cached_reference_posterior(tm, Vec::Zero(2), 500, 9, dir.string());
  REQUIRE(a);
  int files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++files;
  CHECK(files == 2);
  const auto b = cached_reference_posterior(tm, Vec::Zero(2), 500, 9, dir.string());
  CHECK(b->provenance.rfind("cache", 0) == 0);
  CHECK(bitwise_equal(a->draws, b->draws));
  const auto c = cached_reference_posterior(tm, Vec::Zero(2), 500, 10, dir.string());
  CHECK_FALSE(bitwise_equal(a->draws, c->draws));
}
