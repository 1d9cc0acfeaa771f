#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "apt/io/csv.hpp"
#include "apt/io/config_file.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

fs::path root() {
  static const fs::path r = [] {
    const fs::path p = fs::temp_directory_path() / "apt_test_cli";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Result aptlfi(const std::string& args) {
  static int counter = 0;
  const fs::path out = root() / ("stdout_" + std::to_string(counter));
  const fs::path err = root() / ("stderr_" + std::to_string(counter++));
  const std::string cmd = "APT_OUTPUT_ROOT='" + (root() / "runs").string() + "' '" + APTLFI_PATH + "' " + args +
                          " >'" + out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return {code, slurp(out), slurp(err)};
}

fs::path write_file(const std::string& name, const std::string& text) {
  const fs::path p = root() / name;
  fs::create_directories(p.parent_path());
  std::ofstream(p) << text;
  return p;
}

const char* kMinimal = R"({
  // smallest useful run
  "name": "minimal", "simulator": "linear_gaussian", "algorithm": "apt-mog",
  "rounds": 1, "simulations_per_round": 100, "seed": 7,
  "estimator": {"components": 1},
  "posterior_samples": 200,
  "eval": {"metric_samples": 200, "reference_samples": 500}
})";

}  // namespace

TEST_CASE("run writes a complete run directory", "[cli]") {
  const fs::path cfg = write_file("minimal.json", kMinimal);
  const Result r = aptlfi("run -q '" + cfg.string() + "'");
  INFO(r.err);
  REQUIRE(r.code == 0);
  const fs::path dir = root() / "runs" / "minimal";
  for (const auto* f : {"config.json", "manifest.json", "metrics.jsonl", "run.log", "observation.json",
                        "simulations.csv", "round_1/samples.csv", "round_1/params.bin", "round_1/round.json"})
    CHECK(fs::exists(dir / f));
  const auto manifest = apt::read_json_file((dir / "manifest.json").string());
  CHECK(manifest.at("status") == "ok");
  CHECK(manifest.at("rounds").size() == 1);
  CHECK(apt::read_csv((dir / "round_1/samples.csv").string()).values.rows() == 200);
}

TEST_CASE("reruns reproduce samples byte for byte", "[cli]") {
  const fs::path cfg = write_file("minimal.json", kMinimal);
  REQUIRE(aptlfi("run -q '" + cfg.string() + "' -o '" + (root() / "rerun_a").string() + "'").code == 0);
  REQUIRE(aptlfi("run -q '" + cfg.string() + "' -o '" + (root() / "rerun_b").string() + "'").code == 0);
  CHECK(slurp(root() / "rerun_a/round_1/samples.csv") == slurp(root() / "rerun_b/round_1/samples.csv"));
  CHECK(slurp(root() / "rerun_a/simulations.csv") == slurp(root() / "rerun_b/simulations.csv"));
}

TEST_CASE("invalid configs exit with code 2", "[cli]") {
  const fs::path atoms = write_file("atoms.json", R"({"simulator": "two_moons", "algorithm": "apt-atomic",
    "rounds": 1, "simulations_per_round": 50, "atoms": 100})");
  const Result a = aptlfi("run -q '" + atoms.string() + "'");
  CHECK(a.code == 2);
  CHECK(a.err.find("atoms") != std::string::npos);

  const fs::path unknown = write_file("unknown.json", R"({"simulator": "nope", "algorithm": "apt-mog"})");
  const Result u = aptlfi("run -q '" + unknown.string() + "'");
  CHECK(u.code == 2);
  CHECK(u.err.find("nope") != std::string::npos);

  CHECK(aptlfi("run -q '" + (root() / "does_not_exist.json").string() + "'").code == 2);
}

TEST_CASE("simulate writes parameter and data columns", "[cli]") {
  const fs::path out = root() / "tm.csv";
  const Result r = aptlfi("simulate two_moons --prior -n 5 --seed 3 -o '" + out.string() + "'");
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto t = apt::read_csv(out.string());
  CHECK(t.values.rows() == 5);
  CHECK(t.values.cols() == 4);
  CHECK(t.header == std::vector<std::string>{"theta_0", "theta_1", "x_0", "x_1"});
  CHECK(fs::exists(out.string() + ".manifest.json"));

  const fs::path ll = root() / "slcp.csv";
  REQUIRE(aptlfi("simulate slcp --prior -n 4 --loglik -o '" + ll.string() + "'").code == 0);
  const auto s = apt::read_csv(ll.string());
  CHECK(s.values.cols() == 5 + 8 + 1);
  CHECK(s.header.back() == "loglik");
  CHECK(s.values.col(13).allFinite());

  CHECK(aptlfi("simulate not_a_simulator --prior -n 2").code == 2);
}

TEST_CASE("simulate rejects parameters outside the prior support", "[cli]") {
  const fs::path th = write_file("theta.csv", "theta_0,theta_1\n0.1,0.2\n1.5,0\n0,0\n-2,0.3\n");
  const Result r = aptlfi("simulate two_moons --theta '" + th.string() + "'");
  CHECK(r.code == 2);
  CHECK(r.err.find('2') != std::string::npos);
  CHECK(r.err.find('4') != std::string::npos);
  const fs::path wrong = write_file("theta3.csv", "a,b,c\n0,0,0\n");
  CHECK(aptlfi("simulate two_moons --theta '" + wrong.string() + "'").code == 2);
}

TEST_CASE("eval compares sample files", "[cli]") {
  const fs::path a = write_file("a.csv", "theta_0,theta_1\n0,0\n1,0\n0,1\n0.5,0.5\n");
  const Result same = aptlfi("eval '" + a.string() + "' --b '" + a.string() + "'");
  INFO(same.err);
  REQUIRE(same.code == 0);
  const auto j = nlohmann::json::parse(same.out.substr(0, same.out.find('\n')));
  CHECK(j.at("metric") == "mmd");
  CHECK(j.at("value").get<double>() == 0.0);

  const fs::path c = write_file("c.csv", "theta_0\n0\n1\n");
  CHECK(aptlfi("eval '" + a.string() + "' --b '" + c.string() + "'").code == 2);

  const fs::path tm = root() / "tm_samples.csv";
  REQUIRE(aptlfi("simulate two_moons --prior -n 200 -o '" + tm.string() + "'").code == 0);
  const fs::path prior = write_file("prior.csv", [&] {
    const auto t = apt::read_csv(tm.string());
    std::stringstream ss;
    apt::write_csv(ss, apt::column_names("theta", 2), t.values.leftCols(2));
    return ss.str();
  }());
  const Result o = aptlfi("eval '" + prior.string() + "' --oracle two_moons --reference-samples 500");
  INFO(o.err);
  REQUIRE(o.code == 0);
  const auto jo = nlohmann::json::parse(o.out.substr(0, o.out.find('\n')));
  CHECK(jo.at("value").get<double>() > 0.0);
}

TEST_CASE("eval reports several metrics for a stored run", "[cli]") {
  const fs::path cfg = write_file("minimal.json", kMinimal);
  const fs::path dir = root() / "eval_run";
  REQUIRE(aptlfi("run -q '" + cfg.string() + "' -o '" + dir.string() + "'").code == 0);
  const Result r = aptlfi("eval '" + (dir / "round_1/samples.csv").string() + "' --run '" + dir.string() +
                          "' --round 1 --metrics mmd,nlp --oracle linear_gaussian");
  INFO(r.err);
  REQUIRE(r.code == 0);
  std::stringstream ss(r.out);
  std::string line;
  std::vector<std::string> metrics;
  while (std::getline(ss, line))
    if (!line.empty()) metrics.push_back(nlohmann::json::parse(line).at("metric"));
  CHECK(metrics == std::vector<std::string>{"mmd", "nlp"});
}

TEST_CASE("reproduce writes one table row per algorithm and round", "[cli]") {
  write_file("presets/two-moons.json", R"({
    "figure": "two-moons",
    "base": {"simulator": "two_moons", "rounds": 2, "simulations_per_round": 100, "atoms": 10, "seed": 2,
             "posterior_samples": 100,
             "estimator": {"kind": "mdn", "components": 2, "hidden": [10]},
             "training": {"max_epochs": 5},
             "eval": {"metric_samples": 100, "reference_samples": 300}},
    "algorithms": [{"algorithm": "apt-atomic"}, {"algorithm": "apt-mog"}]
  })");
  const Result r = aptlfi("reproduce two-moons --presets '" + (root() / "presets").string() + "' -o '" +
                          (root() / "figs").string() + "'");
  INFO(r.err);
  REQUIRE(r.code == 0);
  const std::string table = slurp(root() / "figs/two-moons/table.csv");
  std::stringstream ss(table);
  std::string line;
  std::getline(ss, line);
  CHECK(line == "algorithm,round,simulations,mmd,nlp,median_distance,acceptance_rate,status");
  std::vector<std::string> keys;
  while (std::getline(ss, line)) keys.push_back(line.substr(0, line.find(',', line.find(',') + 1)));
  CHECK(keys == std::vector<std::string>{"apt-atomic,0", "apt-atomic,1", "apt-atomic,2", "apt-mog,0", "apt-mog,1",
                                         "apt-mog,2"});

  CHECK(aptlfi("reproduce not-a-figure").code == 2);
}

TEST_CASE("reproduce without a reference posterior fills nlp and distances", "[cli]") {
  write_file("presets_lv/lv.json", R"({
    "figure": "lv",
    "base": {"simulator": "lotka_volterra", "rounds": 1, "simulations_per_round": 60, "seed": 2,
             "simulator_options": {"duration": 4, "pilot_runs": 50},
             "posterior_samples": 20,
             "estimator": {"kind": "mdn", "components": 1, "hidden": [10]},
             "training": {"max_epochs": 3},
             "eval": {"mmd": false, "nlp": true, "median_distance": true, "metric_samples": 20}},
    "algorithms": [{"algorithm": "apt-mog"}]
  })");
  const Result r = aptlfi("reproduce lv --presets '" + (root() / "presets_lv").string() + "' -o '" +
                          (root() / "figs").string() + "'");
  INFO(r.err);
  REQUIRE(r.code == 0);
  std::stringstream ss(slurp(root() / "figs/lv/table.csv"));
  std::string line;
  std::getline(ss, line);
  std::getline(ss, line);  // round 0
  std::getline(ss, line);
  INFO(line);
  // algorithm,round,simulations,mmd,nlp,median_distance,...
  std::vector<std::string> cells;
  std::stringstream ls(line);
  std::string c;
  while (std::getline(ls, c, ',')) cells.push_back(c);
  REQUIRE(cells.size() >= 6);
  CHECK(cells[1] == "1");
  CHECK(cells[3].empty());
  CHECK_FALSE(cells[4].empty());
  CHECK_FALSE(cells[5].empty());
}

TEST_CASE("list names the registered components", "[cli]") {
  const Result r = aptlfi("list");
  REQUIRE(r.code == 0);
  for (const auto* s : {"two_moons", "slcp", "lotka_volterra", "apt-atomic", "smc-abc", "glm"})
    CHECK(r.out.find(s) != std::string::npos);
}
