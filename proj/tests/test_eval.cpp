#include <catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <numbers>

#include "apt/engine/run.hpp"
#include "apt/eval/metrics.hpp"
#include "apt/eval/mmd.hpp"
#include "apt/eval/reference.hpp"
#include "oracles.hpp"

using namespace apt;
using Catch::Matchers::WithinAbs;

namespace {

Mat normal_draws(int n, int d, double mean, std::uint64_t seed) {
  Rng rng(seed);
  Mat m(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = mean + std_normal(rng);
  return m;
}

/// Closed-form squared MMD between N(m1, 1) and N(m2, 1) in 1D with a
/// Gaussian kernel of bandwidth h: E k = h / sqrt(h^2 + 2) exp(-dm^2 / (2 (h^2 + 2))).
double gaussian_mmd_sq(double m1, double m2, double h) {
  const double c = h / std::sqrt(h * h + 2.0);
  const double dm = m1 - m2;
  return 2.0 * c - 2.0 * c * std::exp(-dm * dm / (2.0 * (h * h + 2.0)));
}

/// Number of 4-connected components of {mass >= level}.
int count_components(const Mat& mass, double level) {
  const int n = static_cast<int>(mass.rows());
  std::vector<int> label(static_cast<std::size_t>(n) * n, 0);
  int count = 0;
  for (int i0 = 0; i0 < n; ++i0)
    for (int j0 = 0; j0 < n; ++j0) {
      if (mass(i0, j0) < level || label[i0 * n + j0] != 0) continue;
      ++count;
      std::vector<std::pair<int, int>> stack{{i0, j0}};
      label[i0 * n + j0] = count;
      while (!stack.empty()) {
        auto [i, j] = stack.back();
        stack.pop_back();
        const std::array<std::pair<int, int>, 4> nb{{{i + 1, j}, {i - 1, j}, {i, j + 1}, {i, j - 1}}};
        for (auto [a, b] : nb) {
          if (a < 0 || b < 0 || a >= n || b >= n || mass(a, b) < level || label[a * n + b] != 0) continue;
          label[a * n + b] = count;
          stack.push_back({a, b});
        }
      }
    }
  return count;
}

class Identity final : public Simulator {
 public:
  Identity() { prior_ = Prior::box(Vec::Constant(2, -5.0), Vec::Constant(2, 5.0)); }
  std::string name() const override { return "identity"; }
  int theta_dim() const override { return 2; }
  int x_dim() const override { return 2; }
  SimOutcome run(const Vec& theta, Rng&) const override { return {theta, true}; }
};

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

}  // namespace

TEST_CASE("mmd of identical sets is zero and the estimate is symmetric", "[eval][mmd]") {
  const SampleSet a(normal_draws(500, 2, 0.0, 1), "a");
  const SampleSet b(normal_draws(400, 2, 0.5, 2), "b");
  CHECK(mmd(a, a, 0.7) <= 1e-12);
  CHECK(mmd(a, b, 0.7) == mmd(b, a, 0.7));
  CHECK(mmd(a, b, 0.7) > 0.0);
  CHECK_THROWS_AS(mmd(a, SampleSet(normal_draws(10, 3, 0.0, 3)), 1.0), ConfigError);
  CHECK_THROWS_AS(mmd(a, b, 0.0), ConfigError);
  CHECK_THROWS_AS(mmd(a, SampleSet(Mat::Zero(1, 2)), 1.0), ConfigError);
}

TEST_CASE("mmd separates distributions", "[eval][mmd]") {
  const SampleSet a(normal_draws(10000, 1, 0.0, 10), "a");
  const SampleSet b(normal_draws(10000, 1, 0.0, 11), "b");
  const SampleSet c(normal_draws(10000, 1, 3.0, 12), "c");
  CHECK(mmd(a, b, median_heuristic_bandwidth(a, b)) < 0.02);
  CHECK(mmd(a, b, 1.0) < 0.02);
  const double shifted = mmd(a, c, 1.0);
  CHECK(shifted > 0.5);
  CHECK(std::abs(shifted - std::sqrt(gaussian_mmd_sq(0.0, 3.0, 1.0))) < 0.02);
}

TEST_CASE("median heuristic bandwidth", "[eval][mmd]") {
  Mat two(2, 3);
  two << 0, 0, 0, 1, 2, 2;
  CHECK_THAT(median_heuristic_bandwidth(two), Catch::Matchers::WithinRel(3.0, 1e-15));
  const Mat grid = (Vec(4) << 0, 1, 2, 3).finished();
  CHECK(median_heuristic_bandwidth(grid) == 1.5);
  const Mat pts = normal_draws(300, 2, 0.0, 4);
  const double h = median_heuristic_bandwidth(pts);
  CHECK_THAT(median_heuristic_bandwidth(2.5 * pts), Catch::Matchers::WithinRel(2.5 * h, 1e-12));
  CHECK_THROWS_AS(median_heuristic_bandwidth(Mat::Ones(5, 2)), BandwidthError);
  CHECK_THROWS_AS(median_heuristic_bandwidth(Mat::Ones(1, 2)), ConfigError);
  // Thinning to 1000 points keeps the statistic close to the full value.
  const Mat big = normal_draws(3000, 1, 0.0, 5);
  CHECK(std::abs(median_heuristic_bandwidth(big) - 0.67449 * std::numbers::sqrt2) < 0.05);
}

TEST_CASE("two moons grid reference", "[eval][reference]") {
  const auto ref = two_moons_reference_posterior(Vec::Zero(2), 512, 10000, 3);
  CHECK(std::abs(ref.mass.sum() - 1.0) < 1e-9);
  CHECK(count_components(ref.mass, 0.5 * ref.mass.maxCoeff()) == 2);
  const int n = ref.resolution;
  double worst = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) worst = std::max(worst, std::abs(ref.mass(i, j) - ref.mass(n - 1 - j, n - 1 - i)));
  CHECK(worst <= 1e-6 * ref.mass.maxCoeff());

  const Mat& s = ref.samples.draws;
  REQUIRE(s.rows() == 10000);
  CHECK((s.array().abs() <= 1.0).all());
  const double pos = ((s.col(0) + s.col(1)).array() > 0.0).cast<double>().mean();
  CHECK(std::abs(pos - 0.5) < 0.02);
  // Every draw lies where the likelihood is positive.
  TwoMoons tm;
  int zero = 0;
  for (int i = 0; i < s.rows(); ++i) zero += std::isfinite(tm.log_likelihood(s.row(i).transpose(), Vec::Zero(2))) ? 0 : 1;
  CHECK(zero < 50);

  CHECK_THROWS_AS(two_moons_reference_posterior(Vec::Zero(2), 16, 10, 3), ResolutionError);
}

TEST_CASE("slcp sign folding preserves the likelihood", "[eval][reference]") {
  const Slcp sim;
  const Vec x_o = sim.observed();
  const Vec t = (Vec(5) << 0.4, -1.1, 0.8, -2.1, 0.9).finished();
  for (int q = 0; q < 4; ++q) {
    const Vec f = slcp_fold(t, q);
    CHECK(slcp_quadrant(f) == q);
    CHECK_THAT(sim.log_likelihood(f, x_o), WithinAbs(sim.log_likelihood(t, x_o), 1e-10));
    CHECK(slcp_fold(f, slcp_quadrant(t)) == t);
  }
}

TEST_CASE("slcp mcmc reference", "[eval][reference]") {
  const Slcp sim;
  const int n = 10000;
  const auto ref = slcp_reference_posterior(sim, n, 5);
  const Mat& s = ref.samples.draws;
  REQUIRE(s.rows() == n);
  const Vec x_o = sim.observed();
  std::array<int, 4> counts{};
  for (int i = 0; i < n; ++i) {
    const Vec t = s.row(i).transpose();
    CHECK(std::isfinite(sim.prior().log_prob(t) + sim.log_likelihood(t, x_o)));
    ++counts[static_cast<std::size_t>(slcp_quadrant(t))];
  }
  for (int c : counts) CHECK(c == n / 4);
  CHECK(ref.warnings.empty());

  // theta5 pairs with the sign of theta3 theta4: its signed mean agrees
  // across quadrants.
  std::array<double, 4> signed_t5{};
  for (int i = 0; i < n; ++i) {
    const Vec t = s.row(i).transpose();
    signed_t5[static_cast<std::size_t>(slcp_quadrant(t))] += t[4] * (t[2] * t[3] > 0.0 ? 1.0 : -1.0) / (n / 4.0);
  }
  for (double v : signed_t5) CHECK_THAT(v, WithinAbs(signed_t5[0], 0.15));

  // Given the covariance parameters the mean parameters are Gaussian around
  // the centre of the four observed points with covariance Sigma / 4, cut to
  // the box. The centre's second coordinate sits outside the box here, so the
  // oracle averages the truncated-normal mean of theta2 over the reference's
  // own covariance draws and carries the shift to theta1 by regression;
  // theta1 itself is far from the box edges.
  Vec centre = Vec::Zero(2);
  for (int k = 0; k < 4; ++k) centre += x_o.segment(2 * k, 2) / 4.0;
  double oracle1 = 0.0, oracle2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double sd = std::abs(s(i, 3)) / 2.0;
    const double a = (-3.0 - centre[1]) / sd, b = (3.0 - centre[1]) / sd;
    const double m2 = centre[1] + sd * (normal_pdf(a) - normal_pdf(b)) / (normal_cdf(b) - normal_cdf(a));
    oracle2 += m2;
    oracle1 += centre[0] + s(i, 2) * std::tanh(s(i, 4)) / s(i, 3) * (m2 - centre[1]);
  }
  oracle1 /= n;
  oracle2 /= n;
  CHECK(std::abs(s.col(0).mean() - oracle1) < 0.03);
  CHECK(std::abs(s.col(1).mean() - oracle2) < 0.03);
}

TEST_CASE("negative log probability of the true parameters", "[eval][nlp]") {
  PosteriorEstimate box;
  box.prior = Prior::box(Vec::Constant(3, -1.0), Vec::Constant(3, 2.0));
  box.log_prob = [&](const Vec&) { return -std::log(27.0); };
  auto r = neg_log_prob_true_params(box, Vec::Zero(3));
  CHECK_THAT(r.value, Catch::Matchers::WithinRel(std::log(27.0), 1e-14));
  CHECK_FALSE(r.outside_support);
  r = neg_log_prob_true_params(box, Vec::Constant(3, 5.0));
  CHECK(r.outside_support);
  CHECK(r.value == kInf);

  const double sigma = 0.3;
  const Vec mode = (Vec(4) << 0.1, -0.2, 0.3, 0.0).finished();
  const GaussianDist g(mode, sigma * sigma * Mat::Identity(4, 4));
  PosteriorEstimate gauss;
  gauss.prior = Prior::gaussian(Vec::Zero(4), Mat::Identity(4, 4));
  gauss.log_prob = [&](const Vec& t) { return g.log_prob(t); };
  CHECK_THAT(neg_log_prob_true_params(gauss, mode).value,
             Catch::Matchers::WithinRel(2.0 * std::log(2.0 * std::numbers::pi * sigma * sigma), 1e-12));

  // Truncation constant enters as -log(acceptance).
  box.acceptance_rate = 0.25;
  CHECK_THAT(neg_log_prob_true_params(box, Vec::Zero(3)).value,
             Catch::Matchers::WithinRel(std::log(27.0) + std::log(0.25), 1e-14));
}

TEST_CASE("negative log probability falls over apt rounds", "[eval][nlp][slow]") {
  ExperimentConfig c;
  c.simulator = "linear_gaussian";
  c.simulator_options = {{"dim", 2}};
  c.algorithm = "apt-mog";
  c.rounds = 3;
  c.simulations_per_round = 500;
  c.estimator.components = 1;
  c.training.learning_rate = 1e-4;
  c.seed = 4;
  c.posterior_samples = 10;
  LinearGaussian sim(c.simulator_options);
  const Vec theta_star = sim.theta_true();
  std::vector<double> nlp{-sim.prior().log_prob(theta_star)};
  RunHooks hooks;
  hooks.on_round = [&](RoundRecord&, const PosteriorEstimate& est) {
    nlp.push_back(neg_log_prob_true_params(est, theta_star).value);
  };
  const auto res = run_experiment(sim, c, hooks);
  REQUIRE_FALSE(res.failure);
  REQUIRE(nlp.size() == 4);
  for (std::size_t i = 1; i < nlp.size(); ++i) CHECK(nlp[i] <= nlp[i - 1] + 0.2);
  CHECK(nlp.back() <= nlp.front() - 1.0);
  // The exact posterior attains log(2 pi 0.9) at its mode.
  CHECK(std::abs(nlp.back() - std::log(2.0 * std::numbers::pi * 0.9)) < 0.2);
}

TEST_CASE("median simulation distance", "[eval][distance]") {
  const Identity id;
  const Vec theta_o = (Vec(2) << 0.3, -0.4).finished();
  const SampleSet same(theta_o.transpose().replicate(20, 1), "point mass");
  CHECK(median_distance(same, id, theta_o, Vec::Ones(2), 1).value == 0.0);

  LinearGaussian lg(nlohmann::json{{"dim", 2}});
  const Vec x_o = lg.observed();
  Rng rng(7);
  const Mat prior = lg.prior().sample(2000, rng);
  const GaussianDist post = lg.posterior(x_o);
  Mat p(2000, 2);
  for (int i = 0; i < 2000; ++i) p.row(i) = post.sample(rng).transpose();
  const auto dp = median_distance(SampleSet(prior), lg, x_o, Vec::Ones(2), 3);
  const auto dq = median_distance(SampleSet(p), lg, x_o, Vec::Ones(2), 3);
  CHECK(dq.value < dp.value);
  CHECK(dq.failures == 0);

  const Mat rev = p.colwise().reverse();
  CHECK(median_distance(SampleSet(rev), lg, x_o, Vec::Ones(2), 3).value == dq.value);
}
