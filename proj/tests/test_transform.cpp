#include <catch_amalgamated.hpp>

#include <cmath>

#include "apt/diffcore/finite_diff.hpp"
#include "apt/transform/atomic.hpp"
#include "apt/transform/mog_normalizer.hpp"
#include "apt/transform/snpe.hpp"
#include "apt/transform/truncation.hpp"
#include "oracles.hpp"

using namespace apt;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

GaussianDist g1(double mean, double var) { return GaussianDist(Vec::Constant(1, mean), Mat::Constant(1, 1, var)); }

Prior wide_box(int d) { return Prior::box(Vec::Constant(d, -50.0), Vec::Constant(d, 50.0)); }

Mat sample_rows(const MoGDist& d, int n, Rng& rng) {
  Mat m(n, d.dim());
  for (int i = 0; i < n; ++i) m.row(i) = d.sample(rng).transpose();
  return m;
}

}  // namespace

TEST_CASE("Gaussian proposal posterior examples", "[transform][gaussian]") {
  SECTION("proposal equal to the prior leaves the posterior unchanged") {
    Mat c(2, 2);
    c << 2.0, 0.3, 0.3, 1.0;
    const Prior prior = Prior::gaussian((Vec(2) << 0.5, -1.0).finished(), c);
    const GaussianDist post((Vec(2) << 0.1, 0.2).finished(), 0.3 * Mat::Identity(2, 2));
    const auto out = gaussian_proposal_posterior(post, prior, *prior.as_gaussian());
    CHECK((out.mean() - post.mean()).norm() < 1e-12);
    CHECK((out.cov() - post.cov()).norm() < 1e-12);
  }
  SECTION("1D precision arithmetic") {
    const auto out = gaussian_proposal_posterior(g1(0, 1), Prior(g1(0, 4)), g1(0, 1));
    CHECK_THAT(out.cov()(0, 0), WithinAbs(4.0 / 7.0, 1e-14));
    CHECK_THAT(out.mean()[0], WithinAbs(0.0, 1e-14));
    const auto q = g1(0, 1).to_mog(), pt = g1(0, 1).to_mog();
    Mat pts(3, 1);
    pts << -0.5, 0.1, 1.2;
    CHECK(testing::proposal_posterior_grid_error(q, Prior(g1(0, 4)), pt, out.to_mog(), pts, 4000) < 1e-6);
  }
  SECTION("uniform prior has zero precision") {
    const auto out = gaussian_proposal_posterior(g1(0, 2), wide_box(1), g1(0, 3));
    CHECK_THAT(1.0 / out.cov()(0, 0), WithinAbs(5.0 / 6.0, 1e-14));
  }
  SECTION("dimension mismatch") {
    CHECK_THROWS_AS(gaussian_proposal_posterior(g1(0, 1), wide_box(2), g1(0, 1)), ConfigError);
  }
}

TEST_CASE("mixture proposal posterior reductions", "[transform][mog]") {
  Rng rng(1);
  SECTION("single components reduce to the Gaussian case") {
    const Prior prior = Prior::gaussian(Vec::Zero(2), 9.0 * Mat::Identity(2, 2));
    const MoGDist q = testing::random_mog(rng, 1, 2, 1.0, 0.5, 1.0);
    const MoGDist pt = testing::random_mog(rng, 1, 2, 1.0, 0.7, 1.5);
    const auto mog = mog_proposal_posterior(q, prior, pt);
    const auto gauss = gaussian_proposal_posterior(GaussianDist::from_chol(q.means[0], q.chols[0]), prior,
                                                   GaussianDist::from_chol(pt.means[0], pt.chols[0]));
    REQUIRE(mog.components() == 1);
    CHECK((mog.means[0] - gauss.mean()).norm() < 1e-12);
    CHECK((mog.covariance(0) - gauss.cov()).norm() < 1e-12);
  }
  SECTION("prior as proposal returns the posterior with its weights") {
    const Prior prior = Prior::gaussian((Vec(2) << 0.2, 0.1).finished(), 4.0 * Mat::Identity(2, 2));
    const MoGDist q = testing::random_mog(rng, 3, 2, 1.0, 0.5, 1.0);
    const auto out = mog_proposal_posterior(q, prior, prior.as_gaussian()->to_mog());
    REQUIRE(out.components() == 3);
    for (int k = 0; k < 3; ++k) {
      CHECK_THAT(out.weights[k], WithinAbs(q.weights[k], 1e-12));
      CHECK((out.means[static_cast<std::size_t>(k)] - q.means[static_cast<std::size_t>(k)]).norm() < 1e-12);
      CHECK((out.covariance(k) - q.covariance(k)).norm() < 1e-12);
    }
  }
  SECTION("non-PD products name the offending pair") {
    const Prior prior(g1(0, 0.01));
    const MoGDist q = g1(0, 1).to_mog();
    try {
      (void)mog_proposal_posterior(q, prior, g1(0, 1).to_mog());
      FAIL("expected PrecisionNotPD");
    } catch (const PrecisionNotPD& e) {
      CHECK(e.first() == 0);
      CHECK(e.second() == 0);
    }
  }
}

TEST_CASE("mixture proposal posterior matches quadrature", "[transform][mog][oracle]") {
  Rng rng(20240);
  int cases = 0;
  for (int d = 1; d <= 2; ++d)
    for (int uniform = 0; uniform <= 1; ++uniform)
      for (int rep = 0; rep < 3; ++rep) {
        const int kk = 1 + rep % 2, ll = 1 + (rep + uniform) % 2;
        const Prior prior = uniform ? wide_box(d) : Prior::gaussian(Vec::Constant(d, 0.3), 16.0 * Mat::Identity(d, d));
        const MoGDist q = testing::random_mog(rng, kk, d, 2.0, 0.4, 1.2);
        const MoGDist pt = testing::random_mog(rng, ll, d, 2.0, 0.6, 1.6);
        const MoGDist out = mog_proposal_posterior(q, prior, pt);
        CHECK(out.components() == kk * ll);
        CHECK_NOTHROW(out.validate());
        const Mat pts = sample_rows(out, 8, rng);
        CHECK(testing::proposal_posterior_grid_error(q, prior, pt, out, pts, d == 1 ? 20000 : 500) < 1e-6);
        const double log_z = mog_log_normalizer(q, prior, pt);
        auto log_f = [&](const Vec& t) {
          return q.log_prob(t) + pt.log_prob(t) - (prior.is_uniform() ? 0.0 : prior.log_prob(t));
        };
        const auto [lo, hi] = testing::covering_box({&q, &pt}, 12.0);
        CHECK_THAT(log_z, WithinAbs(std::log(testing::grid_integral(log_f, lo, hi, d == 1 ? 20000 : 500)), 1e-8));
        ++cases;
      }
  CHECK(cases == 12);
}

TEST_CASE("posterior correction inverts the forward transform", "[transform][snpe-a]") {
  Rng rng(77);
  SECTION("prior as proposal is the identity") {
    const Prior prior = Prior::gaussian(Vec::Zero(2), 4.0 * Mat::Identity(2, 2));
    const MoGDist pp = testing::random_mog(rng, 2, 2, 1.0, 0.5, 1.0);
    const MoGDist out = snpe_a_correct(pp, *prior.as_gaussian(), prior);
    for (int k = 0; k < 2; ++k) {
      CHECK_THAT(out.weights[k], WithinAbs(pp.weights[k], 1e-12));
      CHECK((out.covariance(k) - pp.covariance(k)).norm() < 1e-12);
    }
  }
  SECTION("round trip") {
    for (int uniform = 0; uniform <= 1; ++uniform) {
      const Prior prior = uniform ? wide_box(2) : Prior::gaussian(Vec::Zero(2), 25.0 * Mat::Identity(2, 2));
      const MoGDist post = testing::random_mog(rng, 3, 2, 1.5, 0.4, 1.0);
      const GaussianDist proposal((Vec(2) << 0.3, -0.2).finished(), 2.0 * Mat::Identity(2, 2));
      const MoGDist fwd = mog_proposal_posterior(post, prior, proposal.to_mog());
      const MoGDist back = snpe_a_correct(fwd, proposal, prior);
      for (int k = 0; k < 3; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        CHECK_THAT(back.weights[k], WithinAbs(post.weights[k], 1e-10));
        CHECK((back.means[ku] - post.means[ku]).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((back.covariance(k) - post.covariance(k)).cwiseAbs().maxCoeff() < 1e-10);
      }
    }
  }
  SECTION("a proposal narrower than the fit gives an invalid covariance") {
    const MoGDist pp = g1(0, 1).to_mog();
    try {
      (void)snpe_a_correct(pp, g1(0, 0.5), wide_box(1));
      FAIL("expected NonPositiveDefinite");
    } catch (const NonPositiveDefinite& e) {
      CHECK(e.component() == 0);
    }
  }
}

TEST_CASE("atomic categorical probabilities", "[transform][atomic]") {
  const Vec zero = Vec::Zero(2);
  Vec q(2);
  q << std::log(0.3), std::log(0.1);
  CHECK_THAT(std::exp(atomic_log_prob(q, zero, 0)), WithinAbs(0.75, 1e-14));
  CHECK_THAT(std::exp(atomic_log_prob(q, zero, 1)), WithinAbs(0.25, 1e-14));
  Vec lp(2);
  lp << std::log(0.5), std::log(0.25);
  CHECK_THAT(std::exp(atomic_log_prob(q, lp, 0)), WithinAbs(0.6, 1e-14));
  CHECK_THAT(std::exp(atomic_log_prob(q, lp, 1)), WithinAbs(0.4, 1e-14));
  const Vec flat = Vec::Constant(5, -1.3);
  for (int j = 0; j < 5; ++j) CHECK_THAT(std::exp(atomic_log_prob(flat, Vec::Zero(5), j)), WithinAbs(0.2, 1e-14));
  CHECK_THROWS_AS(atomic_log_prob(flat, Vec::Zero(5), 5), ConfigError);
}

TEST_CASE("atomic probabilities from a density callback", "[transform][atomic]") {
  const Prior prior = Prior::box(Vec::Constant(1, 0.0), Vec::Constant(1, 1.0));
  AtomSet atoms{Mat(3, 1), {4, 9, 2}};
  atoms.atoms << 0.1, 0.5, 0.9;
  auto q = [](const Vec& t) { return -t.squaredNorm(); };
  double total = 0.0;
  for (int j = 0; j < 3; ++j) total += std::exp(atomic_log_prob(q, prior, atoms, j));
  CHECK_THAT(total, WithinAbs(1.0, 1e-14));
  atoms.atoms(2, 0) = 1.5;
  CHECK_THROWS_AS(atomic_log_prob(q, prior, atoms, 0), InvalidAtom);
  atoms.source = {1, 1, 2};
  CHECK_THROWS_AS(atoms.validate(), ConfigError);
}

TEST_CASE("atomic transform of the exact posterior equals the likelihood categorical", "[transform][atomic]") {
  // Prior N(0, 3^2), x = theta + N(0, 1). Posterior N(9x/10, 9/10).
  const Prior prior(g1(0.0, 9.0));
  const double x = 1.7;
  const GaussianDist post = g1(0.9 * x, 0.9);
  Rng rng(5);
  Mat atoms(6, 1);
  for (int m = 0; m < 6; ++m) atoms(m, 0) = 3.0 * std_normal(rng);
  Vec q(6), like(6);
  for (int m = 0; m < 6; ++m) {
    q[m] = post.log_prob(atoms.row(m).transpose());
    like[m] = -0.5 * (x - atoms(m, 0)) * (x - atoms(m, 0));
  }
  const Vec lp = atom_log_prior(prior, atoms);
  for (int j = 0; j < 6; ++j)
    CHECK_THAT(atomic_log_prob(q, lp, j), WithinAbs(like[j] - log_sum_exp(like), 1e-12));
}

TEST_CASE("atomic loss properties", "[transform][atomic]") {
  const int m = 6;
  Rng rng(8);
  SECTION("flat estimator gives M log M") {
    ad::ValueContext vc(ParamVector{});
    const Mat pairs = Mat::Constant(m, m, -2.0);
    CHECK_THAT(atomic_loss_from_pairs(vc, pairs, Vec::Zero(m))(0, 0), WithinAbs(m * std::log(m), 1e-12));
  }
  SECTION("one-hot estimator drives the loss to zero") {
    ad::ValueContext vc(ParamVector{});
    Mat pairs = Mat::Constant(m, m, -800.0);
    pairs.diagonal().setZero();
    CHECK(atomic_loss_from_pairs(vc, pairs, Vec::Zero(m))(0, 0) < 1e-12);
  }
  SECTION("per-context rescaling leaves value and gradient direction unchanged") {
    ParamVector p;
    const int seg = p.add_segment("pairs", m, m);
    for (auto& v : p.values()) v = std_normal(rng);
    Vec lp(m);
    for (auto& v : lp) v = std_normal(rng);
    auto run = [&](const Mat& shift, Vec* grad) {
      ParamVector pp = p;
      pp.block(seg) += shift;
      ad::Tape t(&pp);
      ad::TapeContext tc(t);
      auto l = atomic_loss_from_pairs(tc, tc.param(seg), lp);
      t.backward(l);
      *grad = t.param_gradient();
      return l.value()(0, 0);
    };
    Vec g0, g1v;
    const double base = run(Mat::Zero(m, m), &g0);
    Vec c(m);
    for (auto& v : c) v = 5.0 * std_normal(rng);
    const double shifted = run(Mat(c.replicate(1, m)), &g1v);
    CHECK_THAT(shifted, WithinAbs(base, 1e-10));
    // Gradient is orthogonal to every per-row shift direction.
    const Eigen::Map<const RowMat> gm(g0.data(), m, m);
    CHECK(gm.rowwise().sum().cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("atomic loss gradients agree with central differences", "[transform][atomic][gradcheck]") {
  const Prior prior = Prior::gaussian(Vec::Zero(2), 4.0 * Mat::Identity(2, 2));
  Rng rng(3);
  const int m = 5;
  const Mat x = Mat::Random(m, 3);
  const Mat th = Mat::Random(m, 2);
  const Vec lp = atom_log_prior(prior, th);
  for (int kind = 0; kind < 2; ++kind) {
    auto est = kind == 0 ? CondDensityEstimator::mdn(MdnSpec{3, 2, 2, {8}})
                         : CondDensityEstimator::maf(MafSpec{2, 3, 2, {8}, 4});
    est.initialize(rng);
    CondDensityEstimator probe = est;
    auto loss = [&](const Vec& phi, Vec* grad) {
      probe.params().assign(phi);
      ad::Tape t(&probe.params());
      ad::TapeContext tc(t);
      auto l = atomic_loss_minibatch(tc, probe, tc.constant(x), th, lp);
      if (grad != nullptr) {
        t.backward(l);
        *grad = t.param_gradient();
      }
      return l.value()(0, 0);
    };
    Vec g;
    loss(est.params().values(), &g);
    CHECK(finite_diff_check([&](const Vec& v) { return loss(v, nullptr); }, g, est.params().values(), 1e-5) < 1e-4);
    CHECK_THAT(atomic_loss_minibatch(est, prior, x, th), WithinAbs(loss(est.params().values(), nullptr), 1e-12));
  }
}

TEST_CASE("fused analytic normalizer", "[transform][mog][gradcheck]") {
  Rng rng(12);
  const int d = 2;
  MdnSpec spec{2, d, 3, {10}};
  for (int uniform = 0; uniform <= 1; ++uniform) {
    const Prior prior = uniform ? wide_box(d) : Prior::gaussian(Vec::Zero(d), 9.0 * Mat::Identity(d, d));
    Mdn net(spec);
    net.initialize(rng);
    std::vector<detail::MogTerms> props{detail::MogTerms::from(testing::random_mog(rng, 2, d, 1.0, 0.8, 1.5)),
                                        detail::MogTerms::from(testing::random_mog(rng, 1, d, 1.0, 0.8, 1.5))};
    const auto pt = detail::PriorTerms::from(prior);
    const std::vector<int> which{0, 1, -1, 0, 1};
    const Mat ctx = Mat::Random(5, 2);

    // Value agrees with the closed form on the emitted mixtures.
    ad::ValueContext vc(net.params());
    const Mat lz = apt_mog_log_normalizer(net.heads(vc, ctx), net.head_layout(), props, which, pt);
    const MoGDist p0 = [&] {
      MoGDist out;
      out.weights = props[0].log_weights.array().exp();
      for (const auto& c : props[0].comps) {
        out.means.push_back(c.mean);
        out.chols.push_back(*cholesky_lower(c.prec.inverse()));
      }
      return out;
    }();
    CHECK_THAT(lz(0, 0), WithinAbs(mog_log_normalizer(net.emit(ctx.row(0).transpose()), prior, p0), 1e-10));
    CHECK(lz(2, 0) == 0.0);

    Mdn probe = net;
    auto loss = [&](const Vec& phi, Vec* grad) {
      probe.params().assign(phi);
      ad::Tape t(&probe.params());
      ad::TapeContext tc(t);
      auto l = ad::sum_all(apt_mog_log_normalizer(probe.heads(tc, tc.constant(ctx)), probe.head_layout(), props, which, pt));
      if (grad != nullptr) {
        t.backward(l);
        *grad = t.param_gradient();
      }
      return l.value()(0, 0);
    };
    for (int trial = 0; trial < 3; ++trial) {
      const Vec at = net.params().values() + 0.2 * Vec::Random(net.params().size());
      Vec g;
      loss(at, &g);
      CHECK(finite_diff_check([&](const Vec& v) { return loss(v, nullptr); }, g, at, 1e-5) < 1e-4);
    }
  }
}

TEST_CASE("importance weights", "[transform][snpe-b]") {
  const Prior prior = Prior::gaussian(Vec::Zero(1), Mat::Identity(1, 1));
  const Vec t = Vec::Constant(1, 0.4);
  CHECK_THAT(snpe_b_weight(t, prior, prior.log_prob(t)), WithinAbs(1.0, 1e-15));
  const Prior box = Prior::box(Vec::Zero(2), (Vec(2) << 2.0, 2.0).finished());
  CHECK_THAT(snpe_b_weight(Vec::Constant(2, 1.0), box, std::log(0.5)), WithinAbs(0.5, 1e-15));
  CHECK_THROWS_AS(snpe_b_weight(t, prior, -kInf), NumericError);

  const GaussianDist proposal = g1(0.3, 1.44);
  Rng rng(99);
  const int n = 100000;
  std::vector<double> w(n);
  for (auto& v : w) {
    const Vec s = proposal.sample(rng);
    v = snpe_b_weight(s, prior, [&](const Vec& u) { return proposal.log_prob(u); });
  }
  double mean = 0.0, sq = 0.0;
  for (double v : w) mean += v;
  mean /= n;
  for (double v : w) sq += (v - mean) * (v - mean);
  const double se = std::sqrt(sq / (n - 1.0) / n);
  CHECK(std::abs(mean - 1.0) < 3.0 * se);
}

TEST_CASE("truncated sampling", "[transform][truncation]") {
  Rng rng(4);
  const BatchSampler normal = [](int count, Rng& r) {
    Mat m(count, 1);
    for (int i = 0; i < count; ++i) m(i, 0) = std_normal(r);
    return m;
  };
  SECTION("half the standard normal lies in [0, 10]") {
    const Prior prior = Prior::box(Vec::Constant(1, 0.0), Vec::Constant(1, 10.0));
    const auto out = truncated_posterior_sample(normal, prior, rng, 50000, 1000000);
    CHECK(out.samples.rows() == 50000);
    CHECK(out.samples.minCoeff() >= 0.0);
    CHECK(out.samples.maxCoeff() <= 10.0);
    CHECK(std::abs(out.acceptance_rate - 0.5) < 0.01);
    CHECK(std::abs(support_acceptance_rate(normal, prior, rng, 100000) - 0.5) < 0.01);
  }
  SECTION("an estimate inside the support is always accepted") {
    const Prior prior = Prior::box(Vec::Constant(1, -50.0), Vec::Constant(1, 50.0));
    const auto out = truncated_posterior_sample(normal, prior, rng, 1000, 5000);
    CHECK(out.acceptance_rate == 1.0);
  }
  SECTION("the budget is enforced") {
    const Prior prior = Prior::box(Vec::Constant(1, 4.0), Vec::Constant(1, 5.0));
    try {
      (void)truncated_posterior_sample(normal, prior, rng, 100, 2000);
      FAIL("expected LeakageTooHigh");
    } catch (const LeakageTooHigh& e) {
      CHECK(e.partial().drawn == 2000);
      CHECK(e.partial().samples.rows() == e.partial().accepted);
      CHECK(e.partial().acceptance_rate < 0.01);
    }
  }
}
