#include "fixtures.hpp"

#include "gammacontam/error.hpp"
#include "gammacontam/gammapost.hpp"

#include <doctest.h>

#include <boost/math/special_functions/beta.hpp>

#include <cmath>
#include <numeric>

using namespace gammacontam;

namespace {

// Sums the probability of every binary pattern c_1..c_K whose number of
// leading ones is k; a 1 after a 0 has probability 0.
std::vector<double> enumerate_outcomes(const std::vector<double>& p) {
  const std::size_t K = p.size();
  std::vector<double> out(K + 1, 0.0);
  for (std::uint32_t mask = 0; mask < (1u << K); ++mask) {
    double prob = 1.0;
    bool prev = true;
    std::size_t lead = 0;
    for (std::size_t j = 0; j < K; ++j) {
      const bool c = mask >> j & 1u;
      const double on = prev ? p[j] : 0.0;
      prob *= c ? on : 1.0 - on;
      if (c && prev) ++lead;
      prev = c;
    }
    out[lead] += prob;
  }
  return out;
}

std::vector<double> ranked_weights(const MixturePosterior& post) {
  std::vector<double> w;
  for (const auto& c : post.components) w.push_back(c.expected_weight);
  return w;
}

std::vector<double> tight_r(const MixturePosterior& post) {
  std::vector<double> r;
  for (const auto& c : post.components) r.push_back(representative_value(c.niw.mean, c.niw.expected_covariance()));
  return r;
}

}  // namespace

TEST_CASE("representative value by hand") {
  CHECK(representative_value(Eigen::VectorXd::Constant(1, 1.0), Eigen::MatrixXd::Zero(1, 1)) == 1.0);
  CHECK(representative_value(Eigen::Vector2d(2.0, 2.0), Eigen::Matrix2d::Identity()) == 1.0);
  Eigen::Matrix2d cov;
  cov << 4.0, 3.0, 3.0, 9.0;
  CHECK(representative_value(Eigen::Vector2d(3.0, 8.0), cov) == doctest::Approx((1.0 + 2.0) / 2.0));
  double prev = 1e9;
  for (double s : {0.1, 0.5, 1.0, 2.0, 10.0}) {
    const double r = representative_value(Eigen::Vector2d(1.0, 3.0), Eigen::Matrix2d::Identity() * s);
    CHECK(r < prev);
    prev = r;
  }
}

TEST_CASE("ordering by expected r") {
  auto post = fixtures::synthetic_posterior({0.5, 0.5}, {-1.0, 3.0});
  SUBCASE("decreasing r") {
    const auto o = order_by_expected_r(post, {3.0, -1.0});
    CHECK(o.order == std::vector<std::size_t>{0, 1});
    const auto o2 = order_by_expected_r(post, {-1.0, 3.0});
    CHECK(o2.order == std::vector<std::size_t>{1, 0});
    CHECK(o2.ranked_r() == std::vector<double>{3.0, -1.0});
  }
  SUBCASE("tie goes to the larger weight, then the lower index") {
    auto tied = fixtures::synthetic_posterior({0.1, 0.2, 0.2}, {1.0, 1.0, 1.0});
    const auto o = order_by_expected_r(tied, {1.0, 1.0, 1.0});
    CHECK(o.order == std::vector<std::size_t>{1, 2, 0});
  }
  SUBCASE("Monte Carlo E[r] of a near point mass") {
    NiwParams niw;
    niw.mean = Eigen::Vector2d(1.0, -0.4);
    niw.strength = 1e12;
    niw.dof = 1e7;
    niw.scale = Eigen::Matrix2d::Identity() * 0.25 * (niw.dof - 3.0);
    MixturePosterior p;
    p.dim = 2;
    p.components.push_back({1.0, niw, 1.0, 1.0, 0});
    const auto o = order_components(p, 1000, 3);
    CHECK(std::abs(o.expected_r[0] - representative_value(niw.mean, niw.expected_covariance())) < 1e-3);
  }
  SUBCASE("order_components is seeded and sorted") {
    auto p = fixtures::synthetic_posterior({0.2, 0.3, 0.5}, {0.0, 2.0, -1.0}, 500.0, 0.5);
    const auto a = order_components(p, 1000, 9);
    const auto b = order_components(p, 1000, 9);
    CHECK(a.order == b.order);
    CHECK(a.expected_r == b.expected_r);
    CHECK(a.order == std::vector<std::size_t>{1, 0, 2});
    const auto r = a.ranked_r();
    for (std::size_t k = 1; k < r.size(); ++k) CHECK(r[k] <= r[k - 1]);
    const auto ranked = apply_ordering(p, a);
    CHECK(ranked.components[0].slot == 1);
  }
}

TEST_CASE("sigmoid conditional") {
  CHECK(conditional_probability(5.0, 0.0, 0.0) == 0.5);
  CHECK(conditional_probability(-2.0, 0.0, 0.0) == 0.5);
  CHECK(conditional_probability(0.0, 1e6, 0.0) == 0.0);
  CHECK(conditional_probability(0.0, -1e6, 0.0) == 1.0);
  CHECK(conditional_probability(std::log(3.0), 0.0, -1.0) == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("joint probabilities by hand") {
  const std::vector<double> p{0.5, 0.4};
  const auto j = joint_probabilities(p);
  REQUIRE(j.size() == 3);
  CHECK(j[0] == doctest::Approx(0.5));
  CHECK(j[1] == doctest::Approx(0.3));
  CHECK(j[2] == doctest::Approx(0.2));

  const auto none = joint_probabilities(std::vector<double>{0.0, 0.7, 0.9});
  CHECK(none[0] == 1.0);
  CHECK(none[1] == 0.0);
  CHECK(none[3] == 0.0);

  const auto full = joint_probabilities(std::vector<double>{1.0, 1.0, 1.0, 1.0});
  CHECK(full[4] == 1.0);
  CHECK(full[0] == 0.0);
}

TEST_CASE("joint probabilities match outcome-tree enumeration") {
  Rng rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> len(1, 10);
  for (int rep = 0; rep < 300; ++rep) {
    std::vector<double> p(len(rng));
    for (auto& v : p) v = u(rng);
    const auto j = joint_probabilities(p);
    const auto ref = enumerate_outcomes(p);
    CHECK(std::abs(std::accumulate(j.begin(), j.end(), 0.0) - 1.0) < 1e-12);
    for (std::size_t k = 0; k < j.size(); ++k) CHECK(std::abs(j[k] - ref[k]) < 1e-14);
  }
}

TEST_CASE("truncation length") {
  const std::vector<double> w{0.10, 0.10, 0.20, 0.60};
  CHECK(truncation_length(w, 0.25) == 2);
  CHECK(truncation_length(w, 1.0) == 4);
  CHECK_THROWS_AS(truncation_length(std::vector<double>{0.3, 0.7}, 0.25), CalibrationInfeasible);

  auto post = fixtures::synthetic_posterior({0.10, 0.10, 0.20, 0.60}, {3, 2, 1, 0});
  const auto c = truncate_conditionals(post, std::vector<double>{0.9, 0.8, 0.7, 0.6}, 0.25);
  CHECK(c == std::vector<double>{0.9, 0.8, 0.0, 0.0});
}

TEST_CASE("cumulative weight tail is the Beta upper tail") {
  const std::vector<double> alpha{2.0, 3.0, 5.0, 10.0};
  CHECK(cumulative_weight_tail(alpha, 1, 0.15) == doctest::Approx(boost::math::ibetac(2.0, 18.0, 0.15)));
  CHECK(cumulative_weight_tail(alpha, 3, 0.4) == doctest::Approx(boost::math::ibetac(10.0, 10.0, 0.4)));
  CHECK(cumulative_weight_tail(alpha, 4, 0.99) == 1.0);
}

TEST_CASE("calibration round trip") {
  auto post = fixtures::synthetic_posterior({0.05, 0.08, 0.07, 0.80}, {3.0, 2.0, 1.0, -0.5});
  const auto r = tight_r(post);
  CalibrationTargets targets;
  const auto s = calibrate(post, r, targets);
  REQUIRE(s.solved);
  CHECK_FALSE(s.saturated);
  // First equation alone: tau + delta r_1 = logit(p0).
  CHECK(s.tau + s.delta * r[0] == doctest::Approx(std::log(0.01 / 0.99)).epsilon(1e-9));
  CHECK(std::log(0.01 / 0.99) == doctest::Approx(-4.595).epsilon(1e-3));
  CHECK(std::abs((1.0 - conditional_probability(r[0], s)) - targets.p0) < 1e-6);
  CHECK(std::abs(high_contamination_probability(post, r, s.tau, s.delta, targets.t, targets.cap) -
                 targets.p_high) < 1e-6);
  CHECK(s.monotone);
}

TEST_CASE("p_high reproduced by sampling at the calibration point") {
  auto post = fixtures::synthetic_posterior({0.05, 0.08, 0.07, 0.80}, {3.0, 2.0, 1.0, -0.5}, 400.0, 1e-6);
  const auto r = tight_r(post);
  CalibrationTargets targets;
  targets.p_high = 0.2;
  const auto s = calibrate(post, r, targets);
  REQUIRE(s.solved);
  const auto kprime = truncation_length(ranked_weights(post), targets.cap);
  Rng rng(5);
  const std::size_t n = 40000;
  const auto draws = sample_gamma(post, s, kprime, n, targets.cap, rng);
  double high = 0.0;
  for (double g : draws.samples) high += g >= targets.t;
  high /= n;
  const double se = std::sqrt(targets.p_high * (1.0 - targets.p_high) / n);
  CHECK(std::abs(high - targets.p_high) < 3.0 * se);
  CHECK(std::abs(static_cast<double>(draws.zero_draws) / n - targets.p0) <
        3.0 * std::sqrt(targets.p0 * (1.0 - targets.p0) / n));
}

TEST_CASE("infeasible calibration is rejected before solving") {
  // A top component that alone exceeds t with probability far above p_high.
  auto post = fixtures::synthetic_posterior({0.16, 0.04, 0.80}, {3.0, 1.0, -1.0}, 300.0);
  const auto r = tight_r(post);
  CHECK(cumulative_weight_tail(post.alphas(), 1, 0.15) > 0.01);
  CHECK_THROWS_AS(calibrate(post, r, CalibrationTargets{}), CalibrationInfeasible);

  auto heavy = fixtures::synthetic_posterior({0.3, 0.7}, {3.0, -1.0});
  CHECK_THROWS_AS(calibrate(heavy, tight_r(heavy), CalibrationTargets{}), CalibrationInfeasible);
}

TEST_CASE("unreachable p_high saturates the sigmoid") {
  auto post = fixtures::synthetic_posterior({0.02, 0.03, 0.95}, {3.0, 2.0, -1.0});
  const auto s = calibrate(post, tight_r(post), CalibrationTargets{});
  CHECK(s.saturated);
  CHECK_FALSE(s.solved);
  CHECK(conditional_probability(tight_r(post)[0], s) == doctest::Approx(0.99));
  CHECK(conditional_probability(tight_r(post)[1], s) > 0.999);
}

TEST_CASE("target validation") {
  CalibrationTargets t;
  t.p0 = 0.0;
  CHECK_THROWS_AS(t.validate(), InputError);
  t = CalibrationTargets{};
  t.p_high = 1.0;
  CHECK_THROWS_AS(t.validate(), InputError);
  t = CalibrationTargets{};
  t.t = 0.3;
  CHECK_THROWS_AS(t.validate(), InputError);
}

TEST_CASE("sampler mean matches the semi-analytic mean") {
  auto post = fixtures::synthetic_posterior({0.04, 0.06, 0.90}, {2.0, 0.5, -1.0}, 300.0, 1e-6);
  SigmoidParams s;
  s.tau = 0.3;
  s.delta = -0.6;
  const auto r = tight_r(post);
  std::vector<double> cond;
  for (std::size_t k = 0; k < 2; ++k) cond.push_back(conditional_probability(r[k], s));
  const auto joint = joint_probabilities(cond);
  const auto alpha = post.alphas();
  const double total = std::accumulate(alpha.begin(), alpha.end(), 0.0);
  double expected = 0.0, head = 0.0;
  for (std::size_t k = 1; k < joint.size(); ++k) {
    head += alpha[k - 1];
    expected += joint[k] * head / total;
  }
  Rng rng(17);
  const std::size_t n = 50000;
  const auto draws = sample_gamma(post, s, 2, n, 1.0, rng);
  const GammaPosterior gp(draws.samples, static_cast<double>(draws.zero_draws) / n, 1.0);
  CHECK(std::abs(gp.mean() - expected) < 3.0 * gp.std() / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("sampler support and degenerate chains") {
  auto post = fixtures::synthetic_posterior({0.10, 0.12, 0.78}, {2.0, 1.0, -1.0}, 50.0);
  SigmoidParams always;
  always.tau = -50.0;
  Rng rng(3);
  const auto draws = sample_gamma(post, always, 3, 5000, 0.25, rng);
  for (double g : draws.samples) {
    CHECK(g >= 0.0);
    CHECK(g <= 0.25);
  }
  CHECK(draws.capped_draws > 0);

  SigmoidParams never;
  never.tau = 800.0;
  const auto zero = sample_gamma(post, never, 3, 1000, 0.25, rng);
  CHECK(zero.zero_draws == 1000);
  for (double g : zero.samples) CHECK(g == 0.0);
}

TEST_CASE("point estimates") {
  CHECK(point_estimate(GammaPosterior(std::vector<double>(10, 0.05), 0.0, 0.25)) == doctest::Approx(0.05));
  CHECK(point_estimate(GammaPosterior(std::vector<double>(10, 0.0), 1.0, 0.25)) == 0.0);
  std::vector<double> half(1000, 0.0);
  for (std::size_t i = 500; i < 1000; ++i) half[i] = 0.1;
  const GammaPosterior gp(half, 0.5, 0.25);
  CHECK(point_estimate(gp) == doctest::Approx(0.05));
  CHECK(gp.quantile(0.0) == 0.0);
  CHECK(gp.quantile(1.0) == 0.1);
  const auto j = to_json(gp);
  CHECK(j["mean"] == doctest::Approx(0.05));
  CHECK(j["zero_mass"] == 0.5);
  CHECK(j["quantiles"].size() == 7);
}
