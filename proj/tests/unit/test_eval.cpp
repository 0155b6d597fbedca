#include "gammacontam/eval.hpp"
#include "gammacontam/gammapost.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace gammacontam;

namespace {

std::size_t positives(const std::vector<int>& v) { return std::accumulate(v.begin(), v.end(), std::size_t{0}); }

EvalRow row(std::string dataset, std::string method, double mae_value) {
  EvalRow r;
  r.dataset = std::move(dataset);
  r.method = std::move(method);
  r.mae = mae_value;
  return r;
}

}  // namespace

TEST_CASE("mae against published rows") {
  CHECK(mae(0.0260, 0.0200) == doctest::Approx(0.0060).epsilon(1e-9));
  CHECK(mae(0.0385, 0.0996) == doctest::Approx(0.0611).epsilon(1e-9));
  CHECK(mae(0.07, 0.07) == 0.0);
}

TEST_CASE("threshold predictions") {
  const std::vector<double> s{0.1, 0.9, 0.3, 0.8, 0.2, 0.4, 0.5, 0.6, 0.7, 0.0};
  CHECK(positives(threshold_predictions(s, 0.0)) == 0);
  const auto p = threshold_predictions(s, 0.2);
  CHECK(p == std::vector<int>{0, 1, 0, 1, 0, 0, 0, 0, 0, 0});

  const std::vector<double> tied{1.0, 5.0, 5.0, 2.0};
  CHECK(threshold_predictions(tied, 0.25) == std::vector<int>{0, 1, 0, 0});

  CHECK(flagged_count(0.25, 10) == 3);   // 2.5 rounds away from zero
  CHECK(flagged_count(0.05, 10) == 1);   // 0.5
  CHECK(flagged_count(0.149, 10) == 1);
  CHECK(flagged_count(1.0, 7) == 7);
}

TEST_CASE("threshold predictions count on random inputs") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> size(1, 500);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = size(rng);
    const double g = u(rng);
    std::vector<double> s(n);
    for (auto& v : s) v = std::floor(u(rng) * 20.0);
    CHECK(positives(threshold_predictions(s, g)) == static_cast<std::size_t>(std::floor(g * n + 0.5)));
  }
}

TEST_CASE("confusion, f1 and error rates") {
  const std::vector<int> labels{1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  const std::vector<int> pred{1, 1, 1, 1, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0};
  const auto c = confusion(pred, labels);
  CHECK(c.tp == 4);
  CHECK(c.fn == 1);
  CHECK(c.fp == 2);
  CHECK(c.tn == 8);
  const auto rates = fpr_fnr(pred, labels);
  REQUIRE(rates);
  CHECK(rates->fpr == doctest::Approx(0.2));
  CHECK(rates->fnr == doctest::Approx(0.2));
  CHECK(f1_score(pred, labels) == doctest::Approx(8.0 / 11.0));

  const auto perfect = fpr_fnr(labels, labels);
  CHECK(perfect->fpr == 0.0);
  CHECK(perfect->fnr == 0.0);
  const auto all = fpr_fnr(std::vector<int>(15, 1), labels);
  CHECK(all->fpr == 1.0);
  CHECK(all->fnr == 0.0);
  CHECK_FALSE(fpr_fnr(std::vector<int>(4, 1), std::vector<int>(4, 0)));
  CHECK(f1_score(std::vector<int>(4, 0), std::vector<int>(4, 0)) == 0.0);
}

TEST_CASE("f1 deterioration") {
  // 20 points, perfect ranking, 4 anomalies on top.
  std::vector<double> s(20);
  std::vector<int> labels(20, 0);
  for (int i = 0; i < 20; ++i) s[i] = 20.0 - i;
  for (int i = 0; i < 4; ++i) labels[i] = 1;
  CHECK(*f1_deterioration(s, labels, 0.2, 0.2) == 0.0);
  // gamma_hat one sample too high: TP 4, FP 1, F1 = 8/9.
  CHECK(*f1_deterioration(s, labels, 0.2, 0.25) == doctest::Approx((1.0 - 8.0 / 9.0) / (8.0 / 9.0)));
  CHECK_FALSE(f1_deterioration(s, labels, 0.2, 0.0));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> sc(40);
    std::vector<int> lb(40);
    for (int i = 0; i < 40; ++i) {
      sc[i] = u(rng);
      lb[i] = u(rng) < 0.2;
    }
    const double g = u(rng) * 0.5;
    if (const auto d = f1_deterioration(sc, lb, g, g)) CHECK(*d == 0.0);
  }
}

TEST_CASE("best detector selection") {
  // 3 anomalies out of 10. Detector b has the lower AUC but the better F1
  // at gamma_true.
  std::vector<int> labels(10, 0);
  labels[0] = labels[1] = labels[2] = 1;
  std::vector<double> a(10), b(10);
  const int rank_a[] = {1, 4, 5, 2, 3, 6, 7, 8, 9, 10};
  const int rank_b[] = {1, 2, 10, 3, 4, 5, 6, 7, 8, 9};
  for (int i = 0; i < 10; ++i) {
    a[i] = 10 - rank_a[i];
    b[i] = 10 - rank_b[i];
  }
  CHECK(select_best_detectors({a, b}, labels, 0.3) == std::vector<std::size_t>{1});
  CHECK(select_best_detectors({b}, labels, 0.3) == std::vector<std::size_t>{0});
  CHECK(select_best_detectors({a, b, b}, labels, 0.3) == std::vector<std::size_t>{1, 2});
}

TEST_CASE("calibration curve") {
  const std::vector<double> grid = default_v_grid();
  REQUIRE(grid.size() == 51);
  CHECK(grid.front() == 0.0);
  CHECK(grid.back() == 0.5);

  SUBCASE("end points") {
    std::vector<double> samples{0.0, 0.01, 0.02, 0.03, 0.04};
    const GammaPosterior gp(samples, 0.2, 0.25);
    const std::vector<const GammaPosterior*> posts{&gp, &gp, &gp};
    const std::vector<double> truths{0.02, 0.035, 0.2};
    const auto curve = calibration_curve(posts, truths, grid);
    CHECK(curve.front().expected == 0.0);
    CHECK(curve.front().empirical == doctest::Approx(1.0 / 3.0));  // 0.02 is the median
    CHECK(curve.back().expected == 1.0);
    CHECK(curve.back().empirical == doctest::Approx(2.0 / 3.0));
    for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i].empirical >= curve[i - 1].empirical);
  }

  SUBCASE("exact posteriors track the diagonal") {
    std::mt19937_64 rng(99);
    std::gamma_distribution<double> ga(2.0, 1.0), gb(30.0, 1.0);
    auto beta = [&] {
      const double x = ga(rng);
      return x / (x + gb(rng));
    };
    std::vector<GammaPosterior> store;
    std::vector<double> truths;
    for (int d = 0; d < 400; ++d) {
      std::vector<double> s(2000);
      for (auto& v : s) v = beta();
      store.emplace_back(s, 0.0, 1.0);
      truths.push_back(beta());
    }
    std::vector<const GammaPosterior*> posts;
    for (const auto& g : store) posts.push_back(&g);
    for (const auto& p : calibration_curve(posts, truths, grid)) {
      CHECK(p.expected == doctest::Approx(2.0 * p.v));
      CHECK(std::abs(p.empirical - p.expected) <= 0.1);
    }
  }
}

TEST_CASE("method ranking") {
  SUBCASE("strictly best") {
    const std::vector<EvalRow> rows{row("d1", "a", 0.01), row("d1", "b", 0.02),
                                    row("d2", "a", 0.00), row("d2", "b", 0.05)};
    const auto r = rank_methods(rows);
    REQUIRE(r.size() == 2);
    CHECK(r[0].method == "a");
    CHECK(r[0].mean_rank == 1.0);
    CHECK(r[1].mean_rank == 2.0);
  }
  SUBCASE("ties share the mean rank") {
    const auto r = rank_methods({row("d", "a", 0.03), row("d", "b", 0.03)});
    CHECK(r[0].mean_rank == 1.5);
    CHECK(r[1].mean_rank == 1.5);
  }
  SUBCASE("three methods on two datasets") {
    // d1: a 0.01 (1), b 0.02 (2), c 0.05 (3); d2: a 0.04 (2.5), b 0.01 (1), c 0.04 (2.5).
    const std::vector<EvalRow> rows{row("d1", "a", 0.01), row("d1", "b", 0.02), row("d1", "c", 0.05),
                                    row("d2", "a", 0.04), row("d2", "b", 0.01), row("d2", "c", 0.04)};
    const auto r = rank_methods(rows);
    REQUIRE(r.size() == 3);
    CHECK(r[0].method == "b");
    CHECK(r[0].mean_rank == 1.5);
    CHECK(r[0].mean_mae == doctest::Approx(0.015));
    CHECK(r[1].method == "a");
    CHECK(r[1].mean_rank == 1.75);
    CHECK(r[1].mean_mae == doctest::Approx(0.025));
    CHECK(r[2].method == "c");
    CHECK(r[2].mean_rank == 2.75);
    CHECK(r[2].datasets == 2);
  }
}
