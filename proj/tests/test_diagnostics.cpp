#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "lrr/diagnostics.hpp"
#include "lrr/env.hpp"
#include "lrr/rng.hpp"
#include "oracles.hpp"

using namespace lrr;

namespace {

std::vector<double> ar1_series(double phi, int n, RngStream& rng) {
  std::vector<double> x(n);
  x[0] = rng.normal();
  for (int t = 1; t < n; ++t) x[t] = phi * x[t - 1] + rng.normal();
  return x;
}

}  // namespace

TEST_CASE("alternating sequence has lag-1 autocorrelation exactly -1") {
  for (int n : {4, 10, 1000}) {
    std::vector<double> x(n);
    for (int t = 0; t < n; ++t) x[t] = (t % 2 == 0) ? 1.0 : -1.0;
    CHECK(std::abs(lag1_autocorr(x) + 1.0) <= 1e-9);
  }
}

TEST_CASE("iid normal sequence has near-zero autocorrelation (Monte Carlo)") {
  RngStream rng(1);
  std::vector<double> x(100000);
  for (auto& v : x) v = rng.normal();
  CHECK(std::abs(lag1_autocorr(x)) < 0.02);  // 3/sqrt(n) would be ~0.0095
}

TEST_CASE("AR(1) with phi=0.9 estimates near 0.9 (Monte Carlo)") {
  RngStream rng(2);
  const std::vector<double> x = ar1_series(0.9, 100000, rng);
  const double rho = lag1_autocorr(x);
  CHECK(rho >= 0.88);
  CHECK(rho <= 0.92);
}

TEST_CASE("estimator stays in [-1, 1] on random inputs") {
  RngStream rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 3 + rng.uniform_int(50);
    std::vector<double> x(n);
    for (auto& v : x) v = rng.uniform(-10.0, 10.0);
    const double rho = lag1_autocorr(x);
    CHECK(rho >= -1.0);
    CHECK(rho <= 1.0);
  }
}

TEST_CASE("affine invariance: a*x + b leaves rho unchanged for any a != 0") {
  RngStream rng(4);
  const std::vector<double> x = ar1_series(0.5, 2000, rng);
  const double base = lag1_autocorr(x);
  for (double a : {2.0, -3.0, 0.001, -0.5}) {
    for (double b : {0.0, 10.0, -7.5}) {
      std::vector<double> y(x.size());
      for (std::size_t t = 0; t < x.size(); ++t) y[t] = a * x[t] + b;
      CHECK(lag1_autocorr(y) == doctest::Approx(base).epsilon(1e-9));
    }
  }
}

TEST_CASE("degenerate inputs are rejected") {
  CHECK_THROWS_AS(lag1_autocorr(std::vector<double>{1.0, 2.0}), DomainError);
  CHECK_THROWS_AS(lag1_autocorr(std::vector<double>(10, 3.14)), DomainError);
}

TEST_CASE("episode boundaries contribute no cross terms") {
  // two strongly correlated episodes whose junction would flip the sign if
  // pooled naively
  std::vector<double> a = {1, 1, 1, 1, 1, 1, -5};
  std::vector<double> b = {1, 1, 1, 1, 1, 1, -5};
  const double pooled = lag1_autocorr(std::vector<std::vector<double>>{a, b});
  // concatenation adds the (-5, 1) pair
  std::vector<double> cat = a;
  cat.insert(cat.end(), b.begin(), b.end());
  const double merged = lag1_autocorr(cat);
  CHECK(pooled != doctest::Approx(merged).epsilon(1e-6));
}

TEST_CASE("autocorr_ci: null interval at rho=0") {
  const auto [lo, hi] = autocorr_ci(0.0, 10003);
  CHECK(lo == doctest::Approx(-0.0196).epsilon(5e-3));
  CHECK(hi == doctest::Approx(0.0196).epsilon(5e-3));
  CHECK(std::abs(lo + hi) < 1e-12);  // symmetric at the null
}

TEST_CASE("autocorr_ci always contains rho1") {
  RngStream rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const double rho = rng.uniform(-0.99, 0.99);
    const long n = 4 + rng.uniform_int(100000);
    const auto [lo, hi] = autocorr_ci(rho, n);
    CHECK(lo <= rho);
    CHECK(rho <= hi);
  }
}

TEST_CASE("autocorr_ci frozen value rho=0.9, n=403") {
  const auto [lo, hi] = autocorr_ci(0.9, 403);
  CHECK(lo == doctest::Approx(0.8797).epsilon(1e-3));
  CHECK(hi == doctest::Approx(0.9172).epsilon(1e-3));
}

// A parametric bootstrap on synthetic AR(1) data as an independent check of
// the Fisher interval's location. (Width is not compared tightly: Fisher z
// models iid bivariate-normal pairs, and the sampling variance of the lag-1
// estimate on an AR(1) series is larger, so the bootstrap interval is the
// wider of the two.)
TEST_CASE("autocorr_ci cross-checked by a parametric bootstrap oracle") {
  RngStream rng(6);
  const int n = 403;
  const std::vector<double> x = ar1_series(0.9, n, rng);
  const double rho_hat = lag1_autocorr(x);
  const auto [lo, hi] = autocorr_ci(rho_hat, n);

  std::vector<double> boot;
  for (int rep = 0; rep < 2000; ++rep) {
    RngStream rep_rng = rng.substream("boot", rep);
    boot.push_back(lag1_autocorr(ar1_series(rho_hat, n, rep_rng)));
  }
  std::sort(boot.begin(), boot.end());
  const double b_lo = boot[static_cast<int>(0.025 * boot.size())];
  const double b_hi = boot[static_cast<int>(0.975 * boot.size())];
  const double b_med = boot[boot.size() / 2];

  // location agreement: the bootstrap distribution is centered near rho_hat,
  // and the Fisher interval must sit inside the (wider) bootstrap one
  CHECK(std::abs(b_med - rho_hat) < 0.02);
  CHECK(lo >= b_lo - 0.02);
  CHECK(hi <= b_hi + 0.02);
  CHECK(lo < rho_hat);
  CHECK(rho_hat < hi);
}

TEST_CASE("CI width is strictly decreasing in n") {
  for (double rho : {0.0, 0.5, 0.9, -0.7}) {
    double prev = 2.0;
    for (long n : {5L, 10L, 100L, 1000L, 100000L}) {
      const auto [lo, hi] = autocorr_ci(rho, n);
      CHECK(hi - lo < prev);
      prev = hi - lo;
    }
  }
}

TEST_CASE("autocorr_ci domain errors") {
  CHECK_THROWS_AS(autocorr_ci(0.5, 3), DomainError);
  CHECK_THROWS_AS(autocorr_ci(1.0, 100), DomainError);
}

TEST_CASE("measure_env_autocorr: pendulum high, delayed_chain low") {
  auto pendulum = make_env("pendulum", 200);
  const AutocorrReport high = measure_env_autocorr(*pendulum, 50, 0);
  CHECK(high.rho1 > 0.5);
  CHECK(high.environment == "pendulum");
  CHECK(high.ci_low <= high.rho1);
  CHECK(high.rho1 <= high.ci_high);

  auto chain = make_env("delayed_chain", 200);
  const AutocorrReport low = measure_env_autocorr(*chain, 200, 0);
  CHECK(std::abs(low.rho1) < 0.2);
  CHECK(low.n >= 4);
}
