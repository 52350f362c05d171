// Sanity checks on the reference implementations themselves, pinned against
// closed forms and published values, so the other suites can lean on them.
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"

TEST_SUITE("oracles") {

TEST_CASE("zero-rate lattice converges to the undiscounted closed form") {
  // with r = 0 early exercise of the put is worthless, so the American and
  // European prices coincide
  const double bs = oracle::black_scholes_put(100.0, 95.0, 0.0, 0.25, 2.0);
  const double tree = oracle::crr_put_price(100.0, 95.0, 0.0, 0.25, 2.0, 4000);
  CHECK(tree == doctest::Approx(bs).epsilon(2e-4));
}

TEST_CASE("lattice reproduces the standard benchmark figure") {
  // a much-tabulated configuration: S0=K=100, r=5%, vol=20%, one year; the
  // converged value is ~6.0904, and 5000 steps lands within a few parts in 1e4
  const double tree = oracle::crr_put_price(100.0, 100.0, 0.05, 0.2, 1.0, 5000);
  CHECK(tree == doctest::Approx(6.0902).epsilon(2e-4));
}

TEST_CASE("lattice boundary sits below the strike and rises toward expiry") {
  const auto b = oracle::crr_put_boundary(100.0, 100.0, 0.05, 0.2, 1.0, 2000);
  REQUIRE(b.times.size() == b.critical.size());
  REQUIRE(b.times.size() == 2000);
  // the first levels hold too few nodes to reach the exercise region and keep
  // the no-exercise sentinel; away from them the boundary is a real price
  for (std::size_t k = 200; k < b.times.size(); ++k) {
    CHECK(b.critical[k] > 60.0);
    CHECK(b.critical[k] < 100.0);
  }
  // rises toward expiry (compare well-separated levels; adjacent ones wobble)
  CHECK(b.critical[1800] > b.critical[200] + 5.0);
  CHECK(b.critical[1000] > b.critical[200]);
}

TEST_CASE("gaussian tail function") {
  CHECK(oracle::norm_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(oracle::norm_cdf(1.959963984540054) ==
        doctest::Approx(0.975).epsilon(1e-12));
  CHECK(oracle::norm_cdf(-8.0) < 1e-14);
}

TEST_CASE("perpetual threshold and value") {
  // K=100, r=0.05, vol=0.2: gamma = 2r/vol^2 = 2.5, b* = K*gamma/(1+gamma)
  const double b = oracle::perpetual_put_threshold(100.0, 0.05, 0.2);
  CHECK(b == doctest::Approx(100.0 * 2.5 / 3.5).epsilon(1e-12));

  // value is continuous across the threshold and solves the smooth fit
  const double at = oracle::perpetual_put_value(b, 100.0, 0.05, 0.2);
  CHECK(at == doctest::Approx(100.0 - b).epsilon(1e-9));
  const double above = oracle::perpetual_put_value(b + 1e-7, 100.0, 0.05, 0.2);
  CHECK(above == doctest::Approx(100.0 - b).epsilon(1e-5));
  // decreasing in the spot
  CHECK(oracle::perpetual_put_value(120.0, 100.0, 0.05, 0.2) <
        oracle::perpetual_put_value(110.0, 100.0, 0.05, 0.2));
}

TEST_CASE("quadrature rules hit their degrees of exactness") {
  const auto cube = [](double x) { return x * x * x; };
  // composite Simpson is exact for cubics
  CHECK(oracle::simpson(cube, 0.0, 2.0, 10) == doctest::Approx(4.0).epsilon(1e-14));
  // trapezoid error for x^3 on [0,2] with n panels is h^2/4 * integral''...
  const double trap = oracle::trapezoid(cube, 0.0, 2.0, 1000);
  CHECK(trap == doctest::Approx(4.0).epsilon(1e-5));
  const double exp_int = oracle::simpson(
      [](double s) { return std::exp(-0.1 * s) * (1.0 - 0.1 * s); }, 0.0, 1.0,
      200);
  // d/ds (s e^{-0.1 s}) integrates to e^{-0.1} exactly
  CHECK(exp_int == doctest::Approx(std::exp(-0.1)).epsilon(1e-10));
}

}  // TEST_SUITE
