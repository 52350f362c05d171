#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "itokit/builtins.hpp"
#include "oracles.hpp"

using namespace itokit;

TEST_SUITE("builtins") {

TEST_CASE("registry is sorted, unique and fully constructible") {
  const auto all = list_builtins();
  REQUIRE(!all.empty());

  const std::set<std::string> kinds = {
      "test-function", "dynamics",           "surface",
      "stopping-problem", "comparison-instance", "modulus"};

  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto& e = all[i];
    CHECK(kinds.count(e.kind) == 1);
    CHECK(!e.name.empty());
    CHECK(!e.summary.empty());
    CHECK(seen.insert({e.kind, e.name}).second);
    if (i > 0)
      CHECK(std::pair(all[i - 1].kind, all[i - 1].name) <=
            std::pair(e.kind, e.name));

    // every listed entry must construct and validate
    if (e.kind == "test-function")
      make_test_function(e.name).validate();
    else if (e.kind == "dynamics")
      make_dynamics(e.name).validate();
    else if (e.kind == "surface")
      make_surface(e.name).validate();
    else if (e.kind == "stopping-problem")
      make_stopping_problem(e.name).validate();
    else if (e.kind == "comparison-instance")
      make_comparison_instance(e.name).validate();
    else if (e.kind == "modulus")
      make_modulus(e.name, 1.0, 0.7);  // exponent only used by the Holder kind
  }
}

TEST_CASE("unknown names are refused by every factory") {
  CHECK_THROWS_AS(make_test_function("no-such-thing"), ConfigError);
  CHECK_THROWS_AS(make_dynamics("no-such-thing"), ConfigError);
  CHECK_THROWS_AS(make_surface("no-such-thing"), ConfigError);
  CHECK_THROWS_AS(make_stopping_problem("no-such-thing"), ConfigError);
  CHECK_THROWS_AS(make_comparison_instance("no-such-thing"), ConfigError);
  CHECK_THROWS_AS(make_modulus("no-such-thing"), ConfigError);
}

TEST_CASE("declared derivatives agree with finite differences") {
  for (const std::string& name : c1_test_function_names()) {
    CAPTURE(name);
    const TestFunction f = make_test_function(name);
    Box box;
    box.t_lo = 0.0;
    box.t_hi = 1.0;
    // stay on the positive side, away from the kinks at zero
    box.lo.assign(static_cast<std::size_t>(f.dim), 0.2);
    box.hi.assign(static_cast<std::size_t>(f.dim), 2.0);
    CHECK(verify_derivatives(f, box, 100, 1234).pass);
  }
}

TEST_CASE("square-root dynamics carry exactly the linear diffusion trace") {
  const DiffusionSpec spec = make_dynamics("unit-sqrt");
  double beta = 0.0;
  const std::vector<double> pos = {0.7};
  spec.eval_beta(0.0, pos, {&beta, 1});
  CHECK(beta == doctest::Approx(0.7).epsilon(1e-15));
  const std::vector<double> neg = {-1.0};
  spec.eval_beta(0.0, neg, {&beta, 1});
  CHECK(beta == 0.0);
}

TEST_CASE("mean-reverting square-root dynamics") {
  const DiffusionSpec spec = make_dynamics("cir");
  double a = 0.0, s = 0.0;
  const std::vector<double> x = {0.2};
  spec.drift(0.0, x, {&a, 1});
  spec.diffusion(0.0, x, {&s, 1});
  CHECK(a == doctest::Approx(1.0 * (0.5 - 0.2)).epsilon(1e-15));
  CHECK(s == doctest::Approx(0.5 * std::sqrt(0.2)).epsilon(1e-15));
  CHECK(spec.hints.drift_lipschitz);
  CHECK(spec.hints.diffusion_sqrt_modulus);
}

TEST_CASE("geometric dynamics") {
  const DiffusionSpec spec = make_dynamics("gbm");
  double a = 0.0, s = 0.0;
  const std::vector<double> x = {100.0};
  spec.drift(0.0, x, {&a, 1});
  spec.diffusion(0.0, x, {&s, 1});
  CHECK(a == doctest::Approx(5.0));
  CHECK(s == doctest::Approx(20.0));
}

TEST_CASE("put instance wiring") {
  const StoppingProblem p = make_stopping_problem("american-put");
  const std::vector<double> itm = {90.0}, otm = {110.0};
  CHECK(p.gain(0.0, itm) == doctest::Approx(10.0));
  CHECK(p.gain(0.0, otm) == 0.0);
  CHECK(p.discount == doctest::Approx(0.05));
  CHECK(p.horizon == doctest::Approx(1.0));
  CHECK(p.stopping_below);
  CHECK(p.has_gain_gradient());
  CHECK(p.has_gain_hessian());

  // G_t + alpha G_x + (beta/2) G_xx - r G with G linear in the money:
  // 0 + 0.05*90*(-1) + 0 - 0.05*10 = -5
  CHECK(p.h_value(0.0, itm) == doctest::Approx(-5.0).epsilon(1e-12));
  CHECK(p.h_value(0.0, otm) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("quadratic benchmark wiring") {
  const StoppingProblem p = make_stopping_problem("quadratic-gain-bm");
  const std::vector<double> x = {1.5};
  CHECK(p.gain(0.0, x) == doctest::Approx(2.25));
  CHECK(p.discount == doctest::Approx(0.1));
  // G = x^2 under unit-volatility driftless noise: H = 1 - 0.1 x^2
  CHECK(p.h_value(0.0, x) == doctest::Approx(1.0 - 0.1 * 2.25).epsilon(1e-12));
}

TEST_CASE("flat threshold surface") {
  const MonotoneSurface s = make_surface("zero-boundary");
  const std::vector<double> above = {0.5}, below = {-0.5}, on = {0.0};
  CHECK(classify(s, 0.0, above) == Region::Continuation);
  CHECK(classify(s, 0.0, below) == Region::Stopping);
  CHECK(classify(s, 0.0, on) == Region::Stopping);
}

TEST_CASE("modulus factory maps names to kinds") {
  CHECK(make_modulus("linear", 2.0)(1.0) == doctest::Approx(2.0));
  CHECK(make_modulus("square-root", 1.0)(4.0) == doctest::Approx(2.0));
  CHECK(make_modulus("holder", 1.0, 0.5)(0.25) == doctest::Approx(0.5));
}

TEST_CASE("sweep list names only registered functions") {
  const auto names = c1_test_function_names();
  CHECK(!names.empty());
  const auto all = list_builtins();
  for (const auto& n : names) {
    const bool found = std::any_of(all.begin(), all.end(), [&](const auto& e) {
      return e.kind == "test-function" && e.name == n;
    });
    CHECK(found);
  }
}

}  // TEST_SUITE
