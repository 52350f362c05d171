#include <cmath>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "itokit/builtins.hpp"
#include "itokit/csv.hpp"
#include "itokit/ito.hpp"
#include "itokit/rng.hpp"
#include "oracles.hpp"

using namespace itokit;
namespace fs = std::filesystem;

namespace {

DiffusionSpec with_unit_loading(DiffusionSpec spec) {
  spec.bv_loading = [](double, std::span<const double>, std::span<double> out) {
    for (auto& v : out) v = 1.0;
  };
  return spec;
}

BVDriverSpec jump_schedule(std::vector<JumpEvent> jumps) {
  BVDriverSpec d;
  d.mode = BVDriverSpec::Mode::Schedule;
  d.jumps = std::move(jumps);
  return d;
}

}  // namespace

TEST_SUITE("ito") {

TEST_CASE("ledger agrees with the classical bookkeeping on smooth fields") {
  // same residual, different decomposition of the right-hand side
  const TestFunction f = make_test_function("quadratic");
  const DiffusionSpec spec = make_dynamics("standard-bm");
  const MonotoneSurface open = open_surface(1);
  const auto grid = uniform_grid(0.0, 1.0, 500);
  const std::vector<double> x0 = {0.0};

  for (std::uint64_t s = 0; s < 20; ++s) {
    const PathRecord path = simulate_path(spec, {}, x0, grid, mix_seed(12, s));
    const ItoLedger ledger = assemble_ledger(f, open, path, spec);
    const double reference = oracle::classical_ito_residual(f, path, spec);
    CHECK(ledger.residual == doctest::Approx(reference).epsilon(1e-10));
    CHECK(ledger.skipped_steps == 0);
    CHECK(ledger.lhs - ledger.rhs() ==
          doctest::Approx(ledger.residual).epsilon(1e-12));
  }
}

TEST_CASE("pure drift in the first-order term balances exactly") {
  TestFunction f = make_test_function("quadratic");
  DiffusionSpec spec;
  spec.dim = 1;
  spec.drift = [](double, std::span<const double> x, std::span<double> out) {
    out[0] = 0.5 - x[0];
  };
  spec.diffusion = [](double, std::span<const double>, std::span<double> out) {
    out[0] = 0.0;
  };
  const auto grid = uniform_grid(0.0, 1.0, 100);
  const std::vector<double> x0 = {1.0};
  const PathRecord path = simulate_path(spec, {}, x0, grid, 3);
  const ItoLedger ledger = assemble_ledger(f, open_surface(1), path, spec);
  // noiseless quadratic: residual is one-sided quadrature error, order dt
  CHECK(std::abs(ledger.residual) < 2.0 / 100.0);
  CHECK(ledger.term_stoch == 0.0);
  CHECK(ledger.term_jumps == 0.0);
}

TEST_CASE("continuous bounded-variation motion lands in its own term") {
  const TestFunction f = make_test_function("quadratic");
  auto spec = with_unit_loading(make_dynamics("standard-bm"));
  BVDriverSpec driver;
  driver.mode = BVDriverSpec::Mode::Schedule;
  driver.rate = [](double, std::span<const double>, std::span<double> out) {
    out[0] = 1.5;
  };
  const auto grid = uniform_grid(0.0, 1.0, 400);
  const std::vector<double> x0 = {0.0};
  const PathRecord path = simulate_path(spec, driver, x0, grid, 21);
  const ItoLedger ledger = assemble_ledger(f, open_surface(1), path, spec);

  // term_bv = sum 2 X_k * 1.5 dt; recompute directly
  double want = 0.0;
  for (std::size_t k = 0; k < path.steps(); ++k)
    want += 2.0 * path.states[k] * path.bv_cont[k];
  CHECK(ledger.term_bv == doctest::Approx(want).epsilon(1e-12));
  CHECK(std::abs(ledger.residual) < 0.2);
}

TEST_CASE("jumps enter at their left limits") {
  const TestFunction f = make_test_function("quadratic");
  auto spec = with_unit_loading(make_dynamics("standard-bm"));
  spec.diffusion = [](double, std::span<const double>, std::span<double> out) {
    out[0] = 0.0;
  };
  const auto driver = jump_schedule({{0.5, {2.0}}});
  const auto grid = uniform_grid(0.0, 1.0, 10);
  const std::vector<double> x0 = {1.0};
  const PathRecord path = simulate_path(spec, driver, x0, grid, 2);
  const ItoLedger ledger = assemble_ledger(f, open_surface(1), path, spec);
  // X jumps 1 -> 3 at t=0.5 and nothing else moves:
  // value jump (9 - 1) is the whole story
  CHECK(ledger.term_jumps == doctest::Approx(8.0).epsilon(1e-14));
  CHECK(ledger.lhs == doctest::Approx(8.0).epsilon(1e-14));
  CHECK(std::abs(ledger.residual) < 1e-12);
}

TEST_CASE("residual vanishes with the step for jump-laden paths") {
  const TestFunction f = make_test_function("cubic-poly");
  auto spec = with_unit_loading(make_dynamics("standard-bm"));
  const auto driver =
      jump_schedule({{0.21, {0.4}}, {0.5, {-0.7}}, {0.83, {0.25}}});
  const std::vector<double> x0 = {0.2};

  double prev = 1e300;
  for (std::size_t steps : {100, 400, 1600}) {
    const auto grid = uniform_grid(0.0, 1.0, steps);
    double acc = 0.0;
    const std::size_t n = 50;
    for (std::size_t i = 0; i < n; ++i) {
      const PathRecord path =
          simulate_path(spec, driver, x0, grid, mix_seed(77, i));
      acc += std::abs(assemble_ledger(f, open_surface(1), path, spec).residual);
    }
    acc /= n;
    CHECK(acc < prev);
    prev = acc;
  }
  // cubic curvature along 50 paths at dt = 1/1600: O(sqrt(dt)) scale
  CHECK(prev < 0.1);
}

TEST_CASE("both jump bookkeepings agree pathwise") {
  const TestFunction f = make_test_function("cubic-poly");
  auto spec = with_unit_loading(make_dynamics("standard-bm"));
  Rng rng(404);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<JumpEvent> jumps;
    const int n_jumps = 1 + static_cast<int>(rng.uniform() * 4);
    double t = 0.0;
    for (int j = 0; j < n_jumps; ++j) {
      t += 0.05 + 0.8 * rng.uniform() * (1.0 - t);
      if (t >= 1.0) break;
      jumps.push_back({t, {2.0 * rng.uniform() - 1.0}});
    }
    if (jumps.empty()) jumps.push_back({0.5, {0.3}});
    const auto grid = uniform_grid(0.0, 1.0, 200);
    const std::vector<double> x0 = {0.1};
    const PathRecord path = simulate_path(spec, jump_schedule(jumps), x0, grid,
                                          mix_seed(31337, rep));
    const JumpEquivalenceReport rep2 = jump_equivalence_check(f, path, spec);
    CHECK(rep2.pass);
    CHECK(rep2.rearrangement <= 1e-12);
    CHECK(rep2.jumps == path.jumps.size());
  }
}

TEST_CASE("kinked fields stay within the skip budget") {
  const TestFunction f = make_test_function("x32-boundary");
  const MonotoneSurface split = make_surface("zero-boundary");
  const DiffusionSpec spec = make_dynamics("cir");
  const auto grid = uniform_grid(0.0, 1.0, 1000);
  const std::vector<double> x0 = {0.25};
  const PathRecord path = simulate_path(spec, {}, x0, grid, 5);
  const ItoLedger ledger = assemble_ledger(f, split, path, spec, 1e-8, 0.01);
  CHECK(ledger.within_budget);
  CHECK(ledger.skipped_steps <= ledger.steps / 100 + 1);
}

TEST_CASE("residual ladder shrinks and centres for the smooth benchmark") {
  const TestFunction f = make_test_function("quadratic");
  const DiffusionSpec spec = make_dynamics("standard-bm");
  const std::vector<double> x0 = {0.0};
  const std::vector<double> dts = {0.02, 0.01, 0.005};
  const ResidualStudy study = residual_study(f, open_surface(1), spec, {}, x0,
                                             1.0, dts, 400, 2024, 1e-8, 2);
  REQUIRE(study.levels.size() == 3);
  CHECK(study.mean_abs_decreasing);
  CHECK(study.final_mean_within_3se);
  // sum of (dB^2 - dt) has mean-abs ~ sqrt(2 dt * 2/pi)
  const double predicted = std::sqrt(2.0 * 0.005 * 2.0 / M_PI);
  CHECK(study.levels.back().residuals.mean_abs ==
        doctest::Approx(predicted).epsilon(0.2));
  // measured convergence order about one half in dt
  CHECK(study.levels.back().order == doctest::Approx(0.5).epsilon(0.4));
}

TEST_CASE("ledger csv carries one row per path") {
  const TestFunction f = make_test_function("quadratic");
  const DiffusionSpec spec = make_dynamics("standard-bm");
  const auto grid = uniform_grid(0.0, 1.0, 50);
  const std::vector<double> x0 = {0.0};
  std::vector<ItoLedger> ledgers;
  for (int i = 0; i < 5; ++i)
    ledgers.push_back(assemble_ledger(
        f, open_surface(1), simulate_path(spec, {}, x0, grid, mix_seed(9, i)),
        spec));
  const fs::path path = fs::temp_directory_path() / "itokit-ledger.csv";
  write_ledger_csv(ledgers, path);
  const CsvTable t = read_csv(path);
  CHECK(t.rows.size() == 5);
  const int rcol = t.column_index("residual");
  REQUIRE(rcol >= 0);
  for (int i = 0; i < 5; ++i)
    CHECK(t.rows[i][rcol] == ledgers[i].residual);
  fs::remove(path);
}

}  // TEST_SUITE
