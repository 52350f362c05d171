// Acceptance gate: nine end-to-end checks, one line of output each.  Every
// tolerance is pinned here, next to the check that uses it.  Exit status is
// the number of failed checks; pass a list of numbers to run a subset.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "itokit/builtins.hpp"
#include "itokit/comparison.hpp"
#include "itokit/csv.hpp"
#include "itokit/ito.hpp"
#include "itokit/mollify.hpp"
#include "itokit/rng.hpp"
#include "itokit/scenario.hpp"
#include "itokit/sde.hpp"
#include "itokit/stopping.hpp"
#include "oracles.hpp"

using namespace itokit;
namespace fs = std::filesystem;

namespace {

constexpr int kThreads = 4;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, double a, double b) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), pattern, a, b);
  return buf;
}

// 1. Smooth-field ledger residual: quadratic field along driftless unit noise
//    must reproduce the classical change-of-variable bookkeeping at 10^4
//    paths and step 1e-3.
Outcome smooth_field_residual() {
  const TestFunction f = make_test_function("quadratic");
  const DiffusionSpec spec = make_dynamics("standard-bm");
  const std::vector<double> x0 = {0.0};
  const std::vector<double> dts = {1e-3};
  const ResidualStudy study = residual_study(
      f, open_surface(1), spec, {}, x0, 1.0, dts, 10000, 20240901, 1e-8, kThreads);
  const MeanStats& r = study.levels.back().residuals;
  const bool centered = std::abs(r.mean) <= 3.0 * r.stderr_mean;
  const bool small = r.mean_abs < 5e-2;
  return {centered && small,
          fmt("mean=%.3e (3se cap), mean|res|=%.3e (cap 5e-2)", r.mean, r.mean_abs)};
}

// 2. Boundary-singular field: x^{3/2} above a flat threshold along
//    mean-reverting square-root dynamics; the residual ladder must shrink
//    monotonically and end centered.
Outcome singular_field_ladder() {
  const TestFunction f = make_test_function("x32-boundary");
  const DiffusionSpec spec = make_dynamics("cir");
  const std::vector<double> x0 = {0.25};
  const std::vector<double> dts = {4e-3, 2e-3, 1e-3};
  const ResidualStudy study =
      residual_study(f, make_surface("zero-boundary"), spec, {}, x0, 1.0, dts,
                     10000, 20240902, 1e-8, kThreads);
  bool decreasing = true;
  for (std::size_t j = 1; j < study.levels.size(); ++j)
    decreasing = decreasing && study.levels[j].residuals.mean_abs <
                                   study.levels[j - 1].residuals.mean_abs;
  const MeanStats& last = study.levels.back().residuals;
  const bool centered = std::abs(last.mean) <= 3.0 * last.stderr_mean;
  return {decreasing && centered,
          fmt("mean|res| %.3e -> %.3e strictly decreasing, final centered",
              study.levels.front().residuals.mean_abs, last.mean_abs)};
}

// 3. n-uniform bound on the smoothed second-order trace for the same field
//    with linear diffusion trace on [0, 2].
Outcome trace_bound_scan() {
  const double cap = 1.2 * 0.75 * std::sqrt(2.0);  // 1.2x the analytic sup
  const TestFunction f = make_test_function("x32-boundary");
  const DiffusionSpec spec = make_dynamics("unit-sqrt");
  Box box;
  box.lo = {0.0};
  box.hi = {2.0};
  LScanConfig cfg;  // n in {4, 8, 16, 32, 64}
  const LScanReport rep = scan_l_bound(f, spec, box, cfg, kThreads);
  bool under_cap = true;
  for (const auto& e : rep.entries) under_cap = under_cap && e.max_abs <= cap;
  const bool flat = rep.last_over_median <= 1.1;
  return {under_cap && flat,
          fmt("max over n = %.6f (cap %.6f), last/median within 1.1", rep.max_over_n,
              cap)};
}

// 4. Smoothing quality: cube averages reproduce degree-<=3 polynomials to
//    1e-12 relative, and the sampled value+gradient error shrinks every time
//    n doubles, for every bundled continuously-differentiable field.
Outcome mollifier_quality() {
  const std::vector<int> ladder = {4, 8, 16, 32, 64};

  // exactness on the polynomial fields, against an independent quadrature
  for (const char* name : {"quadratic", "cubic-poly", "cubic-2d"}) {
    const TestFunction f = make_test_function(name);
    Rng rng(77);
    for (int s = 0; s < 10; ++s) {
      const double t = rng.uniform();
      std::vector<double> x(static_cast<std::size_t>(f.dim));
      for (auto& c : x) c = 0.2 + 1.6 * rng.uniform();
      MollifierConfig cfg;
      cfg.n = (s % 2 == 0) ? 8 : 16;
      const double h = 1.0 / cfg.n;
      double ref = 0.0;
      if (f.dim == 1) {
        ref = oracle::simpson(
                  [&](double y) {
                    const std::vector<double> p = {y};
                    return f.value(t, p);
                  },
                  x[0], x[0] + h, 16) /
              h;
      } else {
        ref = oracle::simpson(
                  [&](double y) {
                    return oracle::simpson(
                        [&](double z) {
                          const std::vector<double> p = {y, z};
                          return f.value(t, p);
                        },
                        x[1], x[1] + h, 16);
                  },
                  x[0], x[0] + h, 16) /
              (h * h);
      }
      const double got = mollify_value(f, cfg, t, x);
      if (std::abs(got - ref) > 1e-12 * std::max(1.0, std::abs(ref)))
        return {false, "polynomial cube average off beyond 1e-12 relative (" +
                           std::string(name) + ")"};
    }
  }

  // convergence under n-doubling for every bundled C1 field
  for (const std::string& name : c1_test_function_names()) {
    const TestFunction f = make_test_function(name);
    Rng rng(1234);
    std::vector<std::vector<double>> pts;
    std::vector<double> ts;
    for (int s = 0; s < 40; ++s) {
      std::vector<double> x(static_cast<std::size_t>(f.dim));
      for (auto& c : x) c = 0.2 + 1.6 * rng.uniform();
      pts.push_back(std::move(x));
      ts.push_back(rng.uniform());
    }
    double prev = -1.0;
    for (int n : ladder) {
      MollifierConfig cfg;
      cfg.n = n;
      double err = 0.0;
      for (std::size_t s = 0; s < pts.size(); ++s) {
        const auto& x = pts[s];
        const double t = ts[s];
        err = std::max(err, std::abs(mollify_value(f, cfg, t, x) - f.value(t, x)));
        const MollifiedGradient g = mollify_grad(f, cfg, t, x);
        double sum = std::abs(g.dt - f.dt(t, x));
        for (int i = 0; i < f.dim; ++i)
          sum = std::max(sum, std::abs(g.dx[static_cast<std::size_t>(i)] -
                                       f.dx[static_cast<std::size_t>(i)](t, x)));
        err += sum;  // combined value + first-derivative sup
      }
      if (prev >= 0.0 && !(err < prev))
        return {false, "error did not shrink on n-doubling (" + name + ")"};
      prev = err;
    }
  }
  return {true, "degree-<=3 exact to 1e-12; errors shrink at every doubling"};
}

// 5. The two bookkeepings of the jump contribution agree to 1e-12 relative on
//    100 random jump-laden paths.
Outcome jump_bookkeeping() {
  const TestFunction f = make_test_function("cubic-poly");
  DiffusionSpec spec = make_dynamics("standard-bm");
  spec.bv_loading = [](double, std::span<const double>, std::span<double> out) {
    out[0] = 1.0;
  };
  const auto grid = uniform_grid(0.0, 1.0, 200);
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    Rng rng(900 + s);
    BVDriverSpec driver;
    driver.mode = BVDriverSpec::Mode::Schedule;
    std::vector<double> times;
    for (int j = 0; j < 3; ++j) times.push_back(0.05 + 0.9 * rng.uniform());
    std::sort(times.begin(), times.end());
    for (double tj : times) {
      const double delta = (rng.uniform() < 0.5 ? -1.0 : 1.0) *
                           (0.2 + 0.8 * rng.uniform());
      driver.jumps.push_back({tj, {delta}});
    }
    const std::vector<double> x0 = {0.3};
    const PathRecord path = simulate_path(spec, driver, x0, grid, 7000 + s);
    const JumpEquivalenceReport rep = jump_equivalence_check(f, path, spec);
    worst = std::max(worst, rep.rearrangement);
    if (!rep.pass || rep.rearrangement > 1e-12)
      return {false, fmt("rearrangement gap %.3e at path %g", rep.rearrangement,
                         static_cast<double>(s))};
  }
  return {true, fmt("worst relative gap %.3e over 100 paths (cap 1e-12)", worst, 0.0)};
}

// 6. Coupled ordered-drift pair: full ordering at 10^3 paths and a worst
//    violation that shrinks when the step halves.
Outcome coupled_ordering() {
  const ComparisonInstance inst = make_comparison_instance("cir-ordered-drifts");
  const auto reports = compare_refinement(inst, 0.0, 1.0, 250, 3, 1000,
                                          20240906, kThreads);
  bool ordered = true;
  for (const auto& r : reports)
    ordered = ordered && r.violations == 0 && r.ordering_fraction == 1.0 && r.coupled;
  bool shrinking = true;
  for (std::size_t j = 1; j < reports.size(); ++j) {
    const double prev = reports[j - 1].worst_violation;
    const double cur = reports[j].worst_violation;
    shrinking = shrinking && (cur < prev || (cur == 0.0 && prev == 0.0));
  }
  return {ordered && shrinking,
          fmt("ordering 100%% at all levels; worst gap %.3e -> %.3e",
              reports.front().worst_violation, reports.back().worst_violation)};
}

// 7. Early-exercise cross-validation: value within 0.5% of a 5000-step
//    lattice, extracted boundary monotone within one cell, and the shape
//    audit predicting exactly that direction.
Outcome early_exercise_cross_validation() {
  const StoppingProblem p = make_stopping_problem("american-put");
  SolveGrid grid;
  grid.box.lo = {40.0};
  grid.box.hi = {160.0};
  grid.nx = 200;
  grid.nt = 200;
  const ValueField field = solve_value(p, grid);
  const std::vector<double> spot = {100.0};
  const double pde = field.value_at(0.0, spot);
  const double tree = oracle::crr_put_price(100.0, 100.0, 0.05, 0.2, 1.0, 5000);
  const bool value_ok = std::abs(pde - tree) <= 0.005 * tree;

  const BoundaryTable table = extract_boundary_table(field);
  const double cell = (160.0 - 40.0) / (grid.nx - 1);
  bool monotone = true;
  for (std::size_t l = 0; l + 1 < table.t_nodes.size(); ++l)
    monotone = monotone && table.values[l + 1] >= table.values[l] - cell;

  Box box;
  box.t_lo = 0.0;
  box.t_hi = 1.0;
  box.lo = {40.0};
  box.hi = {160.0};
  const MonotonicityCheck mc = check_monotonicity_conditions(p, box, 300, 11);
  const bool predicted = mc.applicable && mc.time_dir.has_value() &&
                         *mc.time_dir == Direction::NonDecreasing;
  return {value_ok && monotone && predicted,
          fmt("value %.4f vs lattice %.4f (0.5%% cap); boundary monotone and "
              "predicted",
              pde, tree)};
}

// 8. Expected-value identity with a fixed horizon rule: two estimators of the
//    same quantity agree within 3 standard errors at 10^4 paths.
Outcome horizon_identity() {
  const StoppingProblem p = make_stopping_problem("quadratic-gain-bm");
  const std::vector<double> x0 = {0.0};
  const DynkinReport rep =
      dynkin_check(p, std::nullopt, x0, 1e-3, 10000, 20240908, kThreads);
  return {rep.pass, fmt("two-sides gap %.4e vs 3se %.4e", rep.diff_mean,
                        3.0 * rep.diff_stderr)};
}

// 9. Bitwise reproducibility: rerunning from the echoed config reproduces
//    every artifact exactly, for each pipeline exercised here.
Outcome bitwise_reruns() {
  const fs::path root = fs::temp_directory_path() / "itokit-acceptance-rerun";
  fs::remove_all(root);

  const std::vector<nlohmann::json> configs = {
      {{"kind", "simulate"},
       {"dynamics", "standard-bm"},
       {"steps", 32},
       {"n_paths", 2},
       {"seed", 5}},
      {{"kind", "verify-ito"},
       {"function", "quadratic"},
       {"dynamics", "standard-bm"},
       {"dt_values", {0.02, 0.01}},
       {"n_paths", 64},
       {"seed", 6}},
      {{"kind", "scan-L"},
       {"function", "x32-boundary"},
       {"dynamics", "unit-sqrt"},
       {"box", {{"lo", {0.0}}, {"hi", {2.0}}}},
       {"n_values", {4, 8}},
       {"grid_per_axis", 41}},
  };

  for (std::size_t c = 0; c < configs.size(); ++c) {
    const fs::path dir1 = root / ("first-" + std::to_string(c));
    const fs::path dir2 = root / ("second-" + std::to_string(c));
    RunOptions opts1;
    opts1.out_dir = dir1;
    opts1.threads = kThreads;
    const ScenarioResult first =
        run_scenario(resolve_scenario(configs[c], std::nullopt), opts1);
    if (first.exit_code != 0)
      return {false, "pilot run failed: " + first.message};
    RunOptions opts2;
    opts2.out_dir = dir2;
    opts2.threads = 1;  // thread count must not leak into the artifacts
    const ScenarioResult second =
        run_scenario_file(dir1 / "resolved-config.json", opts2);
    if (second.exit_code != 0)
      return {false, "echo rerun failed: " + second.message};

    std::vector<fs::path> names;
    for (const auto& e : fs::directory_iterator(dir1))
      if (e.is_regular_file()) names.push_back(e.path().filename());
    std::sort(names.begin(), names.end());
    for (const auto& name : names) {
      if (!fs::exists(dir2 / name))
        return {false, "missing artifact on rerun: " + name.string()};
      if (hash_file(dir1 / name) != hash_file(dir2 / name))
        return {false, "artifact differs on rerun: " + name.string()};
    }
  }
  return {true, "all artifacts byte-identical across echo reruns"};
}

struct Criterion {
  int number;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "smooth-field ledger residual", smooth_field_residual},
      {2, "boundary-singular residual ladder", singular_field_ladder},
      {3, "n-uniform smoothed-trace bound", trace_bound_scan},
      {4, "mollifier exactness and convergence", mollifier_quality},
      {5, "jump bookkeeping equivalence", jump_bookkeeping},
      {6, "coupled ordering under refinement", coupled_ordering},
      {7, "early-exercise cross-validation", early_exercise_cross_validation},
      {8, "fixed-horizon expectation identity", horizon_identity},
      {9, "bitwise reproducibility", bitwise_reruns},
  };

  std::vector<int> wanted;
  for (int a = 1; a < argc; ++a) wanted.push_back(std::atoi(argv[a]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!wanted.empty() &&
        std::find(wanted.begin(), wanted.end(), c.number) == wanted.end())
      continue;
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%s] %d %s: %s\n", out.pass ? "PASS" : "FAIL", c.number,
                c.name, out.detail.c_str());
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  return failures;
}
