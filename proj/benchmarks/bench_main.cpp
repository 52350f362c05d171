#include <benchmark/benchmark.h>

#include <vector>

#include "itokit/builtins.hpp"
#include "itokit/comparison.hpp"
#include "itokit/ito.hpp"
#include "itokit/mollify.hpp"
#include "itokit/sde.hpp"
#include "itokit/stopping.hpp"

using namespace itokit;

namespace {

void BM_SimulatePath(benchmark::State& state) {
  const DiffusionSpec spec = make_dynamics("cir");
  const std::vector<double> x0 = {0.25};
  const auto grid = uniform_grid(0.0, 1.0, static_cast<std::size_t>(state.range(0)));
  std::uint64_t seed = 1;
  for (auto _ : state) {
    const PathRecord p = simulate_path(spec, {}, x0, grid, seed++);
    benchmark::DoNotOptimize(p.states.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SimulatePath)->Arg(1000)->Arg(4000);

void BM_AssembleLedger(benchmark::State& state) {
  const TestFunction f = make_test_function("x32-boundary");
  const DiffusionSpec spec = make_dynamics("cir");
  const MonotoneSurface surface = make_surface("zero-boundary");
  const std::vector<double> x0 = {0.25};
  const auto grid = uniform_grid(0.0, 1.0, static_cast<std::size_t>(state.range(0)));
  const PathRecord path = simulate_path(spec, {}, x0, grid, 7);
  for (auto _ : state) {
    const ItoLedger ledger = assemble_ledger(f, surface, path, spec);
    benchmark::DoNotOptimize(ledger.residual);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_AssembleLedger)->Arg(1000)->Arg(4000);

void BM_FaceDifference(benchmark::State& state) {
  const TestFunction f = make_test_function("smooth-2d");
  MollifierConfig cfg;
  cfg.n = static_cast<int>(state.range(0));
  const std::vector<double> x = {0.7, 0.4};
  for (auto _ : state)
    benchmark::DoNotOptimize(mollify_hess(f, cfg, 0.3, x, 0, 1));
}
BENCHMARK(BM_FaceDifference)->Arg(8)->Arg(64);

void BM_TraceScan(benchmark::State& state) {
  const TestFunction f = make_test_function("x32-boundary");
  const DiffusionSpec spec = make_dynamics("unit-sqrt");
  Box box;
  box.lo = {0.0};
  box.hi = {2.0};
  LScanConfig cfg;
  cfg.n_values = {static_cast<int>(state.range(0))};
  cfg.grid_per_axis = 201;
  for (auto _ : state) {
    const LScanReport rep = scan_l_bound(f, spec, box, cfg);
    benchmark::DoNotOptimize(rep.max_over_n);
  }
}
BENCHMARK(BM_TraceScan)->Arg(16)->Arg(64);

void BM_SolveValue(benchmark::State& state) {
  const StoppingProblem p = make_stopping_problem("american-put");
  SolveGrid grid;
  grid.box.lo = {40.0};
  grid.box.hi = {160.0};
  grid.nx = static_cast<int>(state.range(0));
  grid.nt = static_cast<int>(state.range(0));
  for (auto _ : state) {
    const ValueField f = solve_value(p, grid);
    benchmark::DoNotOptimize(f.u.data());
  }
}
BENCHMARK(BM_SolveValue)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_ComparePaths(benchmark::State& state) {
  const ComparisonInstance inst = make_comparison_instance("cir-ordered-drifts");
  const auto grid = uniform_grid(0.0, 1.0, 1000);
  for (auto _ : state) {
    const ComparisonReport rep =
        compare_paths(inst, grid, static_cast<std::size_t>(state.range(0)), 3);
    benchmark::DoNotOptimize(rep.ordering_fraction);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 1000);
}
BENCHMARK(BM_ComparePaths)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
