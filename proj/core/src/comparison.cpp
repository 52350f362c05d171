#include "itokit/comparison.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "itokit/rng.hpp"

namespace itokit {

namespace {

constexpr std::uint64_t kFnvBasis = 0xcbf29ce484222325ULL;

std::string format_sample(double t, double y, double lo_val, double hi_val) {
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "drifts out of order at t=%.6g, y=%.6g: eta1=%.12g > eta2=%.12g",
                t, y, lo_val, hi_val);
  return buf;
}

void check_grid(std::span<const double> grid) {
  if (grid.size() < 2)
    throw ConfigError("comparison", "grid needs at least two points");
  for (std::size_t k = 1; k < grid.size(); ++k)
    if (!(grid[k] > grid[k - 1]))
      throw ConfigError("comparison", "grid times must be strictly increasing");
}

// Grid with the jump times of C inserted (exact-value dedup).
std::vector<double> merge_jump_times(std::span<const double> grid,
                                     const ScalarBV& c) {
  std::vector<double> merged(grid.begin(), grid.end());
  for (const auto& [time, delta] : c.jumps) {
    (void)delta;
    if (time <= grid.front() || time > grid.back())
      throw ConfigError("comparison", "BV jump time outside the grid span");
    merged.push_back(time);
  }
  std::sort(merged.begin(), merged.end());
  merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
  return merged;
}

// Per-step increments of C on the merged grid; the jump at a grid time lands
// in the step that ends there, matching the cadlag convention of the path
// integrator.
std::vector<double> bv_increments(std::span<const double> merged,
                                  const ScalarBV& c) {
  std::vector<double> dc(merged.size() - 1, 0.0);
  if (c.rate)
    for (std::size_t k = 0; k + 1 < merged.size(); ++k)
      dc[k] = c.rate(merged[k]) * (merged[k + 1] - merged[k]);
  for (const auto& [time, delta] : c.jumps) {
    const auto it = std::lower_bound(merged.begin(), merged.end(), time);
    dc[static_cast<std::size_t>(it - merged.begin()) - 1] += delta;
  }
  return dc;
}

}  // namespace

double Modulus::operator()(double u) const {
  switch (kind) {
    case Kind::Linear:
      return scale * u;
    case Kind::SquareRoot:
      return scale * std::sqrt(u);
    case Kind::Holder:
      return scale * std::pow(u, exponent);
    case Kind::Custom:
      return custom(u);
  }
  return 0.0;
}

std::optional<bool> Modulus::divergent_reciprocal_square() const {
  switch (kind) {
    case Kind::Linear:
    case Kind::SquareRoot:
      return true;
    case Kind::Holder:
      return exponent >= 0.5;
    case Kind::Custom:
      return std::nullopt;
  }
  return std::nullopt;
}

void ComparisonInstance::validate() const {
  if (!eta1 || !eta2 || !theta)
    throw ConfigError("comparison", "missing drift or diffusion callback");
  if (!(y0_1 <= y0_2))
    throw ConfigError("comparison", "initial values out of order");
  if (lipschitz_leg < 0 || lipschitz_leg > 2)
    throw ConfigError("comparison", "lipschitz_leg must be 0, 1 or 2");
  if (lipschitz_leg != 0 && !(lipschitz_k >= 0.0))
    throw ConfigError("comparison", "declared Lipschitz constant must be >= 0");
  if (h_modulus.kind == Modulus::Kind::Custom && !h_modulus.custom)
    throw ConfigError("comparison", "custom modulus needs a callback");
  if (h_modulus.kind == Modulus::Kind::Holder && !(h_modulus.exponent > 0.0))
    throw ConfigError("comparison", "Holder exponent must be positive");
  for (std::size_t j = 1; j < c.jumps.size(); ++j)
    if (!(c.jumps[j].first > c.jumps[j - 1].first))
      throw ConfigError("comparison", "BV jump times must be strictly increasing");
  if (aux.has_value()) {
    aux->validate();
    if (static_cast<int>(aux_x0.size()) != aux->dim)
      throw ConfigError("comparison", "auxiliary initial state has wrong dimension");
  } else if (!aux_x0.empty()) {
    throw ConfigError("comparison", "auxiliary state given without dynamics");
  }
}

ComparisonReport compare_paths(const ComparisonInstance& inst,
                               std::span<const double> grid,
                               std::size_t n_paths, std::uint64_t master_seed,
                               int threads) {
  inst.validate();
  check_grid(grid);
  if (n_paths == 0) throw ConfigError("comparison", "need at least one path");

  const std::vector<double> merged = merge_jump_times(grid, inst.c);
  const std::vector<double> dc = bv_increments(merged, inst.c);
  const std::size_t steps = merged.size() - 1;
  double dt_max = 0.0;
  for (std::size_t k = 0; k < steps; ++k)
    dt_max = std::max(dt_max, merged[k + 1] - merged[k]);

  std::vector<double> path_max_theta(n_paths, 0.0);
  std::vector<std::vector<double>> path_gaps(n_paths);
  std::vector<std::uint64_t> path_hash1(n_paths), path_hash2(n_paths);
  const BVDriverSpec no_driver;

  parallel_for(n_paths, threads, [&](std::size_t i) {
    Rng rng(mix_seed(master_seed, 2 * i));
    PathRecord aux_path;
    if (inst.aux)
      aux_path = simulate_path(*inst.aux, no_driver,
                               {inst.aux_x0.data(), inst.aux_x0.size()}, merged,
                               mix_seed(master_seed, 2 * i + 1));
    double y1 = inst.y0_1;
    double y2 = inst.y0_2;
    std::uint64_t h1 = kFnvBasis, h2 = kFnvBasis;
    double max_theta = 0.0;

    for (std::size_t k = 0; k < steps; ++k) {
      const double t = merged[k];
      const double dt = merged[k + 1] - merged[k];
      const double db = std::sqrt(dt) * rng.gaussian();
      const std::span<const double> aux =
          inst.aux ? aux_path.state(k) : std::span<const double>{};

      const double e11 = inst.eta1(t, y1, aux);
      const double e21 = inst.eta2(t, y1, aux);
      const double e12 = inst.eta1(t, y2, aux);
      const double e22 = inst.eta2(t, y2, aux);
      const double order_slack =
          1e-12 * (1.0 + std::max(std::abs(e11), std::abs(e22)));
      if (e11 > e21 + order_slack)
        throw ConfigError("comparison", format_sample(t, y1, e11, e21));
      if (e12 > e22 + order_slack)
        throw ConfigError("comparison", format_sample(t, y2, e12, e22));

      const double a1 = inst.full_truncation ? std::max(y1, 0.0) : y1;
      const double a2 = inst.full_truncation ? std::max(y2, 0.0) : y2;
      const double th1 = inst.theta(t, a1, aux);
      const double th2 = inst.theta(t, a2, aux);
      max_theta = std::max({max_theta, std::abs(th1), std::abs(th2)});

      y1 += e11 * dt + th1 * db + dc[k];
      h1 = fnv1a_append(h1, db);
      h1 = fnv1a_append(h1, dc[k]);
      y2 += e22 * dt + th2 * db + dc[k];
      h2 = fnv1a_append(h2, db);
      h2 = fnv1a_append(h2, dc[k]);
      if (!std::isfinite(y1) || !std::isfinite(y2))
        throw NumericError("comparison", "coupled solution blew up");

      const double gap = y1 - y2;
      if (gap > 0.0) path_gaps[i].push_back(gap);
    }
    path_max_theta[i] = max_theta;
    path_hash1[i] = h1;
    path_hash2[i] = h2;
  });

  ComparisonReport report;
  report.n_paths = n_paths;
  report.n_points = n_paths * steps;
  report.dt_max = dt_max;
  for (double mt : path_max_theta) report.max_theta = std::max(report.max_theta, mt);
  report.tol_ord = 10.0 * std::sqrt(dt_max) * report.max_theta;
  for (const auto& gaps : path_gaps)
    for (double g : gaps) {
      report.worst_violation = std::max(report.worst_violation, g);
      if (g > report.tol_ord) ++report.violations;
    }
  report.ordering_fraction =
      1.0 - static_cast<double>(report.violations) /
                static_cast<double>(report.n_points);
  std::uint64_t c1 = kFnvBasis, c2 = kFnvBasis;
  for (std::size_t i = 0; i < n_paths; ++i) {
    c1 = fnv1a(&path_hash1[i], sizeof(std::uint64_t), c1);
    c2 = fnv1a(&path_hash2[i], sizeof(std::uint64_t), c2);
  }
  report.noise_hash_leg1 = c1;
  report.noise_hash_leg2 = c2;
  report.coupled = c1 == c2;
  return report;
}

std::vector<ComparisonReport> compare_refinement(const ComparisonInstance& inst,
                                                 double t0, double t1,
                                                 std::size_t base_steps,
                                                 int levels,
                                                 std::size_t n_paths,
                                                 std::uint64_t master_seed,
                                                 int threads) {
  if (levels < 1) throw ConfigError("comparison", "need at least one level");
  std::vector<ComparisonReport> out;
  out.reserve(static_cast<std::size_t>(levels));
  for (int j = 0; j < levels; ++j) {
    const std::size_t steps = base_steps << j;
    const std::vector<double> grid = uniform_grid(t0, t1, steps);
    out.push_back(compare_paths(inst, grid, n_paths, master_seed, threads));
  }
  return out;
}

CoefficientReport check_coefficient_conditions(const ComparisonInstance& inst,
                                               const Box& box,
                                               std::size_t n_samples,
                                               std::uint64_t seed) {
  inst.validate();
  const int aux_dim = inst.aux ? inst.aux->dim : 0;
  if (box.dim() != 1 + aux_dim)
    throw ConfigError("comparison",
                      "sample box must cover y plus the auxiliary coordinates");

  CoefficientReport report;
  report.lipschitz_declared = inst.lipschitz_leg != 0;
  if (!report.lipschitz_declared)
    report.notes.push_back("no drift declared Lipschitz; ordering not certified");

  Rng rng(seed);
  constexpr int kMaxAux = 8;
  double aux_buf[kMaxAux];
  double lip_excess = -std::numeric_limits<double>::infinity();
  double mod_excess = -std::numeric_limits<double>::infinity();
  bool lip_ok = true, mod_ok = true;

  for (std::size_t s = 0; s < n_samples; ++s) {
    const double t = box.t_lo + (box.t_hi - box.t_lo) * rng.uniform();
    const double y = box.lo[0] + (box.hi[0] - box.lo[0]) * rng.uniform();
    const double yp = box.lo[0] + (box.hi[0] - box.lo[0]) * rng.uniform();
    for (int k = 0; k < aux_dim; ++k)
      aux_buf[k] = box.lo[k + 1] + (box.hi[k + 1] - box.lo[k + 1]) * rng.uniform();
    const std::span<const double> aux{aux_buf, static_cast<std::size_t>(aux_dim)};
    const double dy = std::abs(y - yp);

    if (report.lipschitz_declared) {
      const LegFn& eta = inst.lipschitz_leg == 1 ? inst.eta1 : inst.eta2;
      const double d = std::abs(eta(t, y, aux) - eta(t, yp, aux));
      const double excess = d - inst.lipschitz_k * dy;
      lip_excess = std::max(lip_excess, excess);
      if (excess > 1e-9 * (1.0 + d)) lip_ok = false;
    }
    const double dth = std::abs(inst.theta(t, y, aux) - inst.theta(t, yp, aux));
    const double excess = dth - inst.h_modulus(dy);
    mod_excess = std::max(mod_excess, excess);
    if (excess > 1e-9 * (1.0 + dth)) mod_ok = false;
  }

  report.lipschitz_ok = report.lipschitz_declared && lip_ok;
  report.worst_lipschitz_excess =
      std::isfinite(lip_excess) ? lip_excess : 0.0;
  report.modulus_ok = mod_ok;
  report.worst_modulus_excess = std::isfinite(mod_excess) ? mod_excess : 0.0;
  report.divergence = inst.h_modulus.divergent_reciprocal_square();
  if (!report.divergence.has_value())
    report.notes.push_back("modulus divergence unverifiable for a custom modulus");
  else if (!*report.divergence)
    report.notes.push_back("reciprocal-square integral of the modulus converges");
  if (!mod_ok) report.notes.push_back("diffusion increment exceeded the modulus");
  if (report.lipschitz_declared && !lip_ok)
    report.notes.push_back("declared Lipschitz bound violated");
  report.pass = report.lipschitz_ok && report.modulus_ok &&
                report.divergence.value_or(false);
  return report;
}

ShiftInvarianceReport shift_invariance_check(const ComparisonInstance& inst,
                                             std::span<const double> grid,
                                             std::size_t n_paths,
                                             std::uint64_t master_seed) {
  inst.validate();
  check_grid(grid);
  const std::vector<double> merged = merge_jump_times(grid, inst.c);
  const std::vector<double> dc = bv_increments(merged, inst.c);
  const std::size_t steps = merged.size() - 1;
  std::vector<double> c_cum(merged.size(), 0.0);
  for (std::size_t k = 0; k < steps; ++k) c_cum[k + 1] = c_cum[k] + dc[k];

  const BVDriverSpec no_driver;
  ShiftInvarianceReport report;
  double y_scale = 1.0;

  for (std::size_t i = 0; i < n_paths; ++i) {
    Rng rng(mix_seed(master_seed, 2 * i));
    std::vector<double> db(steps);
    for (std::size_t k = 0; k < steps; ++k)
      db[k] = std::sqrt(merged[k + 1] - merged[k]) * rng.gaussian();
    PathRecord aux_path;
    if (inst.aux)
      aux_path = simulate_path(*inst.aux, no_driver,
                               {inst.aux_x0.data(), inst.aux_x0.size()}, merged,
                               mix_seed(master_seed, 2 * i + 1));

    for (int leg = 1; leg <= 2; ++leg) {
      const LegFn& eta = leg == 1 ? inst.eta1 : inst.eta2;
      double y = leg == 1 ? inst.y0_1 : inst.y0_2;
      double ybar = y;
      for (std::size_t k = 0; k < steps; ++k) {
        const double t = merged[k];
        const double dt = merged[k + 1] - merged[k];
        const std::span<const double> aux =
            inst.aux ? aux_path.state(k) : std::span<const double>{};
        auto trunc = [&](double v) {
          return inst.full_truncation ? std::max(v, 0.0) : v;
        };
        y += eta(t, y, aux) * dt + inst.theta(t, trunc(y), aux) * db[k] + dc[k];
        const double arg = ybar + c_cum[k];
        ybar += eta(t, arg, aux) * dt + inst.theta(t, trunc(arg), aux) * db[k];
        if (!std::isfinite(y) || !std::isfinite(ybar))
          throw NumericError("comparison", "solution blew up");
        y_scale = std::max(y_scale, std::abs(y));
        report.max_abs_diff =
            std::max(report.max_abs_diff, std::abs(y - (ybar + c_cum[k + 1])));
      }
    }
  }
  report.tolerance = 1e-9 * y_scale;
  report.pass = report.max_abs_diff <= report.tolerance;
  return report;
}

}  // namespace itokit
