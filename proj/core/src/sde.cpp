#include "itokit/sde.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "itokit/csv.hpp"
#include "itokit/rng.hpp"

namespace itokit {

namespace {

constexpr double kBlowupThreshold = 1e30;
// Scheduled jump times closer than this are treated as the same grid node.
constexpr double kTimeTol = 1e-12;

void check_state(std::span<const double> x, double t) {
  for (double v : x) {
    if (!std::isfinite(v) || std::abs(v) > kBlowupThreshold)
      throw NumericError("sde", "state blew up at t=" + format_double(t));
  }
}

}  // namespace

void DiffusionSpec::eval_drift(double t, std::span<const double> x,
                               std::span<double> out) const {
  drift(t, x, out);
}

void DiffusionSpec::eval_diffusion(double t, std::span<const double> x,
                                   std::span<double> out) const {
  diffusion(t, x, out);
}

void DiffusionSpec::eval_bv_loading(double t, std::span<const double> x,
                                    std::span<double> out) const {
  if (bv_loading) {
    bv_loading(t, x, out);
  } else {
    std::fill(out.begin(), out.end(), 0.0);
  }
}

void DiffusionSpec::eval_beta(double t, std::span<const double> x,
                              std::span<double> out) const {
  const int m = dim;
  std::vector<double> sigma(static_cast<std::size_t>(m) * m);
  eval_diffusion(t, x, sigma);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = 0.0;
      for (int k = 0; k < m; ++k) s += sigma[i * m + k] * sigma[j * m + k];
      out[i * m + j] = s;
      out[j * m + i] = s;
    }
  }
}

void DiffusionSpec::validate() const {
  if (dim < 1) throw ConfigError("sde", "dimension must be >= 1");
  if (!drift) throw ConfigError("sde", "drift coefficient is required");
  if (!diffusion) throw ConfigError("sde", "diffusion coefficient is required");
}

void BVDriverSpec::validate(const DiffusionSpec& spec, double t0, double t1) const {
  if (mode == Mode::Zero) return;
  if (!spec.bv_loading)
    throw ConfigError("sde", "driver is active but the dynamics has no bv_loading");
  if (mode == Mode::Schedule) {
    std::vector<double> seen;
    for (const auto& j : jumps) {
      if (static_cast<int>(j.delta.size()) != spec.dim)
        throw ConfigError("sde", "jump delta dimension mismatch");
      if (!(j.time > t0 + kTimeTol) || j.time > t1 + kTimeTol)
        throw ConfigError("sde", "jump times must lie in (t0, t1]");
      for (double s : seen)
        if (std::abs(s - j.time) <= kTimeTol)
          throw ConfigError("sde", "duplicate jump time in schedule");
      seen.push_back(j.time);
    }
  }
  if (mode == Mode::Reflection) {
    if (!reflection) throw ConfigError("sde", "reflection mode without reflection spec");
    if (reflection->coordinate < 0 || reflection->coordinate >= spec.dim)
      throw ConfigError("sde", "reflection coordinate out of range");
    if (reflection->direction != 1 && reflection->direction != -1)
      throw ConfigError("sde", "reflection direction must be +1 or -1");
    if (!std::isfinite(reflection->threshold))
      throw ConfigError("sde", "reflection threshold must be finite");
  }
}

std::span<const double> PathRecord::state_left(std::size_t k) const {
  if (const PathJump* j = jump_at(k)) return {j->state_before.data(), j->state_before.size()};
  return state(k);
}

const PathJump* PathRecord::jump_at(std::size_t k) const {
  auto it = std::lower_bound(jumps.begin(), jumps.end(), k,
                             [](const PathJump& j, std::size_t v) { return j.index < v; });
  if (it != jumps.end() && it->index == k) return &*it;
  return nullptr;
}

std::uint64_t PathRecord::increment_hash() const {
  std::uint64_t h = fnv1a(brownian.data(), brownian.size() * sizeof(double));
  h = fnv1a(bv_cont.data(), bv_cont.size() * sizeof(double), h);
  for (const auto& j : jumps) {
    h = fnv1a(&j.index, sizeof(j.index), h);
    h = fnv1a(j.delta.data(), j.delta.size() * sizeof(double), h);
  }
  return h;
}

std::vector<double> uniform_grid(double t0, double t1, std::size_t steps) {
  if (!(t1 > t0) || steps == 0) throw ConfigError("sde", "grid needs t1 > t0 and steps >= 1");
  std::vector<double> g(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k)
    g[k] = t0 + (t1 - t0) * static_cast<double>(k) / static_cast<double>(steps);
  g.back() = t1;
  return g;
}

std::vector<double> merged_grid(std::span<const double> grid, const BVDriverSpec& driver) {
  std::vector<double> out(grid.begin(), grid.end());
  if (driver.mode == BVDriverSpec::Mode::Schedule) {
    for (const auto& j : driver.jumps) out.push_back(j.time);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end(),
                          [](double a, double b) { return std::abs(a - b) <= kTimeTol; }),
              out.end());
  }
  return out;
}

namespace {

struct StepWorkspace {
  std::vector<double> alpha, sigma, gamma, x_next;
  explicit StepWorkspace(int dim)
      : alpha(dim), sigma(static_cast<std::size_t>(dim) * dim), gamma(dim), x_next(dim) {}
};

// Core Euler recursion shared by the seeded and the increment-driven entry
// points.  `draw` fills dim Brownian increments for step k.
template <typename DrawFn>
PathRecord run_euler(const DiffusionSpec& spec, const BVDriverSpec& driver,
                     std::span<const double> x0, std::span<const double> grid,
                     std::uint64_t seed, DrawFn&& draw) {
  spec.validate();
  if (grid.size() < 2) throw ConfigError("sde", "grid needs at least two points");
  for (std::size_t k = 0; k + 1 < grid.size(); ++k)
    if (!(grid[k + 1] > grid[k])) throw ConfigError("sde", "grid must be strictly increasing");
  if (static_cast<int>(x0.size()) != spec.dim)
    throw ConfigError("sde", "x0 dimension mismatch");
  driver.validate(spec, grid.front(), grid.back());

  const int m = spec.dim;
  const std::vector<double> times = merged_grid(grid, driver);
  const std::size_t n = times.size() - 1;

  // Map jump times onto grid indices once.
  std::vector<const JumpEvent*> jump_here(times.size(), nullptr);
  if (driver.mode == BVDriverSpec::Mode::Schedule) {
    for (const auto& j : driver.jumps) {
      auto it = std::lower_bound(times.begin(), times.end(), j.time - kTimeTol);
      jump_here[static_cast<std::size_t>(it - times.begin())] = &j;
    }
  }

  PathRecord rec;
  rec.dim = m;
  rec.times = times;
  rec.states.assign((n + 1) * m, 0.0);
  rec.brownian.assign(n * m, 0.0);
  rec.bv_cont.assign(n * m, 0.0);
  rec.seed = seed;
  std::copy(x0.begin(), x0.end(), rec.states.begin());

  if (driver.mode == BVDriverSpec::Mode::Reflection) {
    const auto& r = *driver.reflection;
    const double side = static_cast<double>(r.direction) * (x0[r.coordinate] - r.threshold);
    if (side < 0.0)
      throw ConfigError("sde", "x0 violates the reflection threshold");
  }

  StepWorkspace ws(m);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = times[k];
    const double dt = times[k + 1] - t;
    const std::span<const double> x{rec.states.data() + k * m, static_cast<std::size_t>(m)};
    double* db = rec.brownian.data() + k * m;
    double* dac = rec.bv_cont.data() + k * m;

    spec.eval_drift(t, x, ws.alpha);
    spec.eval_diffusion(t, x, ws.sigma);
    draw(k, std::span<double>{db, static_cast<std::size_t>(m)}, dt);

    if (driver.mode == BVDriverSpec::Mode::Schedule && driver.rate) {
      driver.rate(t, x, std::span<double>{dac, static_cast<std::size_t>(m)});
      for (int i = 0; i < m; ++i) dac[i] *= dt;
    }

    const bool need_gamma =
        driver.mode == BVDriverSpec::Mode::Schedule && driver.rate;
    if (need_gamma) spec.eval_bv_loading(t, x, ws.gamma);

    for (int i = 0; i < m; ++i) {
      double v = x[i] + ws.alpha[i] * dt;
      for (int j = 0; j < m; ++j) v += ws.sigma[i * m + j] * db[j];
      if (need_gamma) v += ws.gamma[i] * dac[i];
      ws.x_next[i] = v;
    }

    if (driver.mode == BVDriverSpec::Mode::Reflection) {
      const auto& r = *driver.reflection;
      const int c = r.coordinate;
      const double overshoot =
          static_cast<double>(r.direction) * (r.threshold - ws.x_next[c]);
      if (overshoot > 0.0) {
        spec.eval_bv_loading(t, x, ws.gamma);
        if (!(ws.gamma[c] > 0.0))
          throw ConfigError("sde",
                            "reflection requires a positive bv_loading on the "
                            "reflected coordinate");
        dac[c] = static_cast<double>(r.direction) * overshoot / ws.gamma[c];
        ws.x_next[c] = r.threshold;
      }
    }

    double* next = rec.states.data() + (k + 1) * m;
    std::copy(ws.x_next.begin(), ws.x_next.end(), next);
    check_state({next, static_cast<std::size_t>(m)}, times[k + 1]);

    if (const JumpEvent* ev = jump_here[k + 1]) {
      PathJump pj;
      pj.index = k + 1;
      pj.state_before.assign(next, next + m);
      pj.delta = ev->delta;
      spec.eval_bv_loading(times[k + 1], pj.state_before, ws.gamma);
      for (int i = 0; i < m; ++i) next[i] += ws.gamma[i] * ev->delta[i];
      check_state({next, static_cast<std::size_t>(m)}, times[k + 1]);
      rec.jumps.push_back(std::move(pj));
    }
  }
  return rec;
}

}  // namespace

PathRecord simulate_path(const DiffusionSpec& spec, const BVDriverSpec& driver,
                         std::span<const double> x0, std::span<const double> grid,
                         std::uint64_t seed) {
  Rng rng(seed);
  return run_euler(spec, driver, x0, grid, seed,
                   [&rng](std::size_t, std::span<double> db, double dt) {
                     const double s = std::sqrt(dt);
                     for (double& v : db) v = s * rng.gaussian();
                   });
}

PathRecord simulate_path_given(const DiffusionSpec& spec, const BVDriverSpec& driver,
                               std::span<const double> x0, std::span<const double> grid,
                               std::span<const double> brownian_increments) {
  const std::vector<double> times = merged_grid(grid, driver);
  const std::size_t need = (times.size() - 1) * static_cast<std::size_t>(spec.dim);
  if (brownian_increments.size() != need)
    throw ConfigError("sde", "brownian increment array has wrong length");
  return run_euler(spec, driver, x0, grid, 0,
                   [&brownian_increments, m = spec.dim](std::size_t k, std::span<double> db,
                                                        double) {
                     const double* src = brownian_increments.data() + k * m;
                     std::copy(src, src + m, db.begin());
                   });
}

std::vector<PathRecord> simulate_ensemble(const DiffusionSpec& spec,
                                          const BVDriverSpec& driver,
                                          std::span<const double> x0,
                                          std::span<const double> grid,
                                          std::uint64_t master_seed,
                                          std::size_t n_paths, int threads) {
  std::vector<PathRecord> out(n_paths);
  parallel_for(n_paths, threads, [&](std::size_t p) {
    out[p] = simulate_path(spec, driver, x0, grid, mix_seed(master_seed, p));
  });
  return out;
}

IntegrabilityReport check_integrability(const PathRecord& path, const DiffusionSpec& spec) {
  const int m = path.dim;
  IntegrabilityReport rep;
  std::vector<double> alpha(m), sigma(static_cast<std::size_t>(m) * m), gamma(m);

  // ds part: trapezoid over the stored grid of sum|alpha| + sum sigma^2.
  auto ds_integrand = [&](std::size_t k) {
    const double t = path.times[k];
    const auto x = path.state(k);
    spec.eval_drift(t, x, alpha);
    spec.eval_diffusion(t, x, sigma);
    double v = 0.0;
    for (int i = 0; i < m; ++i) v += std::abs(alpha[i]);
    for (const double s : sigma) v += s * s;
    return v;
  };
  double prev = ds_integrand(0);
  for (std::size_t k = 0; k + 1 < path.times.size(); ++k) {
    const double cur = ds_integrand(k + 1);
    rep.drift_diffusion_integral +=
        0.5 * (prev + cur) * (path.times[k + 1] - path.times[k]);
    prev = cur;
  }

  // d|A| part: left-point gamma against |dA|, continuous and jump parts.
  for (std::size_t k = 0; k + 1 < path.times.size(); ++k) {
    const double* dac = path.bv_cont.data() + k * m;
    bool any = false;
    for (int i = 0; i < m; ++i) any = any || dac[i] != 0.0;
    if (!any) continue;
    spec.eval_bv_loading(path.times[k], path.state(k), gamma);
    for (int i = 0; i < m; ++i)
      rep.bv_integral += std::abs(gamma[i]) * std::abs(dac[i]);
  }
  for (const auto& j : path.jumps) {
    spec.eval_bv_loading(path.times[j.index], j.state_before, gamma);
    for (int i = 0; i < m; ++i)
      rep.bv_integral += std::abs(gamma[i]) * std::abs(j.delta[i]);
  }

  rep.finite = std::isfinite(rep.bv_integral) && std::isfinite(rep.drift_diffusion_integral);
  return rep;
}

void write_path_csv(const PathRecord& path, const std::filesystem::path& csv_path,
                    const std::filesystem::path& json_path) {
  const int m = path.dim;
  std::vector<std::string> cols;
  cols.emplace_back("t");
  for (int i = 1; i <= m; ++i) cols.push_back("x" + std::to_string(i));
  for (int i = 1; i <= m; ++i) cols.push_back("db" + std::to_string(i));
  for (int i = 1; i <= m; ++i) cols.push_back("dac" + std::to_string(i));
  for (int i = 1; i <= m; ++i) cols.push_back("daj" + std::to_string(i));
  CsvWriter w(csv_path, cols);
  std::vector<double> row(cols.size());
  const std::size_t n = path.steps();
  for (std::size_t k = 0; k <= n; ++k) {
    std::size_t c = 0;
    row[c++] = path.times[k];
    for (int i = 0; i < m; ++i) row[c++] = path.state(k)[i];
    for (int i = 0; i < m; ++i) row[c++] = k < n ? path.brownian[k * m + i] : 0.0;
    for (int i = 0; i < m; ++i) row[c++] = k < n ? path.bv_cont[k * m + i] : 0.0;
    const PathJump* j = path.jump_at(k);
    for (int i = 0; i < m; ++i) row[c++] = j ? j->delta[i] : 0.0;
    w.row(row);
  }
  w.close();

  std::ofstream js(json_path);
  if (!js) throw ConfigError("sde", "cannot open " + json_path.string());
  std::uint64_t h = fnv1a(path.states.data(), path.states.size() * sizeof(double));
  h = fnv1a(path.times.data(), path.times.size() * sizeof(double), h);
  js << "{\n"
     << "  \"dim\": " << m << ",\n"
     << "  \"seed\": " << path.seed << ",\n"
     << "  \"t0\": " << format_double(path.times.front()) << ",\n"
     << "  \"t1\": " << format_double(path.times.back()) << ",\n"
     << "  \"steps\": " << n << ",\n"
     << "  \"jumps\": " << path.jumps.size() << ",\n"
     << "  \"content_hash\": \"" << std::hex << h << std::dec << "\"\n"
     << "}\n";
}

}  // namespace itokit
