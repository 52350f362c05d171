#include "itokit/ito.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "itokit/csv.hpp"
#include "itokit/rng.hpp"

namespace itokit {

namespace {

constexpr int kMaxDim = 8;

// Left-point discretization of the continuous BV integral
// sum_i int gamma^i U_{x_i} dA^{c,i} using the stored increments.
double bv_continuous_integral(const TestFunction& f, const PathRecord& path,
                              const DiffusionSpec& spec) {
  if (!spec.bv_loading) return 0.0;
  const int m = path.dim;
  double gamma[kMaxDim];
  double total = 0.0;
  for (std::size_t k = 0; k < path.steps(); ++k) {
    const auto x = path.state(k);
    const double* dac = path.bv_cont.data() + k * static_cast<std::size_t>(m);
    bool any = false;
    for (int i = 0; i < m; ++i)
      if (dac[i] != 0.0) any = true;
    if (!any) continue;
    const double t = path.times[k];
    spec.eval_bv_loading(t, x, {gamma, static_cast<std::size_t>(m)});
    for (int i = 0; i < m; ++i) total += gamma[i] * f.dx[i](t, x) * dac[i];
  }
  return total;
}

}  // namespace

bool LocalizationBox::contains(double t, std::span<const double> x) const {
  const double r = 1.0 / delta;
  if (t < 0.0 || t > r) return false;
  for (double v : x)
    if (std::abs(v) > r) return false;
  return true;
}

LocalizedPath localize(const PathRecord& path, double delta) {
  if (!(delta > 0.0)) throw ConfigError("ito", "localization delta must be > 0");
  LocalizationBox box{delta};
  const std::size_t n_points = path.times.size();
  std::size_t cut = n_points;  // first index outside the window
  for (std::size_t k = 0; k < n_points; ++k) {
    if (!box.contains(path.times[k], path.state(k))) {
      cut = k;
      break;
    }
  }
  LocalizedPath out;
  if (cut == n_points) {
    out.path = path;
    out.tau = path.times.back();
    out.exited = false;
    return out;
  }
  // Keep everything up to and including the exit point.
  const std::size_t m = static_cast<std::size_t>(path.dim);
  const std::size_t last = cut;  // index of the exit state
  out.path.dim = path.dim;
  out.path.seed = path.seed;
  out.path.times.assign(path.times.begin(), path.times.begin() + last + 1);
  out.path.states.assign(path.states.begin(),
                         path.states.begin() + (last + 1) * m);
  out.path.brownian.assign(path.brownian.begin(), path.brownian.begin() + last * m);
  out.path.bv_cont.assign(path.bv_cont.begin(), path.bv_cont.begin() + last * m);
  for (const auto& j : path.jumps)
    if (j.index <= last) out.path.jumps.push_back(j);
  out.tau = path.times[last];
  out.exited = true;
  return out;
}

ItoLedger assemble_ledger(const TestFunction& f, const MonotoneSurface& surface,
                          const PathRecord& path, const DiffusionSpec& spec,
                          double band, double skip_budget) {
  f.validate();
  surface.validate();
  spec.validate();
  if (f.dim != path.dim || spec.dim != path.dim || surface.dim != path.dim)
    throw ConfigError("ito", "field, surface, coefficients and path must share one dimension");
  if (path.times.size() < 1) throw ConfigError("ito", "empty path");

  const int m = path.dim;
  ItoLedger ledger;
  ledger.steps = path.steps();
  ledger.tau = path.times.back();

  const double t0 = path.times.front();
  ledger.lhs = f.value(path.times.back(), path.state(path.steps())) -
               f.value(t0, path.state(0));

  double alpha[kMaxDim];
  double sigma[kMaxDim * kMaxDim];
  double beta[kMaxDim * kMaxDim];
  double grad[kMaxDim];

  for (std::size_t k = 0; k < path.steps(); ++k) {
    const double t = path.times[k];
    const auto x = path.state(k);
    const double dt = path.times[k + 1] - t;
    const double* db = path.brownian.data() + k * static_cast<std::size_t>(m);

    spec.eval_drift(t, x, {alpha, static_cast<std::size_t>(m)});
    spec.eval_diffusion(t, x, {sigma, static_cast<std::size_t>(m * m)});
    for (int i = 0; i < m; ++i) grad[i] = f.dx[i](t, x);

    // First-order dt part and the stochastic term share the gradient.
    double drift_part = f.dt(t, x);
    for (int i = 0; i < m; ++i) drift_part += alpha[i] * grad[i];

    double second_order = 0.0;
    if (classify(surface, t, x, band) == Region::Band) {
      ++ledger.skipped_steps;
    } else {
      if (!f.has_hess())
        throw ConfigError(
            "ito", "field lacks second derivatives required off the split surface");
      spec.eval_beta(t, x, {beta, static_cast<std::size_t>(m * m)});
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
          second_order += beta[i * m + j] * f.dxx[i * m + j](t, x);
    }
    ledger.term_dt += (drift_part + 0.5 * second_order) * dt;

    for (int i = 0; i < m; ++i) {
      double diffused = 0.0;
      for (int j = 0; j < m; ++j) diffused += sigma[i * m + j] * db[j];
      ledger.term_stoch += grad[i] * diffused;
    }
  }

  ledger.term_bv = bv_continuous_integral(f, path, spec);

  for (const auto& jump : path.jumps) {
    const double t = path.times[jump.index];
    ledger.term_jumps +=
        f.value(t, path.state(jump.index)) -
        f.value(t, {jump.state_before.data(), jump.state_before.size()});
  }

  ledger.residual = ledger.lhs - ledger.rhs();
  ledger.within_budget =
      ledger.steps == 0 ||
      static_cast<double>(ledger.skipped_steps) <=
          skip_budget * static_cast<double>(ledger.steps);
  return ledger;
}

JumpEquivalenceReport jump_equivalence_check(const TestFunction& f,
                                             const PathRecord& path,
                                             const DiffusionSpec& spec,
                                             int line_quad_nodes,
                                             double rearrange_tol, double line_tol) {
  f.validate();
  spec.validate();
  if (f.dim != path.dim || spec.dim != path.dim)
    throw ConfigError("ito", "field, coefficients and path must share one dimension");

  const int m = path.dim;
  JumpEquivalenceReport report;
  report.jumps = path.jumps.size();

  const double cont = bv_continuous_integral(f, path, spec);

  double gamma[kMaxDim];
  double z[kMaxDim];
  const GaussLegendre rule = gauss_legendre(line_quad_nodes);

  // Arrangement A: continuous BV integral plus raw value-jumps.
  // Arrangement B: BV integral against the full driver (jumps included at
  // left-limit integrands) plus compensated value-jumps.
  double value_jumps = 0.0;
  double full_bv = cont;
  double compensated = 0.0;
  double worst_line = 0.0;

  for (const auto& jump : path.jumps) {
    const double t = path.times[jump.index];
    const std::span<const double> pre{jump.state_before.data(),
                                      jump.state_before.size()};
    const auto post = path.state(jump.index);
    const double vj = f.value(t, post) - f.value(t, pre);
    value_jumps += vj;

    double loaded = 0.0;
    if (spec.bv_loading) {
      spec.eval_bv_loading(t, pre, {gamma, static_cast<std::size_t>(m)});
      for (int i = 0; i < m; ++i) loaded += gamma[i] * f.dx[i](t, pre) * jump.delta[i];
    }
    full_bv += loaded;
    compensated += vj - loaded;

    // Fundamental-theorem form along the displacement segment.
    double line = 0.0;
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      for (int i = 0; i < m; ++i)
        z[i] = pre[i] + rule.nodes[q] * (post[i] - pre[i]);
      double dot = 0.0;
      const std::span<const double> zs{z, static_cast<std::size_t>(m)};
      for (int i = 0; i < m; ++i) dot += f.dx[i](t, zs) * (post[i] - pre[i]);
      line += rule.weights[q] * dot;
    }
    const double scale = std::max({1.0, std::abs(vj), std::abs(line)});
    worst_line = std::max(worst_line, std::abs(line - vj) / scale);
  }

  const double form_a = cont + value_jumps;
  const double form_b = full_bv + compensated;
  const double scale = std::max({1.0, std::abs(form_a), std::abs(form_b)});
  report.rearrangement = std::abs(form_a - form_b) / scale;
  report.line_integral = worst_line;
  report.pass = report.rearrangement <= rearrange_tol && worst_line <= line_tol;
  return report;
}

ResidualStudy residual_study(const TestFunction& f, const MonotoneSurface& surface,
                             const DiffusionSpec& spec, const BVDriverSpec& driver,
                             std::span<const double> x0, double horizon,
                             std::span<const double> dt_values, std::size_t n_paths,
                             std::uint64_t master_seed, double band, int threads) {
  if (dt_values.empty()) throw ConfigError("ito", "empty step-size ladder");
  if (n_paths == 0) throw ConfigError("ito", "need at least one path");
  for (std::size_t l = 1; l < dt_values.size(); ++l)
    if (!(dt_values[l] < dt_values[l - 1]))
      throw ConfigError("ito", "step sizes must be strictly decreasing");

  ResidualStudy study;
  for (const double dt : dt_values) {
    const auto steps = static_cast<std::size_t>(std::llround(horizon / dt));
    if (steps < 1) throw ConfigError("ito", "step size exceeds the horizon");
    const std::vector<double> grid = uniform_grid(0.0, horizon, steps);

    std::vector<double> residuals(n_paths, 0.0);
    std::vector<double> skipped(n_paths, 0.0);
    parallel_for(n_paths, threads, [&](std::size_t i) {
      const PathRecord path =
          simulate_path(spec, driver, x0, grid, mix_seed(master_seed, i));
      const ItoLedger ledger = assemble_ledger(f, surface, path, spec, band);
      residuals[i] = ledger.residual;
      skipped[i] = ledger.steps == 0
                       ? 0.0
                       : static_cast<double>(ledger.skipped_steps) /
                             static_cast<double>(ledger.steps);
    });

    ResidualLevel level;
    level.dt = dt;
    level.residuals = mean_stats(residuals);
    level.skipped_fraction = mean_stats(skipped).mean;
    if (!study.levels.empty()) {
      const ResidualLevel& prev = study.levels.back();
      if (level.residuals.mean_abs > 0.0 && prev.residuals.mean_abs > 0.0)
        level.order = std::log(prev.residuals.mean_abs / level.residuals.mean_abs) /
                      std::log(prev.dt / level.dt);
    }
    study.levels.push_back(std::move(level));
  }

  study.mean_abs_decreasing = true;
  for (std::size_t l = 1; l < study.levels.size(); ++l)
    if (!(study.levels[l].residuals.mean_abs <
          study.levels[l - 1].residuals.mean_abs))
      study.mean_abs_decreasing = false;
  const MeanStats& last = study.levels.back().residuals;
  study.final_mean_within_3se = std::abs(last.mean) <= 3.0 * last.stderr_mean;
  return study;
}

void write_ledger_csv(std::span<const ItoLedger> ledgers,
                      const std::filesystem::path& path) {
  const std::vector<std::string> cols = {
      "index",      "lhs",   "term_dt",       "term_bv", "term_jumps",
      "term_stoch", "residual", "tau",        "skipped_steps", "steps"};
  CsvWriter writer(path, cols);
  std::vector<double> row(cols.size());
  for (std::size_t i = 0; i < ledgers.size(); ++i) {
    const ItoLedger& l = ledgers[i];
    row = {static_cast<double>(i), l.lhs,   l.term_dt,
           l.term_bv,              l.term_jumps, l.term_stoch,
           l.residual,             l.tau,        static_cast<double>(l.skipped_steps),
           static_cast<double>(l.steps)};
    writer.row(row);
  }
}

}  // namespace itokit
