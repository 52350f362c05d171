#include "itokit/mollify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "itokit/csv.hpp"
#include "itokit/rng.hpp"

namespace itokit {

namespace {

constexpr int kMaxTensorDim = 4;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Walks the full tensor grid {0..q-1}^m, invoking fn once per multi-index.
template <class F>
void tensor_iterate(int m, int q, F&& fn) {
  int idx[kMaxTensorDim] = {0, 0, 0, 0};
  while (true) {
    fn(idx);
    int axis = 0;
    while (axis < m && ++idx[axis] == q) {
      idx[axis] = 0;
      ++axis;
    }
    if (axis == m) break;
  }
}

void check_tensor_dim(int dim) {
  if (dim > kMaxTensorDim)
    throw ConfigError("mollify",
                      "tensor quadrature capped at 4 state dimensions");
}

// The forward cube x + [0,1/n]^m (and the evaluation time) must stay inside
// the field's declared domain, when it has one.
void check_domain(const TestFunction& f, int n, double t,
                  std::span<const double> x) {
  if (!f.domain) return;
  const Box& d = *f.domain;
  const double h = 1.0 / n;
  bool ok = t >= d.t_lo && t <= d.t_hi;
  for (int k = 0; ok && k < f.dim; ++k)
    ok = x[k] >= d.lo[k] && x[k] + h <= d.hi[k];
  if (!ok)
    throw ConfigError("mollify", "evaluation cube exceeds the declared domain box");
}

bool cube_in_domain(const TestFunction& f, int n, double t,
                    std::span<const double> x) {
  if (!f.domain) return true;
  const Box& d = *f.domain;
  const double h = 1.0 / n;
  if (t < d.t_lo || t > d.t_hi) return false;
  for (int k = 0; k < f.dim; ++k)
    if (x[k] < d.lo[k] || x[k] + h > d.hi[k]) return false;
  return true;
}

double value_impl(const TestFunction& f, int n, const GaussLegendre& rule,
                  double t, std::span<const double> x) {
  const int m = f.dim;
  const int q = static_cast<int>(rule.nodes.size());
  const double h = 1.0 / n;
  double z[kMaxTensorDim];
  double sum = 0.0;
  tensor_iterate(m, q, [&](const int* idx) {
    double w = 1.0;
    for (int k = 0; k < m; ++k) {
      z[k] = x[k] + rule.nodes[idx[k]] * h;
      w *= rule.weights[idx[k]];
    }
    sum += w * f.value(t, {z, static_cast<std::size_t>(m)});
  });
  return sum;
}

MollifiedGradient grad_impl(const TestFunction& f, int n, const GaussLegendre& rule,
                            double t, std::span<const double> x) {
  const int m = f.dim;
  const int q = static_cast<int>(rule.nodes.size());
  const double h = 1.0 / n;
  MollifiedGradient out;
  out.dx.assign(m, 0.0);
  double z[kMaxTensorDim];
  tensor_iterate(m, q, [&](const int* idx) {
    double w = 1.0;
    for (int k = 0; k < m; ++k) {
      z[k] = x[k] + rule.nodes[idx[k]] * h;
      w *= rule.weights[idx[k]];
    }
    const std::span<const double> zs{z, static_cast<std::size_t>(m)};
    out.dt += w * f.dt(t, zs);
    for (int k = 0; k < m; ++k) out.dx[k] += w * f.dx[k](t, zs);
  });
  return out;
}

double hess_impl(const TestFunction& f, int n, const GaussLegendre& rule,
                 double t, std::span<const double> x, int i, int j) {
  const int m = f.dim;
  const int q = static_cast<int>(rule.nodes.size());
  const double h = 1.0 / n;
  // Map the m-1 face axes (all but i) to state coordinates.
  int face_axis[kMaxTensorDim];
  int n_face = 0;
  for (int k = 0; k < m; ++k)
    if (k != i) face_axis[n_face++] = k;
  double z[kMaxTensorDim];
  double sum = 0.0;
  tensor_iterate(n_face, q, [&](const int* idx) {
    double w = 1.0;
    for (int a = 0; a < n_face; ++a) {
      const int k = face_axis[a];
      z[k] = x[k] + rule.nodes[idx[a]] * h;
      w *= rule.weights[idx[a]];
    }
    const std::span<const double> zs{z, static_cast<std::size_t>(m)};
    z[i] = x[i] + h;
    const double upper = f.dx[j](t, zs);
    z[i] = x[i];
    const double lower = f.dx[j](t, zs);
    sum += w * (upper - lower);
  });
  return n * sum;
}

}  // namespace

GaussLegendre gauss_legendre(int n) {
  if (n < 1 || n > 64)
    throw ConfigError("mollify", "quadrature nodes per axis must be in [1, 64]");
  GaussLegendre rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Root of the degree-n Legendre polynomial by Newton iteration.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double deriv = 1.0;
    for (int it = 0; it < 100; ++it) {
      double pkm1 = 1.0, pk = x;
      for (int k = 1; k < n; ++k) {
        const double pkp1 = ((2 * k + 1) * x * pk - k * pkm1) / (k + 1);
        pkm1 = pk;
        pk = pkp1;
      }
      deriv = n * (x * pk - pkm1) / (x * x - 1.0);
      const double step = pk / deriv;
      x -= step;
      if (std::abs(step) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * deriv * deriv);
    // Map [-1,1] -> [0,1]; roots come out in descending order, so i maps to
    // the lower half and its mirror to the upper half.
    rule.nodes[i] = 0.5 * (1.0 - x);
    rule.nodes[n - 1 - i] = 0.5 * (1.0 + x);
    rule.weights[i] = 0.5 * w;
    rule.weights[n - 1 - i] = 0.5 * w;
  }
  return rule;
}

void TestFunction::validate() const {
  if (dim < 1) throw ConfigError("mollify", "field dimension must be >= 1");
  if (!value || !dt) throw ConfigError("mollify", "field needs value and time derivative");
  if (static_cast<int>(dx.size()) != dim)
    throw ConfigError("mollify", "field needs one space derivative per coordinate");
  for (const auto& g : dx)
    if (!g) throw ConfigError("mollify", "null space-derivative callback");
  if (!dxx.empty()) {
    if (static_cast<int>(dxx.size()) != dim * dim)
      throw ConfigError("mollify", "second derivatives must be a full dim x dim table");
    for (const auto& g : dxx)
      if (!g) throw ConfigError("mollify", "null second-derivative callback");
  }
  if (smooth_split && smooth_split->dim != dim)
    throw ConfigError("mollify", "split surface dimension mismatch");
  if (domain && domain->dim() != dim)
    throw ConfigError("mollify", "domain box dimension mismatch");
}

void MollifierConfig::validate() const {
  if (n < 1) throw ConfigError("mollify", "cube refinement n must be >= 1");
  if (quad_nodes < 2) throw ConfigError("mollify", "need at least 2 quadrature nodes");
}

DerivativeCheck verify_derivatives(const TestFunction& f, const Box& box,
                                   std::size_t n_samples, std::uint64_t seed,
                                   double fd_step, double tol) {
  f.validate();
  if (box.dim() != f.dim) throw ConfigError("mollify", "sample box dimension mismatch");
  Rng rng(seed);
  DerivativeCheck report;
  std::vector<double> x(f.dim);
  for (std::size_t s = 0; s < n_samples; ++s) {
    const double t =
        box.t_lo + (box.t_hi - box.t_lo) * rng.uniform();
    for (int k = 0; k < f.dim; ++k)
      x[k] = box.lo[k] + (box.hi[k] - box.lo[k]) * rng.uniform();
    const std::span<const double> xs{x.data(), x.size()};
    const double dt_fd =
        (f.value(t + fd_step, xs) - f.value(t - fd_step, xs)) / (2.0 * fd_step);
    report.worst_dt = std::max(report.worst_dt, std::abs(dt_fd - f.dt(t, xs)));
    for (int k = 0; k < f.dim; ++k) {
      const double saved = x[k];
      x[k] = saved + fd_step;
      const double up = f.value(t, xs);
      x[k] = saved - fd_step;
      const double dn = f.value(t, xs);
      x[k] = saved;
      const double fd = (up - dn) / (2.0 * fd_step);
      report.worst_dx = std::max(report.worst_dx, std::abs(fd - f.dx[k](t, xs)));
    }
  }
  report.pass = report.worst_dt <= tol && report.worst_dx <= tol;
  return report;
}

double mollify_value(const TestFunction& f, const MollifierConfig& cfg, double t,
                     std::span<const double> x) {
  f.validate();
  cfg.validate();
  check_tensor_dim(f.dim);
  check_domain(f, cfg.n, t, x);
  return value_impl(f, cfg.n, gauss_legendre(cfg.quad_nodes), t, x);
}

MollifiedGradient mollify_grad(const TestFunction& f, const MollifierConfig& cfg,
                               double t, std::span<const double> x) {
  f.validate();
  cfg.validate();
  check_tensor_dim(f.dim);
  check_domain(f, cfg.n, t, x);
  return grad_impl(f, cfg.n, gauss_legendre(cfg.quad_nodes), t, x);
}

double mollify_hess(const TestFunction& f, const MollifierConfig& cfg, double t,
                    std::span<const double> x, int i, int j) {
  f.validate();
  cfg.validate();
  check_tensor_dim(f.dim);
  if (i < 0 || i >= f.dim || j < 0 || j >= f.dim)
    throw ConfigError("mollify", "second-derivative indices out of range");
  check_domain(f, cfg.n, t, x);
  return hess_impl(f, cfg.n, gauss_legendre(cfg.quad_nodes), t, x, i, j);
}

std::optional<double> contraction_l(const TestFunction& f, const DiffusionSpec& spec,
                                    double t, std::span<const double> x, double band) {
  f.validate();
  if (spec.dim != f.dim) throw ConfigError("mollify", "coefficient dimension mismatch");
  if (!f.has_hess())
    throw ConfigError("mollify", "field carries no second derivatives");
  if (f.smooth_split && band > 0.0 &&
      classify(*f.smooth_split, t, x, band) == Region::Band)
    return std::nullopt;
  const int m = f.dim;
  double beta[kMaxTensorDim * kMaxTensorDim];
  check_tensor_dim(m);
  spec.eval_beta(t, x, {beta, static_cast<std::size_t>(m * m)});
  double sum = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) sum += beta[i * m + j] * f.dxx[i * m + j](t, x);
  return sum;
}

LScanReport scan_l_bound(const TestFunction& f, const DiffusionSpec& spec,
                         const Box& box, const LScanConfig& cfg, int threads) {
  f.validate();
  spec.validate();
  check_tensor_dim(f.dim);
  if (spec.dim != f.dim) throw ConfigError("mollify", "coefficient dimension mismatch");
  if (box.dim() != f.dim) throw ConfigError("mollify", "scan box dimension mismatch");
  if (cfg.n_values.empty()) throw ConfigError("mollify", "empty n sweep");
  if (cfg.grid_per_axis < 2) throw ConfigError("mollify", "scan grid needs >= 2 points");

  const int m = f.dim;
  const int g = cfg.grid_per_axis;
  const int nt = std::max(1, cfg.grid_time);
  std::size_t space_points = 1;
  for (int k = 0; k < m; ++k) space_points *= static_cast<std::size_t>(g);
  const std::size_t total = space_points * static_cast<std::size_t>(nt);

  LScanReport report;
  for (const int n : cfg.n_values) {
    MollifierConfig mc{n, cfg.quad_nodes};
    mc.validate();
    const GaussLegendre rule = gauss_legendre(cfg.quad_nodes);
    const double band = cfg.band_factor / n;
    std::vector<double> vals(total, -kInf);
    parallel_for(total, threads, [&](std::size_t p) {
      // Decode p into (time index, per-axis space indices).
      const std::size_t it = p / space_points;
      std::size_t rem = p % space_points;
      double x[kMaxTensorDim];
      for (int k = 0; k < m; ++k) {
        const std::size_t ik = rem % static_cast<std::size_t>(g);
        rem /= static_cast<std::size_t>(g);
        x[k] = box.lo[k] + (box.hi[k] - box.lo[k]) *
                               static_cast<double>(ik) / (g - 1);
      }
      const double t =
          nt == 1 ? box.t_lo
                  : box.t_lo + (box.t_hi - box.t_lo) *
                                   static_cast<double>(it) / (nt - 1);
      const std::span<const double> xs{x, static_cast<std::size_t>(m)};
      if (!cube_in_domain(f, n, t, xs)) return;
      if (f.smooth_split && classify(*f.smooth_split, t, xs, band) == Region::Band)
        return;
      double beta[kMaxTensorDim * kMaxTensorDim];
      spec.eval_beta(t, xs, {beta, static_cast<std::size_t>(m * m)});
      double sum = 0.0;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
          sum += beta[i * m + j] * hess_impl(f, n, rule, t, xs, i, j);
      vals[p] = std::abs(sum);
    });
    // Deterministic reduction: first index attaining the maximum wins.
    std::size_t best = 0;
    for (std::size_t p = 1; p < total; ++p)
      if (vals[p] > vals[best]) best = p;
    LScanEntry entry;
    entry.n = n;
    entry.max_abs = vals[best] == -kInf ? 0.0 : vals[best];
    const std::size_t it = best / space_points;
    std::size_t rem = best % space_points;
    entry.arg_x.resize(m);
    for (int k = 0; k < m; ++k) {
      const std::size_t ik = rem % static_cast<std::size_t>(g);
      rem /= static_cast<std::size_t>(g);
      entry.arg_x[k] = box.lo[k] + (box.hi[k] - box.lo[k]) *
                                       static_cast<double>(ik) / (g - 1);
    }
    entry.arg_t = nt == 1 ? box.t_lo
                          : box.t_lo + (box.t_hi - box.t_lo) *
                                           static_cast<double>(it) / (nt - 1);
    report.entries.push_back(std::move(entry));
  }

  std::vector<double> maxima;
  maxima.reserve(report.entries.size());
  for (const auto& e : report.entries) maxima.push_back(e.max_abs);
  report.max_over_n = *std::max_element(maxima.begin(), maxima.end());
  std::vector<double> sorted = maxima;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t k = sorted.size();
  report.median_max =
      k % 2 == 1 ? sorted[k / 2] : 0.5 * (sorted[k / 2 - 1] + sorted[k / 2]);
  if (report.median_max > 0.0) {
    report.last_over_median = maxima.back() / report.median_max;
    report.bounded = report.max_over_n <= 1.1 * report.median_max;
  } else {
    report.last_over_median = maxima.back() == 0.0 ? 1.0 : kInf;
    report.bounded = report.max_over_n <= 1e-15;
  }
  return report;
}

void write_l_scan_csv(const LScanReport& report, const std::filesystem::path& path) {
  if (report.entries.empty()) throw ConfigError("mollify", "empty scan report");
  const int m = static_cast<int>(report.entries.front().arg_x.size());
  std::vector<std::string> cols = {"n", "max_abs_l", "arg_t"};
  for (int k = 0; k < m; ++k) cols.push_back("arg_x" + std::to_string(k + 1));
  CsvWriter writer(path, cols);
  std::vector<double> row;
  for (const auto& e : report.entries) {
    row.clear();
    row.push_back(static_cast<double>(e.n));
    row.push_back(e.max_abs);
    row.push_back(e.arg_t);
    for (double v : e.arg_x) row.push_back(v);
    writer.row(row);
  }
}

}  // namespace itokit
