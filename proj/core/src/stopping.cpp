#include "itokit/stopping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "itokit/csv.hpp"
#include "itokit/rng.hpp"

namespace itokit {

namespace {

constexpr int kMaxDim = 8;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  v.back() = hi;
  return v;
}

// Bracketing index and interpolation weight for a sorted axis, clamped.
void locate(const std::vector<double>& nodes, double v, std::size_t& i0, double& w) {
  if (nodes.size() == 1 || v <= nodes.front()) {
    i0 = 0;
    w = 0.0;
    return;
  }
  if (v >= nodes.back()) {
    i0 = nodes.size() - 2;
    w = 1.0;
    return;
  }
  const auto it = std::upper_bound(nodes.begin(), nodes.end(), v);
  i0 = static_cast<std::size_t>(it - nodes.begin()) - 1;
  w = (v - nodes[i0]) / (nodes[i0 + 1] - nodes[i0]);
}

std::size_t nearest(const std::vector<double>& nodes, double v) {
  std::size_t i0;
  double w;
  locate(nodes, v, i0, w);
  if (nodes.size() == 1) return 0;
  return w < 0.5 ? i0 : i0 + 1;
}

}  // namespace

double StoppingProblem::rate(double t, std::span<const double> x) const {
  return discount_rate ? (*discount_rate)(t, x) : discount;
}

double StoppingProblem::h_value(double t, std::span<const double> x) const {
  if (!has_gain_gradient() || !has_gain_hessian())
    throw ConfigError("stopping", "generator evaluation needs gain derivatives");
  const int m = dim();
  double alpha[kMaxDim];
  double beta[kMaxDim * kMaxDim];
  dynamics.eval_drift(t, x, {alpha, static_cast<std::size_t>(m)});
  dynamics.eval_beta(t, x, {beta, static_cast<std::size_t>(m * m)});
  double h = gain_dt(t, x) - rate(t, x) * gain(t, x);
  for (int i = 0; i < m; ++i) h += alpha[i] * gain_dx[i](t, x);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) h += 0.5 * beta[i * m + j] * gain_dxx[i * m + j](t, x);
  return h;
}

void StoppingProblem::validate() const {
  dynamics.validate();
  if (!gain) throw ConfigError("stopping", "missing gain function");
  if (!(horizon > 0.0)) throw ConfigError("stopping", "horizon must be positive");
  if (!discount_rate && discount < 0.0)
    throw ConfigError("stopping", "constant discount must be >= 0");
  const int m = dim();
  if (!gain_dx.empty()) {
    if (static_cast<int>(gain_dx.size()) != m)
      throw ConfigError("stopping", "gain gradient needs one entry per coordinate");
    for (const auto& g : gain_dx)
      if (!g) throw ConfigError("stopping", "null gain-gradient callback");
  }
  if (!gain_dxx.empty()) {
    if (static_cast<int>(gain_dxx.size()) != m * m)
      throw ConfigError("stopping", "gain second derivatives must be dim x dim");
    for (const auto& g : gain_dxx)
      if (!g) throw ConfigError("stopping", "null gain-hessian callback");
  }
  driver.validate(dynamics, 0.0, horizon);
}

void SolveGrid::validate(int dim) const {
  if (box.dim() != dim) throw ConfigError("stopping", "grid box dimension mismatch");
  if (nx < 3) throw ConfigError("stopping", "need at least 3 nodes in the split coordinate");
  if (nt < 1) throw ConfigError("stopping", "need at least 1 time step");
  if (dim == 2 && ny < 3)
    throw ConfigError("stopping", "need at least 3 nodes in the second coordinate");
  if (dim == 1 && ny != 1)
    throw ConfigError("stopping", "ny must be 1 for one-dimensional instances");
  if (!(psor_omega > 0.0 && psor_omega < 2.0))
    throw ConfigError("stopping", "relaxation factor must be in (0, 2)");
  if (!(psor_tol > 0.0) || psor_max_iters < 1)
    throw ConfigError("stopping", "bad iteration controls");
  if (!(tol_gap > 0.0)) throw ConfigError("stopping", "tol_gap must be positive");
  for (int k = 0; k < dim; ++k)
    if (!(box.lo[k] < box.hi[k]))
      throw ConfigError("stopping", "degenerate spatial box");
}

double ValueField::value_at(double t, std::span<const double> x) const {
  std::size_t l0, i0, j0 = 0;
  double wl, wi, wj = 0.0;
  locate(t_nodes, t, l0, wl);
  locate(x_nodes, x[0], i0, wi);
  if (dim == 2) locate(y_nodes, x[1], j0, wj);
  const std::size_t l1 = std::min(l0 + 1, levels() - 1);
  const std::size_t i1 = std::min(i0 + 1, nx() - 1);
  const std::size_t j1 = dim == 2 ? std::min(j0 + 1, ny() - 1) : 0;
  double v = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < (dim == 2 ? 2 : 1); ++c) {
        const double w = (a ? wl : 1.0 - wl) * (b ? wi : 1.0 - wi) *
                         (dim == 2 ? (c ? wj : 1.0 - wj) : 1.0);
        v += w * u[idx(a ? l1 : l0, b ? i1 : i0, c ? j1 : j0)];
      }
  return v;
}

ValueField solve_value(const StoppingProblem& problem, const SolveGrid& grid) {
  problem.validate();
  const int m = problem.dim();
  if (m < 1 || m > 2)
    throw ConfigError("stopping", "grid solver supports 1 or 2 state dimensions");
  grid.validate(m);
  if (problem.driver.active())
    throw ConfigError("stopping", "grid solver requires an inactive BV driver");

  const std::size_t nx = static_cast<std::size_t>(grid.nx);
  const std::size_t ny = m == 2 ? static_cast<std::size_t>(grid.ny) : 1;
  const std::size_t levels = static_cast<std::size_t>(grid.nt) + 1;
  const std::size_t nodes = nx * ny;

  ValueField f;
  f.dim = m;
  f.split_coord = 0;
  f.stopping_below = problem.stopping_below;
  f.tol_gap = grid.tol_gap;
  f.t_nodes = linspace(0.0, problem.horizon, levels);
  f.x_nodes = linspace(grid.box.lo[0], grid.box.hi[0], nx);
  if (m == 2) f.y_nodes = linspace(grid.box.lo[1], grid.box.hi[1], ny);
  f.u.assign(levels * nodes, 0.0);
  f.g.assign(levels * nodes, 0.0);
  f.continuation.assign(levels * nodes, 0);

  const double dx = f.x_nodes[1] - f.x_nodes[0];
  const double dy = m == 2 ? f.y_nodes[1] - f.y_nodes[0] : 1.0;

  double xbuf[2];
  for (std::size_t l = 0; l < levels; ++l) {
    const double t = f.t_nodes[l];
    for (std::size_t iy = 0; iy < ny; ++iy)
      for (std::size_t ix = 0; ix < nx; ++ix) {
        xbuf[0] = f.x_nodes[ix];
        if (m == 2) xbuf[1] = f.y_nodes[iy];
        f.g[f.idx(l, ix, iy)] =
            problem.gain(t, {xbuf, static_cast<std::size_t>(m)});
      }
  }

  // Terminal condition: the value equals the gain at the horizon.
  std::copy(f.g.end() - static_cast<std::ptrdiff_t>(nodes), f.g.end(),
            f.u.end() - static_cast<std::ptrdiff_t>(nodes));

  // The 5-point stencil carries no cross-derivative term; reject instances
  // whose diffusion matrix produces one.
  if (m == 2) {
    double beta[4];
    for (int probe = 0; probe < 4; ++probe) {
      xbuf[0] = grid.box.lo[0] + (grid.box.hi[0] - grid.box.lo[0]) * (0.2 + 0.2 * probe);
      xbuf[1] = grid.box.lo[1] + (grid.box.hi[1] - grid.box.lo[1]) * (0.8 - 0.2 * probe);
      problem.dynamics.eval_beta(0.5 * problem.horizon, {xbuf, 2}, {beta, 4});
      const double scale = 1.0 + std::abs(beta[0]) + std::abs(beta[3]);
      if (std::abs(beta[1]) > 1e-12 * scale)
        throw ConfigError("stopping",
                          "cross-diffusion terms are not supported by the 5-point scheme");
    }
  }

  // Implicit system M u^l = u^{l+1} with M = I - dt*L,  L the upwinded
  // finite-difference generator including the discount term.
  std::vector<double> md(nodes), mlo(nodes), mup(nodes), mso(nodes), mno(nodes);
  std::vector<double> unew(nodes), obstacle(nodes);
  double alpha[2];
  double beta[4];

  for (std::size_t l = levels - 1; l-- > 0;) {
    const double t = f.t_nodes[l];
    const double dt = f.t_nodes[l + 1] - t;

    for (std::size_t iy = 0; iy < ny; ++iy)
      for (std::size_t ix = 0; ix < nx; ++ix) {
        xbuf[0] = f.x_nodes[ix];
        if (m == 2) xbuf[1] = f.y_nodes[iy];
        const std::span<const double> xs{xbuf, static_cast<std::size_t>(m)};
        problem.dynamics.eval_drift(t, xs, {alpha, static_cast<std::size_t>(m)});
        problem.dynamics.eval_beta(t, xs, {beta, static_cast<std::size_t>(m * m)});
        const double r = problem.rate(t, xs);

        double diag = -r;
        double lo = 0.0, up = 0.0, so = 0.0, no = 0.0;
        for (int axis = 0; axis < m; ++axis) {
          const double conv = alpha[axis];
          const double diff = 0.5 * beta[axis * m + axis];
          const double h = axis == 0 ? dx : dy;
          const std::size_t i = axis == 0 ? ix : iy;
          const std::size_t n_axis = axis == 0 ? nx : ny;
          double a_lo = 0.0, a_up = 0.0, a_di = 0.0;
          if (i == 0) {
            // Low edge: curvature dropped, one-sided convection into the grid.
            a_up = conv / h;
            a_di = -conv / h;
          } else if (i == n_axis - 1) {
            a_lo = -conv / h;
            a_di = conv / h;
          } else if (diff >= 0.5 * std::abs(conv) * h) {
            a_lo = diff / (h * h) - conv / (2.0 * h);
            a_up = diff / (h * h) + conv / (2.0 * h);
            a_di = -2.0 * diff / (h * h);
          } else if (conv > 0.0) {
            a_lo = diff / (h * h);
            a_up = diff / (h * h) + conv / h;
            a_di = -2.0 * diff / (h * h) - conv / h;
          } else {
            a_lo = diff / (h * h) - conv / h;
            a_up = diff / (h * h);
            a_di = -2.0 * diff / (h * h) + conv / h;
          }
          diag += a_di;
          if (axis == 0) {
            lo = a_lo;
            up = a_up;
          } else {
            so = a_lo;
            no = a_up;
          }
        }
        const std::size_t n = iy * nx + ix;
        md[n] = 1.0 - dt * diag;
        mlo[n] = -dt * lo;
        mup[n] = -dt * up;
        mso[n] = -dt * so;
        mno[n] = -dt * no;
        if (!(md[n] > 0.0))
          throw NumericError("stopping",
                             "non-positive diagonal in the implicit system; refine the grid");
      }

    const double* rhs = f.u.data() + (l + 1) * nodes;
    const double* gl = f.g.data() + l * nodes;
    std::copy(rhs, rhs + nodes, unew.begin());
    std::copy(gl, gl + nodes, obstacle.begin());
    for (std::size_t n = 0; n < nodes; ++n) unew[n] = std::max(unew[n], obstacle[n]);

    // Projected SOR sweeps in natural node order.
    std::size_t it = 0;
    for (; it < grid.psor_max_iters; ++it) {
      double worst = 0.0;
      for (std::size_t iy = 0; iy < ny; ++iy)
        for (std::size_t ix = 0; ix < nx; ++ix) {
          const std::size_t n = iy * nx + ix;
          double z = rhs[n];
          if (ix > 0) z -= mlo[n] * unew[n - 1];
          if (ix + 1 < nx) z -= mup[n] * unew[n + 1];
          if (m == 2 && iy > 0) z -= mso[n] * unew[n - nx];
          if (m == 2 && iy + 1 < ny) z -= mno[n] * unew[n + nx];
          z /= md[n];
          double v = unew[n] + grid.psor_omega * (z - unew[n]);
          v = std::max(v, obstacle[n]);
          worst = std::max(worst, std::abs(v - unew[n]));
          unew[n] = v;
        }
      if (worst <= grid.psor_tol) break;
    }
    if (it >= grid.psor_max_iters)
      throw NumericError("stopping", "projected SOR failed to converge");
    f.psor_total_iters += it + 1;
    f.psor_worst_level_iters = std::max(f.psor_worst_level_iters, it + 1);
    std::copy(unew.begin(), unew.end(), f.u.begin() + l * nodes);

    // Classify by complementarity: a cell is stopping where the clamp is
    // active, i.e. the unconstrained update from the converged field does not
    // stay above the obstacle.  The gap U - G alone cannot tell a binding
    // cell from one whose value is merely small -- far out of the money the
    // value decays below any absolute threshold while it is the equation,
    // not the obstacle, that holds it there.
    std::uint8_t* mask = f.continuation.data() + l * nodes;
    for (std::size_t iy = 0; iy < ny; ++iy)
      for (std::size_t ix = 0; ix < nx; ++ix) {
        const std::size_t n = iy * nx + ix;
        double z = rhs[n];
        if (ix > 0) z -= mlo[n] * unew[n - 1];
        if (ix + 1 < nx) z -= mup[n] * unew[n + 1];
        if (m == 2 && iy > 0) z -= mso[n] * unew[n - nx];
        if (m == 2 && iy + 1 < ny) z -= mno[n] * unew[n + nx];
        z /= md[n];
        const bool free_cell =
            unew[n] - obstacle[n] > grid.tol_gap || z > obstacle[n];
        mask[n] = free_cell ? 1 : 0;
      }
  }

  // The terminal level keeps its zero-filled mask: the value equals the gain
  // there by construction, so the whole level counts as stopping.

  // Shape diagnostics over interior columns.  The first and last node along
  // each axis use a one-sided stencil with the curvature dropped, so the
  // clamp can bind there as a pure domain-truncation artifact; those cells
  // say nothing about the geometry of the instance and are excluded.
  const std::size_t iy_lo = m == 2 ? 1 : 0;
  const std::size_t iy_hi = m == 2 ? ny - 2 : 0;
  for (std::size_t l = 0; l < levels; ++l)
    for (std::size_t iy = iy_lo; iy <= iy_hi; ++iy) {
      int transitions = 0;
      for (std::size_t ix = 2; ix + 1 < nx; ++ix)
        if (f.continuation_at(l, ix, iy) != f.continuation_at(l, ix - 1, iy))
          ++transitions;
      if (transitions > 1)
        f.multi_flip_columns.emplace_back(static_cast<int>(l), static_cast<int>(iy));
      if (f.stopping_below) {
        // Stopping cells above the first continuation cell break the shape.
        std::size_t first_c = nx;
        for (std::size_t ix = 1; ix + 1 < nx; ++ix)
          if (f.continuation_at(l, ix, iy)) {
            first_c = ix;
            break;
          }
        for (std::size_t ix = first_c; ix + 1 < nx; ++ix)
          if (!f.continuation_at(l, ix, iy)) ++f.island_cells;
      } else {
        std::size_t last_c = 0;
        bool any_c = false;
        for (std::size_t ix = 1; ix + 1 < nx; ++ix)
          if (f.continuation_at(l, ix, iy)) {
            last_c = ix;
            any_c = true;
          }
        if (any_c)
          for (std::size_t ix = 1; ix < last_c; ++ix)
            if (!f.continuation_at(l, ix, iy)) ++f.island_cells;
      }
    }

  return f;
}

BoundaryTable extract_boundary_table(const ValueField& field) {
  BoundaryTable table;
  table.t_nodes = field.t_nodes;
  if (field.dim == 2) {
    table.y_nodes = field.y_nodes;
    table.y_coord = 1;
  }
  const std::size_t nx = field.nx();
  const std::size_t ny = field.ny();
  table.values.assign(field.levels() * ny, 0.0);

  for (std::size_t l = 0; l < field.levels(); ++l)
    for (std::size_t iy = 0; iy < ny; ++iy) {
      double b;
      std::size_t flip = 0;  // upper index of the chosen stopping-side flip
      bool found = false;
      if (field.stopping_below) {
        for (std::size_t ix = 1; ix < nx; ++ix)
          if (field.continuation_at(l, ix, iy) && !field.continuation_at(l, ix - 1, iy)) {
            flip = ix;  // keep the largest
            found = true;
          }
      } else {
        for (std::size_t ix = 1; ix < nx; ++ix)
          if (!field.continuation_at(l, ix, iy) && field.continuation_at(l, ix - 1, iy)) {
            flip = ix;  // keep the smallest
            found = true;
            break;
          }
      }
      if (!found) {
        // No flip: the column is entirely one region; clamp to the box edge
        // on the side the missing region would sit.
        const bool all_stop = !field.continuation_at(l, 0, iy) &&
                              !field.continuation_at(l, nx - 1, iy);
        if (field.stopping_below)
          b = all_stop ? field.x_nodes.back() : field.x_nodes.front();
        else
          b = all_stop ? field.x_nodes.front() : field.x_nodes.back();
      } else {
        // Refine by interpolating the gap U - G to the detection threshold
        // between the stopping-side node and its continuation neighbour.
        const std::size_t ic = field.stopping_below ? flip : flip - 1;  // continuation
        const std::size_t is = field.stopping_below ? flip - 1 : flip;  // stopping
        const double gap_c = field.u[field.idx(l, ic, iy)] - field.g[field.idx(l, ic, iy)];
        const double gap_s = field.u[field.idx(l, is, iy)] - field.g[field.idx(l, is, iy)];
        const double denom = gap_c - gap_s;
        double w = denom > 0.0 ? (field.tol_gap - gap_s) / denom : 0.0;
        w = std::clamp(w, 0.0, 1.0);
        b = field.x_nodes[is] + w * (field.x_nodes[ic] - field.x_nodes[is]);
      }
      table.values[l * ny + iy] = b;
    }
  return table;
}

MonotoneSurface extract_boundary(const ValueField& field) {
  return tabulated_surface(field.dim, extract_boundary_table(field),
                           field.split_coord, field.stopping_below);
}

LFieldResult l_field(const ValueField& field, const StoppingProblem& problem) {
  const std::size_t nx = field.nx();
  const std::size_t ny = field.ny();
  const std::size_t levels = field.levels();
  const int m = field.dim;
  LFieldResult out;
  out.values.assign(field.u.size(), kNaN);

  const bool need_hess = [&] {
    for (std::size_t p = 0; p < field.continuation.size(); ++p)
      if (!field.continuation[p]) return true;
    return false;
  }();
  if (need_hess && !problem.has_gain_hessian())
    throw ConfigError("stopping", "gain second derivatives required on the stopping side");

  const double dx = field.x_nodes[1] - field.x_nodes[0];
  const double dy = m == 2 ? field.y_nodes[1] - field.y_nodes[0] : 1.0;

  double xbuf[2];
  double alpha[2];
  double beta[4];
  for (std::size_t l = 0; l < levels; ++l)
    for (std::size_t iy = 0; iy < ny; ++iy)
      for (std::size_t ix = 0; ix < nx; ++ix) {
        const std::size_t p = field.idx(l, ix, iy);
        const bool c = field.continuation[p] != 0;
        // One-cell exclusion band: any face neighbour in a different region.
        bool band = false;
        auto differs = [&](std::size_t q) { return (field.continuation[q] != 0) != c; };
        if (ix > 0 && differs(field.idx(l, ix - 1, iy))) band = true;
        if (ix + 1 < nx && differs(field.idx(l, ix + 1, iy))) band = true;
        if (m == 2 && iy > 0 && differs(field.idx(l, ix, iy - 1))) band = true;
        if (m == 2 && iy + 1 < ny && differs(field.idx(l, ix, iy + 1))) band = true;
        if (l > 0 && differs(field.idx(l - 1, ix, iy))) band = true;
        if (l + 1 < levels && differs(field.idx(l + 1, ix, iy))) band = true;
        if (band) {
          ++out.band_cells;
          continue;
        }

        xbuf[0] = field.x_nodes[ix];
        if (m == 2) xbuf[1] = field.y_nodes[iy];
        const std::span<const double> xs{xbuf, static_cast<std::size_t>(m)};
        const double t = field.t_nodes[l];
        double v;
        if (c) {
          // 2(rU - sum alpha^i U_{x_i} - U_t) from discrete derivatives.
          const double dt_lo = l > 0 ? field.t_nodes[l] - field.t_nodes[l - 1] : 0.0;
          const double dt_hi =
              l + 1 < levels ? field.t_nodes[l + 1] - field.t_nodes[l] : 0.0;
          double ut;
          if (l == 0)
            ut = (field.u[field.idx(1, ix, iy)] - field.u[p]) / dt_hi;
          else if (l + 1 == levels)
            ut = (field.u[p] - field.u[field.idx(l - 1, ix, iy)]) / dt_lo;
          else
            ut = (field.u[field.idx(l + 1, ix, iy)] -
                  field.u[field.idx(l - 1, ix, iy)]) /
                 (dt_lo + dt_hi);
          auto d_axis = [&](int axis) {
            const std::size_t i = axis == 0 ? ix : iy;
            const std::size_t n_axis = axis == 0 ? nx : ny;
            const double h = axis == 0 ? dx : dy;
            auto at = [&](std::size_t q) {
              return field.u[axis == 0 ? field.idx(l, q, iy) : field.idx(l, ix, q)];
            };
            if (i == 0) return (at(1) - at(0)) / h;
            if (i == n_axis - 1) return (at(i) - at(i - 1)) / h;
            return (at(i + 1) - at(i - 1)) / (2.0 * h);
          };
          problem.dynamics.eval_drift(t, xs, {alpha, static_cast<std::size_t>(m)});
          double conv = 0.0;
          for (int axis = 0; axis < m; ++axis) conv += alpha[axis] * d_axis(axis);
          v = 2.0 * (problem.rate(t, xs) * field.u[p] - conv - ut);
        } else {
          problem.dynamics.eval_beta(t, xs, {beta, static_cast<std::size_t>(m * m)});
          v = 0.0;
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
              v += beta[i * m + j] * problem.gain_dxx[i * m + j](t, xs);
        }
        out.values[p] = v;
        out.sup_abs = std::max(out.sup_abs, std::abs(v));
        ++out.evaluated_cells;
      }
  return out;
}

double first_entry_time(const MonotoneSurface& surface, const PathRecord& path) {
  for (std::size_t k = 0; k < path.times.size(); ++k)
    if (classify(surface, path.times[k], path.state(k)) == Region::Stopping)
      return path.times[k];
  return path.times.back();
}

double first_entry_time(const ValueField& field, const PathRecord& path) {
  for (std::size_t k = 0; k < path.times.size(); ++k) {
    const auto x = path.state(k);
    const std::size_t l = nearest(field.t_nodes, path.times[k]);
    const std::size_t ix = nearest(field.x_nodes, x[0]);
    const std::size_t iy = field.dim == 2 ? nearest(field.y_nodes, x[1]) : 0;
    if (!field.continuation_at(l, ix, iy)) return path.times[k];
  }
  return path.times.back();
}

namespace {

// Sampled monotonicity of fn along one axis (-1 = time): +1 non-decreasing,
// -1 non-increasing, 0 no detected change, nullopt mixed.
std::optional<int> sample_direction(
    const std::function<double(double, std::span<const double>)>& fn, int axis,
    int dim, const Box& box, std::size_t n_samples, Rng& rng, double tol) {
  bool up_ok = true, down_ok = true;
  double x[kMaxDim];
  for (std::size_t s = 0; s < n_samples; ++s) {
    double t = box.t_lo + (box.t_hi - box.t_lo) * rng.uniform();
    for (int k = 0; k < dim; ++k)
      x[k] = box.lo[k] + (box.hi[k] - box.lo[k]) * rng.uniform();
    const double v0 = fn(t, {x, static_cast<std::size_t>(dim)});
    if (axis < 0) {
      const double bump = (box.t_hi - box.t_lo) * 0.5 * rng.uniform();
      t = std::min(t + bump, box.t_hi);
    } else {
      const double bump = (box.hi[axis] - box.lo[axis]) * 0.5 * rng.uniform();
      x[axis] = std::min(x[axis] + bump, box.hi[axis]);
    }
    const double v1 = fn(t, {x, static_cast<std::size_t>(dim)});
    if (v1 - v0 > tol) down_ok = false;
    if (v0 - v1 > tol) up_ok = false;
  }
  if (up_ok && down_ok) return 0;
  if (up_ok) return 1;
  if (down_ok) return -1;
  return std::nullopt;
}

bool dir_at_most(std::optional<int> d, int bound) {
  return d.has_value() && (*d == 0 || *d == bound || (bound == 0 && *d == 0));
}

}  // namespace

MonotonicityCheck check_monotonicity_conditions(const StoppingProblem& problem,
                                                const Box& sample_box,
                                                std::size_t n_samples,
                                                std::uint64_t seed) {
  problem.validate();
  const int m = problem.dim();
  if (sample_box.dim() != m)
    throw ConfigError("stopping", "sample box dimension mismatch");

  MonotonicityCheck report;
  report.coord_dirs.assign(m, std::nullopt);

  if (problem.discount_rate) {
    report.refused_state_dependent_rate = true;
    report.notes.push_back(
        "state-dependent discount rate: shape predictions refused");
    return report;
  }

  Rng rng(seed);
  const double tol = 1e-9;
  const int split = 0;

  // Structural audit: time-homogeneous coefficients, per-coordinate
  // diffusion rows, constant non-negative BV loading, decoupled drifts of
  // the non-split coordinates, non-decreasing driver, declared regularity.
  report.structure_ok = true;
  auto fail = [&](const std::string& why) {
    report.structure_ok = false;
    report.notes.push_back(why);
  };

  if (!problem.dynamics.hints.drift_lipschitz)
    fail("drift Lipschitz hint not declared");
  if (!problem.dynamics.hints.diffusion_lipschitz &&
      !problem.dynamics.hints.diffusion_sqrt_modulus)
    fail("diffusion modulus hint not declared");

  {
    double x[kMaxDim], a0[kMaxDim], a1[kMaxDim];
    double s0[kMaxDim * kMaxDim], s1[kMaxDim * kMaxDim];
    bool time_hom = true, sigma_own_coord = true, drift_decoupled = true;
    for (std::size_t s = 0; s < n_samples; ++s) {
      for (int k = 0; k < m; ++k)
        x[k] = sample_box.lo[k] + (sample_box.hi[k] - sample_box.lo[k]) * rng.uniform();
      const std::span<const double> xs{x, static_cast<std::size_t>(m)};
      const double t0 = sample_box.t_lo +
                        (sample_box.t_hi - sample_box.t_lo) * rng.uniform();
      const double t1 = sample_box.t_lo +
                        (sample_box.t_hi - sample_box.t_lo) * rng.uniform();
      problem.dynamics.eval_drift(t0, xs, {a0, static_cast<std::size_t>(m)});
      problem.dynamics.eval_drift(t1, xs, {a1, static_cast<std::size_t>(m)});
      problem.dynamics.eval_diffusion(t0, xs, {s0, static_cast<std::size_t>(m * m)});
      problem.dynamics.eval_diffusion(t1, xs, {s1, static_cast<std::size_t>(m * m)});
      for (int k = 0; k < m; ++k)
        if (std::abs(a0[k] - a1[k]) > tol) time_hom = false;
      for (int k = 0; k < m * m; ++k)
        if (std::abs(s0[k] - s1[k]) > tol) time_hom = false;

      // Perturb one coordinate and watch which entries move.
      const int pert = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(m));
      double xp[kMaxDim];
      std::copy(x, x + m, xp);
      xp[pert] = sample_box.lo[pert] +
                 (sample_box.hi[pert] - sample_box.lo[pert]) * rng.uniform();
      const std::span<const double> xps{xp, static_cast<std::size_t>(m)};
      problem.dynamics.eval_diffusion(t0, xps, {s1, static_cast<std::size_t>(m * m)});
      for (int i = 0; i < m; ++i)
        if (i != pert)
          for (int j = 0; j < m; ++j)
            if (std::abs(s0[i * m + j] - s1[i * m + j]) > tol) sigma_own_coord = false;
      problem.dynamics.eval_drift(t0, xps, {a1, static_cast<std::size_t>(m)});
      for (int i = 0; i < m; ++i)
        if (i != split && i != pert && std::abs(a0[i] - a1[i]) > tol)
          drift_decoupled = false;
    }
    if (!time_hom) fail("coefficients are not time-homogeneous");
    if (!sigma_own_coord) fail("a diffusion row depends on a foreign coordinate");
    if (!drift_decoupled) fail("a non-split drift component is not decoupled");
  }

  bool bv_nonneg = true;
  if (problem.driver.active()) {
    if (problem.driver.mode == BVDriverSpec::Mode::Schedule) {
      for (const auto& j : problem.driver.jumps)
        for (double d : j.delta)
          if (d < 0.0) bv_nonneg = false;
      if (problem.driver.rate) {
        double x[kMaxDim], rate[kMaxDim];
        for (std::size_t s = 0; s < 16; ++s) {
          for (int k = 0; k < m; ++k)
            x[k] = sample_box.lo[k] +
                   (sample_box.hi[k] - sample_box.lo[k]) * rng.uniform();
          const double t = sample_box.t_lo +
                           (sample_box.t_hi - sample_box.t_lo) * rng.uniform();
          problem.driver.rate(t, {x, static_cast<std::size_t>(m)},
                              {rate, static_cast<std::size_t>(m)});
          for (int k = 0; k < m; ++k)
            if (rate[k] < -tol) bv_nonneg = false;
        }
      }
    } else if (problem.driver.mode == BVDriverSpec::Mode::Reflection &&
               problem.driver.reflection && problem.driver.reflection->direction != +1) {
      bv_nonneg = false;
    }
    if (!bv_nonneg) fail("BV driver is not non-decreasing");

    if (problem.dynamics.bv_loading) {
      double x[kMaxDim], g0[kMaxDim], g1[kMaxDim];
      bool gamma_const = true, gamma_nonneg = true;
      for (int k = 0; k < m; ++k)
        x[k] = 0.5 * (sample_box.lo[k] + sample_box.hi[k]);
      problem.dynamics.eval_bv_loading(sample_box.t_lo,
                                       {x, static_cast<std::size_t>(m)},
                                       {g0, static_cast<std::size_t>(m)});
      for (int k = 0; k < m; ++k)
        if (g0[k] < 0.0) gamma_nonneg = false;
      for (std::size_t s = 0; s < 16; ++s) {
        for (int k = 0; k < m; ++k)
          x[k] = sample_box.lo[k] +
                 (sample_box.hi[k] - sample_box.lo[k]) * rng.uniform();
        const double t = sample_box.t_lo +
                         (sample_box.t_hi - sample_box.t_lo) * rng.uniform();
        problem.dynamics.eval_bv_loading(t, {x, static_cast<std::size_t>(m)},
                                         {g1, static_cast<std::size_t>(m)});
        for (int k = 0; k < m; ++k)
          if (std::abs(g1[k] - g0[k]) > tol) gamma_const = false;
      }
      if (!gamma_const) fail("BV loading is not constant");
      if (!gamma_nonneg) fail("BV loading has a negative component");
    }
  }

  if (!report.structure_ok) return report;

  // Gain probes.
  const auto g_time = sample_direction(problem.gain, -1, m, sample_box,
                                       n_samples, rng, tol);
  bool g_split_only = true;
  for (int j = 0; j < m; ++j) {
    if (j == split) continue;
    const auto d = sample_direction(problem.gain, j, m, sample_box, n_samples, rng, tol);
    if (!dir_at_most(d, 0)) g_split_only = false;
  }
  const auto g_dir = sample_direction(problem.gain, split, m, sample_box,
                                      n_samples, rng, tol);

  auto alpha_split_dir = [&](int coord) {
    return sample_direction(
        [&](double t, std::span<const double> x) {
          double a[kMaxDim];
          problem.dynamics.eval_drift(t, x, {a, static_cast<std::size_t>(m)});
          return a[split];
        },
        coord, m, sample_box, n_samples, rng, tol);
  };

  // Orientation: conclusions below are derived for continuation above the
  // boundary; mirrored instances flip every coordinate direction.
  const bool flip_orientation = !problem.stopping_below;
  auto oriented = [&](bool non_increasing) {
    if (flip_orientation) non_increasing = !non_increasing;
    return non_increasing ? Direction::NonIncreasing : Direction::NonDecreasing;
  };

  bool route1 = false;
  if (g_time.has_value() && *g_time == 0 && g_split_only) {
    route1 = true;
    report.applicable = true;
    report.time_dir = Direction::NonDecreasing;
    report.notes.push_back("time-homogeneous gain: boundary non-decreasing in time");
    for (int j = 0; j < m; ++j) {
      if (j == split) continue;
      const auto a_dir = alpha_split_dir(j);
      if (!g_dir.has_value() || !a_dir.has_value()) {
        report.notes.push_back("inconclusive drift/gain direction for coordinate " +
                               std::to_string(j + 1));
        continue;
      }
      const int prod = (*g_dir) * (*a_dir);
      if (prod == 0) {
        report.coord_dirs[j] = oriented(false);
        report.notes.push_back("degenerate (flat) hypothesis for coordinate " +
                               std::to_string(j + 1));
      } else {
        report.coord_dirs[j] = oriented(prod > 0);
      }
    }
  }

  // Generator route for smooth gains: fill whatever the first route left open.
  if (problem.has_gain_gradient() && problem.has_gain_hessian()) {
    auto h_fn = [&](double t, std::span<const double> x) {
      return problem.h_value(t, x);
    };
    const auto h_time = sample_direction(h_fn, -1, m, sample_box, n_samples, rng, tol);

    if (!report.time_dir.has_value()) {
      bool gx_time_ok = true;
      if (problem.driver.active()) {
        for (int i = 0; i < m; ++i) {
          const auto d = sample_direction(problem.gain_dx[i], -1, m, sample_box,
                                          n_samples, rng, tol);
          if (!dir_at_most(d, -1)) gx_time_ok = false;
        }
      }
      if (dir_at_most(h_time, -1) && gx_time_ok) {
        report.applicable = true;
        report.time_dir = Direction::NonDecreasing;
        report.notes.push_back(
            "generator non-increasing in time: boundary non-decreasing in time");
      } else {
        report.notes.push_back("inconclusive time direction");
      }
    }

    const auto h_x1 = sample_direction(h_fn, split, m, sample_box, n_samples, rng, tol);
    for (int j = 0; j < m; ++j) {
      if (j == split || report.coord_dirs[j].has_value()) continue;
      const auto a_dir = alpha_split_dir(j);
      const auto h_xj = sample_direction(h_fn, j, m, sample_box, n_samples, rng, tol);
      if (!a_dir.has_value() || !h_x1.has_value() || !h_xj.has_value() || *a_dir == 0) {
        report.notes.push_back("inconclusive generator direction for coordinate " +
                               std::to_string(j + 1));
        continue;
      }
      const int s = *a_dir;
      // Sign of the generator change along coupled perturbed paths.
      int sigma = 0;
      if (s * *h_x1 >= 0 && *h_xj >= 0 && (*h_x1 != 0 || *h_xj != 0))
        sigma = +1;
      else if (s * *h_x1 <= 0 && *h_xj <= 0 && (*h_x1 != 0 || *h_xj != 0))
        sigma = -1;
      else if (*h_x1 == 0 && *h_xj == 0)
        sigma = 0;
      else {
        report.notes.push_back("mixed generator directions for coordinate " +
                               std::to_string(j + 1));
        continue;
      }
      if (problem.driver.active()) {
        // The BV term must move the same way as the generator term.
        bool gx_ok = true;
        for (int i = 0; i < m; ++i) {
          const auto q1 = sample_direction(problem.gain_dx[i], split, m, sample_box,
                                           n_samples, rng, tol);
          const auto qj = sample_direction(problem.gain_dx[i], j, m, sample_box,
                                           n_samples, rng, tol);
          if (!q1.has_value() || !qj.has_value()) {
            gx_ok = false;
            break;
          }
          int sig_g = 0;
          if (s * *q1 >= 0 && *qj >= 0 && (*q1 != 0 || *qj != 0))
            sig_g = +1;
          else if (s * *q1 <= 0 && *qj <= 0 && (*q1 != 0 || *qj != 0))
            sig_g = -1;
          if (sig_g != 0 && sigma != 0 && sig_g != sigma) gx_ok = false;
          if (sig_g == 0 && !(*q1 == 0 && *qj == 0)) gx_ok = false;
          if (sigma == 0) sigma = sig_g;
        }
        if (!gx_ok) {
          report.notes.push_back("gain-gradient directions conflict for coordinate " +
                                 std::to_string(j + 1));
          continue;
        }
      }
      report.applicable = true;
      if (sigma == 0) {
        report.coord_dirs[j] = oriented(false);
        report.notes.push_back("degenerate (flat) generator for coordinate " +
                               std::to_string(j + 1));
      } else {
        report.coord_dirs[j] = oriented(sigma > 0);
      }
    }
  } else if (!route1) {
    report.notes.push_back(
        "gain lacks the derivatives needed for the generator route");
  }

  return report;
}

DynkinReport dynkin_check(const StoppingProblem& problem,
                          const std::optional<MonotoneSurface>& stop_rule,
                          std::span<const double> x0, double dt,
                          std::size_t n_paths, std::uint64_t seed, int threads) {
  problem.validate();
  if (!problem.has_gain_gradient() || !problem.has_gain_hessian())
    throw ConfigError("stopping", "identity check needs gain derivatives");
  if (n_paths == 0) throw ConfigError("stopping", "need at least one path");
  const auto steps = static_cast<std::size_t>(std::llround(problem.horizon / dt));
  if (steps < 1) throw ConfigError("stopping", "step size exceeds the horizon");
  const std::vector<double> grid = uniform_grid(0.0, problem.horizon, steps);
  const int m = problem.dim();

  std::vector<double> lhs(n_paths), rhs(n_paths), diff(n_paths);
  parallel_for(n_paths, threads, [&](std::size_t i) {
    const PathRecord path =
        simulate_path(problem.dynamics, problem.driver, x0, grid, mix_seed(seed, i));
    std::size_t stop_k = path.steps();
    if (stop_rule) {
      for (std::size_t k = 0; k < path.times.size(); ++k)
        if (classify(*stop_rule, path.times[k], path.state(k)) == Region::Stopping) {
          stop_k = k;
          break;
        }
    }
    // Left-point accumulation of the discount exponent on the path grid.
    std::vector<double> pi(path.times.size(), 0.0);
    for (std::size_t k = 0; k + 1 < path.times.size(); ++k)
      pi[k + 1] = pi[k] + problem.rate(path.times[k], path.state(k)) *
                              (path.times[k + 1] - path.times[k]);

    double right = problem.gain(path.times.front(), path.state(0));
    double gamma[kMaxDim];
    for (std::size_t k = 0; k < stop_k; ++k) {
      const double t = path.times[k];
      const auto x = path.state(k);
      const double step_dt = path.times[k + 1] - t;
      const double disc = std::exp(-pi[k]);
      right += disc * problem.h_value(t, x) * step_dt;
      if (problem.dynamics.bv_loading) {
        const double* dac = path.bv_cont.data() + k * static_cast<std::size_t>(m);
        bool any = false;
        for (int c = 0; c < m; ++c)
          if (dac[c] != 0.0) any = true;
        if (any) {
          problem.dynamics.eval_bv_loading(t, x, {gamma, static_cast<std::size_t>(m)});
          for (int c = 0; c < m; ++c)
            right += disc * gamma[c] * problem.gain_dx[c](t, x) * dac[c];
        }
      }
    }
    for (const auto& jump : path.jumps) {
      if (jump.index > stop_k || jump.index == 0) continue;
      const double t = path.times[jump.index];
      const double disc = std::exp(-pi[jump.index]);
      right += disc * (problem.gain(t, path.state(jump.index)) -
                       problem.gain(t, {jump.state_before.data(),
                                        jump.state_before.size()}));
    }
    lhs[i] = std::exp(-pi[stop_k]) *
             problem.gain(path.times[stop_k], path.state(stop_k));
    rhs[i] = right;
    diff[i] = lhs[i] - rhs[i];
  });

  DynkinReport report;
  report.n_paths = n_paths;
  report.lhs_mean = mean_stats(lhs).mean;
  report.rhs_mean = mean_stats(rhs).mean;
  const MeanStats d = mean_stats(diff);
  report.diff_mean = d.mean;
  report.diff_stderr = d.stderr_mean;
  report.pass = std::abs(d.mean) <= 3.0 * d.stderr_mean;
  return report;
}

void write_value_csv(const ValueField& field, const std::filesystem::path& path) {
  std::vector<std::string> cols = {"t", "x1"};
  if (field.dim == 2) cols.push_back("x2");
  cols.insert(cols.end(), {"u", "gain", "continuation"});
  CsvWriter writer(path, cols);
  std::vector<double> row;
  for (std::size_t l = 0; l < field.levels(); ++l)
    for (std::size_t iy = 0; iy < field.ny(); ++iy)
      for (std::size_t ix = 0; ix < field.nx(); ++ix) {
        row.clear();
        row.push_back(field.t_nodes[l]);
        row.push_back(field.x_nodes[ix]);
        if (field.dim == 2) row.push_back(field.y_nodes[iy]);
        const std::size_t p = field.idx(l, ix, iy);
        row.push_back(field.u[p]);
        row.push_back(field.g[p]);
        row.push_back(field.continuation[p] ? 1.0 : 0.0);
        writer.row(row);
      }
}

void write_l_field_csv(const ValueField& field, const LFieldResult& l,
                       const std::filesystem::path& path) {
  std::vector<std::string> cols = {"t", "x1"};
  if (field.dim == 2) cols.push_back("x2");
  cols.push_back("l_value");
  CsvWriter writer(path, cols);
  std::vector<double> row;
  for (std::size_t lev = 0; lev < field.levels(); ++lev)
    for (std::size_t iy = 0; iy < field.ny(); ++iy)
      for (std::size_t ix = 0; ix < field.nx(); ++ix) {
        row.clear();
        row.push_back(field.t_nodes[lev]);
        row.push_back(field.x_nodes[ix]);
        if (field.dim == 2) row.push_back(field.y_nodes[iy]);
        row.push_back(l.values[field.idx(lev, ix, iy)]);
        writer.row(row);
      }
}

}  // namespace itokit
