#include "itokit/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "itokit/csv.hpp"
#include "itokit/rng.hpp"

namespace itokit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxDim = 8;

// Copies the non-split coordinates of x into rest (stack buffer upstream).
void extract_rest(std::span<const double> x, int split, std::span<double> rest) {
  std::size_t c = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (static_cast<int>(i) != split) rest[c++] = x[i];
}

}  // namespace

double MonotoneSurface::eval_state(double t, std::span<const double> x) const {
  double rest[kMaxDim];
  extract_rest(x, split_coord, {rest, static_cast<std::size_t>(dim > 0 ? dim - 1 : 0)});
  return eval_fn(t, {rest, static_cast<std::size_t>(dim - 1)});
}

bool MonotoneSurface::member_c(double t, std::span<const double> x) const {
  const double b = eval_state(t, x);
  return c_above ? x[split_coord] > b : x[split_coord] < b;
}

void MonotoneSurface::validate() const {
  if (dim < 1) throw ConfigError("boundary", "surface dimension must be >= 1");
  if (dim > kMaxDim) throw ConfigError("boundary", "surface dimension too large");
  if (split_coord < 0 || split_coord >= dim)
    throw ConfigError("boundary", "split coordinate out of range");
  if (static_cast<int>(coord_dirs.size()) != dim)
    throw ConfigError("boundary", "coord_dirs must have one entry per coordinate");
  if (!eval_fn) throw ConfigError("boundary", "surface has no eval function");
}

Region classify(const MonotoneSurface& surface, double t, std::span<const double> x,
                double band) {
  const double b = surface.eval_state(t, x);
  const double xs = x[surface.split_coord];
  if (std::isnan(b)) throw NumericError("boundary", "surface evaluated to NaN");
  // Signed distance into C; +-inf surfaces put every point deep in one region.
  double toward_c;
  if (std::isinf(b)) {
    toward_c = (surface.c_above == (b < 0)) ? kInf : -kInf;
  } else {
    toward_c = surface.c_above ? xs - b : b - xs;
  }
  if (band > 0.0 && toward_c > -band && toward_c <= band) return Region::Band;
  return toward_c > 0.0 ? Region::Continuation : Region::Stopping;
}

MonotoneSurface shift_eps(const MonotoneSurface& surface, double eps) {
  surface.validate();
  if (!(eps >= 0.0)) throw ConfigError("boundary", "eps must be >= 0");
  MonotoneSurface out = surface;
  const double toward = surface.c_above ? eps : -eps;
  // Per-argument shifts: along each argument's non-decreasing direction when C
  // is above (so the value can only move up), mirrored when C is below.
  std::vector<double> arg_shift;
  arg_shift.reserve(surface.dim - 1);
  for (int i = 0; i < surface.dim; ++i) {
    if (i == surface.split_coord) continue;
    const double s =
        surface.coord_dirs[i] == Direction::NonDecreasing ? toward : -toward;
    arg_shift.push_back(s);
  }
  const double t_shift =
      surface.time_dir == Direction::NonDecreasing ? toward : -toward;
  out.eval_fn = [base = surface.eval_fn, arg_shift, t_shift, toward](
                    double t, std::span<const double> rest) {
    double shifted[kMaxDim];
    for (std::size_t i = 0; i < rest.size(); ++i) shifted[i] = rest[i] + arg_shift[i];
    return base(t + t_shift, {shifted, rest.size()}) + toward;
  };
  return out;
}

MonotoneSurface generalized_inverse(const MonotoneSurface& surface, int target_coord,
                                    const Box& range, int bisect_iters) {
  surface.validate();
  if (target_coord < 0 || target_coord >= surface.dim || target_coord == surface.split_coord)
    throw ConfigError("boundary", "inverse target must be a non-split coordinate");
  if (range.dim() != surface.dim)
    throw ConfigError("boundary", "bisection range dimension mismatch");
  if (bisect_iters < 8) throw ConfigError("boundary", "bisection needs >= 8 iterations");

  const Direction dir_target = surface.coord_dirs[target_coord];
  // Membership in C is monotone along the target coordinate; the sup form
  // applies when it is non-increasing there (section = lower ray), the inf
  // form when it is non-decreasing (section = upper ray).
  const bool sup_form = surface.c_above == (dir_target == Direction::NonDecreasing);

  MonotoneSurface out;
  out.dim = surface.dim;
  out.split_coord = target_coord;
  out.c_above = !sup_form;
  out.coord_dirs.assign(surface.dim, Direction::NonDecreasing);

  // Whether raising an argument enlarges the section in the target coordinate.
  auto enlarges = [&](int coord) {
    if (coord == surface.split_coord) return surface.c_above;
    return surface.c_above == (surface.coord_dirs[coord] == Direction::NonIncreasing);
  };
  for (int i = 0; i < surface.dim; ++i) {
    if (i == target_coord) continue;
    const bool grow = enlarges(i);
    out.coord_dirs[i] = (sup_form == grow) ? Direction::NonDecreasing
                                           : Direction::NonIncreasing;
  }
  {
    const bool grow =
        surface.c_above == (surface.time_dir == Direction::NonIncreasing);
    out.time_dir =
        (sup_form == grow) ? Direction::NonDecreasing : Direction::NonIncreasing;
  }

  const double lo = range.lo[target_coord];
  const double hi = range.hi[target_coord];
  if (!(hi > lo)) throw ConfigError("boundary", "empty bisection range");

  out.eval_fn = [src = surface, target_coord, lo, hi, bisect_iters, sup_form](
                    double t, std::span<const double> rest) {
    // Rebuild a full state: coordinates of the new surface's arguments plus a
    // slot for the target.  `rest` lists coordinates except target_coord.
    double state[kMaxDim];
    std::size_t c = 0;
    for (int i = 0; i < src.dim; ++i) {
      if (i == target_coord) continue;
      state[i] = rest[c++];
    }
    auto member = [&](double v) {
      state[target_coord] = v;
      return src.member_c(t, {state, static_cast<std::size_t>(src.dim)});
    };
    const bool m_lo = member(lo);
    const bool m_hi = member(hi);
    // The section is a lower ray under the sup form (member at lo first) and
    // an upper ray under the inf form.
    if (m_lo && m_hi) return sup_form ? kInf : -kInf;
    if (!m_lo && !m_hi) return sup_form ? -kInf : kInf;
    if (m_lo != sup_form)
      throw NumericError("boundary",
                         "section not monotone over the declared range "
                         "(range too small or flags wrong)");
    double a = lo, b = hi;  // membership differs between a and b
    for (int it = 0; it < bisect_iters; ++it) {
      const double mid = 0.5 * (a + b);
      if (member(mid) == m_lo)
        a = mid;
      else
        b = mid;
    }
    // Return the certified member endpoint: a for the sup form (member side
    // below), b for the inf form (member side above).
    return sup_form ? a : b;
  };
  return out;
}

MonotoneReport verify_monotone(const MonotoneSurface& surface, const Box& box,
                               std::size_t n_samples, std::uint64_t seed, double tol) {
  surface.validate();
  if (box.dim() != surface.dim)
    throw ConfigError("boundary", "sample box dimension mismatch");
  Rng rng(seed);
  MonotoneReport rep;

  auto sample_args = [&](double* t, double* rest) {
    *t = box.t_lo + (box.t_hi - box.t_lo) * rng.uniform();
    std::size_t c = 0;
    for (int i = 0; i < surface.dim; ++i) {
      if (i == surface.split_coord) continue;
      rest[c++] = box.lo[i] + (box.hi[i] - box.lo[i]) * rng.uniform();
    }
  };

  // diff of eval under a bump of one argument; inf-inf counts as no change.
  auto signed_change = [&](double base, double bumped) {
    if (std::isinf(base) && std::isinf(bumped) && base == bumped) return 0.0;
    return bumped - base;
  };

  const std::size_t n_rest = static_cast<std::size_t>(surface.dim - 1);
  std::vector<MonotoneReport::Axis> axes;
  axes.push_back({"t", 0.0});
  for (int i = 0; i < surface.dim; ++i)
    if (i != surface.split_coord) axes.push_back({"x" + std::to_string(i + 1), 0.0});

  double rest[kMaxDim], bumped[kMaxDim];
  for (std::size_t s = 0; s < n_samples; ++s) {
    double t;
    sample_args(&t, rest);
    const double base = surface.eval(t, {rest, n_rest});

    // time axis
    {
      const double h = (box.t_hi - box.t_lo) * rng.uniform();
      const double v = surface.eval(t + h, {rest, n_rest});
      double d = signed_change(base, v);
      if (surface.time_dir == Direction::NonIncreasing) d = -d;
      axes[0].worst_violation = std::max(axes[0].worst_violation, -d);
    }
    // coordinate axes
    std::size_t axis = 1, c = 0;
    for (int i = 0; i < surface.dim; ++i) {
      if (i == surface.split_coord) continue;
      std::copy(rest, rest + n_rest, bumped);
      const double h = (box.hi[i] - box.lo[i]) * rng.uniform();
      bumped[c] = rest[c] + h;
      const double v = surface.eval(t, {bumped, n_rest});
      double d = signed_change(base, v);
      if (surface.coord_dirs[i] == Direction::NonIncreasing) d = -d;
      axes[axis].worst_violation = std::max(axes[axis].worst_violation, -d);
      ++axis;
      ++c;
    }
  }
  rep.axes = std::move(axes);
  for (const auto& a : rep.axes) rep.worst = std::max(rep.worst, a.worst_violation);
  rep.pass = rep.worst <= tol;
  return rep;
}

MonotoneSurface constant_surface(int dim, double level, int split_coord, bool c_above) {
  MonotoneSurface s;
  s.dim = dim;
  s.split_coord = split_coord;
  s.c_above = c_above;
  s.coord_dirs.assign(dim, Direction::NonDecreasing);
  s.eval_fn = [level](double, std::span<const double>) { return level; };
  return s;
}

MonotoneSurface affine_surface(int dim, double intercept, double t_slope,
                               std::vector<double> coord_slopes, int split_coord,
                               bool c_above) {
  if (static_cast<int>(coord_slopes.size()) != dim)
    throw ConfigError("boundary", "affine surface needs one slope per coordinate");
  MonotoneSurface s;
  s.dim = dim;
  s.split_coord = split_coord;
  s.c_above = c_above;
  s.time_dir = t_slope >= 0.0 ? Direction::NonDecreasing : Direction::NonIncreasing;
  s.coord_dirs.assign(dim, Direction::NonDecreasing);
  std::vector<double> rest_slopes;
  for (int i = 0; i < dim; ++i) {
    if (i == split_coord) continue;
    s.coord_dirs[i] = coord_slopes[i] >= 0.0 ? Direction::NonDecreasing
                                             : Direction::NonIncreasing;
    rest_slopes.push_back(coord_slopes[i]);
  }
  s.eval_fn = [intercept, t_slope, rest_slopes](double t, std::span<const double> rest) {
    double v = intercept + t_slope * t;
    for (std::size_t i = 0; i < rest.size(); ++i) v += rest_slopes[i] * rest[i];
    return v;
  };
  return s;
}

MonotoneSurface open_surface(int dim, int split_coord) {
  MonotoneSurface s = constant_surface(dim, -kInf, split_coord, true);
  return s;
}

void BoundaryTable::validate() const {
  if (t_nodes.size() < 1) throw ConfigError("boundary", "table needs time nodes");
  for (std::size_t i = 0; i + 1 < t_nodes.size(); ++i)
    if (!(t_nodes[i + 1] > t_nodes[i]))
      throw ConfigError("boundary", "table time nodes must increase");
  for (std::size_t i = 0; i + 1 < y_nodes.size(); ++i)
    if (!(y_nodes[i + 1] > y_nodes[i]))
      throw ConfigError("boundary", "table coordinate nodes must increase");
  const std::size_t ny = y_nodes.empty() ? 1 : y_nodes.size();
  if (values.size() != t_nodes.size() * ny)
    throw ConfigError("boundary", "table value count mismatch");
}

namespace {

// Clamped linear interpolation weight lookup on a sorted axis.
void locate(const std::vector<double>& nodes, double v, std::size_t* i0, double* w) {
  if (nodes.size() == 1 || v <= nodes.front()) {
    *i0 = 0;
    *w = 0.0;
    return;
  }
  if (v >= nodes.back()) {
    *i0 = nodes.size() - 2;
    *w = 1.0;
    return;
  }
  const auto it = std::upper_bound(nodes.begin(), nodes.end(), v);
  *i0 = static_cast<std::size_t>(it - nodes.begin()) - 1;
  *w = (v - nodes[*i0]) / (nodes[*i0 + 1] - nodes[*i0]);
}

}  // namespace

double BoundaryTable::at(double t, double y) const {
  std::size_t it0;
  double wt;
  locate(t_nodes, t, &it0, &wt);
  const std::size_t ny = y_nodes.empty() ? 1 : y_nodes.size();
  auto row = [&](std::size_t it) {
    if (y_nodes.empty()) return values[it];
    std::size_t iy0;
    double wy;
    locate(y_nodes, y, &iy0, &wy);
    const double* r = values.data() + it * ny;
    if (y_nodes.size() == 1) return r[0];
    return (1.0 - wy) * r[iy0] + wy * r[iy0 + 1];
  };
  if (t_nodes.size() == 1) return row(0);
  return (1.0 - wt) * row(it0) + wt * row(it0 + 1);
}

MonotoneSurface tabulated_surface(int dim, BoundaryTable table, int split_coord,
                                  bool c_above) {
  table.validate();
  if (!table.y_nodes.empty()) {
    if (table.y_coord < 0 || table.y_coord >= dim || table.y_coord == split_coord)
      throw ConfigError("boundary", "table y_coord out of range");
  }
  MonotoneSurface s;
  s.dim = dim;
  s.split_coord = split_coord;
  s.c_above = c_above;
  s.coord_dirs.assign(dim, Direction::NonDecreasing);

  // Infer flags from the table so classify/verify agree with the data.
  auto axis_dir = [](auto value_at, std::size_t n) {
    double up = 0.0, down = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double d = value_at(i + 1) - value_at(i);
      up = std::max(up, -d);
      down = std::max(down, d);
    }
    return up <= down ? Direction::NonDecreasing : Direction::NonIncreasing;
  };
  const std::size_t ny = table.y_nodes.empty() ? 1 : table.y_nodes.size();
  s.time_dir = axis_dir(
      [&](std::size_t i) {
        double acc = 0.0;
        for (std::size_t y = 0; y < ny; ++y) acc += table.values[i * ny + y];
        return acc;
      },
      table.t_nodes.size());
  if (!table.y_nodes.empty()) {
    s.coord_dirs[table.y_coord] = axis_dir(
        [&](std::size_t y) {
          double acc = 0.0;
          for (std::size_t i = 0; i < table.t_nodes.size(); ++i)
            acc += table.values[i * ny + y];
          return acc;
        },
        ny);
  }

  // Which rest-slot the y coordinate occupies after dropping the split coord.
  int y_slot = -1;
  if (!table.y_nodes.empty()) {
    int c = 0;
    for (int i = 0; i < dim; ++i) {
      if (i == split_coord) continue;
      if (i == table.y_coord) y_slot = c;
      ++c;
    }
  }
  s.eval_fn = [tbl = std::move(table), y_slot](double t, std::span<const double> rest) {
    const double y = y_slot >= 0 ? rest[y_slot] : 0.0;
    return tbl.at(t, y);
  };
  return s;
}

BoundaryTable read_boundary_table(const std::filesystem::path& path) {
  const CsvTable csv = read_csv(path);
  BoundaryTable tbl;
  const int it = csv.column_index("t");
  const int ib = csv.column_index("b");
  const int iy = csv.column_index("y");
  if (it < 0 || ib < 0)
    throw ConfigError("boundary", path.string() + ": needs columns t and b");
  if (iy < 0) {
    for (const auto& row : csv.rows) {
      tbl.t_nodes.push_back(row[it]);
      tbl.values.push_back(row[ib]);
    }
  } else {
    // Rows must enumerate a full t x y lattice (t-major).
    for (const auto& row : csv.rows) {
      if (tbl.t_nodes.empty() || row[it] > tbl.t_nodes.back())
        tbl.t_nodes.push_back(row[it]);
      if (tbl.t_nodes.size() == 1) tbl.y_nodes.push_back(row[iy]);
      tbl.values.push_back(row[ib]);
    }
    tbl.y_coord = 1;
  }
  tbl.validate();
  return tbl;
}

void write_boundary_table(const BoundaryTable& table, const std::filesystem::path& path) {
  table.validate();
  if (table.y_nodes.empty()) {
    std::vector<std::string> cols = {"t", "b"};
    CsvWriter w(path, cols);
    for (std::size_t i = 0; i < table.t_nodes.size(); ++i) {
      const double row[2] = {table.t_nodes[i], table.values[i]};
      w.row(row);
    }
    return;
  }
  std::vector<std::string> cols = {"t", "y", "b"};
  CsvWriter w(path, cols);
  for (std::size_t i = 0; i < table.t_nodes.size(); ++i)
    for (std::size_t y = 0; y < table.y_nodes.size(); ++y) {
      const double row[3] = {table.t_nodes[i], table.y_nodes[y],
                             table.values[i * table.y_nodes.size() + y]};
      w.row(row);
    }
}

}  // namespace itokit
