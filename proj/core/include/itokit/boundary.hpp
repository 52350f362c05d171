#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "itokit/common.hpp"

namespace itokit {

enum class Direction { NonDecreasing, NonIncreasing };

inline Direction flip(Direction d) {
  return d == Direction::NonDecreasing ? Direction::NonIncreasing
                                       : Direction::NonDecreasing;
}

enum class Region { Continuation, Stopping, Band };

// A surface x_s = b(t, x_{-s}) splitting the state space into an open region C
// and its closed complement D, monotone in time and in every remaining
// coordinate.  `c_above == true` places C at {x_s > b}.  eval_fn receives the
// non-split coordinates in their natural order and may return +-infinity.
struct MonotoneSurface {
  int dim = 1;
  int split_coord = 0;
  bool c_above = true;
  Direction time_dir = Direction::NonDecreasing;
  std::vector<Direction> coord_dirs;  // size dim, entry split_coord unused
  std::function<double(double, std::span<const double>)> eval_fn;

  double eval(double t, std::span<const double> rest) const { return eval_fn(t, rest); }
  // Evaluates at a full state vector, extracting the non-split coordinates.
  double eval_state(double t, std::span<const double> x) const;
  bool member_c(double t, std::span<const double> x) const;
  void validate() const;
};

// Region of a point with a symmetric exclusion band of half-width `band`
// around the surface.  With band == 0 the split is exact and D keeps the
// boundary: x_s == b classifies as Stopping.
Region classify(const MonotoneSurface& surface, double t, std::span<const double> x,
                double band = 0.0);

// Monotone inward shift: every argument moves by eps in the direction that
// cannot decrease the value (per its declared monotonicity) and the result is
// offset by eps toward C, so the shifted region's closure sits strictly
// inside C and the family decreases back to the original as eps -> 0.
MonotoneSurface shift_eps(const MonotoneSurface& surface, double eps);

// Generalized inverse: re-expresses the region split as a threshold in
// `target_coord`.  The sup/inf form and the monotonicity flags of the result
// follow from the declared flags; the threshold itself is located by a
// monotone bisection over the declared range (+-infinity when the section in
// that coordinate is empty or full).
MonotoneSurface generalized_inverse(const MonotoneSurface& surface, int target_coord,
                                    const Box& range, int bisect_iters = 60);

struct MonotoneReport {
  struct Axis {
    std::string name;
    double worst_violation = 0.0;
  };
  std::vector<Axis> axes;
  double worst = 0.0;
  bool pass = true;
};

// Samples random axis-aligned pairs in `box` and reports the worst violation
// of each declared monotonicity flag.
MonotoneReport verify_monotone(const MonotoneSurface& surface, const Box& box,
                               std::size_t n_samples, std::uint64_t seed,
                               double tol = 1e-12);

MonotoneSurface constant_surface(int dim, double level, int split_coord = 0,
                                 bool c_above = true);

// b = intercept + t_slope * t + sum_j coord_slopes[j] * x_j (entry for the
// split coordinate ignored); monotonicity flags derived from the slope signs.
MonotoneSurface affine_surface(int dim, double intercept, double t_slope,
                               std::vector<double> coord_slopes, int split_coord = 0,
                               bool c_above = true);

// Everything-is-C sentinel used when no boundary is in play.
MonotoneSurface open_surface(int dim, int split_coord = 0);

// Rectangular table interpolated multilinearly and clamped outside the grid.
// Axis 0 is time; an optional second axis spans one non-split coordinate.
struct BoundaryTable {
  std::vector<double> t_nodes;
  std::vector<double> y_nodes;  // empty for a time-only table
  int y_coord = -1;             // state coordinate of the second axis
  std::vector<double> values;   // t-major: values[it * max(1,|y|) + iy]

  double at(double t, double y = 0.0) const;
  void validate() const;
};

MonotoneSurface tabulated_surface(int dim, BoundaryTable table, int split_coord = 0,
                                  bool c_above = true);

// Loads a BoundaryTable from CSV with columns (t,b) or (t,y,b).
BoundaryTable read_boundary_table(const std::filesystem::path& path);
void write_boundary_table(const BoundaryTable& table, const std::filesystem::path& path);

}  // namespace itokit
