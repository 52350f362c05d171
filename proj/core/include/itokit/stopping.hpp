#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "itokit/boundary.hpp"
#include "itokit/common.hpp"
#include "itokit/sde.hpp"

namespace itokit {

// Finite-horizon optimal stopping instance: gain field G with its
// derivatives where available, constant discount (or a state-dependent rate,
// which the monotonicity checker refuses), horizon, and dynamics.
// `stopping_below` orients the geometry: the stopping region sits below the
// boundary in the split coordinate (so continuation lies above it).
struct StoppingProblem {
  ScalarFn gain;
  ScalarFn gain_dt;                // optional unless H or the D-side trace is needed
  std::vector<ScalarFn> gain_dx;   // size dim when present, else empty
  std::vector<ScalarFn> gain_dxx;  // row-major dim*dim when present, else empty
  double discount = 0.0;
  std::optional<ScalarFn> discount_rate;  // overrides `discount` when set
  double horizon = 1.0;
  DiffusionSpec dynamics;
  BVDriverSpec driver;
  bool stopping_below = true;

  int dim() const { return dynamics.dim; }
  bool has_gain_gradient() const {
    return static_cast<bool>(gain_dt) && !gain_dx.empty();
  }
  bool has_gain_hessian() const { return !gain_dxx.empty(); }
  double rate(double t, std::span<const double> x) const;
  // Generator applied to the gain minus the discount term:
  //   G_t + 1/2 sum beta^{ij} G_{x_i x_j} + sum alpha^i G_{x_i} - r G.
  double h_value(double t, std::span<const double> x) const;
  void validate() const;
};

// Grid for the backward variational-inequality sweep.  `nx` nodes span the
// split coordinate, `ny` the second coordinate (two-dimensional instances
// only), and `nt` time steps cover [0, horizon].
struct SolveGrid {
  Box box;  // spatial window; the time range is taken from the problem
  int nx = 200;
  int ny = 1;
  int nt = 200;
  double tol_gap = 1e-7;       // continuation detection threshold on U - G
  double psor_omega = 1.5;     // relaxation factor
  double psor_tol = 1e-8;      // sweep convergence tolerance
  std::size_t psor_max_iters = 100000;
  void validate(int dim) const;
};

// Solved value function on the tensor grid, with the continuation mask and
// shape diagnostics.  Layout is level-major: index (l, ix, iy) maps to
// l*nx*ny + iy*nx + ix.
struct ValueField {
  int dim = 1;
  int split_coord = 0;
  bool stopping_below = true;
  double tol_gap = 1e-7;
  std::vector<double> t_nodes;
  std::vector<double> x_nodes;
  std::vector<double> y_nodes;  // empty for one-dimensional instances
  std::vector<double> u;
  std::vector<double> g;  // gain sampled on the same grid
  // Nonzero where the cell is free: the converged implicit update stays
  // above the gain, or clears it by more than tol_gap.  Cells where the
  // obstacle clamp binds are stopping; the terminal level is all stopping.
  std::vector<std::uint8_t> continuation;

  std::size_t psor_total_iters = 0;
  std::size_t psor_worst_level_iters = 0;
  // Columns whose mask flips more than once along the split axis, as
  // (level, column) pairs; island_cells counts mask cells breaking the
  // single-threshold shape.  Both scans cover interior nodes only (edge
  // stencils are one-sided, so the clamp can bind there as a truncation
  // artifact).  Flagged, never repaired.
  std::vector<std::pair<int, int>> multi_flip_columns;
  std::size_t island_cells = 0;

  std::size_t nx() const { return x_nodes.size(); }
  std::size_t ny() const { return y_nodes.empty() ? 1 : y_nodes.size(); }
  std::size_t levels() const { return t_nodes.size(); }
  std::size_t idx(std::size_t l, std::size_t ix, std::size_t iy = 0) const {
    return (l * ny() + iy) * nx() + ix;
  }
  bool continuation_at(std::size_t l, std::size_t ix, std::size_t iy = 0) const {
    return continuation[idx(l, ix, iy)] != 0;
  }
  // Multilinear interpolation in (t, x[, y]), clamped to the grid.
  double value_at(double t, std::span<const double> x) const;
};

// Backward implicit sweep solving the discrete obstacle problem
// max(U_t + alpha U_x + 1/2 beta U_xx - r U, G - U) = 0 by projected SOR.
// Requires a driver-free instance and diagonal diffusion for dim == 2.
ValueField solve_value(const StoppingProblem& problem, const SolveGrid& grid);

// Per-column boundary samples: the largest stopping-to-continuation flip
// along the split axis, refined by interpolating U - G to the detection
// threshold.  All-stopping (all-continuation) columns clamp to the upper
// (lower) box edge.
BoundaryTable extract_boundary_table(const ValueField& field);
MonotoneSurface extract_boundary(const ValueField& field);

// The diffusion-weighted curvature field of the solved instance: on the
// continuation side 2(rU - sum alpha^i U_{x_i} - U_t) from discrete
// derivatives of U, on the stopping side sum beta^{ij} G_{x_i x_j} from the
// gain's second derivatives.  Cells adjacent to a mask change are skipped.
struct LFieldResult {
  std::vector<double> values;  // NaN on skipped cells, same layout as u
  double sup_abs = 0.0;
  std::size_t band_cells = 0;
  std::size_t evaluated_cells = 0;
};
LFieldResult l_field(const ValueField& field, const StoppingProblem& problem);

// First grid time at which the path's state enters the stopping region;
// returns the final path time when it never does.
double first_entry_time(const MonotoneSurface& surface, const PathRecord& path);
double first_entry_time(const ValueField& field, const PathRecord& path);

// Numerical audit of the structural hypotheses behind the boundary-shape
// predictions, and the directions they imply.  Instances with a
// state-dependent discount rate are refused (reported, not classified).
struct MonotonicityCheck {
  bool applicable = false;
  bool refused_state_dependent_rate = false;
  bool structure_ok = false;
  std::optional<Direction> time_dir;
  std::vector<std::optional<Direction>> coord_dirs;  // per state coordinate
  std::vector<std::string> notes;
};
MonotonicityCheck check_monotonicity_conditions(const StoppingProblem& problem,
                                                const Box& sample_box,
                                                std::size_t n_samples,
                                                std::uint64_t seed);

// Monte Carlo check of the expectation identity
//   E[e^{-P_tau} G(tau, X_tau)] = G(0, x0)
//     + E[int_0^tau e^{-P_s} H ds + sum_i int_0^tau e^{-P_s} gamma^i G_{x_i} dA^{c,i}
//         + sum_{s<=tau} e^{-P_s} (G(s, X_s) - G(s, X_{s-}))]
// with P the accumulated discount.  `stop_rule` stops at first entry into
// the stopping region; without it the rule is "hold to the horizon".
struct DynkinReport {
  double lhs_mean = 0.0;
  double rhs_mean = 0.0;
  double diff_mean = 0.0;
  double diff_stderr = 0.0;
  std::size_t n_paths = 0;
  bool pass = false;
};
DynkinReport dynkin_check(const StoppingProblem& problem,
                          const std::optional<MonotoneSurface>& stop_rule,
                          std::span<const double> x0, double dt,
                          std::size_t n_paths, std::uint64_t seed,
                          int threads = 1);

void write_value_csv(const ValueField& field, const std::filesystem::path& path);
void write_l_field_csv(const ValueField& field, const LFieldResult& l,
                       const std::filesystem::path& path);

}  // namespace itokit
