#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "itokit/boundary.hpp"
#include "itokit/common.hpp"
#include "itokit/sde.hpp"

namespace itokit {

// Gauss-Legendre rule mapped to [0,1].  Nodes are interior, so integrands
// with kinks on cube faces are never sampled on the face itself.
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussLegendre gauss_legendre(int n);

// A scalar field U(t, x) given with its first derivatives (required) and,
// where it is twice differentiable, second derivatives.  `smooth_split`
// names the surface off which the second derivatives are valid; fields that
// are C^{1,2} everywhere leave it empty.  `domain`, when present, bounds the
// region the field may be evaluated on.
struct TestFunction {
  int dim = 1;
  ScalarFn value;
  ScalarFn dt;
  std::vector<ScalarFn> dx;   // size dim
  std::vector<ScalarFn> dxx;  // row-major dim*dim, empty when unavailable
  std::optional<MonotoneSurface> smooth_split;
  std::optional<Box> domain;

  bool has_hess() const { return !dxx.empty(); }
  void validate() const;
};

// Checks value/derivative consistency by central finite differences at
// random sample points; used to reject mis-declared fields.
struct DerivativeCheck {
  double worst_dt = 0.0;
  double worst_dx = 0.0;
  bool pass = true;
};
DerivativeCheck verify_derivatives(const TestFunction& f, const Box& box,
                                   std::size_t n_samples, std::uint64_t seed,
                                   double fd_step = 1e-5, double tol = 1e-4);

// Cube-average smoothing parameters: side 1/n, tensor-product Gauss-Legendre
// with quad_nodes points per axis.
struct MollifierConfig {
  int n = 8;
  int quad_nodes = 4;
  void validate() const;
};

// Average of U(t, .) over the forward cube x + [0, 1/n]^m.
double mollify_value(const TestFunction& f, const MollifierConfig& cfg, double t,
                     std::span<const double> x);

// Cube averages of U_t and of each U_{x_i}; these are exactly the time and
// space derivatives of the smoothed field.
struct MollifiedGradient {
  double dt = 0.0;
  std::vector<double> dx;
};
MollifiedGradient mollify_grad(const TestFunction& f, const MollifierConfig& cfg,
                               double t, std::span<const double> x);

// Face-difference second derivative: n times the average over the cube's
// remaining m-1 axes of U_{x_j} evaluated on the two faces x_i and x_i + 1/n.
// Needs first derivatives only, so it is defined across the split surface.
double mollify_hess(const TestFunction& f, const MollifierConfig& cfg, double t,
                    std::span<const double> x, int i, int j);

// Exact beta-weighted trace  sum_ij beta^{ij} U_{x_i x_j}  at a point.
// Returns nullopt when the point falls inside the exclusion band around the
// field's split surface (the caller is expected to skip it); requires the
// field to carry second derivatives.
std::optional<double> contraction_l(const TestFunction& f, const DiffusionSpec& spec,
                                    double t, std::span<const double> x,
                                    double band = 0.0);

// Sweep configuration for the smoothed-trace bound scan.
struct LScanConfig {
  std::vector<int> n_values = {4, 8, 16, 32, 64};
  int quad_nodes = 4;
  int grid_per_axis = 201;  // spatial lattice points per axis
  int grid_time = 1;        // time lattice points (1 = evaluate at t_lo)
  double band_factor = 2.0; // exclusion half-width = band_factor / n
};

struct LScanEntry {
  int n = 0;
  double max_abs = 0.0;
  double arg_t = 0.0;
  std::vector<double> arg_x;
};

struct LScanReport {
  std::vector<LScanEntry> entries;
  double median_max = 0.0;
  double max_over_n = 0.0;
  double last_over_median = 0.0;
  bool bounded = false;  // max over n within 10% of the median
};

// For each n in the sweep, scans |sum_ij beta^{ij} * mollify_hess(i,j)| over
// a lattice on `box` minus the per-n exclusion band and records the maximum.
// A flat sequence of maxima is the numerical signature that the smoothed
// trace admits an n-independent bound even where individual second
// derivatives blow up.
LScanReport scan_l_bound(const TestFunction& f, const DiffusionSpec& spec,
                         const Box& box, const LScanConfig& cfg, int threads = 1);

void write_l_scan_csv(const LScanReport& report, const std::filesystem::path& path);

}  // namespace itokit
