// Coupled simulation of two scalar SDEs sharing noise and a bounded-variation
// input, with ordered drifts: pathwise-ordering reports, coefficient-regularity
// checks, and the shift-invariance reduction used to remove the BV input.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "itokit/common.hpp"
#include "itokit/sde.hpp"

namespace itokit {

// Scalar coefficient of one leg; `aux` is the state of an auxiliary path that
// plays the role of extra randomness in the coefficients (empty when unused).
using LegFn = std::function<double(double t, double y, std::span<const double> aux)>;

// Modulus of continuity h for the shared diffusion coefficient.
struct Modulus {
  enum class Kind { Linear, SquareRoot, Holder, Custom };
  Kind kind = Kind::Linear;
  double scale = 1.0;     // multiplicative constant
  double exponent = 1.0;  // Holder exponent (Kind::Holder only)
  std::function<double(double)> custom;  // Kind::Custom only

  double operator()(double u) const;

  // Whether ∫_0 h(u)^{-2} du diverges — the condition that makes the ordering
  // argument work. Decided symbolically for the built-in kinds; nullopt for
  // custom moduli (unverifiable here).
  std::optional<bool> divergent_reciprocal_square() const;

  static Modulus linear(double c) { return {Kind::Linear, c, 1.0, nullptr}; }
  static Modulus square_root(double c) { return {Kind::SquareRoot, c, 0.5, nullptr}; }
  static Modulus holder(double c, double p) { return {Kind::Holder, c, p, nullptr}; }
};

// Deterministic scalar BV input shared by both legs: an absolutely continuous
// part given by a rate plus a finite jump schedule.
struct ScalarBV {
  std::function<double(double)> rate;               // dC^c/dt, may be null
  std::vector<std::pair<double, double>> jumps;     // (time, delta), sorted

  bool active() const { return static_cast<bool>(rate) || !jumps.empty(); }
};

struct ComparisonInstance {
  LegFn eta1;  // lower drift
  LegFn eta2;  // upper drift
  LegFn theta; // shared diffusion
  double y0_1 = 0.0;
  double y0_2 = 0.0;
  ScalarBV c;

  // Declared regularity: which drift carries the Lipschitz constant (1 or 2,
  // 0 when none is declared) and the modulus bounding theta increments.
  int lipschitz_leg = 0;
  double lipschitz_k = 0.0;
  Modulus h_modulus;

  // Evaluate theta at max(y, 0); keeps square-root coefficients real without
  // biasing the ordering test. Harmless for instances living on y >= 0.
  bool full_truncation = true;

  // Optional auxiliary dynamics: one path per sample, independent of the
  // legs' shared noise, passed to every coefficient callback.
  std::optional<DiffusionSpec> aux;
  std::vector<double> aux_x0;

  void validate() const;
};

struct ComparisonReport {
  std::size_t n_paths = 0;
  std::size_t n_points = 0;       // (path, grid-point) pairs examined
  std::size_t violations = 0;     // gaps beyond tol_ord
  double ordering_fraction = 1.0; // fraction of pairs with y1 <= y2 + tol_ord
  double worst_violation = 0.0;   // largest positive y1 - y2 (0 when none)
  double tol_ord = 0.0;           // 10 * sqrt(max dt) * max sampled |theta|
  double max_theta = 0.0;
  double dt_max = 0.0;
  // Both legs consume the same noise and BV increments; equal hashes witness
  // the coupling.
  std::uint64_t noise_hash_leg1 = 0;
  std::uint64_t noise_hash_leg2 = 0;
  bool coupled = true;
};

// Simulates both legs on `grid` (jump times of C merged in) with shared
// Brownian increments and shared C. Throws ConfigError naming the offending
// sample if the drifts are detected out of order, NumericError on blow-up.
ComparisonReport compare_paths(const ComparisonInstance& inst,
                               std::span<const double> grid,
                               std::size_t n_paths, std::uint64_t master_seed,
                               int threads = 1);

// Repeats compare_paths on a dyadically refined ladder of uniform grids over
// [t0, t1], starting from base_steps and doubling `levels` times in total.
std::vector<ComparisonReport> compare_refinement(const ComparisonInstance& inst,
                                                 double t0, double t1,
                                                 std::size_t base_steps,
                                                 int levels,
                                                 std::size_t n_paths,
                                                 std::uint64_t master_seed,
                                                 int threads = 1);

struct CoefficientReport {
  bool lipschitz_declared = false;
  bool lipschitz_ok = false;
  double worst_lipschitz_excess = 0.0;  // max(|d eta| - K |dy|), <= 0 when ok
  bool modulus_ok = false;
  double worst_modulus_excess = 0.0;    // max(|d theta| - h(|dy|))
  std::optional<bool> divergence;       // of the reciprocal-square integral
  bool pass = false;
  std::vector<std::string> notes;
};

// Samples (t, y, y', aux) from `box` (coordinate 0 is y; further coordinates
// feed the auxiliary state) and audits the declared regularity. Violations
// are reported, never thrown.
CoefficientReport check_coefficient_conditions(const ComparisonInstance& inst,
                                               const Box& box,
                                               std::size_t n_samples,
                                               std::uint64_t seed);

struct ShiftInvarianceReport {
  double max_abs_diff = 0.0;  // sup_k |Y_k - (Ybar_k + C_k)| over all paths
  double tolerance = 0.0;
  bool pass = false;
};

// Runs each leg twice per path — once with C, once re-centred (C stripped,
// coefficient arguments shifted by the accumulated C) — and verifies that the
// two runs differ by C alone, up to accumulated rounding.
ShiftInvarianceReport shift_invariance_check(const ComparisonInstance& inst,
                                             std::span<const double> grid,
                                             std::size_t n_paths,
                                             std::uint64_t master_seed);

}  // namespace itokit
