#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include "itokit/boundary.hpp"
#include "itokit/common.hpp"
#include "itokit/mollify.hpp"
#include "itokit/sde.hpp"

namespace itokit {

// Term-by-term decomposition of the change-of-variable identity along one
// path.  Every integral uses left-point integrands and the increments stored
// in the path record; `residual` is the left side minus the sum of the four
// right-side terms.  `skipped_steps` counts grid steps whose left-limit
// state fell inside the exclusion band around the split surface, where the
// second-order integrand is switched off.
struct ItoLedger {
  double lhs = 0.0;
  double term_dt = 0.0;
  double term_bv = 0.0;
  double term_jumps = 0.0;
  double term_stoch = 0.0;
  double residual = 0.0;
  std::size_t skipped_steps = 0;
  std::size_t steps = 0;
  double tau = 0.0;  // end time of the assembled (possibly truncated) path
  bool within_budget = true;

  double rhs() const { return term_dt + term_bv + term_jumps + term_stoch; }
};

// Time/state window [0, 1/delta] x [-1/delta, 1/delta]^m used to truncate
// paths before assembling ledgers on unbounded instances.
struct LocalizationBox {
  double delta = 0.0;
  bool contains(double t, std::span<const double> x) const;
};

struct LocalizedPath {
  PathRecord path;
  double tau = 0.0;
  bool exited = false;
};

// Cuts the path at the first grid point outside the window; tau is that grid
// time, or the final time when the path never leaves.
LocalizedPath localize(const PathRecord& path, double delta);

// Assembles the ledger for field `f` along `path`.  The split surface drives
// the second-order indicator: steps whose left-limit state classifies into
// the band of half-width `band` contribute no Hessian term and are counted.
// `skip_budget` is the tolerated fraction of skipped steps (audited, not
// enforced).  Requires second derivatives whenever any step needs them.
ItoLedger assemble_ledger(const TestFunction& f, const MonotoneSurface& surface,
                          const PathRecord& path, const DiffusionSpec& spec,
                          double band = 1e-8, double skip_budget = 0.01);

// Checks the two equivalent bookkeepings of the jump contribution (jumps
// inside the BV integral versus separated value-jumps) and the line-integral
// representation of each value-jump.  Discrepancies are relative to the
// larger of 1 and the participating magnitudes.
struct JumpEquivalenceReport {
  double rearrangement = 0.0;   // relative gap between the two arrangements
  double line_integral = 0.0;   // worst relative gap of the segment quadrature
  std::size_t jumps = 0;
  bool pass = false;
};
JumpEquivalenceReport jump_equivalence_check(const TestFunction& f,
                                             const PathRecord& path,
                                             const DiffusionSpec& spec,
                                             int line_quad_nodes = 16,
                                             double rearrange_tol = 1e-12,
                                             double line_tol = 1e-9);

// Ensemble residual statistics across a ladder of step sizes.
struct ResidualLevel {
  double dt = 0.0;
  MeanStats residuals;
  double skipped_fraction = 0.0;
  // Empirical order versus the previous (coarser) level; NaN on the first.
  double order = std::numeric_limits<double>::quiet_NaN();
};

struct ResidualStudy {
  std::vector<ResidualLevel> levels;
  bool mean_abs_decreasing = false;
  bool final_mean_within_3se = false;
};

ResidualStudy residual_study(const TestFunction& f, const MonotoneSurface& surface,
                             const DiffusionSpec& spec, const BVDriverSpec& driver,
                             std::span<const double> x0, double horizon,
                             std::span<const double> dt_values, std::size_t n_paths,
                             std::uint64_t master_seed, double band = 1e-8,
                             int threads = 1);

// One row per ledger: index, every term, residual, tau, skipped/total steps.
void write_ledger_csv(std::span<const ItoLedger> ledgers,
                      const std::filesystem::path& path);

}  // namespace itokit
