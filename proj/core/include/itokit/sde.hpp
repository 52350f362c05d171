#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "itokit/common.hpp"

namespace itokit {

// Coefficient hints an instance may declare; they are advisory metadata used
// by condition checkers, never by the integrator itself.
struct LipschitzHints {
  bool drift_lipschitz = false;
  bool diffusion_lipschitz = false;
  bool diffusion_sqrt_modulus = false;  // |sigma(x)-sigma(y)| <= c sqrt(|x-y|)
};

// Coefficients of  dX^i = alpha^i dt + sum_j sigma^{ij} dB^j + gamma^i dA^i.
// All callbacks receive the left limit of the state.  `diffusion` writes the
// dim x dim matrix row-major; `bv_loading` may be left empty when no driver
// of bounded variation is attached.
struct DiffusionSpec {
  int dim = 1;
  VectorFn drift;
  VectorFn diffusion;
  VectorFn bv_loading;
  LipschitzHints hints;

  void eval_drift(double t, std::span<const double> x, std::span<double> out) const;
  void eval_diffusion(double t, std::span<const double> x, std::span<double> out) const;
  void eval_bv_loading(double t, std::span<const double> x, std::span<double> out) const;
  // beta = sigma sigma^T, row-major dim x dim.
  void eval_beta(double t, std::span<const double> x, std::span<double> out) const;
  void validate() const;
};

struct JumpEvent {
  double time = 0.0;
  std::vector<double> delta;  // per-coordinate jump of A
};

struct ReflectionSpec {
  int coordinate = 0;
  double threshold = 0.0;
  int direction = +1;  // +1 keeps X >= threshold, -1 keeps X <= threshold
};

// Driver of bounded variation.  `Schedule` mixes an absolutely continuous
// part (rate per unit time) with finitely many jumps; `Reflection` books the
// per-step Skorokhod projection of one coordinate into the continuous part.
struct BVDriverSpec {
  enum class Mode { Zero, Schedule, Reflection };

  Mode mode = Mode::Zero;
  std::vector<JumpEvent> jumps;            // Schedule only, times in (t0, T]
  VectorFn rate;                           // Schedule only; empty = no drift in A
  std::optional<ReflectionSpec> reflection;

  bool active() const { return mode != Mode::Zero; }
  void validate(const DiffusionSpec& spec, double t0, double t1) const;
};

struct PathJump {
  std::size_t index = 0;                // grid index the jump is applied at
  std::vector<double> state_before;     // left limit X_{t-}
  std::vector<double> delta;            // jump of A
};

// One simulated trajectory on a fixed grid.  `states` holds post-jump values;
// the left limit at a jump time is kept in `jumps`.  The record carries every
// increment the integrator consumed, so ledgers are assembled from stored
// data and a replay from (seed, spec) reproduces the record bit for bit.
struct PathRecord {
  int dim = 1;
  std::vector<double> times;     // size N+1
  std::vector<double> states;    // (N+1) * dim
  std::vector<double> brownian;  // N * dim, increments over [t_k, t_{k+1})
  std::vector<double> bv_cont;   // N * dim, continuous part of dA per step
  std::vector<PathJump> jumps;   // ordered by index
  std::uint64_t seed = 0;

  std::size_t steps() const { return times.empty() ? 0 : times.size() - 1; }
  std::span<const double> state(std::size_t k) const {
    return {states.data() + k * static_cast<std::size_t>(dim),
            static_cast<std::size_t>(dim)};
  }
  // Left limit at grid time t_k: equals state(k) unless a jump lands on k.
  std::span<const double> state_left(std::size_t k) const;
  const PathJump* jump_at(std::size_t k) const;
  std::uint64_t increment_hash() const;
};

// Euler scheme with left-point coefficients.  Scheduled jump times are
// inserted into the grid and applied atomically at their exact time.  The
// integrator aborts with NumericError once any |X^i| exceeds 1e30.
PathRecord simulate_path(const DiffusionSpec& spec, const BVDriverSpec& driver,
                         std::span<const double> x0, std::span<const double> grid,
                         std::uint64_t seed);

// Same recursion but consuming caller-supplied Brownian increments laid out
// step-major on the *merged* grid (use merged_grid() to build it).  Used for
// coupled-path studies and replay checks.
PathRecord simulate_path_given(const DiffusionSpec& spec, const BVDriverSpec& driver,
                               std::span<const double> x0, std::span<const double> grid,
                               std::span<const double> brownian_increments);

std::vector<double> merged_grid(std::span<const double> grid, const BVDriverSpec& driver);
std::vector<double> uniform_grid(double t0, double t1, std::size_t steps);

std::vector<PathRecord> simulate_ensemble(const DiffusionSpec& spec,
                                          const BVDriverSpec& driver,
                                          std::span<const double> x0,
                                          std::span<const double> grid,
                                          std::uint64_t master_seed,
                                          std::size_t n_paths, int threads = 1);

// Pathwise discretisation of the minimal integrability requirement
//   int sum_i |gamma^i| d|A^i|  +  int ( sum_i |alpha^i| + sum_ij (sigma^{ij})^2 ) ds.
// The ds part uses the trapezoid rule on the stored states; the d|A| part
// sums left-point values against |dA| including jumps.
struct IntegrabilityReport {
  double bv_integral = 0.0;
  double drift_diffusion_integral = 0.0;
  bool finite = true;
};
IntegrabilityReport check_integrability(const PathRecord& path, const DiffusionSpec& spec);

// Columnar CSV (t, x1..xm, db1..dbm, dac1..dacm, daj1..dajm) plus a JSON
// sidecar with dim, seed, grid summary and a content hash.
void write_path_csv(const PathRecord& path, const std::filesystem::path& csv_path,
                    const std::filesystem::path& json_path);

}  // namespace itokit
