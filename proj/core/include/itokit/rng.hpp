#pragma once

#include <cstdint>

namespace itokit {

// Deterministic splitmix64 stream with an explicit Box-Muller transform.
// Everything is spelled out (no std distributions) so a (seed, path index)
// pair yields bit-identical draws on every platform and run.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform on (0, 1]; never returns 0 so log() below is safe.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  double gaussian();

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Derives the stream seed for one path of an ensemble.  The index is mixed
// through splitmix64 so neighbouring paths get uncorrelated streams and the
// assignment is independent of scheduling order.
std::uint64_t mix_seed(std::uint64_t master_seed, std::uint64_t index);

}  // namespace itokit
