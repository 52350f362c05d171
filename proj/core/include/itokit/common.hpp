#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace itokit {

// Scalar coefficient callbacks.  All state arguments are read-only spans of
// length dim; vector outputs are written into caller-provided spans so the
// hot loops stay allocation-free.
using ScalarFn = std::function<double(double, std::span<const double>)>;
using VectorFn = std::function<void(double, std::span<const double>, std::span<double>)>;

// Error raised for malformed instances and configs.  `where` names the
// component that rejected the input so pipeline errors keep their provenance.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string where, const std::string& what)
      : std::runtime_error(where + ": " + what), where_(std::move(where)) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

// Error raised when a computation fails numerically (blow-up, divergence).
class NumericError : public std::runtime_error {
 public:
  NumericError(std::string where, const std::string& what)
      : std::runtime_error(where + ": " + what), where_(std::move(where)) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

// Closed time/state window used for sampling, scanning and bisection ranges.
struct Box {
  double t_lo = 0.0;
  double t_hi = 1.0;
  std::vector<double> lo;  // per state coordinate
  std::vector<double> hi;

  int dim() const { return static_cast<int>(lo.size()); }
};

// FNV-1a over raw bytes; used for replay hashes and file comparisons.
inline std::uint64_t fnv1a(const void* data, std::size_t size,
                           std::uint64_t seed = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a_append(std::uint64_t h, double v) {
  return fnv1a(&v, sizeof(v), h);
}

// Runs fn(i) for i in [0, n).  Work is split into contiguous chunks; the
// callee must write results only to slot i so the output is identical for
// any thread count.
inline void parallel_for(std::size_t n, int threads,
                         const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t nthreads =
      std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  std::exception_ptr error;
  std::mutex error_mutex;
  const std::size_t chunk = (n + nthreads - 1) / nthreads;
  for (std::size_t w = 0; w < nthreads; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct MeanStats {
  double mean = 0.0;
  double stderr_mean = 0.0;
  double mean_abs = 0.0;
  std::size_t n = 0;
};

// Two-pass mean / standard error / mean absolute value.
inline MeanStats mean_stats(std::span<const double> xs) {
  MeanStats s;
  s.n = xs.size();
  if (s.n == 0) return s;
  double sum = 0.0, sum_abs = 0.0;
  for (double v : xs) {
    sum += v;
    sum_abs += std::abs(v);
  }
  s.mean = sum / static_cast<double>(s.n);
  s.mean_abs = sum_abs / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : xs) ss += (v - s.mean) * (v - s.mean);
    s.stderr_mean = std::sqrt(ss / (static_cast<double>(s.n) - 1.0) /
                              static_cast<double>(s.n));
  }
  return s;
}

}  // namespace itokit
