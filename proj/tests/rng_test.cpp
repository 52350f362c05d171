#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "itokit/rng.hpp"

using namespace itokit;

TEST_SUITE("rng") {

TEST_CASE("identical seeds give identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  Rng c(42), d(43);
  bool differ = false;
  for (int i = 0; i < 10 && !differ; ++i) differ = c.next_u64() != d.next_u64();
  CHECK(differ);
}

TEST_CASE("uniform stays in (0, 1]") {
  Rng rng(7);
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    CHECK(u > 0.0);
    CHECK(u <= 1.0);
  }
}

TEST_CASE("gaussian moments") {
  Rng rng(2024);
  const int n = 1000000;
  double sum = 0.0, sum2 = 0.0, sum4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.gaussian();
    sum += z;
    sum2 += z * z;
    sum4 += z * z * z * z;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  const double kurt = sum4 / n;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(var - 1.0) < 0.01);
  CHECK(std::abs(kurt - 3.0) < 0.1);  // fourth moment of the standard normal
}

TEST_CASE("mix_seed separates neighbouring indices") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(mix_seed(999, i));
  CHECK(seen.size() == 10000);
  CHECK(mix_seed(1, 0) != mix_seed(2, 0));
  // and is scheduling-independent by construction: pure function of inputs
  CHECK(mix_seed(999, 123) == mix_seed(999, 123));
}

}  // TEST_SUITE
