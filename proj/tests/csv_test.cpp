#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "itokit/common.hpp"
#include "itokit/csv.hpp"

using namespace itokit;
namespace fs = std::filesystem;

namespace {
fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("itokit-csv-test-" + name);
}
}  // namespace

TEST_SUITE("csv") {

TEST_CASE("doubles round-trip exactly") {
  const fs::path path = temp_file("roundtrip.csv");
  const std::vector<std::string> cols = {"a", "b", "c"};
  const std::vector<double> row1 = {0.1, 3.141592653589793, -1e-300};
  const std::vector<double> row2 = {1.0 / 3.0, 6.02214076e23, 0.0};
  {
    CsvWriter w(path, cols);
    w.row(row1);
    w.row(row2);
  }
  const CsvTable t = read_csv(path);
  REQUIRE(t.columns == cols);
  REQUIRE(t.rows.size() == 2);
  for (int i = 0; i < 3; ++i) {
    CHECK(t.rows[0][i] == row1[i]);
    CHECK(t.rows[1][i] == row2[i]);
  }
  CHECK(t.column_index("b") == 1);
  CHECK(t.column_index("missing") == -1);
  fs::remove(path);
}

TEST_CASE("rewriting identical data gives identical bytes") {
  const fs::path p1 = temp_file("bytes1.csv");
  const fs::path p2 = temp_file("bytes2.csv");
  const std::vector<std::string> cols = {"x", "y"};
  for (const auto& p : {p1, p2}) {
    CsvWriter w(p, cols);
    for (int k = 0; k < 50; ++k)
      w.row(std::vector<double>{k * 0.1, std::sin(k * 0.1)});
  }
  CHECK(hash_file(p1) == hash_file(p2));
  fs::remove(p1);
  fs::remove(p2);
}

TEST_CASE("row length must match the header") {
  const fs::path path = temp_file("shape.csv");
  const std::vector<std::string> cols = {"x", "y"};
  CsvWriter w(path, cols);
  CHECK_THROWS_AS(w.row(std::vector<double>{1.0}), ConfigError);
  w.close();
  fs::remove(path);
}

TEST_CASE("format_double survives a parse round trip") {
  for (double v : {1.0, -0.25, 1e-17, 123456789.123456789, 2.2250738585072014e-308}) {
    CHECK(std::stod(format_double(v)) == v);
  }
}

}  // TEST_SUITE
