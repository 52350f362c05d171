#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "itokit/common.hpp"
#include "itokit/csv.hpp"
#include "itokit/scenario.hpp"
#include "json.hpp"

using namespace itokit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& leaf) {
  const fs::path p = fs::temp_directory_path() / "itokit-scenario-tests" / leaf;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

json tiny_simulate() {
  return json{{"kind", "simulate"},
              {"dynamics", "standard-bm"},
              {"steps", 16},
              {"n_paths", 2},
              {"seed", 7}};
}

json tiny_scan() {
  return json{{"kind", "scan-L"},
              {"function", "x32-boundary"},
              {"dynamics", "unit-sqrt"},
              {"box", {{"lo", {0.0}}, {"hi", {2.0}}}},
              {"n_values", {4, 8}},
              {"grid_per_axis", 41}};
}

std::vector<fs::path> dir_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_SUITE("scenario") {

TEST_CASE("resolving fills every default and is idempotent") {
  const json raw = tiny_simulate();
  const json once = resolve_scenario(raw, std::nullopt);
  const json twice = resolve_scenario(once, std::nullopt);
  CHECK(once == twice);

  // defaults materialised
  CHECK(once.at("x0") == json::array({0.0}));
  CHECK(once.at("t0") == 0.0);
  CHECK(once.at("t1") == 1.0);
  CHECK(once.at("name") == "simulate");
  CHECK(once.at("driver").at("mode") == "zero");

  const json scan = resolve_scenario(tiny_scan(), std::nullopt);
  CHECK(scan == resolve_scenario(scan, std::nullopt));
  CHECK(scan.at("seed") == 12345);
  CHECK(scan.at("quad_nodes") == 4);
  CHECK(scan.at("assert").at("bounded") == true);
}

TEST_CASE("unknown fields and kinds are rejected") {
  json raw = tiny_simulate();
  raw["stepz"] = 10;
  CHECK_THROWS_AS(resolve_scenario(raw, std::nullopt), ConfigError);

  json bad_kind = tiny_simulate();
  bad_kind["kind"] = "simulatez";
  CHECK_THROWS_AS(resolve_scenario(bad_kind, std::nullopt), ConfigError);

  json missing = json{{"kind", "simulate"}};  // dynamics is required
  CHECK_THROWS_AS(resolve_scenario(missing, std::nullopt), ConfigError);

  json bad_type = tiny_simulate();
  bad_type["steps"] = "many";
  CHECK_THROWS_AS(resolve_scenario(bad_type, std::nullopt), ConfigError);
}

TEST_CASE("seed override is baked into the echo") {
  const json resolved = resolve_scenario(tiny_simulate(), 999);
  CHECK(resolved.at("seed") == 999);
}

TEST_CASE("a small run writes its artifacts and passes") {
  const fs::path dir = fresh_dir("simulate-pass");
  RunOptions opts;
  opts.out_dir = dir;
  const ScenarioResult res =
      run_scenario(resolve_scenario(tiny_simulate(), std::nullopt), opts);
  CHECK(res.exit_code == 0);
  CHECK(res.pass);
  CHECK(fs::exists(dir / "resolved-config.json"));
  CHECK(fs::exists(dir / "report.json"));
  CHECK(fs::exists(dir / "path-0.csv"));
  CHECK(fs::exists(dir / "path-1.csv"));

  CHECK(res.report.at("pass") == true);
  CHECK(res.report.at("kind") == "simulate");
  for (const auto& a : res.report.at("assertions"))
    CHECK(a.at("pass") == true);
}

TEST_CASE("a failed assertion exits 1 but still reports") {
  const fs::path dir = fresh_dir("scan-fail");
  json raw = tiny_scan();
  raw["assert"] = json{{"max_allowed", 1e-12}};  // unattainably tight cap
  RunOptions opts;
  opts.out_dir = dir;
  const ScenarioResult res =
      run_scenario(resolve_scenario(raw, std::nullopt), opts);
  CHECK(res.exit_code == 1);
  CHECK_FALSE(res.pass);
  CHECK(fs::exists(dir / "report.json"));
  CHECK(fs::exists(dir / "scan.csv"));
  CHECK(res.report.at("pass") == false);
}

TEST_CASE("config errors exit 2, numeric failures exit 3") {
  const fs::path dir = fresh_dir("bad-file");
  RunOptions opts;
  opts.out_dir = dir;
  const ScenarioResult bad =
      run_scenario_file(dir / "does-not-exist.json", opts);
  CHECK(bad.exit_code == 2);

  const fs::path dir2 = fresh_dir("bad-json");
  std::ofstream(dir2 / "broken.json") << "{ not json";
  RunOptions opts2;
  opts2.out_dir = dir2;
  CHECK(run_scenario_file(dir2 / "broken.json", opts2).exit_code == 2);

  // a sweep capped at one iteration cannot converge
  const fs::path dir3 = fresh_dir("numeric");
  const json raw = {{"kind", "solve-os"},
                    {"problem", "american-put"},
                    {"grid",
                     {{"x_lo", 40.0},
                      {"x_hi", 160.0},
                      {"nx", 51},
                      {"nt", 20},
                      {"psor_max_iters", 1},
                      {"psor_tol", 1e-14}}}};
  RunOptions opts3;
  opts3.out_dir = dir3;
  const ScenarioResult res =
      run_scenario(resolve_scenario(raw, std::nullopt), opts3);
  CHECK(res.exit_code == 3);
  CHECK(fs::exists(dir3 / "report.json"));
  CHECK(res.report.contains("error"));
}

TEST_CASE("the persisted echo reruns bit-for-bit") {
  const fs::path dir1 = fresh_dir("echo-a");
  json raw = tiny_scan();
  raw["kind"] = "scan-L";
  RunOptions opts1;
  opts1.out_dir = dir1;
  const ScenarioResult first =
      run_scenario(resolve_scenario(raw, std::nullopt), opts1);
  REQUIRE(first.exit_code == 0);

  const fs::path dir2 = fresh_dir("echo-b");
  RunOptions opts2;
  opts2.out_dir = dir2;
  const ScenarioResult second =
      run_scenario_file(dir1 / "resolved-config.json", opts2);
  REQUIRE(second.exit_code == 0);

  const auto files1 = dir_files(dir1);
  const auto files2 = dir_files(dir2);
  REQUIRE(files1.size() == files2.size());
  for (std::size_t i = 0; i < files1.size(); ++i) {
    CHECK(files1[i].filename() == files2[i].filename());
    CHECK(hash_file(files1[i]) == hash_file(files2[i]));
  }
}

TEST_CASE("results do not depend on the thread count") {
  json raw = {{"kind", "verify-ito"},
              {"function", "quadratic"},
              {"dynamics", "standard-bm"},
              {"dt_values", {0.02, 0.01}},
              {"n_paths", 64},
              {"seed", 31}};

  const fs::path dir1 = fresh_dir("threads-1");
  RunOptions opts1;
  opts1.out_dir = dir1;
  opts1.threads = 1;
  const ScenarioResult res1 =
      run_scenario(resolve_scenario(raw, std::nullopt), opts1);
  REQUIRE(res1.exit_code == 0);

  const fs::path dir2 = fresh_dir("threads-4");
  RunOptions opts2;
  opts2.out_dir = dir2;
  opts2.threads = 4;
  const ScenarioResult res2 =
      run_scenario(resolve_scenario(raw, std::nullopt), opts2);
  REQUIRE(res2.exit_code == 0);

  const auto files1 = dir_files(dir1);
  const auto files2 = dir_files(dir2);
  REQUIRE(files1.size() == files2.size());
  for (std::size_t i = 0; i < files1.size(); ++i)
    CHECK(hash_file(files1[i]) == hash_file(files2[i]));
}

TEST_CASE("surfaces and drivers resolve through their object forms") {
  json raw = {{"kind", "verify-ito"},
              {"function", "x32-boundary"},
              {"dynamics", "unit-sqrt"},
              {"surface", {{"family", "constant"}, {"level", 0.0}}},
              {"dt_values", {0.02}},
              {"n_paths", 16},
              {"driver",
               {{"mode", "schedule"},
                {"jumps", {{{"time", 0.5}, {"delta", {0.25}}}}}}},
              {"unit_bv_loading", true}};
  const json resolved = resolve_scenario(raw, std::nullopt);
  CHECK(resolved.at("surface").at("family") == "constant");
  CHECK(resolved.at("driver").at("jumps").size() == 1);
  CHECK(resolved == resolve_scenario(resolved, std::nullopt));

  json bad = raw;
  bad["driver"] = {{"mode", "zero"}, {"jumps", json::array()}};
  CHECK_THROWS_AS(resolve_scenario(bad, std::nullopt), ConfigError);
}

}  // TEST_SUITE
