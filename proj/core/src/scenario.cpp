#include "itokit/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <vector>

#include "itokit/builtins.hpp"
#include "itokit/comparison.hpp"
#include "itokit/csv.hpp"
#include "itokit/ito.hpp"
#include "itokit/mollify.hpp"
#include "itokit/rng.hpp"
#include "itokit/sde.hpp"
#include "itokit/stopping.hpp"

namespace itokit {

namespace {

using nlohmann::json;

[[noreturn]] void cfg_fail(const std::string& where, const std::string& what) {
  throw ConfigError("scenario", where + ": " + what);
}

std::string join(const std::string& ctx, const std::string& key) {
  return ctx.empty() ? key : ctx + "." + key;
}

void check_keys(const json& j, const std::set<std::string>& allowed,
                const std::string& ctx) {
  if (!j.is_object()) cfg_fail(ctx.empty() ? "config" : ctx, "expected an object");
  for (const auto& item : j.items())
    if (!allowed.count(item.key()))
      cfg_fail(join(ctx, item.key()), "unknown field");
}

double get_num(const json& j, const std::string& where) {
  if (!j.is_number()) cfg_fail(where, "expected a number");
  return j.get<double>();
}

std::int64_t get_int(const json& j, const std::string& where) {
  if (!j.is_number_integer()) cfg_fail(where, "expected an integer");
  return j.get<std::int64_t>();
}

bool get_bool(const json& j, const std::string& where) {
  if (!j.is_boolean()) cfg_fail(where, "expected a boolean");
  return j.get<bool>();
}

std::string get_str(const json& j, const std::string& where) {
  if (!j.is_string()) cfg_fail(where, "expected a string");
  return j.get<std::string>();
}

std::vector<double> get_vec(const json& j, const std::string& where) {
  if (!j.is_array()) cfg_fail(where, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(get_num(j.at(i), where + "[" + std::to_string(i) + "]"));
  return out;
}

std::uint64_t get_seed(const json& j, const std::string& where) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  cfg_fail(where, "expected a non-negative integer");
}

// ---- sub-object resolution (fills defaults, validates shape) --------------

json resolve_box(const json& raw, const std::string& ctx) {
  check_keys(raw, {"t_lo", "t_hi", "lo", "hi"}, ctx);
  json out;
  out["t_lo"] = raw.contains("t_lo") ? get_num(raw["t_lo"], join(ctx, "t_lo")) : 0.0;
  out["t_hi"] = raw.contains("t_hi") ? get_num(raw["t_hi"], join(ctx, "t_hi")) : 1.0;
  if (!raw.contains("lo") || !raw.contains("hi"))
    cfg_fail(ctx, "needs lo and hi arrays");
  const auto lo = get_vec(raw["lo"], join(ctx, "lo"));
  const auto hi = get_vec(raw["hi"], join(ctx, "hi"));
  if (lo.empty() || lo.size() != hi.size())
    cfg_fail(ctx, "lo and hi must be non-empty and equally sized");
  out["lo"] = lo;
  out["hi"] = hi;
  return out;
}

Box box_from_json(const json& j) {
  Box box;
  box.t_lo = j["t_lo"].get<double>();
  box.t_hi = j["t_hi"].get<double>();
  box.lo = j["lo"].get<std::vector<double>>();
  box.hi = j["hi"].get<std::vector<double>>();
  return box;
}

json resolve_driver(const json& raw, const std::string& ctx) {
  check_keys(raw, {"mode", "jumps", "coordinate", "threshold", "direction"}, ctx);
  json out;
  const std::string mode =
      raw.contains("mode") ? get_str(raw["mode"], join(ctx, "mode")) : "zero";
  out["mode"] = mode;
  if (mode == "zero") {
    if (raw.size() > 1) cfg_fail(ctx, "zero driver takes no further fields");
  } else if (mode == "schedule") {
    json jumps = json::array();
    if (raw.contains("jumps")) {
      if (!raw["jumps"].is_array()) cfg_fail(join(ctx, "jumps"), "expected an array");
      for (std::size_t i = 0; i < raw["jumps"].size(); ++i) {
        const std::string jctx = join(ctx, "jumps[" + std::to_string(i) + "]");
        const json& je = raw["jumps"].at(i);
        check_keys(je, {"time", "delta"}, jctx);
        if (!je.contains("time") || !je.contains("delta"))
          cfg_fail(jctx, "needs time and delta");
        json o;
        o["time"] = get_num(je["time"], join(jctx, "time"));
        o["delta"] = get_vec(je["delta"], join(jctx, "delta"));
        jumps.push_back(o);
      }
    }
    out["jumps"] = jumps;
  } else if (mode == "reflection") {
    out["coordinate"] = raw.contains("coordinate")
                            ? get_int(raw["coordinate"], join(ctx, "coordinate"))
                            : 0;
    out["threshold"] = raw.contains("threshold")
                           ? get_num(raw["threshold"], join(ctx, "threshold"))
                           : 0.0;
    out["direction"] = raw.contains("direction")
                           ? get_int(raw["direction"], join(ctx, "direction"))
                           : 1;
  } else {
    cfg_fail(join(ctx, "mode"), "must be zero, schedule or reflection");
  }
  return out;
}

BVDriverSpec driver_from_json(const json& j) {
  BVDriverSpec driver;
  const std::string mode = j["mode"].get<std::string>();
  if (mode == "zero") {
    driver.mode = BVDriverSpec::Mode::Zero;
  } else if (mode == "schedule") {
    driver.mode = BVDriverSpec::Mode::Schedule;
    for (const json& je : j["jumps"]) {
      JumpEvent ev;
      ev.time = je["time"].get<double>();
      ev.delta = je["delta"].get<std::vector<double>>();
      driver.jumps.push_back(std::move(ev));
    }
  } else {
    driver.mode = BVDriverSpec::Mode::Reflection;
    ReflectionSpec refl;
    refl.coordinate = j["coordinate"].get<int>();
    refl.threshold = j["threshold"].get<double>();
    refl.direction = j["direction"].get<int>();
    driver.reflection = refl;
  }
  return driver;
}

json resolve_surface(const json& raw, int dim, const std::string& ctx) {
  if (raw.is_string()) {
    make_surface(raw.get<std::string>());  // name must exist
    return raw;
  }
  check_keys(raw,
             {"family", "dim", "level", "intercept", "t_slope", "coord_slopes",
              "csv", "split_coord", "c_above"},
             ctx);
  if (!raw.contains("family")) cfg_fail(ctx, "needs a family or a registry name");
  const std::string family = get_str(raw["family"], join(ctx, "family"));
  json out;
  out["family"] = family;
  out["dim"] = raw.contains("dim")
                   ? get_int(raw["dim"], join(ctx, "dim"))
                   : static_cast<std::int64_t>(dim);
  out["split_coord"] = raw.contains("split_coord")
                           ? get_int(raw["split_coord"], join(ctx, "split_coord"))
                           : 0;
  out["c_above"] =
      raw.contains("c_above") ? get_bool(raw["c_above"], join(ctx, "c_above")) : true;
  if (family == "constant") {
    out["level"] =
        raw.contains("level") ? get_num(raw["level"], join(ctx, "level")) : 0.0;
  } else if (family == "affine") {
    out["intercept"] = raw.contains("intercept")
                           ? get_num(raw["intercept"], join(ctx, "intercept"))
                           : 0.0;
    out["t_slope"] = raw.contains("t_slope")
                         ? get_num(raw["t_slope"], join(ctx, "t_slope"))
                         : 0.0;
    out["coord_slopes"] = raw.contains("coord_slopes")
                              ? get_vec(raw["coord_slopes"], join(ctx, "coord_slopes"))
                              : std::vector<double>(static_cast<std::size_t>(
                                    out["dim"].get<std::int64_t>()), 0.0);
  } else if (family == "tabulated") {
    if (!raw.contains("csv")) cfg_fail(ctx, "tabulated surface needs a csv path");
    out["csv"] = std::filesystem::absolute(
                     get_str(raw["csv"], join(ctx, "csv"))).string();
  } else if (family != "open") {
    cfg_fail(join(ctx, "family"), "must be constant, affine, tabulated or open");
  }
  return out;
}

MonotoneSurface surface_from_json(const json& j) {
  if (j.is_string()) return make_surface(j.get<std::string>());
  const std::string family = j["family"].get<std::string>();
  const int dim = j["dim"].get<int>();
  const int split = j["split_coord"].get<int>();
  const bool c_above = j["c_above"].get<bool>();
  if (family == "constant")
    return constant_surface(dim, j["level"].get<double>(), split, c_above);
  if (family == "affine")
    return affine_surface(dim, j["intercept"].get<double>(),
                          j["t_slope"].get<double>(),
                          j["coord_slopes"].get<std::vector<double>>(), split,
                          c_above);
  if (family == "tabulated")
    return tabulated_surface(dim, read_boundary_table(j["csv"].get<std::string>()),
                             split, c_above);
  return open_surface(dim, split);
}

// ---- shared resolve scaffolding -------------------------------------------

struct Common {
  std::string name;
  std::string kind;
  std::uint64_t seed = 0;
};

Common resolve_common(const json& raw, json& out,
                      std::optional<std::uint64_t> seed_override) {
  Common c;
  c.kind = get_str(raw.at("kind"), "kind");
  c.name = raw.contains("name") ? get_str(raw["name"], "name") : c.kind;
  c.seed = seed_override.has_value()
               ? *seed_override
               : (raw.contains("seed") ? get_seed(raw["seed"], "seed") : 12345u);
  out["name"] = c.name;
  out["kind"] = c.kind;
  out["seed"] = c.seed;
  return c;
}

json resolve_assert_block(const json& raw, const std::string& ctx,
                          const std::vector<std::pair<std::string, json>>& defaults) {
  json src = raw.contains("assert") ? raw["assert"] : json::object();
  std::set<std::string> allowed;
  for (const auto& [key, value] : defaults) allowed.insert(key);
  check_keys(src, allowed, ctx);
  json out;
  for (const auto& [key, value] : defaults)
    out[key] = src.contains(key) ? src[key] : value;
  return out;
}

json meanstats_json(const MeanStats& s) {
  return json{{"mean", s.mean},
              {"stderr", s.stderr_mean},
              {"mean_abs", s.mean_abs},
              {"n", s.n}};
}

std::string dir_name(Direction d) {
  return d == Direction::NonDecreasing ? "non-decreasing" : "non-increasing";
}

json opt_dir_json(const std::optional<Direction>& d) {
  return d.has_value() ? json(dir_name(*d)) : json(nullptr);
}

// ---- per-kind resolvers ----------------------------------------------------

json resolve_simulate(const json& raw, json out) {
  check_keys(raw,
             {"name", "kind", "seed", "dynamics", "x0", "t0", "t1", "steps",
              "n_paths", "driver", "unit_bv_loading"},
             "");
  if (!raw.contains("dynamics")) cfg_fail("dynamics", "missing");
  const std::string dyn = get_str(raw["dynamics"], "dynamics");
  const DiffusionSpec spec = make_dynamics(dyn);
  out["dynamics"] = dyn;
  const std::vector<double> x0 = raw.contains("x0")
                                     ? get_vec(raw["x0"], "x0")
                                     : std::vector<double>(spec.dim, 0.0);
  if (static_cast<int>(x0.size()) != spec.dim)
    cfg_fail("x0", "dimension mismatch with the dynamics");
  out["x0"] = x0;
  out["t0"] = raw.contains("t0") ? get_num(raw["t0"], "t0") : 0.0;
  out["t1"] = raw.contains("t1") ? get_num(raw["t1"], "t1") : 1.0;
  out["steps"] = raw.contains("steps") ? get_int(raw["steps"], "steps") : 1000;
  out["n_paths"] = raw.contains("n_paths") ? get_int(raw["n_paths"], "n_paths") : 1;
  out["driver"] = resolve_driver(raw.contains("driver") ? raw["driver"]
                                                        : json{{"mode", "zero"}},
                                 "driver");
  out["unit_bv_loading"] =
      raw.contains("unit_bv_loading")
          ? get_bool(raw["unit_bv_loading"], "unit_bv_loading")
          : false;
  if (out["steps"].get<std::int64_t>() < 1) cfg_fail("steps", "must be positive");
  if (out["n_paths"].get<std::int64_t>() < 1) cfg_fail("n_paths", "must be positive");
  if (!(out["t0"].get<double>() < out["t1"].get<double>()))
    cfg_fail("t1", "must exceed t0");
  return out;
}

json resolve_verify_ito(const json& raw, json out) {
  check_keys(raw,
             {"name", "kind", "seed", "dynamics", "x0", "function", "surface",
              "horizon", "dt_values", "n_paths", "band", "skip_budget", "driver",
              "unit_bv_loading", "assert"},
             "");
  if (!raw.contains("dynamics")) cfg_fail("dynamics", "missing");
  if (!raw.contains("function")) cfg_fail("function", "missing");
  const std::string dyn = get_str(raw["dynamics"], "dynamics");
  const std::string fn = get_str(raw["function"], "function");
  const DiffusionSpec spec = make_dynamics(dyn);
  const TestFunction f = make_test_function(fn);
  if (f.dim != spec.dim) cfg_fail("function", "dimension mismatch with the dynamics");
  out["dynamics"] = dyn;
  out["function"] = fn;
  const std::vector<double> x0 = raw.contains("x0")
                                     ? get_vec(raw["x0"], "x0")
                                     : std::vector<double>(spec.dim, 0.0);
  if (static_cast<int>(x0.size()) != spec.dim)
    cfg_fail("x0", "dimension mismatch with the dynamics");
  out["x0"] = x0;
  out["surface"] = resolve_surface(raw.contains("surface")
                                       ? raw["surface"]
                                       : json{{"family", "open"}},
                                   spec.dim, "surface");
  out["horizon"] = raw.contains("horizon") ? get_num(raw["horizon"], "horizon") : 1.0;
  out["dt_values"] = raw.contains("dt_values")
                         ? get_vec(raw["dt_values"], "dt_values")
                         : std::vector<double>{4e-3, 2e-3, 1e-3};
  out["n_paths"] =
      raw.contains("n_paths") ? get_int(raw["n_paths"], "n_paths") : 10000;
  out["band"] = raw.contains("band") ? get_num(raw["band"], "band") : 1e-8;
  out["skip_budget"] =
      raw.contains("skip_budget") ? get_num(raw["skip_budget"], "skip_budget") : 0.01;
  out["driver"] = resolve_driver(raw.contains("driver") ? raw["driver"]
                                                        : json{{"mode", "zero"}},
                                 "driver");
  out["unit_bv_loading"] =
      raw.contains("unit_bv_loading")
          ? get_bool(raw["unit_bv_loading"], "unit_bv_loading")
          : false;
  out["assert"] = resolve_assert_block(
      raw, "assert",
      {{"mean_abs_decreasing", true},
       {"final_mean_within_3se", true},
       {"final_mean_abs_max", json(nullptr)}});
  if (out["n_paths"].get<std::int64_t>() < 1) cfg_fail("n_paths", "must be positive");
  const auto dts = out["dt_values"].get<std::vector<double>>();
  for (std::size_t i = 1; i < dts.size(); ++i)
    if (!(dts[i] < dts[i - 1]))
      cfg_fail("dt_values", "must be strictly decreasing");
  return out;
}

json resolve_scan_l(const json& raw, json out) {
  check_keys(raw,
             {"name", "kind", "seed", "function", "dynamics", "box", "n_values",
              "quad_nodes", "grid_per_axis", "grid_time", "band_factor", "assert"},
             "");
  if (!raw.contains("function")) cfg_fail("function", "missing");
  if (!raw.contains("dynamics")) cfg_fail("dynamics", "missing");
  if (!raw.contains("box")) cfg_fail("box", "missing");
  const std::string fn = get_str(raw["function"], "function");
  const std::string dyn = get_str(raw["dynamics"], "dynamics");
  const TestFunction f = make_test_function(fn);
  const DiffusionSpec spec = make_dynamics(dyn);
  if (f.dim != spec.dim) cfg_fail("function", "dimension mismatch with the dynamics");
  out["function"] = fn;
  out["dynamics"] = dyn;
  out["box"] = resolve_box(raw["box"], "box");
  if (static_cast<int>(out["box"]["lo"].size()) != f.dim)
    cfg_fail("box", "dimension mismatch with the function");
  if (raw.contains("n_values")) {
    const auto v = get_vec(raw["n_values"], "n_values");
    std::vector<std::int64_t> n(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      n[i] = static_cast<std::int64_t>(v[i]);
      if (v[i] != static_cast<double>(n[i]) || n[i] < 1)
        cfg_fail("n_values", "entries must be positive integers");
    }
    out["n_values"] = n;
  } else {
    out["n_values"] = std::vector<std::int64_t>{4, 8, 16, 32, 64};
  }
  out["quad_nodes"] =
      raw.contains("quad_nodes") ? get_int(raw["quad_nodes"], "quad_nodes") : 4;
  out["grid_per_axis"] = raw.contains("grid_per_axis")
                             ? get_int(raw["grid_per_axis"], "grid_per_axis")
                             : 201;
  out["grid_time"] =
      raw.contains("grid_time") ? get_int(raw["grid_time"], "grid_time") : 1;
  out["band_factor"] =
      raw.contains("band_factor") ? get_num(raw["band_factor"], "band_factor") : 2.0;
  out["assert"] = resolve_assert_block(
      raw, "assert", {{"bounded", true}, {"max_allowed", json(nullptr)}});
  return out;
}

json resolve_solve_os(const json& raw, json out) {
  check_keys(raw,
             {"name", "kind", "seed", "problem", "grid", "eval", "monotonicity",
              "assert"},
             "");
  if (!raw.contains("problem")) cfg_fail("problem", "missing");
  const std::string prob = get_str(raw["problem"], "problem");
  const StoppingProblem problem = make_stopping_problem(prob);
  out["problem"] = prob;
  const json graw = raw.contains("grid") ? raw["grid"] : json::object();
  check_keys(graw,
             {"x_lo", "x_hi", "y_lo", "y_hi", "nx", "ny", "nt", "tol_gap",
              "psor_omega", "psor_tol", "psor_max_iters"},
             "grid");
  if (!graw.contains("x_lo") || !graw.contains("x_hi"))
    cfg_fail("grid", "needs x_lo and x_hi");
  json grid;
  grid["x_lo"] = get_num(graw["x_lo"], "grid.x_lo");
  grid["x_hi"] = get_num(graw["x_hi"], "grid.x_hi");
  grid["y_lo"] = graw.contains("y_lo") ? get_num(graw["y_lo"], "grid.y_lo") : 0.0;
  grid["y_hi"] = graw.contains("y_hi") ? get_num(graw["y_hi"], "grid.y_hi") : 0.0;
  grid["nx"] = graw.contains("nx") ? get_int(graw["nx"], "grid.nx") : 200;
  grid["ny"] = graw.contains("ny") ? get_int(graw["ny"], "grid.ny")
                                   : (problem.dim() == 2 ? 50 : 1);
  grid["nt"] = graw.contains("nt") ? get_int(graw["nt"], "grid.nt") : 200;
  grid["tol_gap"] =
      graw.contains("tol_gap") ? get_num(graw["tol_gap"], "grid.tol_gap") : 1e-7;
  grid["psor_omega"] = graw.contains("psor_omega")
                           ? get_num(graw["psor_omega"], "grid.psor_omega")
                           : 1.5;
  grid["psor_tol"] =
      graw.contains("psor_tol") ? get_num(graw["psor_tol"], "grid.psor_tol") : 1e-8;
  grid["psor_max_iters"] = graw.contains("psor_max_iters")
                               ? get_int(graw["psor_max_iters"], "grid.psor_max_iters")
                               : 100000;
  out["grid"] = grid;
  if (raw.contains("eval") && !raw["eval"].is_null()) {
    check_keys(raw["eval"], {"t", "x"}, "eval");
    json eval;
    eval["t"] = raw["eval"].contains("t") ? get_num(raw["eval"]["t"], "eval.t") : 0.0;
    if (!raw["eval"].contains("x")) cfg_fail("eval", "needs x");
    const auto x = get_vec(raw["eval"]["x"], "eval.x");
    if (static_cast<int>(x.size()) != problem.dim())
      cfg_fail("eval.x", "dimension mismatch with the problem");
    eval["x"] = x;
    out["eval"] = eval;
  } else {
    out["eval"] = json(nullptr);
  }
  if (raw.contains("monotonicity") && !raw["monotonicity"].is_null()) {
    check_keys(raw["monotonicity"], {"box", "n_samples"}, "monotonicity");
    if (!raw["monotonicity"].contains("box"))
      cfg_fail("monotonicity", "needs a sample box");
    json mono;
    mono["box"] = resolve_box(raw["monotonicity"]["box"], "monotonicity.box");
    if (static_cast<int>(mono["box"]["lo"].size()) != problem.dim())
      cfg_fail("monotonicity.box", "dimension mismatch with the problem");
    mono["n_samples"] = raw["monotonicity"].contains("n_samples")
                            ? get_int(raw["monotonicity"]["n_samples"],
                                      "monotonicity.n_samples")
                            : 200;
    out["monotonicity"] = mono;
  } else {
    out["monotonicity"] = json(nullptr);
  }
  out["assert"] = resolve_assert_block(
      raw, "assert",
      {{"max_island_cells", 0},
       {"max_multi_flip_columns", json(nullptr)},
       {"boundary_matches_prediction", !out["monotonicity"].is_null()},
       {"value_min", json(nullptr)},
       {"value_max", json(nullptr)}});
  return out;
}

json resolve_check_monotone(const json& raw, json out) {
  check_keys(raw, {"name", "kind", "seed", "problem", "box", "n_samples", "assert"},
             "");
  if (!raw.contains("problem")) cfg_fail("problem", "missing");
  if (!raw.contains("box")) cfg_fail("box", "missing");
  const std::string prob = get_str(raw["problem"], "problem");
  const StoppingProblem problem = make_stopping_problem(prob);
  out["problem"] = prob;
  out["box"] = resolve_box(raw["box"], "box");
  if (static_cast<int>(out["box"]["lo"].size()) != problem.dim())
    cfg_fail("box", "dimension mismatch with the problem");
  out["n_samples"] =
      raw.contains("n_samples") ? get_int(raw["n_samples"], "n_samples") : 200;
  out["assert"] = resolve_assert_block(
      raw, "assert",
      {{"applicable", true},
       {"time_dir", json(nullptr)},
       {"coord_dirs", json(nullptr)}});
  return out;
}

json resolve_compare(const json& raw, json out) {
  check_keys(raw,
             {"name", "kind", "seed", "instance", "t0", "t1", "base_steps",
              "levels", "n_paths", "coef_check", "shift_check", "assert"},
             "");
  if (!raw.contains("instance")) cfg_fail("instance", "missing");
  const std::string name = get_str(raw["instance"], "instance");
  const ComparisonInstance inst = make_comparison_instance(name);
  out["instance"] = name;
  out["t0"] = raw.contains("t0") ? get_num(raw["t0"], "t0") : 0.0;
  out["t1"] = raw.contains("t1") ? get_num(raw["t1"], "t1") : 1.0;
  out["base_steps"] =
      raw.contains("base_steps") ? get_int(raw["base_steps"], "base_steps") : 1000;
  out["levels"] = raw.contains("levels") ? get_int(raw["levels"], "levels") : 2;
  out["n_paths"] = raw.contains("n_paths") ? get_int(raw["n_paths"], "n_paths") : 1000;
  if (!(out["t0"].get<double>() < out["t1"].get<double>()))
    cfg_fail("t1", "must exceed t0");
  if (out["base_steps"].get<std::int64_t>() < 1)
    cfg_fail("base_steps", "must be positive");
  if (out["levels"].get<std::int64_t>() < 1) cfg_fail("levels", "must be positive");
  const int aux_dim = inst.aux ? inst.aux->dim : 0;
  if (raw.contains("coef_check") && !raw["coef_check"].is_null()) {
    check_keys(raw["coef_check"], {"box", "n_samples"}, "coef_check");
    if (!raw["coef_check"].contains("box")) cfg_fail("coef_check", "needs a box");
    json cc;
    cc["box"] = resolve_box(raw["coef_check"]["box"], "coef_check.box");
    if (static_cast<int>(cc["box"]["lo"].size()) != 1 + aux_dim)
      cfg_fail("coef_check.box", "must cover y plus the auxiliary coordinates");
    cc["n_samples"] = raw["coef_check"].contains("n_samples")
                          ? get_int(raw["coef_check"]["n_samples"],
                                    "coef_check.n_samples")
                          : 1000;
    out["coef_check"] = cc;
  } else {
    out["coef_check"] = json(nullptr);
  }
  if (raw.contains("shift_check") && !raw["shift_check"].is_null()) {
    check_keys(raw["shift_check"], {"steps", "n_paths"}, "shift_check");
    json sc;
    sc["steps"] = raw["shift_check"].contains("steps")
                      ? get_int(raw["shift_check"]["steps"], "shift_check.steps")
                      : 256;
    sc["n_paths"] = raw["shift_check"].contains("n_paths")
                        ? get_int(raw["shift_check"]["n_paths"],
                                  "shift_check.n_paths")
                        : 4;
    out["shift_check"] = sc;
  } else {
    out["shift_check"] = json(nullptr);
  }
  out["assert"] = resolve_assert_block(
      raw, "assert",
      {{"ordering_fraction_min", 1.0},
       {"worst_non_increasing", true},
       {"coefficients_pass", !out["coef_check"].is_null()},
       {"shift_pass", !out["shift_check"].is_null()}});
  return out;
}

json resolve_dynkin(const json& raw, json out) {
  check_keys(raw,
             {"name", "kind", "seed", "problem", "x0", "dt", "n_paths",
              "stop_rule", "assert"},
             "");
  if (!raw.contains("problem")) cfg_fail("problem", "missing");
  const std::string prob = get_str(raw["problem"], "problem");
  const StoppingProblem problem = make_stopping_problem(prob);
  out["problem"] = prob;
  const std::vector<double> x0 =
      raw.contains("x0") ? get_vec(raw["x0"], "x0")
                         : std::vector<double>(problem.dim(), 0.0);
  if (static_cast<int>(x0.size()) != problem.dim())
    cfg_fail("x0", "dimension mismatch with the problem");
  out["x0"] = x0;
  out["dt"] = raw.contains("dt") ? get_num(raw["dt"], "dt") : 1e-3;
  out["n_paths"] =
      raw.contains("n_paths") ? get_int(raw["n_paths"], "n_paths") : 10000;
  if (!(out["dt"].get<double>() > 0.0)) cfg_fail("dt", "must be positive");
  if (out["n_paths"].get<std::int64_t>() < 1) cfg_fail("n_paths", "must be positive");
  if (raw.contains("stop_rule") && !raw["stop_rule"].is_null())
    out["stop_rule"] = resolve_surface(raw["stop_rule"], problem.dim(), "stop_rule");
  else
    out["stop_rule"] = json(nullptr);
  out["assert"] = resolve_assert_block(raw, "assert", {{"within_3se", true}});
  return out;
}

// ---- per-kind runners ------------------------------------------------------

struct Asserts {
  json items = json::array();
  bool all_pass = true;

  void add(const std::string& name, bool pass, const std::string& detail) {
    items.push_back({{"name", name}, {"pass", pass}, {"detail", detail}});
    all_pass = all_pass && pass;
  }
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void run_simulate(const json& cfg, const RunOptions& opts, json& stats,
                  Asserts& asserts, json& outputs) {
  DiffusionSpec spec = make_dynamics(cfg["dynamics"].get<std::string>());
  if (cfg["unit_bv_loading"].get<bool>()) {
    spec.bv_loading = [](double, std::span<const double>, std::span<double> out) {
      for (auto& v : out) v = 1.0;
    };
  }
  const BVDriverSpec driver = driver_from_json(cfg["driver"]);
  const auto x0 = cfg["x0"].get<std::vector<double>>();
  const auto grid = uniform_grid(cfg["t0"].get<double>(), cfg["t1"].get<double>(),
                                 static_cast<std::size_t>(cfg["steps"].get<std::int64_t>()));
  const auto n_paths = static_cast<std::size_t>(cfg["n_paths"].get<std::int64_t>());
  const std::uint64_t seed = cfg["seed"].get<std::uint64_t>();

  bool all_finite = true;
  double max_bv = 0.0, max_dd = 0.0;
  for (std::size_t i = 0; i < n_paths; ++i) {
    const PathRecord path =
        simulate_path(spec, driver, {x0.data(), x0.size()}, grid, mix_seed(seed, i));
    const IntegrabilityReport integ = check_integrability(path, spec);
    all_finite = all_finite && integ.finite;
    max_bv = std::max(max_bv, integ.bv_integral);
    max_dd = std::max(max_dd, integ.drift_diffusion_integral);
    const std::string base = "path-" + std::to_string(i);
    write_path_csv(path, opts.out_dir / (base + ".csv"),
                   opts.out_dir / (base + ".json"));
    outputs.push_back(base + ".csv");
    outputs.push_back(base + ".json");
  }
  stats["n_paths"] = n_paths;
  stats["steps"] = grid.size() - 1;
  stats["max_bv_integral"] = max_bv;
  stats["max_drift_diffusion_integral"] = max_dd;
  asserts.add("integrability-finite", all_finite,
              "max BV integral " + fmt(max_bv) + ", max drift/diffusion integral " +
                  fmt(max_dd));
}

void run_verify_ito(const json& cfg, const RunOptions& opts, json& stats,
                    Asserts& asserts, json& outputs) {
  const TestFunction f = make_test_function(cfg["function"].get<std::string>());
  DiffusionSpec spec = make_dynamics(cfg["dynamics"].get<std::string>());
  if (cfg["unit_bv_loading"].get<bool>()) {
    spec.bv_loading = [](double, std::span<const double>, std::span<double> out) {
      for (auto& v : out) v = 1.0;
    };
  }
  const MonotoneSurface surface = surface_from_json(cfg["surface"]);
  const BVDriverSpec driver = driver_from_json(cfg["driver"]);
  const auto x0 = cfg["x0"].get<std::vector<double>>();
  const double horizon = cfg["horizon"].get<double>();
  const auto dt_values = cfg["dt_values"].get<std::vector<double>>();
  const auto n_paths = static_cast<std::size_t>(cfg["n_paths"].get<std::int64_t>());
  const std::uint64_t seed = cfg["seed"].get<std::uint64_t>();
  const double band = cfg["band"].get<double>();
  const double skip_budget = cfg["skip_budget"].get<double>();

  const ResidualStudy study =
      residual_study(f, surface, spec, driver, {x0.data(), x0.size()}, horizon,
                     {dt_values.data(), dt_values.size()}, n_paths, seed, band,
                     opts.threads);

  // Ledger rows for the finest level, replaying the same per-path seeds.
  const double dt_fine = dt_values.back();
  const auto steps = static_cast<std::size_t>(std::llround(horizon / dt_fine));
  const auto grid = uniform_grid(0.0, horizon, steps);
  std::vector<ItoLedger> ledgers(n_paths);
  parallel_for(n_paths, opts.threads, [&](std::size_t i) {
    const PathRecord path =
        simulate_path(spec, driver, {x0.data(), x0.size()}, grid, mix_seed(seed, i));
    ledgers[i] = assemble_ledger(f, surface, path, spec, band, skip_budget);
  });
  write_ledger_csv(ledgers, opts.out_dir / "ledger.csv");
  outputs.push_back("ledger.csv");

  json levels = json::array();
  for (const ResidualLevel& level : study.levels) {
    json l;
    l["dt"] = level.dt;
    l["residuals"] = meanstats_json(level.residuals);
    l["skipped_fraction"] = level.skipped_fraction;
    if (std::isfinite(level.order)) l["order"] = level.order;
    levels.push_back(l);
  }
  stats["levels"] = levels;
  stats["mean_abs_decreasing"] = study.mean_abs_decreasing;
  stats["final_mean_within_3se"] = study.final_mean_within_3se;

  const MeanStats& fin = study.levels.back().residuals;
  const json& acfg = cfg["assert"];
  if (acfg["mean_abs_decreasing"].get<bool>())
    asserts.add("mean-abs-residual-decreasing", study.mean_abs_decreasing,
                "finest mean |residual| " + fmt(fin.mean_abs));
  if (acfg["final_mean_within_3se"].get<bool>())
    asserts.add("final-mean-within-3se", study.final_mean_within_3se,
                "mean " + fmt(fin.mean) + ", stderr " + fmt(fin.stderr_mean));
  if (!acfg["final_mean_abs_max"].is_null()) {
    const double cap = acfg["final_mean_abs_max"].get<double>();
    asserts.add("final-mean-abs-cap", fin.mean_abs <= cap,
                fmt(fin.mean_abs) + " vs cap " + fmt(cap));
  }
}

void run_scan_l(const json& cfg, const RunOptions& opts, json& stats,
                Asserts& asserts, json& outputs) {
  const TestFunction f = make_test_function(cfg["function"].get<std::string>());
  const DiffusionSpec spec = make_dynamics(cfg["dynamics"].get<std::string>());
  const Box box = box_from_json(cfg["box"]);
  LScanConfig scan_cfg;
  scan_cfg.n_values.clear();
  for (const json& n : cfg["n_values"])
    scan_cfg.n_values.push_back(n.get<int>());
  scan_cfg.quad_nodes = cfg["quad_nodes"].get<int>();
  scan_cfg.grid_per_axis = cfg["grid_per_axis"].get<int>();
  scan_cfg.grid_time = cfg["grid_time"].get<int>();
  scan_cfg.band_factor = cfg["band_factor"].get<double>();

  const LScanReport report = scan_l_bound(f, spec, box, scan_cfg, opts.threads);
  write_l_scan_csv(report, opts.out_dir / "scan.csv");
  outputs.push_back("scan.csv");

  json entries = json::array();
  for (const LScanEntry& e : report.entries)
    entries.push_back({{"n", e.n},
                       {"max_abs", e.max_abs},
                       {"arg_t", e.arg_t},
                       {"arg_x", e.arg_x}});
  stats["entries"] = entries;
  stats["median_max"] = report.median_max;
  stats["max_over_n"] = report.max_over_n;
  stats["last_over_median"] = report.last_over_median;
  stats["bounded"] = report.bounded;

  const json& acfg = cfg["assert"];
  if (acfg["bounded"].get<bool>())
    asserts.add("uniform-bound-flat-in-n", report.bounded,
                "last/median " + fmt(report.last_over_median));
  if (!acfg["max_allowed"].is_null()) {
    const double cap = acfg["max_allowed"].get<double>();
    asserts.add("max-below-cap", report.max_over_n <= cap,
                fmt(report.max_over_n) + " vs cap " + fmt(cap));
  }
}

bool boundary_follows_direction(const BoundaryTable& table, Direction dir,
                                bool along_time, double cell) {
  const std::size_t ny = table.y_nodes.empty() ? 1 : table.y_nodes.size();
  const std::size_t nt = table.t_nodes.size();
  auto ok = [&](double prev, double next) {
    return dir == Direction::NonDecreasing ? next >= prev - cell
                                           : next <= prev + cell;
  };
  if (along_time) {
    for (std::size_t iy = 0; iy < ny; ++iy)
      for (std::size_t l = 0; l + 1 < nt; ++l)
        if (!ok(table.values[l * ny + iy], table.values[(l + 1) * ny + iy]))
          return false;
  } else {
    for (std::size_t l = 0; l < nt; ++l)
      for (std::size_t iy = 0; iy + 1 < ny; ++iy)
        if (!ok(table.values[l * ny + iy], table.values[l * ny + iy + 1]))
          return false;
  }
  return true;
}

void run_solve_os(const json& cfg, const RunOptions& opts, json& stats,
                  Asserts& asserts, json& outputs) {
  const StoppingProblem problem =
      make_stopping_problem(cfg["problem"].get<std::string>());
  const json& g = cfg["grid"];
  SolveGrid grid;
  grid.box.t_lo = 0.0;
  grid.box.t_hi = problem.horizon;
  grid.box.lo = {g["x_lo"].get<double>()};
  grid.box.hi = {g["x_hi"].get<double>()};
  if (problem.dim() == 2) {
    grid.box.lo.push_back(g["y_lo"].get<double>());
    grid.box.hi.push_back(g["y_hi"].get<double>());
  }
  grid.nx = g["nx"].get<int>();
  grid.ny = g["ny"].get<int>();
  grid.nt = g["nt"].get<int>();
  grid.tol_gap = g["tol_gap"].get<double>();
  grid.psor_omega = g["psor_omega"].get<double>();
  grid.psor_tol = g["psor_tol"].get<double>();
  grid.psor_max_iters = static_cast<std::size_t>(g["psor_max_iters"].get<std::int64_t>());

  const ValueField field = solve_value(problem, grid);
  const BoundaryTable table = extract_boundary_table(field);
  const LFieldResult lf = l_field(field, problem);
  write_value_csv(field, opts.out_dir / "value.csv");
  write_boundary_table(table, opts.out_dir / "boundary.csv");
  write_l_field_csv(field, lf, opts.out_dir / "l-field.csv");
  outputs.push_back("value.csv");
  outputs.push_back("boundary.csv");
  outputs.push_back("l-field.csv");

  stats["psor_total_iters"] = field.psor_total_iters;
  stats["psor_worst_level_iters"] = field.psor_worst_level_iters;
  stats["island_cells"] = field.island_cells;
  stats["multi_flip_columns"] = field.multi_flip_columns.size();
  stats["boundary_first"] = table.values.front();
  stats["boundary_last"] = table.values.back();
  stats["l_field_sup_abs"] = lf.sup_abs;
  stats["l_field_band_cells"] = lf.band_cells;

  if (!cfg["eval"].is_null()) {
    const auto x = cfg["eval"]["x"].get<std::vector<double>>();
    const double v = field.value_at(cfg["eval"]["t"].get<double>(),
                                    {x.data(), x.size()});
    stats["value_at_eval"] = v;
    const json& acfg = cfg["assert"];
    if (!acfg["value_min"].is_null())
      asserts.add("value-at-least", v >= acfg["value_min"].get<double>(),
                  fmt(v) + " vs min " + fmt(acfg["value_min"].get<double>()));
    if (!acfg["value_max"].is_null())
      asserts.add("value-at-most", v <= acfg["value_max"].get<double>(),
                  fmt(v) + " vs max " + fmt(acfg["value_max"].get<double>()));
  }

  const json& acfg = cfg["assert"];
  asserts.add("island-cells",
              field.island_cells <=
                  static_cast<std::size_t>(acfg["max_island_cells"].get<std::int64_t>()),
              std::to_string(field.island_cells) + " island cells");
  if (!acfg["max_multi_flip_columns"].is_null())
    asserts.add("multi-flip-columns",
                field.multi_flip_columns.size() <=
                    static_cast<std::size_t>(
                        acfg["max_multi_flip_columns"].get<std::int64_t>()),
                std::to_string(field.multi_flip_columns.size()) +
                    " multi-flip columns");

  if (!cfg["monotonicity"].is_null()) {
    const Box box = box_from_json(cfg["monotonicity"]["box"]);
    const auto n_samples = static_cast<std::size_t>(
        cfg["monotonicity"]["n_samples"].get<std::int64_t>());
    const MonotonicityCheck mc = check_monotonicity_conditions(
        problem, box, n_samples, cfg["seed"].get<std::uint64_t>());
    json mj;
    mj["applicable"] = mc.applicable;
    mj["refused_state_dependent_rate"] = mc.refused_state_dependent_rate;
    mj["structure_ok"] = mc.structure_ok;
    mj["time_dir"] = opt_dir_json(mc.time_dir);
    json dirs = json::array();
    for (const auto& d : mc.coord_dirs) dirs.push_back(opt_dir_json(d));
    mj["coord_dirs"] = dirs;
    mj["notes"] = mc.notes;
    stats["monotonicity"] = mj;

    if (acfg["boundary_matches_prediction"].get<bool>()) {
      const double cell =
          (grid.box.hi[0] - grid.box.lo[0]) / static_cast<double>(grid.nx - 1);
      bool pass = mc.applicable;
      std::string detail;
      if (!mc.applicable) {
        detail = "no prediction available";
      } else {
        if (mc.time_dir.has_value()) {
          const bool ok = boundary_follows_direction(table, *mc.time_dir, true, cell);
          pass = pass && ok;
          detail += "time " + dir_name(*mc.time_dir) + (ok ? " ok" : " violated");
        }
        if (field.dim == 2 && mc.coord_dirs.size() > 1 &&
            mc.coord_dirs[1].has_value()) {
          const bool ok =
              boundary_follows_direction(table, *mc.coord_dirs[1], false, cell);
          pass = pass && ok;
          if (!detail.empty()) detail += "; ";
          detail += "coordinate 2 " + dir_name(*mc.coord_dirs[1]) +
                    (ok ? " ok" : " violated");
        }
        if (detail.empty()) {
          detail = "no directional prediction";
          pass = false;
        }
      }
      asserts.add("boundary-matches-prediction", pass, detail);
    }
  }
}

void run_check_monotone(const json& cfg, const RunOptions&, json& stats,
                        Asserts& asserts, json&) {
  const StoppingProblem problem =
      make_stopping_problem(cfg["problem"].get<std::string>());
  const Box box = box_from_json(cfg["box"]);
  const MonotonicityCheck mc = check_monotonicity_conditions(
      problem, box, static_cast<std::size_t>(cfg["n_samples"].get<std::int64_t>()),
      cfg["seed"].get<std::uint64_t>());

  stats["applicable"] = mc.applicable;
  stats["refused_state_dependent_rate"] = mc.refused_state_dependent_rate;
  stats["structure_ok"] = mc.structure_ok;
  stats["time_dir"] = opt_dir_json(mc.time_dir);
  json dirs = json::array();
  for (const auto& d : mc.coord_dirs) dirs.push_back(opt_dir_json(d));
  stats["coord_dirs"] = dirs;
  stats["notes"] = mc.notes;

  const json& acfg = cfg["assert"];
  if (acfg["applicable"].get<bool>())
    asserts.add("conditions-applicable", mc.applicable,
                mc.notes.empty() ? "ok" : mc.notes.front());
  if (!acfg["time_dir"].is_null()) {
    const std::string want = acfg["time_dir"].get<std::string>();
    const bool ok = mc.time_dir.has_value() && dir_name(*mc.time_dir) == want;
    asserts.add("time-direction", ok,
                "predicted " + opt_dir_json(mc.time_dir).dump() + ", expected " + want);
  }
  if (!acfg["coord_dirs"].is_null()) {
    bool ok = acfg["coord_dirs"].size() == mc.coord_dirs.size();
    if (ok)
      for (std::size_t j = 0; j < mc.coord_dirs.size(); ++j) {
        const json& want = acfg["coord_dirs"].at(j);
        if (want.is_null()) continue;
        ok = ok && mc.coord_dirs[j].has_value() &&
             dir_name(*mc.coord_dirs[j]) == want.get<std::string>();
      }
    asserts.add("coordinate-directions", ok, dirs.dump());
  }
}

void run_compare(const json& cfg, const RunOptions& opts, json& stats,
                 Asserts& asserts, json& outputs) {
  const ComparisonInstance inst =
      make_comparison_instance(cfg["instance"].get<std::string>());
  const std::uint64_t seed = cfg["seed"].get<std::uint64_t>();
  const auto reports = compare_refinement(
      inst, cfg["t0"].get<double>(), cfg["t1"].get<double>(),
      static_cast<std::size_t>(cfg["base_steps"].get<std::int64_t>()),
      cfg["levels"].get<int>(),
      static_cast<std::size_t>(cfg["n_paths"].get<std::int64_t>()), seed,
      opts.threads);

  {
    const std::vector<std::string> cols = {"level",    "dt_max",   "tol_ord",
                                           "fraction", "worst",    "violations",
                                           "n_points", "max_theta"};
    CsvWriter writer(opts.out_dir / "refinement.csv", cols);
    for (std::size_t j = 0; j < reports.size(); ++j) {
      const ComparisonReport& r = reports[j];
      writer.row(std::vector<double>{
          static_cast<double>(j), r.dt_max, r.tol_ord, r.ordering_fraction,
          r.worst_violation, static_cast<double>(r.violations),
          static_cast<double>(r.n_points), r.max_theta});
    }
  }
  outputs.push_back("refinement.csv");

  json levels = json::array();
  for (const ComparisonReport& r : reports)
    levels.push_back({{"dt_max", r.dt_max},
                      {"tol_ord", r.tol_ord},
                      {"ordering_fraction", r.ordering_fraction},
                      {"worst_violation", r.worst_violation},
                      {"violations", r.violations},
                      {"n_points", r.n_points},
                      {"coupled", r.coupled}});
  stats["levels"] = levels;

  const json& acfg = cfg["assert"];
  const double frac_min = acfg["ordering_fraction_min"].get<double>();
  bool frac_ok = true, coupled_ok = true;
  for (const ComparisonReport& r : reports) {
    frac_ok = frac_ok && r.ordering_fraction >= frac_min;
    coupled_ok = coupled_ok && r.coupled;
  }
  asserts.add("ordering-fraction", frac_ok,
              "worst level fraction " +
                  fmt(std::min_element(reports.begin(), reports.end(),
                                       [](const auto& a, const auto& b) {
                                         return a.ordering_fraction <
                                                b.ordering_fraction;
                                       })
                          ->ordering_fraction));
  asserts.add("noise-coupling", coupled_ok, "replay hashes agree on every level");
  if (acfg["worst_non_increasing"].get<bool>()) {
    bool ok = true;
    for (std::size_t j = 1; j < reports.size(); ++j)
      ok = ok && reports[j].worst_violation <= reports[j - 1].worst_violation;
    std::string detail;
    for (const auto& r : reports)
      detail += (detail.empty() ? "" : " -> ") + fmt(r.worst_violation);
    asserts.add("worst-violation-non-increasing", ok, detail);
  }

  if (!cfg["coef_check"].is_null()) {
    const Box box = box_from_json(cfg["coef_check"]["box"]);
    const CoefficientReport cr = check_coefficient_conditions(
        inst, box,
        static_cast<std::size_t>(cfg["coef_check"]["n_samples"].get<std::int64_t>()),
        seed);
    json cj;
    cj["lipschitz_declared"] = cr.lipschitz_declared;
    cj["lipschitz_ok"] = cr.lipschitz_ok;
    cj["worst_lipschitz_excess"] = cr.worst_lipschitz_excess;
    cj["modulus_ok"] = cr.modulus_ok;
    cj["worst_modulus_excess"] = cr.worst_modulus_excess;
    cj["divergence"] = cr.divergence.has_value() ? json(*cr.divergence) : json(nullptr);
    cj["pass"] = cr.pass;
    cj["notes"] = cr.notes;
    stats["coefficients"] = cj;
    if (acfg["coefficients_pass"].get<bool>())
      asserts.add("coefficient-conditions", cr.pass,
                  cr.notes.empty() ? "ok" : cr.notes.front());
  }

  if (!cfg["shift_check"].is_null()) {
    const auto grid = uniform_grid(
        cfg["t0"].get<double>(), cfg["t1"].get<double>(),
        static_cast<std::size_t>(cfg["shift_check"]["steps"].get<std::int64_t>()));
    const ShiftInvarianceReport sr = shift_invariance_check(
        inst, grid,
        static_cast<std::size_t>(cfg["shift_check"]["n_paths"].get<std::int64_t>()),
        seed);
    stats["shift_invariance"] = {{"max_abs_diff", sr.max_abs_diff},
                                 {"tolerance", sr.tolerance},
                                 {"pass", sr.pass}};
    if (acfg["shift_pass"].get<bool>())
      asserts.add("shift-invariance", sr.pass,
                  "max diff " + fmt(sr.max_abs_diff) + " vs tol " + fmt(sr.tolerance));
  }
}

void run_dynkin(const json& cfg, const RunOptions& opts, json& stats,
                Asserts& asserts, json&) {
  const StoppingProblem problem =
      make_stopping_problem(cfg["problem"].get<std::string>());
  std::optional<MonotoneSurface> rule;
  if (!cfg["stop_rule"].is_null()) rule = surface_from_json(cfg["stop_rule"]);
  const auto x0 = cfg["x0"].get<std::vector<double>>();
  const DynkinReport report = dynkin_check(
      problem, rule, {x0.data(), x0.size()}, cfg["dt"].get<double>(),
      static_cast<std::size_t>(cfg["n_paths"].get<std::int64_t>()),
      cfg["seed"].get<std::uint64_t>(), opts.threads);

  stats["lhs_mean"] = report.lhs_mean;
  stats["rhs_mean"] = report.rhs_mean;
  stats["diff_mean"] = report.diff_mean;
  stats["diff_stderr"] = report.diff_stderr;
  stats["n_paths"] = report.n_paths;

  if (cfg["assert"]["within_3se"].get<bool>())
    asserts.add("two-sides-within-3se", report.pass,
                "diff " + fmt(report.diff_mean) + ", stderr " +
                    fmt(report.diff_stderr));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("scenario", "cannot write " + path.string());
  out << text;
}

}  // namespace

json load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("scenario", "cannot open " + path.string());
  json raw;
  try {
    raw = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("scenario", path.string() + ": " + e.what());
  }
  return raw;
}

json resolve_scenario(const json& raw, std::optional<std::uint64_t> seed_override) {
  if (!raw.is_object()) cfg_fail("config", "expected an object");
  if (!raw.contains("kind")) cfg_fail("kind", "missing");
  json out;
  const Common c = resolve_common(raw, out, seed_override);
  if (c.kind == "simulate") return resolve_simulate(raw, std::move(out));
  if (c.kind == "verify-ito") return resolve_verify_ito(raw, std::move(out));
  if (c.kind == "scan-L") return resolve_scan_l(raw, std::move(out));
  if (c.kind == "solve-os") return resolve_solve_os(raw, std::move(out));
  if (c.kind == "check-monotone") return resolve_check_monotone(raw, std::move(out));
  if (c.kind == "compare") return resolve_compare(raw, std::move(out));
  if (c.kind == "dynkin") return resolve_dynkin(raw, std::move(out));
  cfg_fail("kind", "unknown pipeline: " + c.kind);
}

ScenarioResult run_scenario(const json& resolved, const RunOptions& opts) {
  std::filesystem::create_directories(opts.out_dir);
  write_text(opts.out_dir / "resolved-config.json", resolved.dump(2) + "\n");

  ScenarioResult result;
  json report;
  report["name"] = resolved["name"];
  report["kind"] = resolved["kind"];
  json stats = json::object();
  json outputs = json::array();
  outputs.push_back("resolved-config.json");
  outputs.push_back("report.json");
  Asserts asserts;

  const std::string kind = resolved["kind"].get<std::string>();
  try {
    if (kind == "simulate")
      run_simulate(resolved, opts, stats, asserts, outputs);
    else if (kind == "verify-ito")
      run_verify_ito(resolved, opts, stats, asserts, outputs);
    else if (kind == "scan-L")
      run_scan_l(resolved, opts, stats, asserts, outputs);
    else if (kind == "solve-os")
      run_solve_os(resolved, opts, stats, asserts, outputs);
    else if (kind == "check-monotone")
      run_check_monotone(resolved, opts, stats, asserts, outputs);
    else if (kind == "compare")
      run_compare(resolved, opts, stats, asserts, outputs);
    else
      run_dynkin(resolved, opts, stats, asserts, outputs);

    result.pass = asserts.all_pass;
    result.exit_code = asserts.all_pass ? 0 : 1;
    result.message = asserts.all_pass ? "all assertions passed"
                                      : "one or more assertions failed";
  } catch (const ConfigError& e) {
    result.exit_code = 2;
    result.pass = false;
    result.message = e.what();
    report["error"] = e.what();
  } catch (const NumericError& e) {
    result.exit_code = 3;
    result.pass = false;
    result.message = e.what();
    report["error"] = e.what();
  }

  report["statistics"] = stats;
  report["assertions"] = asserts.items;
  report["outputs"] = outputs;
  report["pass"] = result.pass;
  write_text(opts.out_dir / "report.json", report.dump(2) + "\n");
  result.report = std::move(report);
  return result;
}

ScenarioResult run_scenario_file(const std::filesystem::path& path,
                                 const RunOptions& opts) {
  json resolved;
  try {
    resolved = resolve_scenario(load_scenario(path), opts.seed);
  } catch (const ConfigError& e) {
    ScenarioResult result;
    result.exit_code = 2;
    result.pass = false;
    result.message = e.what();
    result.report = {{"error", e.what()}, {"pass", false}};
    std::error_code ec;
    std::filesystem::create_directories(opts.out_dir, ec);
    if (!ec) write_text(opts.out_dir / "report.json", result.report.dump(2) + "\n");
    return result;
  }
  return run_scenario(resolved, opts);
}

}  // namespace itokit
