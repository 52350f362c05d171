#include "itokit/builtins.hpp"

#include <algorithm>
#include <cmath>

namespace itokit {

namespace {

ScalarFn constant_fn(double v) {
  return [v](double, std::span<const double>) { return v; };
}

TestFunction make_quadratic() {
  TestFunction f;
  f.dim = 1;
  f.value = [](double, std::span<const double> x) { return x[0] * x[0]; };
  f.dt = constant_fn(0.0);
  f.dx = {[](double, std::span<const double> x) { return 2.0 * x[0]; }};
  f.dxx = {constant_fn(2.0)};
  return f;
}

TestFunction make_cubic_poly() {
  TestFunction f;
  f.dim = 1;
  f.value = [](double t, std::span<const double> x) {
    const double v = x[0];
    return v * v * v - 2.0 * v * v + 3.0 * v - 1.0 + t * (1.0 + v);
  };
  f.dt = [](double, std::span<const double> x) { return 1.0 + x[0]; };
  f.dx = {[](double t, std::span<const double> x) {
    const double v = x[0];
    return 3.0 * v * v - 4.0 * v + 3.0 + t;
  }};
  f.dxx = {[](double, std::span<const double> x) { return 6.0 * x[0] - 4.0; }};
  return f;
}

TestFunction make_cubic_2d() {
  TestFunction f;
  f.dim = 2;
  f.value = [](double, std::span<const double> x) {
    return x[0] * x[0] * x[0] + x[0] * x[0] * x[1] - x[1] * x[1] + 2.0;
  };
  f.dt = constant_fn(0.0);
  f.dx = {
      [](double, std::span<const double> x) {
        return 3.0 * x[0] * x[0] + 2.0 * x[0] * x[1];
      },
      [](double, std::span<const double> x) { return x[0] * x[0] - 2.0 * x[1]; },
  };
  f.dxx = {
      [](double, std::span<const double> x) { return 6.0 * x[0] + 2.0 * x[1]; },
      [](double, std::span<const double> x) { return 2.0 * x[0]; },
      [](double, std::span<const double> x) { return 2.0 * x[0]; },
      constant_fn(-2.0),
  };
  return f;
}

TestFunction make_x32_boundary() {
  TestFunction f;
  f.dim = 1;
  f.value = [](double, std::span<const double> x) {
    return x[0] > 0.0 ? x[0] * std::sqrt(x[0]) : 0.0;
  };
  f.dt = constant_fn(0.0);
  f.dx = {[](double, std::span<const double> x) {
    return x[0] > 0.0 ? 1.5 * std::sqrt(x[0]) : 0.0;
  }};
  f.dxx = {[](double, std::span<const double> x) {
    return x[0] > 0.0 ? 0.75 / std::sqrt(x[0]) : 0.0;
  }};
  f.smooth_split = constant_surface(1, 0.0);
  return f;
}

TestFunction make_xabs_c1() {
  TestFunction f;
  f.dim = 1;
  f.value = [](double, std::span<const double> x) { return x[0] * std::abs(x[0]); };
  f.dt = constant_fn(0.0);
  f.dx = {[](double, std::span<const double> x) { return 2.0 * std::abs(x[0]); }};
  f.dxx = {[](double, std::span<const double> x) {
    return x[0] > 0.0 ? 2.0 : (x[0] < 0.0 ? -2.0 : 0.0);
  }};
  f.smooth_split = constant_surface(1, 0.0);
  return f;
}

TestFunction make_smooth_2d() {
  TestFunction f;
  f.dim = 2;
  f.value = [](double t, std::span<const double> x) {
    return std::sin(x[0]) * std::cos(x[1]) + 0.5 * t;
  };
  f.dt = constant_fn(0.5);
  f.dx = {
      [](double, std::span<const double> x) {
        return std::cos(x[0]) * std::cos(x[1]);
      },
      [](double, std::span<const double> x) {
        return -std::sin(x[0]) * std::sin(x[1]);
      },
  };
  f.dxx = {
      [](double, std::span<const double> x) {
        return -std::sin(x[0]) * std::cos(x[1]);
      },
      [](double, std::span<const double> x) {
        return -std::cos(x[0]) * std::sin(x[1]);
      },
      [](double, std::span<const double> x) {
        return -std::cos(x[0]) * std::sin(x[1]);
      },
      [](double, std::span<const double> x) {
        return -std::sin(x[0]) * std::cos(x[1]);
      },
  };
  return f;
}

DiffusionSpec make_standard_bm() {
  DiffusionSpec spec;
  spec.dim = 1;
  spec.drift = [](double, std::span<const double>, std::span<double> out) {
    out[0] = 0.0;
  };
  spec.diffusion = [](double, std::span<const double>, std::span<double> out) {
    out[0] = 1.0;
  };
  spec.hints.drift_lipschitz = true;
  spec.hints.diffusion_lipschitz = true;
  return spec;
}

DiffusionSpec make_cir() {
  constexpr double kappa = 1.0, mean = 0.5, vol = 0.5;
  DiffusionSpec spec;
  spec.dim = 1;
  spec.drift = [=](double, std::span<const double> x, std::span<double> out) {
    out[0] = kappa * (mean - x[0]);
  };
  spec.diffusion = [=](double, std::span<const double> x, std::span<double> out) {
    out[0] = vol * std::sqrt(std::max(x[0], 0.0));
  };
  spec.hints.drift_lipschitz = true;
  spec.hints.diffusion_sqrt_modulus = true;
  return spec;
}

DiffusionSpec make_unit_sqrt() {
  DiffusionSpec spec;
  spec.dim = 1;
  spec.drift = [](double, std::span<const double>, std::span<double> out) {
    out[0] = 0.0;
  };
  spec.diffusion = [](double, std::span<const double> x, std::span<double> out) {
    out[0] = std::sqrt(std::max(x[0], 0.0));
  };
  spec.hints.drift_lipschitz = true;
  spec.hints.diffusion_sqrt_modulus = true;
  return spec;
}

DiffusionSpec make_gbm() {
  constexpr double rate = 0.05, vol = 0.2;
  DiffusionSpec spec;
  spec.dim = 1;
  spec.drift = [=](double, std::span<const double> x, std::span<double> out) {
    out[0] = rate * x[0];
  };
  spec.diffusion = [=](double, std::span<const double> x, std::span<double> out) {
    out[0] = vol * x[0];
  };
  spec.hints.drift_lipschitz = true;
  spec.hints.diffusion_lipschitz = true;
  return spec;
}

StoppingProblem make_american_put() {
  constexpr double strike = 100.0;
  StoppingProblem p;
  p.dynamics = make_gbm();
  p.gain = [=](double, std::span<const double> x) {
    return std::max(strike - x[0], 0.0);
  };
  p.gain_dt = constant_fn(0.0);
  p.gain_dx = {[=](double, std::span<const double> x) {
    return x[0] < strike ? -1.0 : 0.0;
  }};
  p.gain_dxx = {constant_fn(0.0)};
  p.discount = 0.05;
  p.horizon = 1.0;
  p.stopping_below = true;
  return p;
}

StoppingProblem make_quadratic_gain_bm() {
  StoppingProblem p;
  p.dynamics = make_standard_bm();
  p.gain = [](double, std::span<const double> x) { return x[0] * x[0]; };
  p.gain_dt = constant_fn(0.0);
  p.gain_dx = {[](double, std::span<const double> x) { return 2.0 * x[0]; }};
  p.gain_dxx = {constant_fn(2.0)};
  p.discount = 0.1;
  p.horizon = 1.0;
  p.stopping_below = true;
  return p;
}

ComparisonInstance make_cir_ordered_drifts() {
  constexpr double kappa = 1.0, mean_lo = 0.3, mean_hi = 0.5, vol = 0.5;
  ComparisonInstance inst;
  inst.eta1 = [=](double, double y, std::span<const double>) {
    return kappa * (mean_lo - y);
  };
  inst.eta2 = [=](double, double y, std::span<const double>) {
    return kappa * (mean_hi - y);
  };
  inst.theta = [=](double, double y, std::span<const double>) {
    return vol * std::sqrt(std::max(y, 0.0));
  };
  inst.y0_1 = 0.25;
  inst.y0_2 = 0.25;
  inst.lipschitz_leg = 1;
  inst.lipschitz_k = kappa;
  inst.h_modulus = Modulus::square_root(vol);
  inst.full_truncation = true;
  return inst;
}

}  // namespace

std::vector<BuiltinInfo> list_builtins() {
  std::vector<BuiltinInfo> out = {
      {"quadratic", "test-function", "U(t,x) = x^2; smooth everywhere"},
      {"cubic-poly", "test-function",
       "degree-3 polynomial in x with a linear time term"},
      {"cubic-2d", "test-function", "degree-3 polynomial in two variables"},
      {"x32-boundary", "test-function",
       "x^{3/2} on x>0, zero elsewhere; C^1 with curvature blow-up at 0"},
      {"xabs-c1", "test-function",
       "x|x|; C^1 with a curvature sign flip across 0"},
      {"smooth-2d", "test-function", "sin(x1)cos(x2) + t/2; smooth"},
      {"standard-bm", "dynamics", "driftless unit-volatility Brownian motion"},
      {"cir", "dynamics",
       "square-root mean reversion dX = (0.5 - X)dt + 0.5 sqrt(X+) dB"},
      {"gbm", "dynamics", "geometric Brownian motion, rate 0.05, volatility 0.2"},
      {"unit-sqrt", "dynamics",
       "driftless square-root volatility, squared volatility equal to x+"},
      {"zero-boundary", "surface", "flat threshold at 0, continuation above"},
      {"american-put", "stopping-problem",
       "put payoff (100 - x)+ under gbm, discount 0.05, horizon 1"},
      {"quadratic-gain-bm", "stopping-problem",
       "gain x^2 under Brownian motion, discount 0.1, horizon 1"},
      {"cir-ordered-drifts", "comparison-instance",
       "two square-root diffusions with ordered mean levels 0.3 < 0.5"},
      {"linear", "modulus", "h(u) = c u"},
      {"square-root", "modulus", "h(u) = c sqrt(u)"},
      {"holder", "modulus", "h(u) = c u^p"},
  };
  std::sort(out.begin(), out.end(), [](const BuiltinInfo& a, const BuiltinInfo& b) {
    return a.kind != b.kind ? a.kind < b.kind : a.name < b.name;
  });
  return out;
}

TestFunction make_test_function(const std::string& name) {
  if (name == "quadratic") return make_quadratic();
  if (name == "cubic-poly") return make_cubic_poly();
  if (name == "cubic-2d") return make_cubic_2d();
  if (name == "x32-boundary") return make_x32_boundary();
  if (name == "xabs-c1") return make_xabs_c1();
  if (name == "smooth-2d") return make_smooth_2d();
  throw ConfigError("builtins", "unknown test function: " + name);
}

DiffusionSpec make_dynamics(const std::string& name) {
  if (name == "standard-bm") return make_standard_bm();
  if (name == "cir") return make_cir();
  if (name == "gbm") return make_gbm();
  if (name == "unit-sqrt") return make_unit_sqrt();
  throw ConfigError("builtins", "unknown dynamics: " + name);
}

MonotoneSurface make_surface(const std::string& name) {
  if (name == "zero-boundary") return constant_surface(1, 0.0);
  throw ConfigError("builtins", "unknown surface: " + name);
}

StoppingProblem make_stopping_problem(const std::string& name) {
  if (name == "american-put") return make_american_put();
  if (name == "quadratic-gain-bm") return make_quadratic_gain_bm();
  throw ConfigError("builtins", "unknown stopping problem: " + name);
}

ComparisonInstance make_comparison_instance(const std::string& name) {
  if (name == "cir-ordered-drifts") return make_cir_ordered_drifts();
  throw ConfigError("builtins", "unknown comparison instance: " + name);
}

Modulus make_modulus(const std::string& name, double scale, double exponent) {
  if (name == "linear") return Modulus::linear(scale);
  if (name == "square-root") return Modulus::square_root(scale);
  if (name == "holder") return Modulus::holder(scale, exponent);
  throw ConfigError("builtins", "unknown modulus: " + name);
}

std::vector<std::string> c1_test_function_names() {
  return {"quadratic", "cubic-poly", "cubic-2d",
          "x32-boundary", "xabs-c1", "smooth-2d"};
}

}  // namespace itokit
