// Named, ready-to-run instances: test functions, dynamics, surfaces, stopping
// problems, comparison instances and moduli, keyed by stable string names so
// scenario files and tests can refer to them.
#pragma once

#include <string>
#include <vector>

#include "itokit/boundary.hpp"
#include "itokit/comparison.hpp"
#include "itokit/mollify.hpp"
#include "itokit/sde.hpp"
#include "itokit/stopping.hpp"

namespace itokit {

struct BuiltinInfo {
  std::string name;
  std::string kind;     // test-function | dynamics | surface | stopping-problem
                        // | comparison-instance | modulus
  std::string summary;  // what the instance is, mathematically
};

// Stable dump of everything registered, sorted by (kind, name).
std::vector<BuiltinInfo> list_builtins();

// Factories throw ConfigError("builtins", ...) for unknown names.
TestFunction make_test_function(const std::string& name);
DiffusionSpec make_dynamics(const std::string& name);
MonotoneSurface make_surface(const std::string& name);
StoppingProblem make_stopping_problem(const std::string& name);
ComparisonInstance make_comparison_instance(const std::string& name);
Modulus make_modulus(const std::string& name, double scale = 1.0,
                     double exponent = 1.0);

// All registered test functions with continuous first derivatives (currently
// every one of them), for sweep-style tests.
std::vector<std::string> c1_test_function_names();

}  // namespace itokit
