// Independent reference implementations the test suites compare against.
// Everything here is written from first principles (lattice trees, textbook
// quadrature, closed forms) and deliberately shares no code with the library
// so that agreement between the two is evidence, not tautology.
#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "itokit/mollify.hpp"
#include "itokit/sde.hpp"

namespace oracle {

// Cox–Ross–Rubinstein tree price of the American put.
double crr_put_price(double s0, double strike, double r, double sigma,
                     double horizon, int steps);

// Per-level critical prices of the same tree: at each interior time the
// largest lattice node where immediate exercise is strictly optimal.  Levels
// where no node exercises report 0.
struct CrrBoundary {
  std::vector<double> times;
  std::vector<double> critical;
};
CrrBoundary crr_put_boundary(double s0, double strike, double r, double sigma,
                             double horizon, int steps);

// Black–Scholes European put (lower bound for the American one).
double norm_cdf(double z);
double black_scholes_put(double s0, double strike, double r, double sigma,
                         double horizon);

// Perpetual American put: exercise threshold and value, both closed-form.
double perpetual_put_threshold(double strike, double r, double sigma);
double perpetual_put_value(double x, double strike, double r, double sigma);

// Composite quadrature on [a, b] with n panels.
double trapezoid(const std::function<double(double)>& f, double a, double b, int n);
double simpson(const std::function<double(double)>& f, double a, double b, int n);

// Textbook change-of-variables residual for one continuous path: the f_x
// term is taken against raw state increments (drift, noise and continuous BV
// motion all at once), so the bookkeeping differs from the library's
// term-by-term ledger while targeting the same identity.  Paths with jumps
// are rejected.
double classical_ito_residual(const itokit::TestFunction& f,
                              const itokit::PathRecord& path,
                              const itokit::DiffusionSpec& spec);

// Central finite differences for derivative cross-checks.
double fd_dt(const itokit::ScalarFn& f, double t, std::vector<double> x,
             double h = 1e-5);
double fd_dx(const itokit::ScalarFn& f, double t, std::vector<double> x, int i,
             double h = 1e-5);
double fd_dxx(const itokit::ScalarFn& f, double t, std::vector<double> x, int i,
              int j, double h = 1e-4);

}  // namespace oracle
