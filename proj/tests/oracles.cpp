#include "oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace oracle {

namespace {

struct CrrParams {
  double up, down, p, disc;
};

CrrParams crr_params(double r, double sigma, double dt) {
  CrrParams c;
  c.up = std::exp(sigma * std::sqrt(dt));
  c.down = 1.0 / c.up;
  c.disc = std::exp(-r * dt);
  c.p = (std::exp(r * dt) - c.down) / (c.up - c.down);
  if (c.p <= 0.0 || c.p >= 1.0)
    throw std::invalid_argument("crr: risk-neutral weight outside (0,1)");
  return c;
}

}  // namespace

double crr_put_price(double s0, double strike, double r, double sigma,
                     double horizon, int steps) {
  const double dt = horizon / steps;
  const CrrParams c = crr_params(r, sigma, dt);

  std::vector<double> value(steps + 1);
  for (int j = 0; j <= steps; ++j) {
    const double s = s0 * std::pow(c.up, j) * std::pow(c.down, steps - j);
    value[j] = std::max(strike - s, 0.0);
  }
  for (int k = steps - 1; k >= 0; --k) {
    for (int j = 0; j <= k; ++j) {
      const double s = s0 * std::pow(c.up, j) * std::pow(c.down, k - j);
      const double cont = c.disc * (c.p * value[j + 1] + (1.0 - c.p) * value[j]);
      value[j] = std::max(cont, std::max(strike - s, 0.0));
    }
  }
  return value[0];
}

CrrBoundary crr_put_boundary(double s0, double strike, double r, double sigma,
                             double horizon, int steps) {
  const double dt = horizon / steps;
  const CrrParams c = crr_params(r, sigma, dt);

  CrrBoundary b;
  b.times.resize(steps);
  b.critical.assign(steps, 0.0);

  std::vector<double> value(steps + 1);
  for (int j = 0; j <= steps; ++j) {
    const double s = s0 * std::pow(c.up, j) * std::pow(c.down, steps - j);
    value[j] = std::max(strike - s, 0.0);
  }
  for (int k = steps - 1; k >= 0; --k) {
    b.times[k] = k * dt;
    for (int j = 0; j <= k; ++j) {
      const double s = s0 * std::pow(c.up, j) * std::pow(c.down, k - j);
      const double cont = c.disc * (c.p * value[j + 1] + (1.0 - c.p) * value[j]);
      const double exercise = std::max(strike - s, 0.0);
      if (exercise > cont && s > b.critical[k]) b.critical[k] = s;
      value[j] = std::max(cont, exercise);
    }
  }
  return b;
}

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double black_scholes_put(double s0, double strike, double r, double sigma,
                         double horizon) {
  const double sq = sigma * std::sqrt(horizon);
  const double d1 =
      (std::log(s0 / strike) + (r + 0.5 * sigma * sigma) * horizon) / sq;
  const double d2 = d1 - sq;
  return strike * std::exp(-r * horizon) * norm_cdf(-d2) - s0 * norm_cdf(-d1);
}

double perpetual_put_threshold(double strike, double r, double sigma) {
  const double g = 2.0 * r / (sigma * sigma);
  return strike * g / (1.0 + g);
}

double perpetual_put_value(double x, double strike, double r, double sigma) {
  const double g = 2.0 * r / (sigma * sigma);
  const double b = perpetual_put_threshold(strike, r, sigma);
  if (x <= b) return strike - x;
  return (strike - b) * std::pow(x / b, -g);
}

double trapezoid(const std::function<double(double)>& f, double a, double b,
                 int n) {
  const double h = (b - a) / n;
  double sum = 0.5 * (f(a) + f(b));
  for (int k = 1; k < n; ++k) sum += f(a + k * h);
  return sum * h;
}

double simpson(const std::function<double(double)>& f, double a, double b,
               int n) {
  if (n % 2 != 0) throw std::invalid_argument("simpson: n must be even");
  const double h = (b - a) / n;
  double sum = f(a) + f(b);
  for (int k = 1; k < n; ++k) sum += f(a + k * h) * (k % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

double classical_ito_residual(const itokit::TestFunction& f,
                              const itokit::PathRecord& path,
                              const itokit::DiffusionSpec& spec) {
  if (!path.jumps.empty())
    throw std::invalid_argument("classical bookkeeping: continuous paths only");
  if (f.dim != path.dim || !f.has_hess())
    throw std::invalid_argument("classical bookkeeping: needs a full hessian");

  const int m = path.dim;
  std::vector<double> beta(m * m);
  const double t_end = path.times.back();
  const double t0 = path.times.front();

  double rhs = 0.0;
  for (std::size_t k = 0; k < path.steps(); ++k) {
    const double t = path.times[k];
    const double dt = path.times[k + 1] - t;
    const auto x = path.state(k);
    const auto xn = path.state(k + 1);

    rhs += f.dt(t, x) * dt;
    for (int i = 0; i < m; ++i) rhs += f.dx[i](t, x) * (xn[i] - x[i]);
    spec.eval_beta(t, x, beta);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        rhs += 0.5 * beta[i * m + j] * f.dxx[i * m + j](t, x) * dt;
  }
  const double lhs =
      f.value(t_end, path.state(path.steps())) - f.value(t0, path.state(0));
  return lhs - rhs;
}

double fd_dt(const itokit::ScalarFn& f, double t, std::vector<double> x,
             double h) {
  return (f(t + h, x) - f(t - h, x)) / (2.0 * h);
}

double fd_dx(const itokit::ScalarFn& f, double t, std::vector<double> x, int i,
             double h) {
  x[i] += h;
  const double up = f(t, x);
  x[i] -= 2.0 * h;
  const double down = f(t, x);
  return (up - down) / (2.0 * h);
}

double fd_dxx(const itokit::ScalarFn& f, double t, std::vector<double> x, int i,
              int j, double h) {
  if (i == j) {
    const double mid = f(t, x);
    x[i] += h;
    const double up = f(t, x);
    x[i] -= 2.0 * h;
    const double down = f(t, x);
    return (up - 2.0 * mid + down) / (h * h);
  }
  x[i] += h;
  x[j] += h;
  const double pp = f(t, x);
  x[j] -= 2.0 * h;
  const double pm = f(t, x);
  x[i] -= 2.0 * h;
  const double mm = f(t, x);
  x[j] += 2.0 * h;
  const double mp = f(t, x);
  return (pp - pm - mp + mm) / (4.0 * h * h);
}

}  // namespace oracle
