#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ideaflow/error.hpp"
#include "ideaflow/series.hpp"

namespace ideaflow {

// Parameters of the law of motion (1/A) dA/dt = theta * A^-beta * I^lambda.
struct JonesParams {
  double theta = 1.0;   // units A^beta I^-lambda / year
  double beta = 1.0;    // diminishing returns ("fishing out")
  double lambda = 1.0;  // returns to scale of research input ("stepping on toes")

  void validate() const {
    if (!(theta > 0.0) || !std::isfinite(theta)) throw DomainError("jones: theta must be positive");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("jones: lambda must be >= 0");
    if (!std::isfinite(beta)) throw DomainError("jones: beta must be finite");
  }

  // Returns to research effort r = lambda / beta. NaN when beta == 0.
  double returns() const noexcept {
    return beta != 0.0 ? lambda / beta : std::numeric_limits<double>::quiet_NaN();
  }
};

// ((a2/a1)^beta - 1) / beta, with the log(a2/a1) limit near beta = 0.
inline double q_beta(double a1, double a2, double beta) {
  if (!(a1 > 0.0) || !(a2 > 0.0)) throw DomainError("q_beta: levels must be positive");
  const double log_ratio = std::log(a2 / a1);
  const double x = beta * log_ratio;
  if (std::abs(x) < 1e-8) return log_ratio * (1.0 + 0.5 * x);
  return std::expm1(x) / beta;
}

namespace detail {

// A(t2) given A(t1) = a1 and log of the integral of I^lambda over [t1, t2].
// Returns NaN when 1 + beta*u <= 0 (caller reports the singularity).
inline double propagate_from_log_integral(const JonesParams& p, double a1, double log_integral) {
  const double u = std::exp(std::log(p.theta) - p.beta * std::log(a1) + log_integral);
  const double bu = p.beta * u;
  if (std::abs(bu) < 1e-6) return a1 * std::exp(u - 0.5 * p.beta * u * u);
  if (bu <= -1.0) return std::numeric_limits<double>::quiet_NaN();
  return a1 * std::exp(std::log1p(bu) / p.beta);
}

}  // namespace detail

// Closed-form solution of the law of motion from t1 to t2:
// A(t2) = (a1^beta + beta * theta * int_{t1}^{t2} I^lambda dt)^(1/beta).
inline double propagate(const JonesParams& p, double a1, const InputPath& path, double t1, double t2) {
  p.validate();
  if (!(a1 > 0.0)) throw DomainError("propagate: a1 must be positive");
  if (!(t1 < t2)) throw OrderingError("propagate: need t1 < t2");
  const double a2 = detail::propagate_from_log_integral(p, a1, path.log_integral_pow(p.lambda, t1, t2));
  if (std::isnan(a2)) {
    // A^beta reaches zero where beta*theta*J(t1, t*) = -a1^beta.
    const double target = -std::pow(a1, p.beta) / (p.beta * p.theta);
    double lo = t1, hi = t2;
    for (int it = 0; it < 200 && hi - lo > 1e-12 * (1.0 + std::abs(hi)); ++it) {
      const double mid = 0.5 * (lo + hi);
      (path.integral_pow(p.lambda, t1, mid) < target ? lo : hi) = mid;
    }
    throw SingularityError("propagate: A^beta reaches zero (beta < 0 blow-down) at t = " +
                               std::to_string(0.5 * (lo + hi)),
                           0.5 * (lo + hi));
  }
  return a2;
}

// Deterministic trajectory on `grid`, starting from a0 at grid[0].
inline TimeSeries simulate_deterministic(const JonesParams& p, double a0, const InputPath& path,
                                         std::span<const double> grid) {
  if (grid.size() < 2) throw DomainError("simulate: grid needs at least 2 times");
  std::vector<double> times(grid.begin(), grid.end());
  std::vector<double> levels{a0};
  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (!(grid[k] > grid[k - 1])) throw OrderingError("simulate: grid must be strictly increasing");
    levels.push_back(propagate(p, levels.back(), path, grid[k - 1], grid[k]));
  }
  return TimeSeries(std::move(times), std::move(levels));
}

// Fixed-step RK4 on dA/dt = theta * A^(1-beta) * I^lambda. Independent check
// of the closed form; the last step is shortened to land on t2.
inline double ode_oracle(const JonesParams& p, double a0, const InputPath& path, double t1, double t2,
                         double step) {
  if (!(step > 0.0)) throw DomainError("ode_oracle: step must be positive");
  auto rhs = [&](double t, double a) {
    return p.theta * std::pow(a, 1.0 - p.beta) * std::pow(path.value(std::min(t, t2)), p.lambda);
  };
  double t = t1, a = a0;
  while (t < t2) {
    const double h = std::min(step, t2 - t);
    const double k1 = rhs(t, a);
    const double k2 = rhs(t + 0.5 * h, a + 0.5 * h * k1);
    const double k3 = rhs(t + 0.5 * h, a + 0.5 * h * k2);
    const double k4 = rhs(t + h, a + h * k3);
    a += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t = (t2 - t <= step) ? t2 : t + h;
  }
  return a;
}

}  // namespace ideaflow
