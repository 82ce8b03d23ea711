#pragma once

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/bessel.hpp>

#include "ideaflow/error.hpp"

namespace ideaflow {

namespace detail {

// Debye uniform expansion of log(I_nu(x)) - x, valid when sqrt(nu^2 + x^2) is large.
// Terms are u_k(t)/t^k of the classical expansion, t = nu / sqrt(nu^2 + x^2).
inline double log_bessel_i_scaled_debye(double nu, double x) {
  const double r = std::hypot(nu, x);
  const double p = 1.0 / r;
  const double t = nu * p;
  const double t2 = t * t;
  const double u1 = (3.0 - 5.0 * t2) / 24.0;
  const double u2 = (81.0 + t2 * (-462.0 + t2 * 385.0)) / 1152.0;
  const double u3 = (30375.0 + t2 * (-369603.0 + t2 * (765765.0 - t2 * 425425.0))) / 414720.0;
  const double u4 =
      (4465125.0 + t2 * (-94121676.0 + t2 * (349922430.0 + t2 * (-446185740.0 + t2 * 185910725.0)))) /
      39813120.0;
  const double series = p * (u1 + p * (u2 + p * (u3 + p * u4)));
  const double order_term = nu > 0.0 ? nu * std::log(x / (nu + r)) : 0.0;
  return nu * nu / (r + x) + order_term - 0.5 * std::log(2.0 * std::numbers::pi * r) +
         std::log1p(series);
}

}  // namespace detail

// log(I_nu(x)) - x for nu >= 0, x >= 0. Stays finite where I_nu overflows.
inline double log_bessel_i_scaled(double nu, double x) {
  if (!(nu >= 0.0) || !(x >= 0.0)) throw DomainError("log_bessel_i: need nu >= 0 and x >= 0");
  if (x == 0.0) return nu == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  if (std::hypot(nu, x) >= 100.0) return detail::log_bessel_i_scaled_debye(nu, x);
  // Leading term of the power series when I_nu(x) would underflow.
  if (x * x < 1e-8 * (nu + 1.0))
    return nu * std::log(0.5 * x) - std::lgamma(nu + 1.0) + std::log1p(0.25 * x * x / (nu + 1.0)) - x;
  const double v = boost::math::cyl_bessel_i(nu, x);
  if (!(v > 0.0) || !std::isfinite(v))
    return nu * std::log(0.5 * x) - std::lgamma(nu + 1.0) + std::log1p(0.25 * x * x / (nu + 1.0)) - x;
  return std::log(v) - x;
}

inline double log_bessel_i(double nu, double x) { return log_bessel_i_scaled(nu, x) + x; }

// log(exp(a) + exp(b)) without overflow.
inline double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace ideaflow
