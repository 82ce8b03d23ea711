#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "ideaflow/error.hpp"
#include "ideaflow/rng.hpp"

namespace ideaflow {

// Stable law in the continuous 0-parametrization (Nolan's S0): the
// characteristic function of the standard variable is
//   exp(-|t|^a [1 + i b tan(pi a / 2) sign(t) (|t|^(1-a) - 1)])      (a != 1)
//   exp(-|t|   [1 + i b (2/pi) sign(t) log|t|])                     (a == 1)
// and X = rate + scale * Z. For a process, `rate` and `scale` are the
// location and scale of the unit-time increment.
struct StableParams {
  double alpha = 2.0;
  double skew = 0.0;
  double rate = 0.0;
  double scale = 1.0;

  void validate() const {
    if (!(alpha > 0.0 && alpha <= 2.0)) throw DomainError("stable: alpha must lie in (0, 2]");
    if (!(std::abs(skew) <= 1.0)) throw DomainError("stable: |skew| must be <= 1");
    if (!(scale > 0.0) || !std::isfinite(scale)) throw DomainError("stable: scale must be positive");
    if (!std::isfinite(rate)) throw DomainError("stable: rate must be finite");
  }
};

// Density values below this are reported as this value (log = -690.8).
inline constexpr double kStableDensityFloor = 1e-300;

namespace detail {

// tan(pi a / 2), the skewness coupling of the 0-parametrization.
inline double stable_k(double alpha) { return std::tan(0.5 * std::numbers::pi * alpha); }

struct StablePhase {
  double alpha, skew, z, k;

  // Phase of the inversion integrand; u - u^a is written through expm1 so the
  // product with k stays accurate as a -> 1.
  double operator()(double u) const {
    if (u == 0.0) return 0.0;
    if (alpha == 1.0) return z * u + skew * (2.0 / std::numbers::pi) * u * std::log(u);
    return z * u - skew * k * u * std::expm1((alpha - 1.0) * std::log(u));
  }

  double derivative(double u) const {
    if (alpha == 1.0) return z + skew * (2.0 / std::numbers::pi) * (std::log(u) + 1.0);
    return z - skew * k * (alpha * std::exp((alpha - 1.0) * std::log(u)) - 1.0);
  }
};

// Integral over [0, u_max] of exp(-u^a) * g(u), split at roughly half periods of
// the phase. The first panel uses tanh-sinh to absorb the u^a endpoint behaviour.
template <typename G>
double stable_oscillatory_integral(double alpha, const StablePhase& ph, G&& g) {
  const double u_max = std::pow(27.63, 1.0 / alpha);  // exp(-u^a) < 1e-12 beyond
  auto integrand = [&](double u) -> double { return std::exp(-std::pow(u, alpha)) * g(u); };
  const double first = std::min(u_max, 1.0 / (std::abs(ph.z) + std::abs(ph.skew * ph.k) + 1.0));
  // integrate() grows its abscissa tables lazily, so each thread keeps its own.
  thread_local boost::math::quadrature::tanh_sinh<double> ts(12);
  double total = ts.integrate(integrand, 0.0, first, 1e-13);
  double u = first;
  while (u < u_max) {
    double w = std::numbers::pi / (std::abs(ph.derivative(u)) + 1.0);
    w = std::min(w, std::numbers::pi / (std::abs(ph.derivative(std::min(u + w, u_max))) + 1.0));
    w = std::max(w, 1e-6 * u_max);
    const double b = std::min(u + w, u_max);
    total += boost::math::quadrature::gauss<double, 30>::integrate(integrand, u, b);
    u = b;
  }
  return total;
}

// Tail expansions in the 1-parametrization for large positive x: the density
// (survival = false) or P(X > x) (survival = true), the latter being the former
// integrated term by term. They converge for a < 1 and are asymptotic for
// a > 1, in which case the sum is cut at its smallest term. Returns NaN when
// that term is not negligible.
inline double stable_tail_sum(double x1, double alpha, double skew, bool survival) {
  const double zeta = skew * stable_k(alpha);
  const double c = std::sqrt(1.0 + zeta * zeta);
  const double th0 = std::atan(zeta);
  double sum = 0.0, last = std::numeric_limits<double>::infinity();
  for (int n = 1; n <= 60; ++n) {
    const double log_mag = survival ? n * std::log(c) + std::lgamma(n * alpha) - std::lgamma(n + 1.0) -
                                          n * alpha * std::log(x1)
                                    : n * std::log(c) + std::lgamma(n * alpha + 1.0) - std::lgamma(n + 1.0) -
                                          (n * alpha + 1.0) * std::log(x1);
    const double mag = std::exp(log_mag);
    if (mag > last && n > 2)
      return last < 1e-12 * std::abs(sum) ? sum / std::numbers::pi : std::numeric_limits<double>::quiet_NaN();
    sum += (n % 2 == 1 ? 1.0 : -1.0) * mag * std::sin(n * (0.5 * std::numbers::pi * alpha + th0));
    if (mag < 1e-15 * std::abs(sum)) return sum / std::numbers::pi;
    last = mag;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

inline double stable_tail_series(double x1, double alpha, double skew) { return stable_tail_sum(x1, alpha, skew, false); }

// Tail expansions are used beyond this |z| when alpha is not close to 1.
inline constexpr double kStableTailSeries = 30.0;

// Beyond this |z| the leading power-law term replaces numeric inversion.
inline constexpr double kStableFarTail = 1e4;

// Leading tail term P(Z > x) ~ (1 + b) G(a) sin(pi a / 2) / pi * x^-a for x -> +inf.
inline double stable_tail_weight(double alpha, double skew) {
  return (1.0 + skew) * std::tgamma(alpha) * std::sin(0.5 * std::numbers::pi * alpha) / std::numbers::pi;
}

}  // namespace detail

// Density of the standard (rate 0, scale 1) variable at z.
inline double stable_std_pdf(double z, double alpha, double skew) {
  if (!std::isfinite(z)) throw DomainError("stable_pdf: non-finite argument");
  if (alpha == 2.0) return std::exp(-0.25 * z * z) / std::sqrt(4.0 * std::numbers::pi);
  if (alpha == 1.0 && skew == 0.0) return 1.0 / (std::numbers::pi * (1.0 + z * z));
  const double k = alpha == 1.0 ? 0.0 : detail::stable_k(alpha);
  if (std::abs(z) > detail::kStableTailSeries && std::abs(alpha - 1.0) > 0.02) {
    // Tail expansion in the 1-parametrization; f(x; b) = f(-x; -b) on the left.
    const double x1 = z + skew * k;
    const double v = x1 > 0.0 ? detail::stable_tail_series(x1, alpha, skew)
                              : detail::stable_tail_series(-x1, alpha, -skew);
    if (std::isfinite(v) && v > 0.0) return v;
  }
  if (std::abs(z) > detail::kStableFarTail) {
    const double w = z > 0.0 ? detail::stable_tail_weight(alpha, skew) : detail::stable_tail_weight(alpha, -skew);
    return std::max(alpha * w * std::pow(std::abs(z), -alpha - 1.0), kStableDensityFloor);
  }
  const detail::StablePhase ph{alpha, skew, z, k};
  const double v =
      detail::stable_oscillatory_integral(alpha, ph, [&](double u) { return std::cos(ph(u)); }) /
      std::numbers::pi;
  return std::max(v, kStableDensityFloor);
}

namespace detail {

// Gil-Pelaez inversion of the distribution function, valid for every z.
inline double stable_cdf_inversion(double z, double alpha, double skew) {
  const double k = alpha == 1.0 ? 0.0 : stable_k(alpha);
  const StablePhase ph{alpha, skew, z, k};
  const double v = 0.5 + stable_oscillatory_integral(alpha, ph, [&](double u) {
                           return u == 0.0 ? 0.0 : std::sin(ph(u)) / u;
                         }) / std::numbers::pi;
  return std::clamp(v, 0.0, 1.0);
}

}  // namespace detail

// Distribution function of the standard variable.
inline double stable_std_cdf(double z, double alpha, double skew) {
  if (std::isnan(z)) throw DomainError("stable_cdf: NaN argument");
  if (z == std::numeric_limits<double>::infinity()) return 1.0;
  if (z == -std::numeric_limits<double>::infinity()) return 0.0;
  if (alpha == 2.0) return 0.5 * std::erfc(-0.5 * z);
  if (alpha == 1.0 && skew == 0.0) return 0.5 + std::atan(z) / std::numbers::pi;
  if (std::abs(z) > detail::kStableTailSeries && std::abs(alpha - 1.0) > 0.02) {
    // P(Z <= z) = 1 - P(X1 > x1) on the right; P(-X1 > -x1) with skew -b on the left.
    const double x1 = z + skew * detail::stable_k(alpha);
    const double s = x1 > 0.0 ? detail::stable_tail_sum(x1, alpha, skew, true)
                              : detail::stable_tail_sum(-x1, alpha, -skew, true);
    if (std::isfinite(s) && s >= 0.0 && s <= 1.0) return x1 > 0.0 ? 1.0 - s : s;
  }
  if (z > detail::kStableFarTail) return 1.0 - detail::stable_tail_weight(alpha, skew) * std::pow(z, -alpha);
  if (z < -detail::kStableFarTail) return detail::stable_tail_weight(alpha, -skew) * std::pow(-z, -alpha);
  return detail::stable_cdf_inversion(z, alpha, skew);
}

inline double stable_pdf(double x, const StableParams& p) {
  p.validate();
  if (!std::isfinite(x)) throw DomainError("stable_pdf: non-finite argument");
  return std::max(stable_std_pdf((x - p.rate) / p.scale, p.alpha, p.skew) / p.scale, kStableDensityFloor);
}

inline double stable_logpdf(double x, const StableParams& p) {
  p.validate();
  if (!std::isfinite(x)) throw DomainError("stable_logpdf: non-finite argument");
  const double z = (x - p.rate) / p.scale;
  if (p.alpha == 2.0) return -0.25 * z * z - 0.5 * std::log(4.0 * std::numbers::pi) - std::log(p.scale);
  return std::log(stable_std_pdf(z, p.alpha, p.skew)) - std::log(p.scale);
}

inline double stable_cdf(double x, const StableParams& p) {
  p.validate();
  return stable_std_cdf((x - p.rate) / p.scale, p.alpha, p.skew);
}

// Chambers-Mallows-Stuck draw. The standard 1-parametrization variate is
// shifted by -skew * tan(pi a / 2) into the 0-parametrization.
template <typename Engine>
double stable_sample(const StableParams& p, Engine& rng) {
  p.validate();
  std::uniform_real_distribution<double> uni(-0.5 * std::numbers::pi, 0.5 * std::numbers::pi);
  std::exponential_distribution<double> expo(1.0);
  const double v = uni(rng);
  const double w = expo(rng);
  const double a = p.alpha, b = p.skew;
  double z;
  if (a == 2.0) {
    z = 2.0 * std::sqrt(w) * std::sin(v);  // N(0, 2) by the same transform
  } else if (a == 1.0) {
    const double hp = 0.5 * std::numbers::pi;
    z = (2.0 / std::numbers::pi) *
        ((hp + b * v) * std::tan(v) - b * std::log(hp * w * std::cos(v) / (hp + b * v)));
  } else {
    const double zeta = b * detail::stable_k(a);
    const double shift = std::atan(zeta) / a;
    const double s = std::pow(1.0 + zeta * zeta, 0.5 / a);
    const double z1 = s * std::sin(a * (v + shift)) / std::pow(std::cos(v), 1.0 / a) *
                      std::pow(std::cos(v - a * (v + shift)) / w, (1.0 - a) / a);
    z = z1 - zeta;
  }
  return p.rate + p.scale * z;
}

}  // namespace ideaflow
