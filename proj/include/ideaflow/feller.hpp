#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <boost/math/special_functions/gamma.hpp>

#include "ideaflow/error.hpp"
#include "ideaflow/special.hpp"

namespace ideaflow {

// Subordinated Feller diffusion dS/S = theta S^-beta dt + sigma S^-beta/2 dW.
// With X = S^beta it becomes dX = a dt + b sqrt(X) dW, a square-root
// diffusion, and Y = 4X/b^2 is a squared Bessel process of dimension
// delta = 4a/b^2 run on the same clock.

inline bool feller_admissible(double theta, double sigma, double beta) {
  return theta > 0.5 * sigma * sigma * (1.0 - beta);
}

// Below this |beta| the transition is the lognormal limit of the diffusion.
inline constexpr double kFellerLognormalBeta = 1e-6;

// Above this value of y0 / (2 tau) (y0 = 4 S1^beta / b^2) the transition
// density switches to its small-noise Gaussian limit in X = S^beta.
inline constexpr double kFellerSmallNoise = 1e11;

struct FellerCoefficients {
  double a;      // drift of X
  double b;      // diffusion of X
  double delta;  // squared-Bessel dimension
  double nu;     // index delta/2 - 1
};

inline FellerCoefficients feller_coefficients(double theta, double sigma, double beta) {
  FellerCoefficients c{};
  c.a = beta * theta + 0.5 * beta * (beta - 1.0) * sigma * sigma;
  c.b = beta * sigma;
  c.delta = 4.0 * c.a / (c.b * c.b);
  c.nu = 0.5 * c.delta - 1.0;
  return c;
}

namespace detail {

inline void feller_check(double theta, double sigma, double beta, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw DomainError("feller: effective time must be positive");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("feller: sigma must be positive");
  if (!(theta > 0.0) || !std::isfinite(theta)) throw DomainError("feller: theta must be positive");
  if (!std::isfinite(beta)) throw DomainError("feller: beta must be finite");
  if (beta <= -kFellerLognormalBeta)
    throw ConstraintError("feller: the power transform needs beta > 0");
  if (!feller_admissible(theta, sigma, beta))
    throw ConstraintError("feller: inadmissible parameters, need theta > sigma^2 (1 - beta) / 2");
}

}  // namespace detail

// Probability that S has been absorbed at 0 by effective time tau. Zero when
// the boundary is unattainable (delta >= 2).
inline double feller_absorbed_mass(double s1, double theta, double sigma, double beta, double tau) {
  detail::feller_check(theta, sigma, beta, tau);
  if (!(s1 > 0.0)) throw DomainError("feller: s1 must be positive");
  if (std::abs(beta) < kFellerLognormalBeta) return 0.0;
  const auto c = feller_coefficients(theta, sigma, beta);
  if (c.nu >= 0.0) return 0.0;
  const double y0 = 4.0 * std::pow(s1, beta) / (c.b * c.b);
  return boost::math::gamma_q(-c.nu, y0 / (2.0 * tau));
}

// log-density of S(tau) = s2 given S(0) = s1 (continuous part only; the
// absorbed atom is reported by feller_absorbed_mass).
inline double feller_transition_logpdf(double s1, double s2, double theta, double sigma, double beta, double tau) {
  detail::feller_check(theta, sigma, beta, tau);
  if (!(s1 > 0.0)) throw DomainError("feller: s1 must be positive");
  if (!(s2 > 0.0)) return -std::numeric_limits<double>::infinity();
  if (std::abs(beta) < kFellerLognormalBeta) {
    const double m = std::log(s1) + (theta - 0.5 * sigma * sigma) * tau;
    const double v = sigma * sigma * tau;
    const double d = std::log(s2) - m;
    return -0.5 * d * d / v - 0.5 * std::log(2.0 * std::numbers::pi * v) - std::log(s2);
  }
  const auto c = feller_coefficients(theta, sigma, beta);
  const double scale = 4.0 / (c.b * c.b);
  if (scale * std::pow(s1, beta) / (2.0 * tau) > kFellerSmallNoise) {
    // Exponent and Bessel term are both of order y0 / tau here and cancel to
    // O(1); use the Gaussian limit in X = S^beta with the exact moments.
    const double x0 = std::pow(s1, beta), x = std::pow(s2, beta);
    const double m = x0 + c.a * tau;
    const double v = c.b * c.b * (x0 * tau + 0.5 * c.a * tau * tau);
    return -0.5 * (x - m) * (x - m) / v - 0.5 * std::log(2.0 * std::numbers::pi * v) + std::log(beta) +
           (beta - 1.0) * std::log(s2);
  }
  const double log_y0 = std::log(scale) + beta * std::log(s1);
  const double log_y = std::log(scale) + beta * std::log(s2);
  const double y0 = std::exp(log_y0), y = std::exp(log_y);
  const double sy0 = std::sqrt(y0), sy = std::sqrt(y);
  const double z = std::exp(0.5 * (log_y0 + log_y)) / tau;
  const double log_q = -std::log(2.0 * tau) + 0.5 * c.nu * (log_y - log_y0) -
                       (sy - sy0) * (sy - sy0) / (2.0 * tau) + log_bessel_i_scaled(std::abs(c.nu), z);
  return log_q + std::log(scale) + std::log(beta) + (beta - 1.0) * std::log(s2);
}

// Draw S(tau) given S(0) = s1. Returns exactly 0 for absorbed paths.
template <typename Engine>
double feller_sample(double s1, double theta, double sigma, double beta, double tau, Engine& rng) {
  detail::feller_check(theta, sigma, beta, tau);
  if (!(s1 > 0.0)) return 0.0;
  if (std::abs(beta) < kFellerLognormalBeta) {
    std::normal_distribution<double> n(0.0, 1.0);
    return s1 * std::exp((theta - 0.5 * sigma * sigma) * tau + sigma * std::sqrt(tau) * n(rng));
  }
  const auto c = feller_coefficients(theta, sigma, beta);
  const double scale = 4.0 / (c.b * c.b);
  const double y0 = scale * std::pow(s1, beta);
  const double lam = y0 / (2.0 * tau);
  double y;
  const double atom = c.nu < 0.0 ? boost::math::gamma_q(-c.nu, lam) : 0.0;
  if (c.nu >= 0.0 || atom < 1e-14) {
    // Noncentral chi-square as a Poisson mixture of gammas.
    std::poisson_distribution<long long> pois(lam);
    const long long n = lam > 0.0 ? pois(rng) : 0;
    std::gamma_distribution<double> g(0.5 * c.delta + static_cast<double>(n), 1.0);
    y = 2.0 * tau * g(rng);
  } else {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    if (u01(rng) < atom) return 0.0;
    // Killed process: Gamma(K + 1) mixture with weights lam^(K+m) / Gamma(K+m+1),
    // sampled by thinning a Poisson(lam) proposal.
    const double m = -c.nu;
    std::poisson_distribution<long long> pois(lam);
    long long k;
    for (;;) {
      k = pois(rng);
      const double kd = static_cast<double>(k);
      const double log_acc = std::lgamma(m + 1.0) + std::lgamma(kd + 1.0) - std::lgamma(kd + m + 1.0);
      if (std::log(u01(rng)) < log_acc) break;
    }
    std::gamma_distribution<double> g(static_cast<double>(k) + 1.0, 1.0);
    y = 2.0 * tau * g(rng);
  }
  return std::pow(y / scale, 1.0 / beta);
}

}  // namespace ideaflow
