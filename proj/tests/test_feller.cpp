#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "ideaflow/feller.hpp"
#include "ideaflow/rng.hpp"

using namespace ideaflow;

namespace {

struct Case {
  double s1, theta, sigma, beta, tau;
};

// Total continuous mass, integrated piecewise on a geometric grid around s1.
double continuous_mass(const Case& c) {
  auto f = [&](double s) { return std::exp(feller_transition_logpdf(c.s1, s, c.theta, c.sigma, c.beta, c.tau)); };
  using boost::math::quadrature::gauss_kronrod;
  const double mode = c.s1;
  double total = 0.0, lo = 0.0;
  for (double hi : {0.25 * mode, 0.5 * mode, mode, 2.0 * mode, 4.0 * mode, 16.0 * mode, 256.0 * mode, 1e6 * mode}) {
    total += gauss_kronrod<double, 61>::integrate(f, lo, hi, 15, 1e-12);
    lo = hi;
  }
  return total;
}

// Euler-Maruyama on X = S^beta: dX = a dt + b sqrt(X) dW, absorbed at 0.
double em_step_x(double x, double a, double b, double tau, int steps, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double dt = tau / steps;
  for (int i = 0; i < steps && x > 0.0; ++i) x += a * dt + b * std::sqrt(x * dt) * n(rng);
  return std::max(x, 0.0);
}

}  // namespace

TEST(Feller, MassIsOne) {
  for (const Case& c : {Case{1.0, 0.05, 0.2, 1.0, 1.0}, Case{2.0, 0.3, 0.6, 2.0, 0.5}, Case{1.0, 0.03, 0.3, 0.5, 2.0},
                        Case{0.5, 0.1, 0.5, 0.3, 4.0}, Case{3.0, 0.04, 0.1, 1e-7, 2.0}}) {
    const double atom = feller_absorbed_mass(c.s1, c.theta, c.sigma, c.beta, c.tau);
    EXPECT_NEAR(continuous_mass(c) + atom, 1.0, 1e-6)
        << c.theta << " " << c.sigma << " " << c.beta << " atom=" << atom;
  }
}

TEST(Feller, AtomOnlyWhenBoundaryIsAttainable) {
  const auto hi = feller_coefficients(0.5, 0.2, 1.0);
  EXPECT_GE(hi.nu, 0.0);
  EXPECT_DOUBLE_EQ(feller_absorbed_mass(1.0, 0.5, 0.2, 1.0, 3.0), 0.0);
  const auto lo = feller_coefficients(0.03, 0.3, 0.5);
  EXPECT_LT(lo.nu, 0.0);
  const double m1 = feller_absorbed_mass(1.0, 0.03, 0.3, 0.5, 1.0);
  const double m2 = feller_absorbed_mass(1.0, 0.03, 0.3, 0.5, 5.0);
  EXPECT_GT(m1, 0.0);
  EXPECT_GT(m2, m1);
}

TEST(Feller, LognormalLimitIsContinuous) {
  for (double s2 : {0.7, 1.0, 1.4}) {
    const double limit = feller_transition_logpdf(1.0, s2, 0.05, 0.2, 0.0, 1.0);
    const double near = feller_transition_logpdf(1.0, s2, 0.05, 0.2, 1e-4, 1.0);
    EXPECT_NEAR(near, limit, 1e-3) << s2;
  }
}

TEST(Feller, Constraints) {
  EXPECT_THROW(feller_transition_logpdf(1.0, 1.0, 0.05, 0.2, -0.5, 1.0), ConstraintError);
  EXPECT_THROW(feller_transition_logpdf(1.0, 1.0, 0.01, 0.5, 0.2, 1.0), ConstraintError);
  EXPECT_THROW(feller_transition_logpdf(1.0, 1.0, 0.05, 0.2, 1.0, 0.0), DomainError);
  EXPECT_THROW(feller_transition_logpdf(1.0, 1.0, 0.05, -0.2, 1.0, 1.0), DomainError);
  EXPECT_EQ(feller_transition_logpdf(1.0, 0.0, 0.05, 0.2, 1.0, 1.0), -std::numeric_limits<double>::infinity());
  EXPECT_TRUE(feller_admissible(0.05, 0.2, 1.0));
  EXPECT_FALSE(feller_admissible(0.01, 0.5, 0.2));
}

TEST(Feller, ExtremeArgumentsStayFinite) {
  EXPECT_TRUE(std::isfinite(feller_transition_logpdf(1e6, 1.01e6, 0.05, 0.01, 1.0, 1.0)));
  EXPECT_TRUE(std::isfinite(feller_transition_logpdf(1.0, 1.0, 0.05, 0.01, 2.0, 1e-4)));
  EXPECT_TRUE(std::isfinite(feller_transition_logpdf(1.0, 1e-8, 0.05, 0.3, 1.0, 1.0)));
}

TEST(Feller, SamplerMatchesDensity) {
  for (const Case& c : {Case{1.0, 0.05, 0.2, 1.0, 1.0}, Case{1.0, 0.03, 0.3, 0.5, 2.0}}) {
    auto rng = make_rng(11, static_cast<std::uint64_t>(c.beta * 100));
    const int n = 3000;
    std::vector<double> xs;
    int absorbed = 0;
    for (int i = 0; i < n; ++i) {
      const double s = feller_sample(c.s1, c.theta, c.sigma, c.beta, c.tau, rng);
      if (s == 0.0) ++absorbed;
      else xs.push_back(s);
    }
    const double atom = feller_absorbed_mass(c.s1, c.theta, c.sigma, c.beta, c.tau);
    EXPECT_NEAR(absorbed / double(n), atom, 3.0 * std::sqrt(atom * (1 - atom) / n) + 1e-3);
    std::sort(xs.begin(), xs.end());
    auto f = [&](double s) { return std::exp(feller_transition_logpdf(c.s1, s, c.theta, c.sigma, c.beta, c.tau)); };
    // Empirical vs model CDF (including the atom) at the sample deciles.
    for (int d = 1; d < 10; ++d) {
      const double q = xs[xs.size() * d / 10];
      const double model = atom + boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, q, 15, 1e-10);
      const double empirical = (absorbed + xs.size() * d / 10.0) / n;
      EXPECT_NEAR(model, empirical, 0.03) << d;
    }
  }
}

TEST(Feller, EulerMaruyamaMomentsAndAbsorption) {
  // Unattainable boundary: E[X] = x0 + a tau and Var[X] = b^2 (x0 tau + a tau^2 / 2).
  {
    const Case c{1.5, 0.2, 0.3, 1.2, 1.0};
    const auto k = feller_coefficients(c.theta, c.sigma, c.beta);
    ASSERT_GE(k.nu, 0.0);
    const double x0 = std::pow(c.s1, c.beta);
    auto rng = make_rng(5, 0);
    const int n = 4000;
    double em = 0.0, exact = 0.0, exact_sq = 0.0;
    for (int i = 0; i < n; ++i) {
      em += em_step_x(x0, k.a, k.b, c.tau, 200, rng);
      const double x = std::pow(feller_sample(c.s1, c.theta, c.sigma, c.beta, c.tau, rng), c.beta);
      exact += x;
      exact_sq += x * x;
    }
    em /= n, exact /= n;
    const double var = k.b * k.b * (x0 * c.tau + 0.5 * k.a * c.tau * c.tau);
    const double se = std::sqrt(var / n);
    EXPECT_NEAR(exact, x0 + k.a * c.tau, 4.0 * se);
    EXPECT_NEAR(em, x0 + k.a * c.tau, 4.0 * se);
    EXPECT_NEAR(exact_sq / n - exact * exact, var, 0.15 * var);
  }
  // Attainable boundary: the EM absorbed fraction approaches the atom.
  {
    const Case c{0.3, 0.06, 0.4, 0.5, 3.0};
    const auto k = feller_coefficients(c.theta, c.sigma, c.beta);
    ASSERT_LT(k.nu, 0.0);
    auto rng = make_rng(6, 0);
    const int n = 2000;
    int absorbed = 0;
    for (int i = 0; i < n; ++i) absorbed += em_step_x(std::pow(c.s1, c.beta), k.a, k.b, c.tau, 3000, rng) == 0.0;
    const double atom = feller_absorbed_mass(c.s1, c.theta, c.sigma, c.beta, c.tau);
    EXPECT_NEAR(absorbed / double(n), atom, 4.0 * std::sqrt(atom * (1 - atom) / n) + 0.02) << atom;
  }
}

TEST(Feller, SmallNoiseLimitIsContinuous) {
  const double s1 = 1.3, theta = 0.04, beta = 0.5, tau = 2.0;
  auto sigma_at = [&](double kappa) {
    // kappa = y0 / (2 tau) with y0 = 4 s1^beta / (beta sigma)^2.
    return std::sqrt(4.0 * std::pow(s1, beta) / (2.0 * tau * kappa)) / beta;
  };
  auto gaussian_x = [&](double s2, double sigma) {
    const auto k = feller_coefficients(theta, sigma, beta);
    const double x0 = std::pow(s1, beta), m = x0 + k.a * tau;
    const double v = k.b * k.b * (x0 * tau + 0.5 * k.a * tau * tau);
    const double x = std::pow(s2, beta);
    return -0.5 * (x - m) * (x - m) / v - 0.5 * std::log(2.0 * std::numbers::pi * v) + std::log(beta) +
           (beta - 1.0) * std::log(s2);
  };
  auto at_sd = [&](double sigma, double d) {
    const auto k = feller_coefficients(theta, sigma, beta);
    const double x0 = std::pow(s1, beta);
    const double sd = k.b * std::sqrt(x0 * tau + 0.5 * k.a * tau * tau);
    return std::pow(x0 + k.a * tau + d * sd, 1.0 / beta);
  };
  // The Bessel form already matches the Gaussian limit well below the switch.
  const double s_lo = sigma_at(1e8);
  for (double d : {-3.0, 0.0, 2.0}) {
    const double s2 = at_sd(s_lo, d);
    EXPECT_NEAR(feller_transition_logpdf(s1, s2, theta, s_lo, beta, tau), gaussian_x(s2, s_lo), 2e-3) << d;
  }
  // Across the switch the density changes only through sigma itself.
  const double s_mid = sigma_at(kFellerSmallNoise);
  for (double d : {-3.0, 0.0, 2.0}) {
    const double s2 = at_sd(s_mid, d);
    const double below = feller_transition_logpdf(s1, s2, theta, s_mid * (1.0 + 1e-9), beta, tau);
    const double above = feller_transition_logpdf(s1, s2, theta, s_mid * (1.0 - 1e-9), beta, tau);
    EXPECT_NEAR(below, above, 1e-3) << d;
  }
  // Off the deterministic path the log-density falls without bound as sigma -> 0.
  double prev = std::numeric_limits<double>::infinity();
  for (double sigma : {1e-3, 1e-5, 1e-7, 1e-9, 1e-11}) {
    const double lp = feller_transition_logpdf(s1, 1.01 * at_sd(sigma, 0.0), theta, sigma, beta, tau);
    EXPECT_LT(lp, prev) << sigma;
    prev = lp;
  }
  EXPECT_LT(prev, -1e10);
}
