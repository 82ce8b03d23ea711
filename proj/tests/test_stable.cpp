#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "ideaflow/rng.hpp"
#include "ideaflow/special.hpp"
#include "ideaflow/stable.hpp"

using namespace ideaflow;

namespace {

double levy_pdf(double x) {
  return x <= 0.0 ? 0.0 : std::exp(-0.5 / x) / (std::sqrt(2.0 * std::numbers::pi) * std::pow(x, 1.5));
}

double ks_distance(std::vector<double> xs, auto cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, std::abs(f - i / n), std::abs((i + 1) / n - f)});
  }
  return d;
}

}  // namespace

TEST(StablePdf, GaussianClosedForm) {
  const StableParams p{2.0, 0.0, 0.3, 1.5};
  const double var = 2.0 * 1.5 * 1.5;
  for (double x : {-4.0, 0.0, 0.3, 2.0}) {
    const double g = std::exp(-0.5 * (x - 0.3) * (x - 0.3) / var) / std::sqrt(2.0 * std::numbers::pi * var);
    EXPECT_NEAR(stable_pdf(x, p) / g, 1.0, 1e-13);
    EXPECT_NEAR(stable_logpdf(x, p), std::log(g), 1e-12);
  }
  // The numeric inversion near alpha = 2 approaches the Gaussian.
  EXPECT_NEAR(stable_std_pdf(0.7, 1.9999, 0.0) / stable_std_pdf(0.7, 2.0, 0.0), 1.0, 1e-3);
}

TEST(StablePdf, CauchyClosedFormAndNumericLimit) {
  for (double z : {-5.0, -1.0, 0.0, 0.4, 12.0}) {
    EXPECT_NEAR(stable_std_pdf(z, 1.0, 0.0), 1.0 / (std::numbers::pi * (1.0 + z * z)), 1e-15);
    EXPECT_NEAR(stable_std_pdf(z, 1.0001, 0.0) / stable_std_pdf(z, 1.0, 0.0), 1.0, 1e-3);
  }
}

TEST(StablePdf, LevyDistributionClosedForm) {
  // alpha = 1/2, skew = 1 is the Levy law shifted by tan(pi/4) = 1 in this parametrization.
  for (double z : {-0.8, -0.5, 0.0, 0.5, 2.0, 10.0, 40.0, 200.0}) {
    EXPECT_NEAR(stable_std_pdf(z, 0.5, 1.0) / levy_pdf(z + 1.0), 1.0, 1e-6) << z;
  }
}

TEST(StablePdf, SkewReflection) {
  for (double a : {0.7, 1.0, 1.3, 1.8})
    for (double z : {-3.0, -0.5, 0.2, 2.5, 45.0})
      EXPECT_NEAR(stable_std_pdf(z, a, 0.6) / stable_std_pdf(-z, a, -0.6), 1.0, 1e-8) << a << " " << z;
}

TEST(StablePdf, NormalizesAndMatchesCdf) {
  using boost::math::quadrature::gauss_kronrod;
  for (double a : {0.8, 1.0, 1.5, 1.9}) {
    for (double b : {-0.5, 0.0, 0.9}) {
      auto f = [&](double z) { return stable_std_pdf(z, a, b); };
      const double mass = gauss_kronrod<double, 31>::integrate(f, -3.0, 4.0, 10, 1e-12);
      const double ref = stable_std_cdf(4.0, a, b) - stable_std_cdf(-3.0, a, b);
      EXPECT_NEAR(mass, ref, 1e-7) << a << " " << b;
    }
  }
}

TEST(StableCdf, MonotoneAndLimits) {
  for (double a : {0.6, 1.2, 1.7}) {
    double prev = 0.0;
    for (double z = -50.0; z <= 50.0; z += 0.5) {
      const double v = stable_std_cdf(z, a, 0.3);
      EXPECT_GE(v, prev - 1e-10);
      prev = v;
    }
    EXPECT_LT(stable_std_cdf(-1e4, a, 0.3), 0.01);
    EXPECT_GT(stable_std_cdf(1e4, a, 0.3), 0.99);
  }
  EXPECT_DOUBLE_EQ(stable_std_cdf(std::numeric_limits<double>::infinity(), 1.5, 0.0), 1.0);
}

TEST(StablePdf, TailSeriesAgreesWithInversion) {
  for (double a : {0.6, 1.3, 1.7}) {
    for (double b : {-0.4, 0.0, 0.8}) {
      const double z = 31.0;
      const double k = detail::stable_k(a);
      const double series = detail::stable_tail_series(z + b * k, a, b);
      const detail::StablePhase ph{a, b, z, k};
      const double numeric =
          detail::stable_oscillatory_integral(a, ph, [&](double u) { return std::cos(ph(u)); }) / std::numbers::pi;
      ASSERT_TRUE(std::isfinite(series)) << a << " " << b;
      EXPECT_NEAR(series / numeric, 1.0, 1e-5) << a << " " << b;
    }
  }
}

TEST(StablePdf, FarTailsStayFiniteAndPositive) {
  for (double a : {0.5, 1.0, 1.5, 1.99})
    for (double z : {-1e8, -1e3, 1e3, 1e8}) {
      const double lp = stable_logpdf(z, {a, 0.5, 0.0, 1.0});
      EXPECT_TRUE(std::isfinite(lp)) << a << " " << z;
      EXPECT_GE(lp, std::log(kStableDensityFloor) - 1e-9);
    }
}

TEST(StablePdf, FarTailLeadingTermIsContinuous) {
  for (double a : {1.0, 1.5, 1.95}) {
    for (double z : {-1.0, 1.0}) {
      const double inner = stable_std_pdf(z * 0.9999e4, a, 0.5);
      const double outer = stable_std_pdf(z * 1.0001e4, a, 0.5);
      EXPECT_NEAR(outer / inner, 1.0, 0.01) << a << " " << z;
      const double ci = stable_std_cdf(z * 0.9999e4, a, 0.5), co = stable_std_cdf(z * 1.0001e4, a, 0.5);
      EXPECT_NEAR(co, ci, 1e-4) << a << " " << z;
    }
  }
}

TEST(StableParams, Validation) {
  EXPECT_THROW(stable_pdf(0.0, {2.5, 0.0, 0.0, 1.0}), DomainError);
  EXPECT_THROW(stable_pdf(0.0, {1.5, 1.2, 0.0, 1.0}), DomainError);
  EXPECT_THROW(stable_pdf(0.0, {1.5, 0.0, 0.0, 0.0}), DomainError);
  EXPECT_THROW(stable_pdf(std::nan(""), {1.5, 0.0, 0.0, 1.0}), DomainError);
}

TEST(StableSample, KolmogorovSmirnovAgainstCdf) {
  const int n = 3000;
  const double critical = 1.63 / std::sqrt(static_cast<double>(n));  // 1% level
  std::size_t idx = 0;
  for (StableParams p : {StableParams{2.0, 0.0, 0.5, 2.0}, StableParams{1.0, 0.0, 0.0, 1.0},
                         StableParams{1.5, 0.7, -1.0, 0.5}, StableParams{0.8, -0.3, 0.0, 1.0},
                         StableParams{1.0, 0.5, 0.0, 1.0}, StableParams{1.2, -1.0, 2.0, 3.0}}) {
    auto rng = make_rng(77, idx++);
    std::vector<double> xs(n);
    for (auto& x : xs) x = stable_sample(p, rng);
    EXPECT_LT(ks_distance(xs, [&](double x) { return stable_cdf(x, p); }), critical)
        << p.alpha << " " << p.skew;
  }
}

TEST(StableSample, TotallySkewedLawRespectsSupport) {
  auto rng = make_rng(3, 0);
  for (int i = 0; i < 5000; ++i) EXPECT_GT(stable_sample({0.5, 1.0, 0.0, 1.0}, rng), -1.0);
}

TEST(BesselI, ScaledLogAgreesWithBoostAndDebye) {
  for (double nu : {0.0, 0.5, 3.0, 40.0}) {
    for (double x : {0.01, 1.0, 20.0, 90.0}) {
      const double ref = std::log(boost::math::cyl_bessel_i(nu, x)) - x;
      EXPECT_NEAR(log_bessel_i_scaled(nu, x), ref, 1e-10 * (1.0 + std::abs(ref))) << nu << " " << x;
    }
  }
  // Either side of the switch to the uniform expansion.
  for (double nu : {0.0, 2.0, 60.0, 99.0}) {
    const double x = std::sqrt(100.0 * 100.0 - nu * nu) + 1e-9;
    const double ref = std::log(boost::math::cyl_bessel_i(nu, x)) - x;
    EXPECT_NEAR(detail::log_bessel_i_scaled_debye(nu, x), ref, 1e-10) << nu;
  }
  EXPECT_TRUE(std::isfinite(log_bessel_i_scaled(3.0, 1e6)));
  EXPECT_TRUE(std::isfinite(log_bessel_i_scaled(500.0, 1e-3)));
  EXPECT_NEAR(log_add_exp(std::log(2.0), std::log(3.0)), std::log(5.0), 1e-15);
}

TEST(StableCdf, TailSeriesMatchesInversion) {
  for (double alpha : {0.5, 0.7, 1.3, 1.8}) {
    for (double skew : {-1.0, 0.0, 0.6}) {
      for (double z : {-300.0, -45.0, 35.0, 120.0}) {
        const double series = stable_std_cdf(z, alpha, skew);
        const double inversion = detail::stable_cdf_inversion(z, alpha, skew);
        EXPECT_NEAR(series, inversion, 1e-9) << alpha << " " << skew << " " << z;
      }
    }
  }
  // Totally skewed to the right: the left tail is empty beyond the support edge.
  EXPECT_NEAR(stable_std_cdf(-40.0, 0.5, 1.0), 0.0, 1e-12);
}
