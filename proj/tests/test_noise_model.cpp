#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "ideaflow/noise_model.hpp"
#include "ideaflow/rng.hpp"

using namespace ideaflow;

namespace {

InputPath wavy_input() {
  std::vector<double> t, v;
  for (int i = 0; i <= 40; ++i) {
    t.push_back(i);
    v.push_back(std::exp(0.03 * i + 0.4 * std::sin(0.7 * i)));
  }
  return InputPath(TimeSeries(t, v));
}

// Location in the 1-parametrization, where independent pieces simply add.
double s1_location(const StableParams& p) {
  if (p.alpha == 2.0 || p.skew == 0.0) return p.rate;
  if (p.alpha == 1.0) return p.rate - p.skew * (2.0 / std::numbers::pi) * p.scale * std::log(p.scale);
  return p.rate - p.skew * p.scale * std::tan(0.5 * std::numbers::pi * p.alpha);
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

TEST(NoiseModel, StructureNamesRoundTrip) {
  for (auto s : {Structure::IndependentLevy, Structure::Synchronized, Structure::ScaleInvariant, Structure::Feller})
    EXPECT_EQ(parse_structure(to_string(s)), s);
  EXPECT_THROW(parse_structure("brownian"), DomainError);
}

TEST(NoiseModel, Validation) {
  EXPECT_THROW(NoiseModel::feller(0.05, 0.2, -0.5, 1.0), ConstraintError);
  EXPECT_THROW(NoiseModel::feller(0.01, 0.5, 0.2, 1.0), ConstraintError);
  EXPECT_THROW(NoiseModel::drift_diffusion(Structure::Synchronized, 0.1, -1.0, 1.0, 1.0), DomainError);
  EXPECT_THROW(NoiseModel::stable(Structure::Synchronized, {2.5, 0.0, 0.0, 1.0}, 1.0, 1.0), DomainError);
  EXPECT_THROW(latent_clip(1.0, 0.0), DomainError);
  EXPECT_DOUBLE_EQ(latent_clip(-3.0, 2.0), 0.0);
  EXPECT_DOUBLE_EQ(latent_clip(9.0, 2.0), 3.0);
}

TEST(IncrementLaw, ComposesAcrossAdjacentWindows) {
  const auto path = wavy_input();
  for (auto structure : {Structure::IndependentLevy, Structure::Synchronized}) {
    for (StableParams p : {StableParams{1.5, 0.6, 0.02, 0.1}, StableParams{1.0, -0.4, 0.01, 0.2},
                           StableParams{0.8, 0.9, 0.0, 0.05}, StableParams{2.0, 0.0, 0.03, 0.1}}) {
      const auto m = NoiseModel::stable(structure, p, 1.3, 0.7);
      const auto l12 = increment_law(m, 2.0, path, 3.0, 11.5).law;
      const auto l23 = increment_law(m, 2.0, path, 11.5, 27.0).law;
      const auto l13 = increment_law(m, 2.0, path, 3.0, 27.0).law;
      const double a = p.alpha;
      EXPECT_NEAR(std::pow(l13.scale, a) / (std::pow(l12.scale, a) + std::pow(l23.scale, a)), 1.0, 1e-12);
      EXPECT_NEAR(s1_location(l13), s1_location(l12) + s1_location(l23), 1e-12)
          << to_string(structure) << " alpha=" << a;
      EXPECT_DOUBLE_EQ(l13.skew, p.skew);
    }
  }
}

TEST(IncrementLaw, SynchronizedMatchesFineSumOfScaledIncrements) {
  const auto path = wavy_input();
  const StableParams p{1.4, 0.5, 0.05, 0.2};
  const double lambda = 0.8, t1 = 2.0, t2 = 9.0;
  const auto m = NoiseModel::stable(Structure::Synchronized, p, 1.0, lambda);
  const auto law = increment_law(m, 1.0, path, t1, t2).law;
  // X = sum_i I(t_i)^lambda dL_i, each dL_i the unit law run for dt, whose
  // 0-parametrization location is mu dt + skew c k (dt^(1/alpha) - dt).
  const int steps = 400, n = 2000;
  const double dt = (t2 - t1) / steps;
  auto rng = make_rng(21, 0);
  std::vector<double> xs(n);
  for (auto& x : xs) {
    x = 0.0;
    for (int i = 0; i < steps; ++i) {
      const double w = std::pow(path.value(t1 + (i + 0.5) * dt), lambda);
      const double g = p.scale * std::pow(dt, 1.0 / p.alpha);
      const double loc = p.rate * dt + p.skew * std::tan(0.5 * std::numbers::pi * p.alpha) * (g - p.scale * dt);
      x += w * loc + stable_sample({p.alpha, p.skew, 0.0, w * g}, rng);
    }
  }
  EXPECT_LT(ks_distance(xs, [&](double x) { return stable_cdf(x, law); }), 1.63 / std::sqrt(double(n)));
}

TEST(IncrementLaw, ScaleInvariantFreezesClockAtStartLevel) {
  const auto path = wavy_input();
  const StableParams p{1.6, 0.3, 0.02, 0.1};
  const auto si = NoiseModel::stable(Structure::ScaleInvariant, p, 1.5, 0.9);
  const auto il = NoiseModel::stable(Structure::IndependentLevy, p, 1.5, 0.9);
  const auto at_one = increment_law(si, 1.0, path, 0.0, 10.0).law;
  const auto ref = increment_law(il, 1.0, path, 0.0, 10.0).law;
  EXPECT_NEAR(at_one.scale, ref.scale, 1e-14);
  EXPECT_NEAR(at_one.rate, ref.rate, 1e-14);
  const double a1 = 3.0;
  const double j = path.integral_pow(0.9, 0.0, 10.0);
  const auto law = increment_law(si, a1, path, 0.0, 10.0).law;
  const double t = std::pow(a1, -1.5) * j;
  EXPECT_NEAR(law.scale, p.scale * std::pow(a1, 1.5) * std::pow(t, 1.0 / p.alpha), 1e-12);
  EXPECT_NEAR(law.rate, p.rate * j + std::pow(a1, 1.5) * p.skew * p.scale * std::tan(0.8 * std::numbers::pi) *
                                         (std::pow(t, 1.0 / p.alpha) - t),
              1e-12);
}

TEST(IncrementLaw, DriftDiffusionEqualsStableWithAlphaTwo) {
  const auto path = wavy_input();
  const auto dd = NoiseModel::drift_diffusion(Structure::IndependentLevy, 0.03, 0.2, 1.2, 0.6);
  const auto st = NoiseModel::stable(Structure::IndependentLevy, {2.0, 0.0, 0.03, 0.2 / std::numbers::sqrt2}, 1.2, 0.6);
  const auto nodes = path.quadrature(4.0, 9.0);
  for (double a2 : {1.0, 1.2, 1.5, 2.5})
    EXPECT_NEAR(transition_logpdf(dd, 1.1, a2, nodes), transition_logpdf(st, 1.1, a2, nodes), 1e-12);
  const auto law = increment_law(dd, 1.1, nodes);
  EXPECT_NEAR(law.law.scale * law.law.scale * 2.0, 0.04 * path.integral_pow(0.6, 4.0, 9.0), 1e-12);
  EXPECT_NEAR(law.mean(), 0.03 * path.integral_pow(0.6, 4.0, 9.0), 1e-12);
}

TEST(TransitionDensity, MassEqualsUnclippedProbability) {
  const auto path = wavy_input();
  const auto nodes = path.quadrature(5.0, 8.0);
  using boost::math::quadrature::gauss_kronrod;
  for (auto structure : {Structure::IndependentLevy, Structure::ScaleInvariant}) {
    for (double beta : {0.7, 1.5}) {
      const auto m = NoiseModel::stable(structure, {1.7, 0.2, 0.05, 0.15}, beta, 0.5);
      const double a1 = 1.3;
      auto f = [&](double a2) { return std::exp(transition_logpdf(m, a1, a2, nodes)); };
      double mass = 0.0, lo = 0.0;
      for (double hi : {0.5, 1.0, 1.3, 1.6, 2.0, 4.0, 16.0, 1e3, 1e6}) {
        mass += gauss_kronrod<double, 31>::integrate(f, lo, hi, 12, 1e-11);
        lo = hi;
      }
      const auto law = increment_law(m, a1, nodes).law;
      const double kept = 1.0 - stable_cdf(-std::pow(a1, beta) / beta, law);
      EXPECT_NEAR(mass, kept, 2e-5) << to_string(structure) << " beta=" << beta;
    }
  }
}

TEST(TransitionDensity, FellerDelegatesWithInputClock) {
  const auto path = wavy_input();
  const auto nodes = path.quadrature(1.0, 6.0);
  const auto m = NoiseModel::feller(0.05, 0.2, 1.4, 0.8);
  const double tau = path.integral_pow(0.8, 1.0, 6.0);
  EXPECT_NEAR(transition_logpdf(m, 1.2, 1.5, nodes), feller_transition_logpdf(1.2, 1.5, 0.05, 0.2, 1.4, tau), 1e-12);
  EXPECT_THROW(increment_law(m, 1.2, nodes), DomainError);
}

TEST(Simulation, ZeroNoiseReducesToDeterministicLaw) {
  const auto path = wavy_input();
  std::vector<double> grid;
  for (int i = 0; i <= 40; i += 4) grid.push_back(i);
  const JonesParams jp{0.04, 1.3, 0.7};
  const auto det = simulate_deterministic(jp, 1.5, path, grid);
  auto rng = make_rng(1, 0);
  for (auto structure : {Structure::IndependentLevy, Structure::Synchronized, Structure::ScaleInvariant}) {
    const auto m = NoiseModel::drift_diffusion(structure, jp.theta, 0.0, jp.beta, jp.lambda);
    const auto s = simulate_path(m, 1.5, path, grid, rng);
    for (std::size_t k = 0; k < grid.size(); ++k) EXPECT_NEAR(s.value(k) / det.value(k), 1.0, 1e-12);
  }
  const auto f = NoiseModel::feller(jp.theta, 0.0, jp.beta, jp.lambda);
  const auto s = simulate_path(f, 1.5, path, grid, rng);
  for (std::size_t k = 0; k < grid.size(); ++k) EXPECT_NEAR(s.value(k) / det.value(k), 1.0, 1e-12);
}

TEST(Simulation, ReproducibleFromSeed) {
  const auto path = wavy_input();
  const std::vector<double> grid{0.0, 5.0, 10.0, 20.0};
  const auto m = NoiseModel::stable(Structure::Synchronized, {1.5, 0.3, 0.05, 0.02}, 1.0, 1.0);
  auto r1 = make_rng(9, 3), r2 = make_rng(9, 3), r3 = make_rng(9, 4);
  const auto a = simulate_levels(m, 1.0, path, grid, r1);
  const auto b = simulate_levels(m, 1.0, path, grid, r2);
  const auto c = simulate_levels(m, 1.0, path, grid, r3);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(Simulation, LatentIncrementsFollowTheLaw) {
  const auto path = wavy_input();
  const auto nodes = path.quadrature(10.0, 14.0);
  const auto m = NoiseModel::stable(Structure::ScaleInvariant, {1.8, -0.5, 0.05, 0.1}, 0.8, 0.5);
  const double a1 = 2.0;
  const auto law = increment_law(m, a1, nodes).law;
  auto rng = make_rng(4, 0);
  // Draws whose latent level falls below 0 are clipped to A = 0; they count as
  // censored mass below the threshold z = -a1^beta / beta.
  const int n = 3000;
  std::vector<double> zs;
  int clipped = 0;
  for (int i = 0; i < n; ++i) {
    const double a2 = sample_transition(m, a1, std::span<const QuadratureNode>(nodes), rng);
    if (a2 == 0.0) ++clipped;
    else zs.push_back(std::pow(a1, 0.8) * q_beta(a1, a2, 0.8));
  }
  const double threshold = -std::pow(a1, 0.8) / 0.8;
  EXPECT_NEAR(clipped / double(n), stable_cdf(threshold, law), 0.01);
  std::sort(zs.begin(), zs.end());
  double d = 0.0;
  for (std::size_t i = 0; i < zs.size(); ++i) {
    const double f = stable_cdf(zs[i], law);
    d = std::max({d, std::abs(f - (clipped + i) / double(n)), std::abs((clipped + i + 1) / double(n) - f)});
  }
  EXPECT_LT(d, 1.63 / std::sqrt(double(n)));
}

TEST(Simulation, NearZeroBetaIsMultiplicative) {
  const auto path = wavy_input();
  const auto nodes = path.quadrature(0.0, 1.0);
  const auto m = NoiseModel::drift_diffusion(Structure::IndependentLevy, 0.05, 0.1, 1e-10, 1.0);
  auto r1 = make_rng(2, 0), r2 = make_rng(2, 0);
  const double a2 = sample_transition(m, 3.0, std::span<const QuadratureNode>(nodes), r1);
  const double x = increment_law(m, 3.0, nodes).sample(r2);
  EXPECT_NEAR(a2, 3.0 * std::exp(x), 1e-12);
}

TEST(Simulation, AbsorbedPathIsRejected) {
  const auto path = wavy_input();
  const std::vector<double> grid{0.0, 10.0, 20.0, 30.0, 40.0};
  const auto m = NoiseModel::drift_diffusion(Structure::IndependentLevy, -0.5, 0.1, 1.0, 1.0);
  auto rng = make_rng(8, 0);
  EXPECT_THROW(simulate_path(m, 0.1, path, grid, rng), DomainError);
  auto rng2 = make_rng(8, 0);
  const auto levels = simulate_levels(m, 0.1, path, grid, rng2);
  EXPECT_DOUBLE_EQ(levels.back(), 0.0);
}
