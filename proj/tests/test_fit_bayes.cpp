#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <gtest/gtest.h>

#include "ideaflow/fit_bayes.hpp"

using namespace ideaflow;

namespace {

InputPath yearly_input(double g, int first = 2012, int last = 2022, double level = 100.0) {
  std::vector<double> t, v;
  for (int y = first; y <= last; ++y) {
    t.push_back(y);
    v.push_back(level * std::exp(g * (y - first)));
  }
  return InputPath(TimeSeries(t, v));
}

// Batch-means standard error of the mean of f over the pooled chains.
template <typename F>
std::pair<double, double> mean_and_mcse(const McmcResult& r, F f, std::size_t batches = 20) {
  std::vector<double> means;
  const std::size_t len = r.kept() / batches;
  for (const auto& chain : r.samples) {
    for (std::size_t b = 0; b < batches; ++b) {
      double s = 0.0;
      for (std::size_t k = b * len; k < (b + 1) * len; ++k) s += f(chain[k]);
      means.push_back(s / static_cast<double>(len));
    }
  }
  double m = 0.0;
  for (double x : means) m += x;
  m /= static_cast<double>(means.size());
  double v = 0.0;
  for (double x : means) v += (x - m) * (x - m);
  v /= static_cast<double>(means.size() - 1);
  return {m, std::sqrt(v / static_cast<double>(means.size()))};
}

double r_width(const PercentileRow& row) { return row.values[4] - row.values[0]; }

}  // namespace

TEST(HalfCauchy, QuantilesAndDensity) {
  EXPECT_DOUBLE_EQ(halfcauchy_quantile(0.5), 1.0);
  // tan(pi / 40) = 0.078702; the commonly quoted 0.078 is a truncation.
  EXPECT_NEAR(halfcauchy_quantile(0.05), 0.0787017068246, 1e-12);
  EXPECT_EQ(std::floor(halfcauchy_quantile(0.05) * 1000.0), 78.0);
  EXPECT_NEAR(halfcauchy_quantile(0.95), 12.7, 12.7 * 0.005);
  EXPECT_EQ(halfcauchy_quantile(0.0), 0.0);
  EXPECT_THROW(halfcauchy_quantile(1.0), DomainError);
  EXPECT_NEAR(halfcauchy_cdf(halfcauchy_quantile(0.3)), 0.3, 1e-15);
  EXPECT_NEAR(std::exp(halfcauchy_logpdf(1.0)), 1.0 / std::numbers::pi, 1e-15);
  EXPECT_EQ(halfcauchy_logpdf(-1.0), -std::numeric_limits<double>::infinity());
}

TEST(PriorR, DensityValueSymmetryAndNormalization) {
  const double pi2 = std::numbers::pi * std::numbers::pi;
  EXPECT_NEAR(prior_r_density(1.0), 2.0 / pi2, 1e-15);
  EXPECT_NEAR(prior_r_density(1.0 + 1e-7), prior_r_density(1.0 + 2e-6), 1e-6);
  for (double x : {0.01, 0.3, 2.0, 45.0, 1e5})
    EXPECT_NEAR(prior_r_density(x), prior_r_density(1.0 / x) / (x * x), 1e-14 * prior_r_density(x)) << x;
  EXPECT_EQ(prior_r_density(0.0), 0.0);
  EXPECT_EQ(prior_r_density(-2.0), 0.0);
  boost::math::quadrature::exp_sinh<double> es;
  const double mass = es.integrate([](double x) { return prior_r_density(x); }, 0.0, std::numeric_limits<double>::infinity());
  EXPECT_NEAR(mass, 1.0, 1e-6);
  const double below_one =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate([](double x) { return prior_r_density(x); }, 0.0, 1.0, 15, 1e-13);
  EXPECT_NEAR(below_one, 0.5, 1e-4);
}

TEST(PriorR, QuantilesByInversion) {
  const std::vector<double> qs{0.05, 0.5, 0.95};
  const auto v = prior_r_quantiles(qs);
  EXPECT_NEAR(v[0], 0.0267, 0.0267 * 0.01);
  EXPECT_NEAR(v[1], 1.0, 1e-12);
  EXPECT_NEAR(v[2], 37.5, 37.5 * 0.01);
  EXPECT_NEAR(v[0] * v[2], 1.0, 1e-10);
  for (double q : {0.01, 0.2, 0.7, 0.999}) EXPECT_NEAR(prior_r_cdf(prior_r_quantile(q)), q, 1e-12) << q;
  // Independent oracle: the CDF against direct quadrature of the density.
  const double x = 7.3;
  const double direct = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [](double s) { return prior_r_density(s); }, 0.0, x, 20, 1e-13);
  EXPECT_NEAR(prior_r_cdf(x), direct, 1e-8);
  EXPECT_THROW(prior_r_quantile(0.0), DomainError);
}

TEST(BuildPrior, DrawsAreAlwaysAdmissible) {
  const auto prior = build_prior({3.0, 250.0, 0.15});
  auto rng = make_rng(21, 0);
  std::size_t bad = 0;
  for (int i = 0; i < 1'000'000; ++i) {
    const auto p = prior.sample(rng);
    const auto m = p.scaled_model(prior.anchors());
    bad += !(feller_admissible(m.drift(), m.noise_scale(), p.beta) && std::isfinite(prior.log_density(p)) &&
             std::isfinite(p.log_theta(prior.anchors())));
  }
  EXPECT_EQ(bad, 0u);
}

TEST(BuildPrior, PredictiveOfRMatchesClosedForm) {
  const auto prior = build_prior({1.0, 1.0, 0.1});
  auto rng = make_rng(22, 0);
  const int n = 100'000;
  std::vector<double> r(n);
  for (auto& x : r) x = prior.sample(rng).r();
  for (double q : {0.05, 0.5, 0.95}) {
    // Empirical CDF at the closed-form quantile, binomial standard error.
    const double xq = prior_r_quantile(q);
    const double frac = std::count_if(r.begin(), r.end(), [&](double x) { return x <= xq; }) / double(n);
    EXPECT_NEAR(frac, q, 4.0 * std::sqrt(q * (1 - q) / n)) << q;
  }
  EXPECT_NEAR(sample_quantile(r, 0.5), 1.0, 0.02);
}

TEST(BuildPrior, TimeScaleRule) {
  const ScaleAnchors s{2.0, 50.0, 0.25};
  PriorDraw p{0.7, 0.7, 1.0, 1.0};
  EXPECT_NEAR(p.dt_s(s), 1.0 / 0.25, 1e-14);
  // theta_s = 1 and lambda = beta: the initial growth rate of A in anchor units is g_I.
  p = {0.7, 0.7, 0.3, 1.0 - 0.5 * 0.09 * 0.3};
  EXPECT_NEAR(p.theta_s(), 1.0, 1e-15);
  EXPECT_NEAR(p.scaled_model(s).drift(), 0.25, 1e-14);
  // Physical theta carries A_s^beta I_s^-lambda / dt_s.
  EXPECT_NEAR(p.log_theta(s), 0.7 * std::log(2.0) - 0.7 * std::log(50.0) + std::log(0.25), 1e-12);
  EXPECT_NEAR(2.0 * p.log_sigma(s) - p.log_theta(s), 2.0 * std::log(0.3) - std::log(p.theta_s()), 1e-12);
  EXPECT_THROW(build_prior({0.0, 1.0, 0.1}), DomainError);
  EXPECT_THROW(build_prior({1.0, -1.0, 0.1}), DomainError);
  EXPECT_THROW(build_prior({1.0, 1.0, 0.0}), DomainError);
}

TEST(SplitRhat, DetectsSeparatedChains) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<std::vector<std::vector<double>>> mixed(4), split(4);
  for (std::size_t c = 0; c < 4; ++c)
    for (int k = 0; k < 2000; ++k) {
      mixed[c].push_back({n(rng)});
      split[c].push_back({n(rng) + 2.0 * static_cast<double>(c)});
    }
  EXPECT_LT(split_rhat(mixed)[0], 1.01);
  EXPECT_GT(split_rhat(split)[0], 1.5);
  // A trend inside each chain is caught by the split halves.
  for (auto& ch : mixed)
    for (std::size_t k = 0; k < ch.size(); ++k) ch[k][0] += 3.0 * static_cast<double>(k) / static_cast<double>(ch.size());
  EXPECT_GT(split_rhat(mixed)[0], 1.1);
}

TEST(DeMetropolis, CorrelatedGaussianMoments) {
  const double s1 = 1.0, s2 = 3.0, rho = 0.8, m1 = -2.0, m2 = 5.0;
  auto logp = [&](std::span<const double> x) {
    const double a = (x[0] - m1) / s1, b = (x[1] - m2) / s2;
    return -0.5 * (a * a - 2 * rho * a * b + b * b) / (1 - rho * rho);
  };
  auto init = [](Rng& rng) {
    std::normal_distribution<double> n(0.0, 5.0);
    return std::vector<double>{n(rng), n(rng)};
  };
  // Full-dimensional moves only, the default mix, and single-coordinate moves only.
  for (double subspace : {0.0, 0.5, 1.0}) {
    McmcOptions o;
    o.chains = 8;
    o.iterations = 20000;
    o.seed = 4;
    o.subspace_probability = subspace;
    const auto r = de_metropolis_sample(logp, init, {"x", "y"}, o);
    for (double h : r.rhat) EXPECT_LT(h, 1.05) << subspace;
    EXPECT_TRUE(r.converged);
    const auto [mx, sex] = mean_and_mcse(r, [](const auto& x) { return x[0]; });
    const auto [my, sey] = mean_and_mcse(r, [](const auto& x) { return x[1]; });
    EXPECT_NEAR(mx, m1, 3.0 * sex) << subspace;
    EXPECT_NEAR(my, m2, 3.0 * sey) << subspace;
    const auto [vx, sevx] = mean_and_mcse(r, [&](const auto& x) { return (x[0] - m1) * (x[0] - m1); });
    const auto [vy, sevy] = mean_and_mcse(r, [&](const auto& x) { return (x[1] - m2) * (x[1] - m2); });
    EXPECT_NEAR(std::sqrt(vx), s1, 3.0 * sevx / (2.0 * s1)) << subspace;
    EXPECT_NEAR(std::sqrt(vy), s2, 3.0 * sevy / (2.0 * s2)) << subspace;
    for (double a : r.acceptance) {
      EXPECT_GT(a, 0.1) << subspace;
      EXPECT_LT(a, 0.6) << subspace;
    }
  }
}

TEST(DeMetropolis, PriorOnlyTargetReproducesHalfCauchy) {
  const auto prior = build_prior({1.0, 1.0, 0.1});
  auto logp = [&](std::span<const double> u) {
    double lp = 0.0;
    for (double v : u) lp += v;
    return lp + prior.log_density(PriorDraw::from_values(SingleObservationPosterior::natural(u)));
  };
  auto init = [&](Rng& rng) {
    const auto v = prior.sample(rng).values();
    return std::vector<double>{std::log(v[0]), std::log(v[1]), std::log(v[2]), std::log(v[3])};
  };
  McmcOptions o;
  o.seed = 8;
  const auto r = de_metropolis_sample(logp, init, {"u0", "u1", "u2", "u3"}, o);
  EXPECT_TRUE(r.converged) << r.warning.value_or("");
  for (std::size_t j = 0; j < 2; ++j) {
    for (double q : {0.05, 0.5, 0.95}) {
      const double lq = std::log(halfcauchy_quantile(q));
      const auto [frac, se] = mean_and_mcse(r, [&](const auto& u) { return u[j] <= lq ? 1.0 : 0.0; });
      EXPECT_NEAR(frac, q, 3.0 * se + 1e-3) << j << " " << q;
    }
  }
}

TEST(DeMetropolis, DeterministicAndThreadIndependent) {
  auto logp = [](std::span<const double> x) { return -0.5 * (x[0] * x[0] + x[1] * x[1] / 4.0); };
  auto init = [](Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return std::vector<double>{n(rng), n(rng)};
  };
  McmcOptions o;
  o.chains = 6;
  o.iterations = 500;
  o.seed = 42;
  o.threads = 1;
  const auto a = de_metropolis_sample(logp, init, {"a", "b"}, o);
  const auto b = de_metropolis_sample(logp, init, {"a", "b"}, o);
  o.threads = 3;
  const auto c = de_metropolis_sample(logp, init, {"a", "b"}, o);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_EQ(a.samples, c.samples);
  EXPECT_EQ(a.acceptance, c.acceptance);
  o.seed = 43;
  EXPECT_NE(de_metropolis_sample(logp, init, {"a", "b"}, o).samples, a.samples);
}

TEST(DeMetropolis, PreconditionsAndWarnings) {
  auto logp = [](std::span<const double> x) { return -0.5 * x[0] * x[0]; };
  auto init = [](Rng&) { return std::vector<double>{0.0, 0.0, 0.0}; };
  McmcOptions o;
  o.chains = 5;
  EXPECT_THROW(de_metropolis_sample(logp, init, {"a", "b", "c"}, o), DomainError);
  o.chains = 6;
  o.subspace_probability = 1.5;
  EXPECT_THROW(de_metropolis_sample(logp, init, {"a", "b", "c"}, o), DomainError);
  o.subspace_probability = 0.5;
  o.max_init_tries = 10;
  EXPECT_THROW(de_metropolis_sample([](std::span<const double>) { return -std::numeric_limits<double>::infinity(); },
                                    init, {"a", "b", "c"}, o),
               InitializationError);
  // A threshold no chain can meet attaches a warning and still returns draws.
  o.iterations = 200;
  o.rhat_threshold = 0.5;
  auto init1 = [](Rng& rng) { return std::vector<double>{std::normal_distribution<double>(0.0, 1.0)(rng)}; };
  o.chains = 4;
  const auto r = de_metropolis_sample(logp, init1, {"a"}, o);
  EXPECT_FALSE(r.converged);
  ASSERT_TRUE(r.warning.has_value());
  EXPECT_NE(r.warning->find("a="), std::string::npos);
  EXPECT_EQ(r.kept(), 100u);
}

TEST(BayesFit, SingleObservationContractsPosteriorOfR) {
  // Nine-month doubling over 2012-2022 with inputs growing 20% a year.
  BayesOptions o;
  o.mcmc.seed = 1;
  const auto fit = bayes_fit(0.75, 2012.0, 2022.0, yearly_input(0.2), o);
  EXPECT_NEAR(fit.a_ratio, std::exp2(10.0 / 0.75), 1e-9 * fit.a_ratio);
  EXPECT_NEAR(fit.anchors.g_input, 0.2, 1e-12);
  EXPECT_NEAR(fit.anchors.i_scale, 100.0, 1e-10);
  ASSERT_EQ(fit.table.size(), 3u);
  const auto& r = fit.table[2];
  const auto& pr = fit.prior_table[2];
  EXPECT_EQ(r.name, "r");
  EXPECT_GT(r.values[0], pr.values[0]);
  EXPECT_LT(r.values[4], pr.values[4]);
  EXPECT_LT(r_width(r), r_width(pr) / 3.0);
  for (double h : fit.posterior.mcmc.rhat) EXPECT_LT(h, 1.05);
  EXPECT_EQ(fit.posterior.draws.size(), o.mcmc.chains * (o.mcmc.iterations / 2));
  for (const auto& row : fit.table)
    for (std::size_t i = 1; i < 5; ++i) EXPECT_LE(row.values[i - 1], row.values[i]);
}

TEST(BayesFit, FlatOutputShiftsRDown) {
  BayesOptions o;
  o.mcmc.seed = 2;
  o.mcmc.iterations = 8000;
  const auto path = yearly_input(0.2);
  const auto flat = bayes_fit(std::numeric_limits<double>::infinity(), 2012.0, 2022.0, path, o);
  const auto fast = bayes_fit(0.75, 2012.0, 2022.0, path, o);
  EXPECT_EQ(flat.a_ratio, 1.0);
  EXPECT_LT(flat.table[2].values[2], 1.0);
  EXPECT_LT(flat.table[2].values[2], fast.table[2].values[2]);
}

TEST(BayesFit, ZeroLambdaLikelihoodIgnoresInputShape) {
  // Same endpoints, different interior: once the likelihood drops the input
  // dependence, only the anchors (built from the endpoints) see the path.
  std::vector<double> t, v1, v2;
  for (int y = 2012; y <= 2022; ++y) {
    t.push_back(y);
    v1.push_back(100.0 * std::exp(0.2 * (y - 2012)));
    v2.push_back(100.0 * std::exp(0.2 * (y - 2012) + (y > 2012 && y < 2022 ? 0.8 : 0.0)));
  }
  const InputPath p1{TimeSeries(t, v1)}, p2{TimeSeries(t, v2)};
  BayesOptions o;
  o.mcmc.seed = 3;
  o.mcmc.iterations = 2000;
  o.likelihood_lambda = 0.0;
  const auto a = bayes_fit(0.75, 2012.0, 2022.0, p1, o);
  const auto b = bayes_fit(0.75, 2012.0, 2022.0, p2, o);
  EXPECT_EQ(a.posterior.mcmc.samples, b.posterior.mcmc.samples);
  o.likelihood_lambda.reset();
  const auto c = bayes_fit(0.75, 2012.0, 2022.0, p1, o);
  const auto d = bayes_fit(0.75, 2012.0, 2022.0, p2, o);
  EXPECT_NE(c.posterior.mcmc.samples, d.posterior.mcmc.samples);
}

TEST(BayesFit, Preconditions) {
  const auto path = yearly_input(0.2);
  EXPECT_THROW(bayes_fit(0.0, 2012.0, 2022.0, path), DomainError);
  EXPECT_THROW(bayes_fit(1.0, 2022.0, 2012.0, path), DomainError);
  EXPECT_THROW(bayes_fit(1.0, 2010.0, 2022.0, path), SpanError);
  EXPECT_THROW(bayes_fit(1.0, 2012.0, 2022.0, yearly_input(-0.1)), DomainError);
}
