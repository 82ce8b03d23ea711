#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "ideaflow/error.hpp"
#include "ideaflow/feller.hpp"
#include "ideaflow/noise_model.hpp"
#include "ideaflow/parallel.hpp"
#include "ideaflow/rng.hpp"
#include "ideaflow/series.hpp"

namespace ideaflow {

// ---------------------------------------------------------------------------
// Reference distributions

inline double halfcauchy_quantile(double q) {
  if (!(q >= 0.0 && q < 1.0)) throw DomainError("halfcauchy_quantile: q must lie in [0, 1)");
  return std::tan(q * std::numbers::pi / 2.0);
}

inline double halfcauchy_cdf(double x) { return x <= 0.0 ? 0.0 : 2.0 / std::numbers::pi * std::atan(x); }

inline double halfcauchy_logpdf(double x) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return std::log(2.0 / std::numbers::pi) - std::log1p(x * x);
}

// Density of the product (equivalently the ratio) of two independent unit
// half-Cauchy variables.
inline double prior_r_density(double x) {
  if (std::isnan(x)) throw DomainError("prior_r_density: x is NaN");
  if (x <= 0.0) return 0.0;
  const double k = 4.0 / (std::numbers::pi * std::numbers::pi);
  if (std::abs(x - 1.0) < 1e-6) {
    // log x / (x^2 - 1) = 1/2 - 3(x - 1)/4 + O((x - 1)^2)
    return k * (0.5 - 0.75 * (x - 1.0));
  }
  if (std::isinf(x)) return 0.0;
  return k * std::log(x) / ((x - 1.0) * (x + 1.0));
}

namespace detail {

// In u = log x the density is (2/pi^2) u / sinh u, even in u.
inline double prior_r_log_mass(double u) {
  auto f = [](double v) { return v == 0.0 ? 1.0 : v / std::sinh(v); };
  const double k = 2.0 / (std::numbers::pi * std::numbers::pi);
  const double a = std::min(std::abs(u), 800.0);
  return k * boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, a, 15, 1e-14);
}

}  // namespace detail

inline double prior_r_cdf(double x) {
  if (std::isnan(x)) throw DomainError("prior_r_cdf: x is NaN");
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  const double u = std::log(x);
  const double m = detail::prior_r_log_mass(u);
  return u >= 0.0 ? 0.5 + m : 0.5 - m;
}

inline double prior_r_quantile(double q) {
  if (!(q > 0.0 && q < 1.0)) throw DomainError("prior_r_quantile: q must lie in (0, 1)");
  if (q == 0.5) return 1.0;
  // Solve in log space on the upper half, then reflect (x <-> 1/x symmetry).
  const double target = std::abs(q - 0.5);
  auto g = [&](double u) { return detail::prior_r_log_mass(u) - target; };
  double hi = 1.0;
  while (g(hi) < 0.0) hi *= 2.0;
  std::uintmax_t iters = 200;
  const auto [lo_u, hi_u] =
      boost::math::tools::toms748_solve(g, 0.0, hi, -target, g(hi), boost::math::tools::eps_tolerance<double>(50), iters);
  const double u = 0.5 * (lo_u + hi_u);
  return std::exp(q > 0.5 ? u : -u);
}

inline std::vector<double> prior_r_quantiles(std::span<const double> qs) {
  std::vector<double> out;
  out.reserve(qs.size());
  for (double q : qs) out.push_back(prior_r_quantile(q));
  return out;
}

// Type-7 (linear interpolation) sample quantile; q in [0, 1].
inline double sample_quantile(std::vector<double> v, double q) {
  if (v.empty()) throw DomainError("sample_quantile: empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("sample_quantile: q must lie in [0, 1]");
  std::sort(v.begin(), v.end());
  const double h = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// ---------------------------------------------------------------------------
// Prior with dimensional scale anchors

struct ScaleAnchors {
  double a_scale = 1.0;  // A_s
  double i_scale = 1.0;  // I_s
  double g_input = 0.0;  // average input growth per year

  void validate() const {
    if (!(a_scale > 0.0 && std::isfinite(a_scale))) throw DomainError("ScaleAnchors: a_scale must be positive");
    if (!(i_scale > 0.0 && std::isfinite(i_scale))) throw DomainError("ScaleAnchors: i_scale must be positive");
    if (!(g_input > 0.0 && std::isfinite(g_input)))
      throw DomainError("ScaleAnchors: average input growth must be positive");
  }

  static ScaleAnchors from_path(const InputPath& path, double t_start, double t_end, double a_start = 1.0) {
    if (!(t_end > t_start)) throw DomainError("ScaleAnchors: need t_end > t_start");
    ScaleAnchors s{a_start, path.value(t_start), (path.log_value(t_end) - path.log_value(t_start)) / (t_end - t_start)};
    s.validate();
    return s;
  }
};

inline constexpr std::array<const char*, 4> kPriorParameterNames{"lambda", "beta", "sigma_s", "theta_s_excess"};

struct PriorDraw {
  double lambda = 1.0;
  double beta = 1.0;
  double sigma_s = 1.0;
  double theta_s_excess = 1.0;

  double theta_s() const { return 0.5 * sigma_s * sigma_s * std::max(1.0 - beta, 0.0) + theta_s_excess; }
  double r() const { return lambda / beta; }
  // Delta t_s = (lambda g_I / beta)^-1
  double dt_s(const ScaleAnchors& s) const { return beta / (lambda * s.g_input); }

  // Physical parameters, as logs since I_s^lambda overflows for heavy-tailed lambda draws.
  double log_theta(const ScaleAnchors& s) const {
    return std::log(theta_s()) + beta * std::log(s.a_scale) - lambda * std::log(s.i_scale) - std::log(dt_s(s));
  }
  double log_sigma(const ScaleAnchors& s) const {
    return std::log(sigma_s) + 0.5 * (beta * std::log(s.a_scale) - lambda * std::log(s.i_scale) - std::log(dt_s(s)));
  }

  // Feller model in anchor units, where A and I are measured relative to A_s and I_s.
  NoiseModel scaled_model(const ScaleAnchors& s) const {
    const double dt = dt_s(s);
    return NoiseModel::feller(theta_s() / dt, sigma_s / std::sqrt(dt), beta, lambda);
  }

  std::array<double, 4> values() const { return {lambda, beta, sigma_s, theta_s_excess}; }
  static PriorDraw from_values(std::span<const double> v) { return {v[0], v[1], v[2], v[3]}; }
};

// Four independent unit half-Cauchy components over (lambda, beta, sigma_s, theta_s_excess).
class HalfCauchyPrior {
 public:
  explicit HalfCauchyPrior(const ScaleAnchors& anchors) : anchors_(anchors) { anchors_.validate(); }

  const ScaleAnchors& anchors() const { return anchors_; }

  PriorDraw sample(Rng& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto draw = [&] {
      double x = 0.0;
      while (!(x > 0.0 && std::isfinite(x))) x = halfcauchy_quantile(u(rng));
      return x;
    };
    PriorDraw p;
    p.lambda = draw();
    p.beta = draw();
    p.sigma_s = draw();
    p.theta_s_excess = draw();
    return p;
  }

  double log_density(const PriorDraw& p) const {
    return halfcauchy_logpdf(p.lambda) + halfcauchy_logpdf(p.beta) + halfcauchy_logpdf(p.sigma_s) +
           halfcauchy_logpdf(p.theta_s_excess);
  }

 private:
  ScaleAnchors anchors_;
};

inline HalfCauchyPrior build_prior(const ScaleAnchors& anchors) { return HalfCauchyPrior(anchors); }

// ---------------------------------------------------------------------------
// Differential-evolution Metropolis

struct McmcOptions {
  std::size_t chains = 12;
  std::size_t iterations = 40000;
  double burn_in = 0.5;         // fraction of iterations discarded
  std::uint64_t seed = 0;
  unsigned threads = 0;
  double jitter = 1e-4;         // sd of the Gaussian added to every DE proposal
  std::size_t jump_every = 10;  // every n-th generation uses gamma = 1
  // Probability that a proposal moves a single random coordinate instead of
  // all of them. Lets a chain leave a narrow funnel along one axis.
  double subspace_probability = 0.5;
  std::size_t max_init_tries = 10000;
  double rhat_threshold = 1.05;
};

struct McmcResult {
  std::vector<std::string> names;
  // samples[c][k] is the k-th kept state of chain c.
  std::vector<std::vector<std::vector<double>>> samples;
  std::vector<double> acceptance;  // per chain, over all iterations
  std::vector<double> rhat;        // split-R-hat per parameter
  bool converged = true;
  std::optional<std::string> warning;

  std::size_t dimension() const { return names.size(); }
  std::size_t kept() const { return samples.empty() ? 0 : samples.front().size(); }

  // All kept values of parameter j, chain-major.
  std::vector<double> pooled(std::size_t j) const {
    std::vector<double> out;
    for (const auto& chain : samples)
      for (const auto& x : chain) out.push_back(x[j]);
    return out;
  }
};

// Split-R-hat: each chain is halved and the halves are treated as separate sequences.
inline std::vector<double> split_rhat(const std::vector<std::vector<std::vector<double>>>& samples) {
  if (samples.empty() || samples.front().size() < 4) throw DomainError("split_rhat: need at least 4 draws per chain");
  const std::size_t d = samples.front().front().size();
  const std::size_t n = samples.front().size() / 2;
  std::vector<double> out(d);
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> means, vars;
    for (const auto& chain : samples) {
      for (std::size_t half = 0; half < 2; ++half) {
        double m = 0.0;
        for (std::size_t k = 0; k < n; ++k) m += chain[half * n + k][j];
        m /= static_cast<double>(n);
        double v = 0.0;
        for (std::size_t k = 0; k < n; ++k) v += (chain[half * n + k][j] - m) * (chain[half * n + k][j] - m);
        means.push_back(m);
        vars.push_back(v / static_cast<double>(n - 1));
      }
    }
    const double seqs = static_cast<double>(means.size());
    double grand = 0.0, w = 0.0;
    for (std::size_t i = 0; i < means.size(); ++i) grand += means[i], w += vars[i];
    grand /= seqs;
    w /= seqs;
    double b = 0.0;
    for (double m : means) b += (m - grand) * (m - grand);
    b *= static_cast<double>(n) / (seqs - 1.0);
    if (w == 0.0) {
      out[j] = b == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
      continue;
    }
    const double var_plus = (static_cast<double>(n) - 1.0) / static_cast<double>(n) * w + b / static_cast<double>(n);
    out[j] = std::sqrt(var_plus / w);
  }
  return out;
}

using LogDensity = std::function<double(std::span<const double>)>;
using InitialState = std::function<std::vector<double>(Rng&)>;

// Population MCMC with proposals x + gamma (x_a - x_b) + e, some of them
// restricted to one coordinate (see McmcOptions::subspace_probability). The chains are
// split into even and odd halves; each half moves with a and b drawn from the
// other half, which is frozen during the move. Every chain owns the stream
// make_rng(seed, chain), so the result is independent of the thread count.
inline McmcResult de_metropolis_sample(const LogDensity& log_target, const InitialState& init,
                                       std::vector<std::string> names, const McmcOptions& opt = {}) {
  const std::size_t d = names.size();
  const std::size_t nc = opt.chains;
  if (d == 0) throw DomainError("de_metropolis_sample: no parameters");
  if (nc < std::max<std::size_t>(4, 2 * d))
    throw DomainError("de_metropolis_sample: need at least max(4, 2 x parameters) chains, got " + std::to_string(nc));
  if (!(opt.burn_in >= 0.0 && opt.burn_in < 1.0)) throw DomainError("de_metropolis_sample: burn_in must lie in [0, 1)");
  const auto burn = static_cast<std::size_t>(std::floor(opt.burn_in * static_cast<double>(opt.iterations)));
  if (opt.iterations < burn + 4) throw DomainError("de_metropolis_sample: too few iterations after burn-in");
  if (!(opt.subspace_probability >= 0.0 && opt.subspace_probability <= 1.0))
    throw DomainError("de_metropolis_sample: subspace_probability must lie in [0, 1]");

  std::vector<Rng> rngs;
  for (std::size_t c = 0; c < nc; ++c) rngs.push_back(make_rng(opt.seed, c));
  std::vector<std::vector<double>> state(nc);
  std::vector<double> logp(nc);
  parallel_for(nc, opt.threads, [&](std::size_t c) {
    for (std::size_t k = 0; k < opt.max_init_tries; ++k) {
      auto x = init(rngs[c]);
      if (x.size() != d) throw DomainError("de_metropolis_sample: initial state has the wrong dimension");
      const double lp = log_target(x);
      if (std::isfinite(lp)) {
        state[c] = std::move(x);
        logp[c] = lp;
        return;
      }
    }
    throw InitializationError("de_metropolis_sample: chain " + std::to_string(c) + " found no state with finite density in " +
                              std::to_string(opt.max_init_tries) + " draws");
  });

  McmcResult out;
  out.names = std::move(names);
  out.samples.assign(nc, {});
  for (auto& s : out.samples) s.reserve(opt.iterations - burn);
  std::vector<std::size_t> accepted(nc, 0);
  const double gamma_default = 2.38 / std::sqrt(2.0 * static_cast<double>(d));
  const double gamma_single = 2.38 / std::sqrt(2.0);

  std::array<std::vector<std::size_t>, 2> halves;
  for (std::size_t c = 0; c < nc; ++c) halves[c % 2].push_back(c);

  for (std::size_t it = 0; it < opt.iterations; ++it) {
    const bool jump = opt.jump_every && (it + 1) % opt.jump_every == 0;
    for (std::size_t h = 0; h < 2; ++h) {
      const auto& movers = halves[h];
      const auto& donors = halves[1 - h];
      parallel_for(movers.size(), opt.threads, [&](std::size_t i) {
        const std::size_t c = movers[i];
        Rng& rng = rngs[c];
        std::uniform_int_distribution<std::size_t> pick(0, donors.size() - 1);
        const std::size_t a = pick(rng);
        std::size_t b = pick(rng);
        while (b == a) b = pick(rng);
        std::normal_distribution<double> e(0.0, opt.jitter);
        std::vector<double> prop = state[c];
        const bool single = !jump && d > 1 && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < opt.subspace_probability;
        if (single) {
          const std::size_t j = std::uniform_int_distribution<std::size_t>(0, d - 1)(rng);
          prop[j] += gamma_single * (state[donors[a]][j] - state[donors[b]][j]) + e(rng);
        } else {
          const double gamma = jump ? 1.0 : gamma_default;
          for (std::size_t j = 0; j < d; ++j)
            prop[j] += gamma * (state[donors[a]][j] - state[donors[b]][j]) + e(rng);
        }
        const double lp = log_target(prop);
        const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        if (std::isfinite(lp) && std::log(u) < lp - logp[c]) {
          state[c] = std::move(prop);
          logp[c] = lp;
          ++accepted[c];
        }
      });
    }
    if (it >= burn)
      for (std::size_t c = 0; c < nc; ++c) out.samples[c].push_back(state[c]);
  }

  for (std::size_t c = 0; c < nc; ++c)
    out.acceptance.push_back(static_cast<double>(accepted[c]) / static_cast<double>(opt.iterations));
  out.rhat = split_rhat(out.samples);
  for (std::size_t j = 0; j < d; ++j) {
    if (!(out.rhat[j] <= opt.rhat_threshold)) {
      out.converged = false;
      out.warning = out.warning.value_or("split R-hat above " + std::to_string(opt.rhat_threshold) + ":");
      *out.warning += " " + out.names[j] + "=" + std::to_string(out.rhat[j]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Single-observation Bayesian pipeline

inline constexpr std::array<double, 5> kPercentileGrid{5.0, 25.0, 50.0, 75.0, 95.0};

struct PercentileRow {
  std::string name;
  std::array<double, 5> values{};
};

struct PosteriorDraws {
  std::vector<PriorDraw> draws;
  McmcResult mcmc;  // sampled in log coordinates of the four prior parameters
};

struct BayesOptions {
  McmcOptions mcmc;
  double a_start = 1.0;
  // When set, the likelihood is evaluated with this lambda while the prior
  // and the Delta t_s rule keep the sampled one.
  std::optional<double> likelihood_lambda;
};

struct BayesResult {
  ScaleAnchors anchors;
  double a_ratio = 1.0;  // A_end / A_start
  double t_start = 0.0, t_end = 0.0;
  PosteriorDraws posterior;
  std::vector<PercentileRow> table;        // lambda, beta, r
  std::vector<PercentileRow> prior_table;  // the same rows under the prior alone
};

inline std::vector<PercentileRow> percentile_table(const std::vector<PriorDraw>& draws) {
  std::vector<double> lam, beta, r;
  for (const auto& p : draws) lam.push_back(p.lambda), beta.push_back(p.beta), r.push_back(p.r());
  std::vector<PercentileRow> out;
  for (auto [name, v] : {std::pair{"lambda", &lam}, std::pair{"beta", &beta}, std::pair{"r", &r}}) {
    PercentileRow row{name, {}};
    for (std::size_t i = 0; i < kPercentileGrid.size(); ++i) row.values[i] = sample_quantile(*v, kPercentileGrid[i] / 100.0);
    out.push_back(row);
  }
  return out;
}

inline std::vector<PercentileRow> prior_percentile_table() {
  std::vector<PercentileRow> out{{"lambda", {}}, {"beta", {}}, {"r", {}}};
  for (std::size_t i = 0; i < kPercentileGrid.size(); ++i) {
    const double q = kPercentileGrid[i] / 100.0;
    out[0].values[i] = out[1].values[i] = halfcauchy_quantile(q);
    out[2].values[i] = prior_r_quantile(q);
  }
  return out;
}

// Log posterior over u = log(lambda, beta, sigma_s, theta_s_excess), including
// the Jacobian of the log transform. The observation is A(t_start) = a_start,
// A(t_end) = a_start * a_ratio.
class SingleObservationPosterior {
 public:
  SingleObservationPosterior(const InputPath& path, double t_start, double t_end, double a_ratio, double a_start,
                             std::optional<double> likelihood_lambda = std::nullopt)
      : prior_(ScaleAnchors::from_path(path, t_start, t_end, a_start)),
        nodes_(path.quadrature(t_start, t_end)),
        log_i_scale_(std::log(prior_.anchors().i_scale)),
        a_ratio_(a_ratio),
        likelihood_lambda_(likelihood_lambda) {
    if (!(a_ratio > 0.0 && std::isfinite(a_ratio))) throw DomainError("posterior: A ratio must be positive and finite");
  }

  const HalfCauchyPrior& prior() const { return prior_; }

  double log_prior_u(std::span<const double> u) const {
    double lp = 0.0;
    for (double v : u) {
      if (!std::isfinite(v)) return -std::numeric_limits<double>::infinity();
      lp += v;
    }
    return lp + prior_.log_density(PriorDraw::from_values(natural(u)));
  }

  double loglik(const PriorDraw& p) const {
    const auto& s = prior_.anchors();
    const double lam = likelihood_lambda_.value_or(p.lambda);
    const double dt = p.dt_s(s);
    const double theta = p.theta_s() / dt;
    const double sigma = p.sigma_s / std::sqrt(dt);
    // Clock in anchor units: int (I / I_s)^lambda dt.
    const double tau = std::exp(InputPath::log_integral_pow(nodes_, lam) - lam * log_i_scale_);
    if (!(std::isfinite(theta) && std::isfinite(sigma) && theta > 0.0 && std::isfinite(tau) && tau > 0.0))
      return -std::numeric_limits<double>::infinity();
    try {
      return feller_transition_logpdf(1.0, a_ratio_, theta, sigma, p.beta, tau);
    } catch (const Error&) {
      return -std::numeric_limits<double>::infinity();
    }
  }

  double operator()(std::span<const double> u) const {
    const double lp = log_prior_u(u);
    if (!std::isfinite(lp)) return lp;
    const double ll = loglik(PriorDraw::from_values(natural(u)));
    return std::isnan(ll) ? -std::numeric_limits<double>::infinity() : lp + ll;
  }

  static std::array<double, 4> natural(std::span<const double> u) {
    return {std::exp(u[0]), std::exp(u[1]), std::exp(u[2]), std::exp(u[3])};
  }

 private:
  HalfCauchyPrior prior_;
  std::vector<QuadratureNode> nodes_;
  double log_i_scale_;
  double a_ratio_;
  std::optional<double> likelihood_lambda_;
};

// doubling_time may be +infinity (flat A).
inline BayesResult bayes_fit(double doubling_time, double t_start, double t_end, const InputPath& path,
                             const BayesOptions& opt = {}) {
  if (!(doubling_time > 0.0)) throw DomainError("bayes_fit: doubling time must be positive");
  if (!(t_end > t_start)) throw DomainError("bayes_fit: need t_end > t_start");
  BayesResult out;
  out.t_start = t_start;
  out.t_end = t_end;
  out.a_ratio = std::isinf(doubling_time) ? 1.0 : std::exp2((t_end - t_start) / doubling_time);
  const SingleObservationPosterior target(path, t_start, t_end, out.a_ratio, opt.a_start, opt.likelihood_lambda);
  out.anchors = target.prior().anchors();

  const auto& prior = target.prior();
  auto init = [&](Rng& rng) {
    const auto v = prior.sample(rng).values();
    std::vector<double> u(4);
    for (std::size_t j = 0; j < 4; ++j) u[j] = std::log(v[j]);
    return u;
  };
  std::vector<std::string> names;
  for (const char* n : kPriorParameterNames) names.push_back(std::string("log_") + n);
  out.posterior.mcmc = de_metropolis_sample([&](std::span<const double> u) { return target(u); }, init, names, opt.mcmc);
  for (const auto& chain : out.posterior.mcmc.samples)
    for (const auto& u : chain) out.posterior.draws.push_back(PriorDraw::from_values(SingleObservationPosterior::natural(u)));
  out.table = percentile_table(out.posterior.draws);
  out.prior_table = prior_percentile_table();
  return out;
}

}  // namespace ideaflow
