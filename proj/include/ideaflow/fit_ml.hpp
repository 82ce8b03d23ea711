#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "ideaflow/classical.hpp"
#include "ideaflow/error.hpp"
#include "ideaflow/noise_model.hpp"
#include "ideaflow/optimize.hpp"
#include "ideaflow/parallel.hpp"
#include "ideaflow/rng.hpp"
#include "ideaflow/series.hpp"

namespace ideaflow {

// Distribution family of the driving Levy process.
enum class NoiseFamily { Gaussian, StableMaxSkew, Stable };

inline std::string_view to_string(NoiseFamily f) {
  switch (f) {
    case NoiseFamily::Gaussian: return "gaussian";
    case NoiseFamily::StableMaxSkew: return "stable-max-skew";
    case NoiseFamily::Stable: return "stable";
  }
  return "?";
}

inline NoiseFamily parse_family(std::string_view s) {
  if (s == "gaussian") return NoiseFamily::Gaussian;
  if (s == "stable-max-skew") return NoiseFamily::StableMaxSkew;
  if (s == "stable") return NoiseFamily::Stable;
  throw DomainError("unknown noise family '" + std::string(s) + "'");
}

// Box limits on the unconstrained optimizer coordinates.
struct ParameterBounds {
  double beta_lo = -20.0, beta_hi = 50.0;
  double lambda_lo = -20.0, lambda_hi = 50.0;
  double log_theta_lo = -60.0, log_theta_hi = 60.0;
  double log_scale_lo = -25.0, log_scale_hi = 10.0;
};

// A family of noise models with some exponents optionally held fixed. The
// optimizer works on raw coordinates, in this order, skipping fixed ones:
//   beta, lambda, log theta, log scale, [logit alpha], [atanh skew]
// with alpha = 0.2 + 1.8 sigmoid(raw) and skew = tanh(raw).
struct ModelClass {
  Structure structure = Structure::Feller;
  NoiseFamily family = NoiseFamily::Gaussian;
  std::optional<double> fixed_beta;
  std::optional<double> fixed_lambda;

  void validate() const {
    if (structure == Structure::Feller && family != NoiseFamily::Gaussian)
      throw DomainError("model class: the Feller structure needs the gaussian family");
    if (fixed_beta && !std::isfinite(*fixed_beta)) throw DomainError("model class: non-finite fixed beta");
    if (fixed_lambda && !std::isfinite(*fixed_lambda)) throw DomainError("model class: non-finite fixed lambda");
  }

  bool stable_family() const { return family != NoiseFamily::Gaussian; }
  std::string_view scale_name() const { return stable_family() ? "c" : "sigma"; }

  std::vector<std::string> parameter_names() const {
    std::vector<std::string> names;
    if (!fixed_beta) names.emplace_back("beta");
    if (!fixed_lambda) names.emplace_back("lambda");
    names.emplace_back("theta");
    names.emplace_back(scale_name());
    if (stable_family()) names.emplace_back("alpha");
    if (family == NoiseFamily::Stable) names.emplace_back("skew");
    return names;
  }

  std::size_t dimension() const { return parameter_names().size(); }

  // Natural values of the free parameters.
  std::vector<double> natural(std::span<const double> u) const {
    std::vector<double> out(u.begin(), u.end());
    std::size_t i = (fixed_beta ? 0 : 1) + (fixed_lambda ? 0 : 1);
    out[i] = std::exp(u[i]);
    out[i + 1] = std::exp(u[i + 1]);
    if (stable_family()) out[i + 2] = 0.2 + 1.8 / (1.0 + std::exp(-u[i + 2]));
    if (family == NoiseFamily::Stable) out[i + 3] = std::tanh(u[i + 3]);
    return out;
  }

  // d natural / d raw, coordinate by coordinate.
  std::vector<double> jacobian(std::span<const double> u) const {
    std::vector<double> d(u.size(), 1.0);
    const auto x = natural(u);
    std::size_t i = (fixed_beta ? 0 : 1) + (fixed_lambda ? 0 : 1);
    d[i] = x[i];
    d[i + 1] = x[i + 1];
    if (stable_family()) {
      const double s = (x[i + 2] - 0.2) / 1.8;
      d[i + 2] = 1.8 * s * (1.0 - s);
    }
    if (family == NoiseFamily::Stable) d[i + 3] = 1.0 - x[i + 3] * x[i + 3];
    return d;
  }

  double beta_of(std::span<const double> u) const { return fixed_beta ? *fixed_beta : u[0]; }
  double lambda_of(std::span<const double> u) const {
    return fixed_lambda ? *fixed_lambda : u[fixed_beta ? 0 : 1];
  }

  bool within(std::span<const double> u, const ParameterBounds& b) const {
    for (double v : u)
      if (!std::isfinite(v)) return false;
    auto inside = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
    std::size_t i = 0;
    if (!fixed_beta && !inside(u[i++], b.beta_lo, b.beta_hi)) return false;
    if (!fixed_lambda && !inside(u[i++], b.lambda_lo, b.lambda_hi)) return false;
    return inside(u[i], b.log_theta_lo, b.log_theta_hi) && inside(u[i + 1], b.log_scale_lo, b.log_scale_hi);
  }

  // Nearest point inside the box (a zero noise scale maps to the lower bound).
  std::vector<double> clamp_to(std::vector<double> u, const ParameterBounds& b) const {
    std::size_t i = 0;
    if (!fixed_beta) u[i] = std::clamp(u[i], b.beta_lo, b.beta_hi), ++i;
    if (!fixed_lambda) u[i] = std::clamp(u[i], b.lambda_lo, b.lambda_hi), ++i;
    u[i] = std::clamp(u[i], b.log_theta_lo, b.log_theta_hi);
    u[i + 1] = std::clamp(u[i + 1], b.log_scale_lo, b.log_scale_hi);
    return u;
  }

  // Throws DomainError / ConstraintError when the point is not a valid model.
  NoiseModel build(std::span<const double> u) const {
    if (u.size() != dimension()) throw DomainError("model class: wrong parameter count");
    const auto x = natural(u);
    const double beta = beta_of(u), lambda = lambda_of(u);
    std::size_t i = (fixed_beta ? 0 : 1) + (fixed_lambda ? 0 : 1);
    const double theta = x[i], scale = x[i + 1];
    if (structure == Structure::Feller) return NoiseModel::feller(theta, scale, beta, lambda);
    if (!stable_family()) return NoiseModel::drift_diffusion(structure, theta, scale, beta, lambda);
    const double alpha = x[i + 2];
    const double skew = family == NoiseFamily::Stable ? x[i + 3] : 1.0;
    return NoiseModel::stable(structure, {alpha, skew, theta, scale}, beta, lambda);
  }

  // Raw coordinates of a model of this class (fixed exponents are dropped).
  std::vector<double> to_raw(const NoiseModel& m) const {
    std::vector<double> u;
    if (!fixed_beta) u.push_back(m.beta);
    if (!fixed_lambda) u.push_back(m.lambda);
    u.push_back(std::log(m.drift()));
    u.push_back(std::log(m.noise_scale()));
    if (stable_family()) {
      const double s = std::clamp((m.stable_params().alpha - 0.2) / 1.8, 1e-12, 1.0 - 1e-12);
      u.push_back(std::log(s / (1.0 - s)));
    }
    if (family == NoiseFamily::Stable) u.push_back(std::atanh(std::clamp(m.stable_params().skew, -0.999999, 0.999999)));
    return u;
  }
};

// Per-pair transition log-densities of a model over the observation windows.
struct LoglikTerms {
  double total = 0.0;
  std::vector<double> terms;
  std::optional<std::size_t> zero_density_pair;  // first pair with log-density -inf
};

inline LoglikTerms loglik_terms(const NoiseModel& model, const ObservationSet& obs, const WindowIntegrals& windows) {
  LoglikTerms out;
  out.terms.reserve(obs.pairs());
  for (std::size_t k = 0; k < obs.pairs(); ++k) {
    const double v = transition_logpdf(model, obs[k].a, obs[k + 1].a, windows.window(k));
    out.terms.push_back(v);
    if (std::isnan(v)) throw DomainError("total_loglik: NaN transition density at pair " + std::to_string(k));
    if (v == -std::numeric_limits<double>::infinity() && !out.zero_density_pair) out.zero_density_pair = k;
    out.total += v;
  }
  return out;
}

inline double total_loglik(const NoiseModel& model, const ObservationSet& obs, const WindowIntegrals& windows) {
  return loglik_terms(model, obs, windows).total;
}

// Markov factorization: sum of transition log-densities over consecutive pairs.
inline double total_loglik(const NoiseModel& model, const ObservationSet& obs, const InputPath& path) {
  return total_loglik(model, obs, WindowIntegrals(path, obs));
}

struct MleOptions {
  std::size_t restarts = 8;
  NelderMeadOptions simplex{6000, 1e-10, 1e-7};
  ParameterBounds bounds;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::optional<std::vector<double>> warm_start;  // raw coordinates; replaces the naive start
};

struct FitResult {
  ModelClass cls;
  NoiseModel model;
  std::vector<double> raw;
  double loglik = -std::numeric_limits<double>::infinity();
  std::optional<std::vector<double>> fisher_se;  // natural parameters, cls.parameter_names() order
  std::optional<double> fisher_se_r;
  bool converged = false;
  std::size_t n_restarts_used = 0;
  std::size_t evaluations = 0;
  std::vector<double> restart_values;  // best -loglik reached by each start

  double lambda_raw() const { return model.lambda; }
  double lambda_clipped() const { return std::max(model.lambda, 0.0); }
  double r() const { return model.beta > 0.0 ? model.lambda / model.beta : std::numeric_limits<double>::quiet_NaN(); }
};

namespace detail {

// Negative log-likelihood on raw coordinates; +inf outside the model's domain.
struct Objective {
  const ModelClass& cls;
  const ObservationSet& obs;
  const WindowIntegrals& windows;
  const ParameterBounds& bounds;

  double operator()(const std::vector<double>& u) const {
    if (!cls.within(u, bounds)) return std::numeric_limits<double>::infinity();
    try {
      const double ll = total_loglik(cls.build(u), obs, windows);
      return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
    } catch (const DomainError&) {
      return std::numeric_limits<double>::infinity();
    } catch (const ConstraintError&) {
      return std::numeric_limits<double>::infinity();
    }
  }
};

// Moment-matched drift and noise scale for given exponents: theta from the
// ratio of summed latent increments to summed clocks, sigma^2 from the
// normalized squared residuals.
inline std::pair<double, double> moment_start(const ModelClass& cls, const ObservationSet& obs,
                                              const WindowIntegrals& w, double beta, double lambda) {
  double sz = 0.0, sj = 0.0;
  std::vector<double> z(obs.pairs()), j(obs.pairs());
  for (std::size_t k = 0; k < obs.pairs(); ++k) {
    z[k] = std::pow(obs[k].a, beta) * q_beta(obs[k].a, obs[k + 1].a, beta);
    j[k] = std::exp(w.log_integral(k, lambda));
    sz += z[k];
    sj += j[k];
  }
  double theta = sz / sj;
  if (!(theta > 0.0) || !std::isfinite(theta)) theta = std::max(std::abs(sz / sj), 1e-8);
  const bool level_scaled = cls.structure == Structure::Feller || cls.structure == Structure::ScaleInvariant;
  double s2 = 0.0;
  for (std::size_t k = 0; k < obs.pairs(); ++k) {
    const double res = z[k] - theta * j[k];
    s2 += res * res / (j[k] * (level_scaled ? std::pow(obs[k].a, beta) : 1.0));
  }
  s2 /= static_cast<double>(obs.pairs());
  double sigma = std::sqrt(s2);
  if (!(sigma > 1e-8) || !std::isfinite(sigma)) sigma = 1e-8;
  if (cls.structure == Structure::Feller) {
    // Stay inside theta > sigma^2 (1 - beta) / 2.
    const double cap = 0.5 * sigma * sigma * (1.0 - beta);
    if (theta <= cap) theta = 2.0 * cap + 1e-8;
  }
  return {theta, sigma};
}

inline std::vector<double> start_point(const ModelClass& cls, const ObservationSet& obs, const WindowIntegrals& w,
                                       double beta, double lambda, double log_theta_shift, double log_scale_shift,
                                       double alpha_raw, double skew_raw) {
  const auto [theta, sigma] = moment_start(cls, obs, w, beta, lambda);
  std::vector<double> u;
  if (!cls.fixed_beta) u.push_back(beta);
  if (!cls.fixed_lambda) u.push_back(lambda);
  u.push_back(std::log(theta) + log_theta_shift);
  u.push_back(std::log(cls.stable_family() ? sigma / std::numbers::sqrt2 : sigma) + log_scale_shift);
  if (cls.stable_family()) u.push_back(alpha_raw);
  if (cls.family == NoiseFamily::Stable) u.push_back(skew_raw);
  return u;
}

// Naive-method starting exponents: beta = 1 and lambda = r_naive.
inline std::pair<double, double> naive_exponents(const ModelClass& cls, const ObservationSet& obs,
                                                 const InputPath& path) {
  const double beta = cls.fixed_beta.value_or(1.0);
  double lambda = 0.5;
  const double t0 = obs[0].t, t1 = obs[obs.size() - 1].t;
  const double ga = std::log(obs[obs.size() - 1].a / obs[0].a) / (t1 - t0);
  const double gi = (path.log_value(t1) - path.log_value(t0)) / (t1 - t0);
  if (std::abs(gi) > 1e-12 && std::isfinite(ga / gi)) lambda = std::clamp(beta * ga / gi, -5.0, 5.0);
  return {beta, cls.fixed_lambda.value_or(lambda)};
}

// Central-difference Hessian of f at u.
inline Eigen::MatrixXd hessian(const std::function<double(const std::vector<double>&)>& f, const std::vector<double>& u,
                               double rel_step) {
  const std::size_t n = u.size();
  Eigen::MatrixXd h(n, n);
  std::vector<double> step(n);
  for (std::size_t i = 0; i < n; ++i) step[i] = rel_step * std::max(1.0, std::abs(u[i]));
  const double f0 = f(u);
  auto at = [&](std::size_t i, double si, std::size_t j, double sj) {
    auto x = u;
    x[i] += si;
    x[j] += sj;
    return f(x);
  };
  for (std::size_t i = 0; i < n; ++i) {
    h(i, i) = (at(i, step[i], i, 0.0) - 2.0 * f0 + at(i, -step[i], i, 0.0)) / (step[i] * step[i]);
    for (std::size_t j = 0; j < i; ++j) {
      const double v = (at(i, step[i], j, step[j]) - at(i, step[i], j, -step[j]) - at(i, -step[i], j, step[j]) +
                        at(i, -step[i], j, -step[j])) /
                       (4.0 * step[i] * step[j]);
      h(i, j) = h(j, i) = v;
    }
  }
  return h;
}

}  // namespace detail

// Standard errors from the inverse observed information at the optimum, on
// natural parameters (delta method through the raw coordinates). Empty when
// the Hessian is not positive definite. The second value is the SE of r.
inline std::pair<std::optional<std::vector<double>>, std::optional<double>> fisher_se(
    const FitResult& fit, const ObservationSet& obs, const InputPath& path, const ParameterBounds& bounds = {}) {
  const WindowIntegrals windows(path, obs);
  const detail::Objective f{fit.cls, obs, windows, bounds};
  const Eigen::MatrixXd h = detail::hessian(f, fit.raw, fit.cls.stable_family() ? 1e-3 : 1e-4);
  if (!h.allFinite()) return {};
  Eigen::LLT<Eigen::MatrixXd> llt(h);
  if (llt.info() != Eigen::Success) return {};
  const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(h.rows(), h.cols()));
  const auto jac = fit.cls.jacobian(fit.raw);
  std::vector<double> se(fit.raw.size());
  for (std::size_t i = 0; i < se.size(); ++i) {
    if (!(cov(i, i) > 0.0)) return {};
    se[i] = std::abs(jac[i]) * std::sqrt(cov(i, i));
  }
  std::optional<double> se_r;
  const double beta = fit.model.beta, lambda = fit.model.lambda;
  if (beta > 0.0) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(h.rows());
    std::size_t i = 0;
    if (!fit.cls.fixed_beta) g(i++) = -lambda / (beta * beta);
    if (!fit.cls.fixed_lambda) g(i) = 1.0 / beta;
    se_r = std::sqrt(std::max(0.0, g.dot(cov * g)));
  }
  return {se, se_r};
}

// Multi-start simplex maximization of the likelihood. Start 0 is the naive
// initialization (or the warm start); the others perturb it with a stream
// derived from the seed. Each start runs the simplex twice, the second time
// restarted at the first result.
inline FitResult mle_fit(const ModelClass& cls, const ObservationSet& obs, const InputPath& path,
                         const MleOptions& opt = {}) {
  cls.validate();
  if (opt.restarts == 0) throw DomainError("mle_fit: need at least one start");
  const std::size_t dim = cls.dimension();
  if (obs.pairs() < dim)
    throw IdentificationError("mle_fit: " + std::to_string(obs.pairs()) + " observation pairs cannot identify " +
                              std::to_string(dim) + " parameters");
  const WindowIntegrals windows(path, obs);
  const detail::Objective objective{cls, obs, windows, opt.bounds};

  std::vector<double> base;
  double beta0 = 0.0, lambda0 = 0.0;
  if (opt.warm_start) {
    if (opt.warm_start->size() != dim) throw DomainError("mle_fit: warm start has the wrong dimension");
    base = cls.clamp_to(*opt.warm_start, opt.bounds);
    beta0 = cls.beta_of(base);
    lambda0 = cls.lambda_of(base);
  } else {
    std::tie(beta0, lambda0) = detail::naive_exponents(cls, obs, path);
    base = detail::start_point(cls, obs, windows, beta0, lambda0, 0.0, 0.0, std::log(8.0), 0.0);
  }

  struct StartResult {
    NelderMeadResult nm;
    std::size_t evaluations = 0;
  };
  std::vector<StartResult> results(opt.restarts);
  parallel_for(opt.restarts, opt.threads, [&](std::size_t s) {
    std::vector<double> x0 = base;
    if (s > 0) {
      Rng rng = make_rng(opt.seed, s);
      std::normal_distribution<double> n01(0.0, 1.0);
      const double b = cls.fixed_beta ? beta0 : beta0 * std::exp(0.5 * n01(rng));
      const double l = cls.fixed_lambda ? lambda0 : lambda0 + 0.5 * n01(rng);
      const double shift_theta = 0.3 * n01(rng), shift_scale = 0.3 * n01(rng);
      const double a_raw = std::log(8.0) + n01(rng), s_raw = n01(rng);
      if (opt.warm_start) {
        x0 = base;
        for (auto& v : x0) v += 0.2 * n01(rng);
      } else {
        x0 = detail::start_point(cls, obs, windows, b, l, shift_theta, shift_scale, a_raw, s_raw);
      }
    }
    std::vector<double> step(dim, 0.1);
    if (cls.stable_family()) step[dim - (cls.family == NoiseFamily::Stable ? 2 : 1)] = 0.3;
    auto first = nelder_mead(objective, x0, step, opt.simplex);
    for (auto& v : step) v *= 0.5;
    auto second = nelder_mead(objective, first.x, step, opt.simplex);
    results[s].evaluations = first.evaluations + second.evaluations;
    results[s].nm = second.value <= first.value ? second : first;
    results[s].nm.converged = second.converged;
  });

  FitResult fit;
  fit.cls = cls;
  fit.n_restarts_used = opt.restarts;
  std::size_t best = 0;
  bool any_converged = false;
  for (std::size_t s = 0; s < results.size(); ++s) {
    fit.evaluations += results[s].evaluations;
    fit.restart_values.push_back(results[s].nm.value);
    if (results[s].nm.value < results[best].nm.value) best = s;
    any_converged = any_converged || (results[s].nm.converged && std::isfinite(results[s].nm.value));
  }
  if (!any_converged || !std::isfinite(results[best].nm.value)) {
    std::string trace;
    for (std::size_t s = 0; s < results.size(); ++s)
      trace += (s ? ", " : "") + std::to_string(-results[s].nm.value);
    throw ConvergenceError("mle_fit: no start converged (best log-likelihoods: " + trace + ")");
  }
  fit.raw = results[best].nm.x;
  fit.model = cls.build(fit.raw);
  fit.loglik = -results[best].nm.value;
  fit.converged = true;
  std::tie(fit.fisher_se, fit.fisher_se_r) = fisher_se(fit, obs, path, opt.bounds);
  return fit;
}

// Values recorded per bootstrap draw, in this order.
inline std::vector<std::string> bootstrap_names(const ModelClass& cls) {
  std::vector<std::string> names{"lambda", "beta", "theta", std::string(cls.scale_name())};
  if (cls.stable_family()) {
    names.emplace_back("alpha");
    names.emplace_back("skew");
  }
  names.emplace_back("r");
  return names;
}

inline std::vector<double> bootstrap_row(const FitResult& f) {
  std::vector<double> row{f.model.lambda, f.model.beta, f.model.drift(), f.model.noise_scale()};
  if (f.cls.stable_family()) {
    row.push_back(f.model.stable_params().alpha);
    row.push_back(f.model.stable_params().skew);
  }
  row.push_back(f.r());
  return row;
}

struct BootstrapOptions {
  std::size_t replicates = 100;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::size_t restarts = 1;
  NelderMeadOptions simplex{6000, 1e-10, 1e-7};
  std::size_t max_retries = 50;
};

struct BootstrapResult {
  std::vector<std::string> names;
  std::vector<std::vector<double>> draws;  // one row per replicate
  std::vector<double> se;                  // sample sd per column (finite values only)
  double conditional_r_median = std::numeric_limits<double>::quiet_NaN();
  double conditional_r_se = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_conditional = 0;
  std::size_t n_lambda_negative = 0;
  std::size_t n_retries = 0;  // replicates redrawn after absorption or a failed refit
};

namespace detail {

inline double sample_sd(std::vector<double> v) {
  std::erase_if(v, [](double x) { return !std::isfinite(x); });
  if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  if (v.front() == v.back()) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace detail

// Parametric bootstrap: simulate from the fit on the observation grid, refit
// warm-started at the fitted point, record the parameters. Replicate b uses
// the stream make_rng(seed, b); a replicate whose path is absorbed or whose
// refit fails is redrawn from stream b + k * replicates.
inline BootstrapResult parametric_bootstrap(const FitResult& fit, const ObservationSet& obs, const InputPath& path,
                                            const BootstrapOptions& opt = {}) {
  if (opt.replicates == 0) throw DomainError("bootstrap: need at least one replicate");
  BootstrapResult out;
  out.names = bootstrap_names(fit.cls);
  out.draws.resize(opt.replicates);
  std::vector<std::size_t> retries(opt.replicates, 0);
  std::vector<double> grid;
  for (const auto& p : obs.points()) grid.push_back(p.t);

  parallel_for(opt.replicates, opt.threads, [&](std::size_t b) {
    for (std::size_t k = 0; k <= opt.max_retries; ++k) {
      Rng rng = make_rng(opt.seed, b + k * opt.replicates);
      const auto levels = simulate_levels(fit.model, obs[0].a, path, grid, rng);
      if (!std::all_of(levels.begin(), levels.end(), [](double v) { return v > 0.0 && std::isfinite(v); })) {
        ++retries[b];
        continue;
      }
      std::vector<Observation> pts;
      for (std::size_t i = 0; i < grid.size(); ++i) pts.push_back({grid[i], levels[i]});
      MleOptions mo;
      mo.restarts = opt.restarts;
      mo.simplex = opt.simplex;
      mo.seed = derive_seed(opt.seed, b + k * opt.replicates);
      mo.threads = 1;
      mo.warm_start = fit.raw;
      try {
        out.draws[b] = bootstrap_row(mle_fit(fit.cls, ObservationSet(std::move(pts)), path, mo));
        return;
      } catch (const ConvergenceError&) {
        ++retries[b];
      }
    }
    throw ConvergenceError("bootstrap: replicate " + std::to_string(b) + " failed after " +
                           std::to_string(opt.max_retries) + " redraws");
  });

  for (auto r : retries) out.n_retries += r;
  const std::size_t cols = out.names.size();
  out.se.resize(cols);
  for (std::size_t c = 0; c < cols; ++c) {
    std::vector<double> col;
    for (const auto& row : out.draws) col.push_back(row[c]);
    out.se[c] = detail::sample_sd(col);
  }
  std::vector<double> cond;
  for (const auto& row : out.draws) {
    if (row[0] < 0.0) ++out.n_lambda_negative;
    if (row[0] > 0.0 && row[1] > 0.0) cond.push_back(row.back());
  }
  out.n_conditional = cond.size();
  out.conditional_r_median = detail::median(cond);
  out.conditional_r_se = detail::sample_sd(cond);
  return out;
}

struct LrtResult {
  FitResult constrained;  // lambda = 0
  FitResult free;
  double stat = 0.0;      // 2 * (loglik_free - loglik_constrained), nats
  double p_value = 1.0;   // chi-square(1) upper tail
};

// Likelihood-ratio test of lambda = 0. The free fit starts from the
// constrained optimum, so the statistic cannot be negative.
inline LrtResult lrt_lambda_zero(const ModelClass& cls, const ObservationSet& obs, const InputPath& path,
                                 const MleOptions& opt = {}) {
  if (cls.fixed_lambda) throw DomainError("lrt: the model class must leave lambda free");
  ModelClass restricted = cls;
  restricted.fixed_lambda = 0.0;
  LrtResult out;
  out.constrained = mle_fit(restricted, obs, path, opt);
  MleOptions free_opt = opt;
  free_opt.warm_start = cls.to_raw(out.constrained.model);
  out.free = mle_fit(cls, obs, path, free_opt);
  out.stat = std::max(0.0, 2.0 * (out.free.loglik - out.constrained.loglik));
  out.p_value = std::erfc(std::sqrt(0.5 * out.stat));
  return out;
}

struct CrossValidationEntry {
  ModelClass cls;
  FitResult fit;
  double train_loglik = 0.0;
  double test_loglik = 0.0;
  double delta_vs_first = 0.0;  // test_loglik minus the first class's, nats
};

struct CrossValidation {
  std::size_t split_index = 0;  // last training observation = first test observation
  std::vector<CrossValidationEntry> entries;
};

// Chronological split: fit on observations [0, m], score on [m, n-1].
inline CrossValidation cross_validate(const ObservationSet& obs, const InputPath& path,
                                      std::span<const ModelClass> classes, double split = 0.8,
                                      const MleOptions& opt = {}) {
  if (!(split > 0.0 && split < 1.0)) throw DomainError("cross_validate: split must lie in (0, 1)");
  if (classes.empty()) throw DomainError("cross_validate: no model classes");
  const std::size_t n = obs.size();
  if (n < 3) throw DomainError("cross_validate: need at least 3 observations");
  CrossValidation out;
  out.split_index = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(split * (n - 1))), 1, n - 2);
  const auto train = obs.slice(0, out.split_index), test = obs.slice(out.split_index, n - 1);
  for (const auto& cls : classes) {
    CrossValidationEntry e;
    e.cls = cls;
    e.fit = mle_fit(cls, train, path, opt);
    e.train_loglik = e.fit.loglik;
    e.test_loglik = total_loglik(e.fit.model, test, path);
    out.entries.push_back(std::move(e));
  }
  for (auto& e : out.entries) e.delta_vs_first = e.test_loglik - out.entries.front().test_loglik;
  return out;
}

}  // namespace ideaflow
