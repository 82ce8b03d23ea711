#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ideaflow/error.hpp"
#include "ideaflow/feller.hpp"
#include "ideaflow/jones.hpp"
#include "ideaflow/series.hpp"
#include "ideaflow/stable.hpp"

namespace ideaflow {

enum class Structure { IndependentLevy, Synchronized, ScaleInvariant, Feller };

inline std::string_view to_string(Structure s) {
  switch (s) {
    case Structure::IndependentLevy: return "independent-levy";
    case Structure::Synchronized: return "synchronized";
    case Structure::ScaleInvariant: return "scale-invariant";
    case Structure::Feller: return "feller";
  }
  return "?";
}

inline Structure parse_structure(std::string_view s) {
  if (s == "independent-levy" || s == "independent") return Structure::IndependentLevy;
  if (s == "synchronized") return Structure::Synchronized;
  if (s == "scale-invariant") return Structure::ScaleInvariant;
  if (s == "feller") return Structure::Feller;
  throw DomainError("unknown noise structure '" + std::string(s) + "'");
}

// Brownian motion with drift: X(t) = mu t + sigma W(t).
struct DriftDiffusionParams {
  double mu = 0.0;
  double sigma = 0.0;

  // The same law as a stable process with alpha = 2 (variance 2 scale^2).
  StableParams as_stable() const { return {2.0, 0.0, mu, sigma / std::numbers::sqrt2}; }
};

// A stochastic law of motion: the structure, the Jones exponents and the
// driving Levy process. For the Feller structure `mu` plays the role of theta.
struct NoiseModel {
  Structure structure = Structure::Feller;
  double beta = 1.0;
  double lambda = 1.0;
  std::variant<StableParams, DriftDiffusionParams> levy = DriftDiffusionParams{};

  static NoiseModel feller(double theta, double sigma, double beta, double lambda) {
    NoiseModel m{Structure::Feller, beta, lambda, DriftDiffusionParams{theta, sigma}};
    m.validate();
    return m;
  }
  static NoiseModel drift_diffusion(Structure s, double mu, double sigma, double beta, double lambda) {
    NoiseModel m{s, beta, lambda, DriftDiffusionParams{mu, sigma}};
    m.validate();
    return m;
  }
  static NoiseModel stable(Structure s, const StableParams& p, double beta, double lambda) {
    NoiseModel m{s, beta, lambda, p};
    m.validate();
    return m;
  }

  bool is_drift_diffusion() const { return std::holds_alternative<DriftDiffusionParams>(levy); }

  // Drift per unit clock: theta for Feller, the rate mu otherwise.
  double drift() const {
    return is_drift_diffusion() ? std::get<DriftDiffusionParams>(levy).mu : std::get<StableParams>(levy).rate;
  }

  // Noise scale: sigma for drift-diffusion, the stable scale c otherwise.
  double noise_scale() const {
    return is_drift_diffusion() ? std::get<DriftDiffusionParams>(levy).sigma : std::get<StableParams>(levy).scale;
  }

  StableParams stable_params() const {
    return is_drift_diffusion() ? std::get<DriftDiffusionParams>(levy).as_stable() : std::get<StableParams>(levy);
  }

  JonesParams jones() const { return {drift(), beta, lambda}; }

  void validate() const {
    if (!std::isfinite(beta) || !std::isfinite(lambda)) throw DomainError("noise model: non-finite exponent");
    if (structure == Structure::Feller) {
      if (!is_drift_diffusion()) throw DomainError("noise model: the Feller structure needs drift-diffusion noise");
      const auto& d = std::get<DriftDiffusionParams>(levy);
      if (!(d.sigma >= 0.0)) throw DomainError("noise model: sigma must be >= 0");
      if (beta <= -kFellerLognormalBeta) throw ConstraintError("noise model: Feller needs beta > 0");
      if (!feller_admissible(d.mu, d.sigma, beta))
        throw ConstraintError("noise model: inadmissible Feller parameters, need theta > sigma^2 (1 - beta) / 2");
      return;
    }
    if (is_drift_diffusion()) {
      if (!(std::get<DriftDiffusionParams>(levy).sigma >= 0.0))
        throw DomainError("noise model: sigma must be >= 0");
    } else {
      std::get<StableParams>(levy).validate();
    }
  }
};

// max(h, 0)^(1/beta): the observable level from the latent process A^beta.
inline double latent_clip(double h, double beta) {
  if (beta == 0.0) throw DomainError("latent_clip: beta must be nonzero");
  return std::pow(std::max(h, 0.0), 1.0 / beta);
}

// Distribution of (A(t2)^beta - A(t1)^beta) / beta for the Levy structures.
struct IncrementLaw {
  StableParams law;  // rate = location of the increment
  double beta = 1.0;
  double a1 = 1.0;
  bool deterministic = false;  // zero noise: the increment equals law.rate

  double logpdf(double z) const {
    if (deterministic) throw DomainError("increment law: zero-noise law has no density");
    return stable_logpdf(z, law);
  }

  // log-density of A(t2) = a2 (change of variables from the increment).
  double transition_logpdf(double a2) const {
    if (!(a2 > 0.0)) return -std::numeric_limits<double>::infinity();
    const double z = std::pow(a1, beta) * q_beta(a1, a2, beta);
    return logpdf(z) + (beta - 1.0) * std::log(a2);
  }

  template <typename Engine>
  double sample(Engine& rng) const {
    return deterministic ? law.rate : stable_sample(law, rng);
  }

  double mean() const {
    if (deterministic || law.alpha == 2.0) return law.rate;
    if (law.alpha <= 1.0) return std::numeric_limits<double>::quiet_NaN();
    // E[Z0] = -skew tan(pi a / 2) for the standard 0-parametrization variate.
    return law.rate - law.scale * law.skew * std::tan(0.5 * std::numbers::pi * law.alpha);
  }
};

namespace detail {

// Location shift of the 0-parametrization when the unit-time law (scale c)
// is run for clock t and ends with scale c * s. Callers handle alpha = 1,
// where this expression becomes a limit.
inline double s0_correction(double alpha, double skew, double c, double s, double t) {
  if (skew == 0.0 || alpha == 2.0) return 0.0;
  if (std::abs(alpha - 1.0) < 1e-9) return std::numeric_limits<double>::quiet_NaN();
  return skew * c * std::tan(0.5 * std::numbers::pi * alpha) * (s - t);
}

}  // namespace detail

// Increment law from the Simpson nodes of the window [t1, t2].
inline IncrementLaw increment_law(const NoiseModel& model, double a1, std::span<const QuadratureNode> nodes) {
  if (model.structure == Structure::Feller)
    throw DomainError("increment_law: use feller_transition_logpdf for the Feller structure");
  if (!(a1 > 0.0)) throw DomainError("increment_law: a1 must be positive");
  IncrementLaw out;
  out.beta = model.beta;
  out.a1 = a1;
  const double lam = model.lambda;
  const double log_j = InputPath::log_integral_pow(nodes, lam);
  const double j = std::exp(log_j);

  if (model.is_drift_diffusion() && std::get<DriftDiffusionParams>(model.levy).sigma == 0.0) {
    out.deterministic = true;
    out.law = {2.0, 0.0, model.drift() * j, 1.0};
    return out;
  }
  const StableParams p = model.stable_params();
  const double a = p.alpha, c = p.scale, mu = p.rate, sk = p.skew;
  const bool unit_alpha = std::abs(a - 1.0) < 1e-9;
  const double two_pi = 2.0 / std::numbers::pi;

  double location = mu * j, scale = 0.0;
  switch (model.structure) {
    case Structure::IndependentLevy: {
      scale = c * std::exp(log_j / a);
      location += unit_alpha ? two_pi * sk * c * j * log_j : detail::s0_correction(a, sk, c, scale / c, j);
      break;
    }
    case Structure::Synchronized: {
      const double log_s = InputPath::log_integral_pow(nodes, a * lam) / a;
      scale = c * std::exp(log_s);
      if (unit_alpha) {
        // (2/pi) skew c (J log J - lambda * int I^lambda log I)
        double k = 0.0;
        for (const auto& n : nodes) k += n.weight * std::exp(lam * n.log_input) * n.log_input;
        location += two_pi * sk * c * (j * log_j - lam * k);
      } else {
        location += detail::s0_correction(a, sk, c, std::exp(log_s), j);
      }
      break;
    }
    case Structure::ScaleInvariant: {
      // Clock a1^-beta J with A frozen at a1, then scaled back by a1^beta.
      const double log_a1b = model.beta * std::log(a1);
      const double log_t = log_j - log_a1b;
      const double t = std::exp(log_t);
      scale = c * std::exp(log_a1b + log_t / a);
      const double corr =
          unit_alpha ? two_pi * sk * c * t * log_t : detail::s0_correction(a, sk, c, std::exp(log_t / a), t);
      location += std::exp(log_a1b) * corr;
      break;
    }
    case Structure::Feller: break;
  }
  out.law = {a, sk, location, scale};
  return out;
}

inline IncrementLaw increment_law(const NoiseModel& model, double a1, const InputPath& path, double t1, double t2) {
  return increment_law(model, a1, path.quadrature(t1, t2));
}

// log-density of A(t2) = a2 given A(t1) = a1 over the window with these nodes.
inline double transition_logpdf(const NoiseModel& model, double a1, double a2, std::span<const QuadratureNode> nodes) {
  if (model.structure == Structure::Feller) {
    const auto& d = std::get<DriftDiffusionParams>(model.levy);
    const double tau = std::exp(InputPath::log_integral_pow(nodes, model.lambda));
    return feller_transition_logpdf(a1, a2, d.mu, d.sigma, model.beta, tau);
  }
  return increment_law(model, a1, nodes).transition_logpdf(a2);
}

// Zero-noise Feller step: the deterministic law with clock tau.
inline double propagate_from_nodes_deterministic(const NoiseModel& model, double a, double tau) {
  const double a2 = detail::propagate_from_log_integral(model.jones(), a, std::log(tau));
  return std::isnan(a2) ? 0.0 : a2;
}

// One step of the law of motion from level a over the window with these nodes.
template <typename Engine>
double sample_transition(const NoiseModel& model, double a, std::span<const QuadratureNode> nodes, Engine& rng) {
  if (!(a > 0.0)) return a;  // absorbed
  if (model.structure == Structure::Feller) {
    const auto& d = std::get<DriftDiffusionParams>(model.levy);
    const double tau = std::exp(InputPath::log_integral_pow(nodes, model.lambda));
    if (d.sigma == 0.0) return propagate_from_nodes_deterministic(model, a, tau);
    return feller_sample(a, d.mu, d.sigma, model.beta, tau, rng);
  }
  const IncrementLaw law = increment_law(model, a, nodes);
  const double x = law.sample(rng);
  if (std::abs(model.beta) < 1e-8) return a * std::exp(x);
  return latent_clip(std::pow(a, model.beta) + model.beta * x, model.beta);
}

// Level path on `grid` (grid[0] carries a0). Entries can be 0 when the path
// is absorbed; simulate_path rejects those.
template <typename Engine>
std::vector<double> simulate_levels(const NoiseModel& model, double a0, const InputPath& path,
                                    std::span<const double> grid, Engine& rng) {
  model.validate();
  if (grid.size() < 2) throw DomainError("simulate: grid needs at least 2 times");
  std::vector<double> levels{a0};
  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (!(grid[k] > grid[k - 1])) throw OrderingError("simulate: grid must be strictly increasing");
    const auto nodes = path.quadrature(grid[k - 1], grid[k]);
    levels.push_back(sample_transition(model, levels.back(), nodes, rng));
  }
  return levels;
}

template <typename Engine>
TimeSeries simulate_path(const NoiseModel& model, double a0, const InputPath& path, std::span<const double> grid,
                         Engine& rng) {
  auto levels = simulate_levels(model, a0, path, grid, rng);
  for (double v : levels)
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("simulate: path left (0, inf) (absorbed or exploded)");
  return TimeSeries(std::vector<double>(grid.begin(), grid.end()), std::move(levels));
}

}  // namespace ideaflow
