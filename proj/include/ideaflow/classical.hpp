#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ideaflow/error.hpp"
#include "ideaflow/jones.hpp"
#include "ideaflow/series.hpp"

namespace ideaflow {

// ---------------------------------------------------------------------------
// Naive ratio of growth rates

inline double naive_r(double g_a, double g_i) {
  if (g_i == 0.0) throw DomainError("naive_r: input growth rate is zero");
  if (!std::isfinite(g_a) || !std::isfinite(g_i)) throw DomainError("naive_r: non-finite growth rate");
  return g_a / g_i;
}

// ---------------------------------------------------------------------------
// Refined naive: solve ((a2/a0)^b - 1) / ((a1/a0)^b - 1) = J(t0,t2) / J(t0,t1)
// for b, where J is the integral of I^lambda.

namespace detail {

// log|expm1(x)|, accurate for tiny and huge |x|.
inline double log_abs_expm1(double x) {
  if (std::abs(x) < 1e-8) return std::log(std::abs(x)) + 0.5 * x;
  if (x > 0.0) return x + std::log(-std::expm1(-x));
  return std::log(-std::expm1(x));
}

// log of the ratio map at beta; strictly increasing in beta.
inline double log_ratio_map(double beta, double l1, double l2) {
  if (beta == 0.0) return std::log(l2 / l1);
  return log_abs_expm1(beta * l2) - log_abs_expm1(beta * l1);
}

// Bisection on a strictly increasing function; returns x with g(x) ~ 0.
template <typename G>
double bisect_increasing(G&& g, double lo, double hi, double tol, int max_iter = 200) {
  for (int i = 0; i < max_iter && hi - lo > tol * (1.0 + std::abs(lo) + std::abs(hi)); ++i) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

// Root-search limits shared by the beta solvers.
struct BetaBracket {
  double lo = 1e-8;
  double hi = 64.0;
  int expansions = 3;  // each multiplies the reach by 4
};

struct RefinedNaiveInput {
  double t0, t1, t2;
  double a0, a1, a2;
};

inline double refined_naive_beta(const RefinedNaiveInput& in, const InputPath& path, double lambda,
                                 const BetaBracket& bracket = {}) {
  if (!(in.t0 < in.t1 && in.t1 < in.t2)) throw OrderingError("refined_naive_beta: need t0 < t1 < t2");
  if (!(in.a0 > 0.0 && in.a1 > in.a0 && in.a2 > in.a1))
    throw IncreasingOutputError("refined_naive_beta: need a2 > a1 > a0 > 0");
  if (!(lambda >= 0.0)) throw DomainError("refined_naive_beta: lambda must be >= 0");
  const double l1 = std::log(in.a1 / in.a0), l2 = std::log(in.a2 / in.a0);
  const double target = path.log_integral_pow(lambda, in.t0, in.t2) - path.log_integral_pow(lambda, in.t0, in.t1);
  // The map tends to 1 as beta -> -inf and to +inf as beta -> +inf.
  if (!(target > 0.0))
    throw NoSolutionError("refined_naive_beta: input ratio " + std::to_string(std::exp(target)) +
                          " is not above 1, outside the attainable range (1, inf)");
  auto g = [&](double b) { return detail::log_ratio_map(b, l1, l2) - target; };

  double lo = bracket.lo, hi = bracket.hi;
  if (g(lo) > 0.0) {
    // Solution below the default bracket: beta is negative.
    hi = lo;
    lo = -1.0;
    int k = 0;
    while (g(lo) > 0.0) {
      if (k++ > bracket.expansions + 2)
        throw NoSolutionError("refined_naive_beta: no root above beta = " + std::to_string(lo));
      hi = lo;
      lo *= 4.0;
    }
  } else {
    int k = 0;
    while (g(hi) < 0.0) {
      if (k++ >= bracket.expansions)
        throw NoSolutionError("refined_naive_beta: no root in [" + std::to_string(bracket.lo) + ", " +
                              std::to_string(hi) + "]");
      lo = hi;
      hi *= 4.0;
    }
  }
  return detail::bisect_increasing(g, lo, hi, 1e-14);
}

// ---------------------------------------------------------------------------
// Bracket estimator: solve for beta (phi) from an initial growth rate at t1
// and the average growth rate over [ts, t2].

struct BracketProblem {
  InputPath path;
  double t1 = 0.0, ts = 0.0, t2 = 0.0;
  double g1 = 0.0;    // growth rate of A at t1, per year
  double gbar = 0.0;  // average growth rate of A over [ts, t2], per year

  void validate() const {
    if (!(t1 < ts && ts < t2)) throw OrderingError("bracket: need t1 < ts < t2");
    if (!(g1 > 0.0)) throw DomainError("bracket: g1 must be positive");
    if (!(gbar > 0.0)) throw DomainError("bracket: gbar must be positive");
    if (!path.base().covers(t1) || !path.base().covers(t2)) throw SpanError("bracket: times outside input span");
  }
};

// Discretised right-hand side of the averaged-growth identity for one lambda.
// Inputs are normalised by I(t1)^lambda, which leaves phi unchanged.
class BracketRhs {
 public:
  BracketRhs(const BracketProblem& pr, double lambda, int panels = 2048) : g1_(pr.g1) {
    const double log_i1 = pr.path.log_value(pr.t1);
    auto f = [&](double t) { return std::exp(lambda * (pr.path.log_value(t) - log_i1)); };
    // Cumulative J on [t1, ts] then on [ts, t2]; the outer mean uses the second part.
    double j = 0.0;
    auto advance = [&](double a, double b, int n, bool keep) {
      const double h = (b - a) / n;
      double fa = f(a);
      if (keep) {
        f_.push_back(fa);
        j_.push_back(j);
      }
      for (int k = 0; k < n; ++k) {
        const double x0 = a + k * h, x1 = k + 1 == n ? b : a + (k + 1) * h;
        const double fb = f(x1);
        j += (x1 - x0) / 6.0 * (fa + 4.0 * f(0.5 * (x0 + x1)) + fb);
        fa = fb;
        if (keep) {
          f_.push_back(fb);
          j_.push_back(j);
        }
      }
    };
    advance(pr.t1, pr.ts, panels, false);
    advance(pr.ts, pr.t2, panels, true);
    h_ = (pr.t2 - pr.ts) / panels;
    span_ = pr.t2 - pr.ts;
    phi_min_ = -(1.0 / g1_) / j;
  }

  // Lower limit of admissible phi (denominator vanishes at t2).
  double phi_min() const noexcept { return phi_min_; }

  double operator()(double phi) const {
    const std::size_t n = f_.size() - 1;
    double s = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
      const double denom = 1.0 / g1_ + phi * j_[k];
      if (!(denom > 0.0)) return std::numeric_limits<double>::infinity();
      const double c = (k == 0 || k == n) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
      s += c * f_[k] / denom;
    }
    return s * h_ / 3.0 / span_;
  }

 private:
  double g1_;
  std::vector<double> f_, j_;
  double h_ = 0.0, span_ = 1.0, phi_min_ = 0.0;
};

// Smallest lambda used in place of lambda = 0.
inline constexpr double kBracketLambdaFloor = 1e-6;

inline double bracket_phi(const BracketProblem& pr, double lambda, const BetaBracket& bracket = {}) {
  pr.validate();
  if (!(lambda >= 0.0)) throw DomainError("bracket_phi: lambda must be >= 0");
  const BracketRhs rhs(pr, std::max(lambda, kBracketLambdaFloor));
  // RHS is strictly decreasing in phi; search for RHS(phi) = gbar.
  auto g = [&](double phi) { return pr.gbar - rhs(phi); };
  double lo, hi;
  if (g(0.0) < 0.0) {
    lo = 0.0;
    hi = bracket.hi;
    int k = 0;
    while (g(hi) < 0.0) {
      if (k++ >= bracket.expansions)
        throw NoSolutionError("bracket_phi: gbar = " + std::to_string(pr.gbar) + " unattainable for phi in [0, " +
                              std::to_string(hi) + "]; RHS(" + std::to_string(hi) + ") = " +
                              std::to_string(rhs(hi)));
      lo = hi;
      hi *= 4.0;
    }
  } else {
    lo = rhs.phi_min();
    hi = 0.0;
  }
  for (int i = 0; i < 200 && hi - lo > 1e-12 * (1.0 + std::abs(hi)); ++i) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// r(lambda) = lambda / phi(lambda) at the floor-adjusted lambda.
inline double bracket_r(const BracketProblem& pr, double lambda) {
  const double lam = std::max(lambda, kBracketLambdaFloor);
  return lam / bracket_phi(pr, lam);
}

struct RBounds {
  double r_lo, r_hi;
  double lambda_at_lo, lambda_at_hi;
  std::vector<double> lambdas, rs;
};

// Grid of about `points` lambdas: half log-spaced, half uniform, endpoints included.
inline std::vector<double> lambda_grid(double lo, double hi, int points = 41) {
  if (!(lo >= 0.0) || !(hi >= lo)) throw DomainError("lambda grid: need 0 <= lo <= hi");
  if (hi == lo) return {lo};
  std::set<double> g{lo, hi};
  const int nu = points / 2 + 1, nl = points - nu;
  for (int i = 0; i < nu; ++i) g.insert(lo + (hi - lo) * i / (nu - 1));
  const double llo = std::log(std::max(lo, kBracketLambdaFloor)), lhi = std::log(hi);
  for (int i = 1; i < nl + 1; ++i) g.insert(std::exp(llo + (lhi - llo) * i / (nl + 1)));
  return {g.begin(), g.end()};
}

inline RBounds bracket_r_bounds(const BracketProblem& pr, double lambda_lo, double lambda_hi, int points = 41) {
  RBounds out{};
  out.lambdas = lambda_grid(lambda_lo, lambda_hi, points);
  for (double lam : out.lambdas) {
    try {
      out.rs.push_back(bracket_r(pr, lam));
    } catch (const NoSolutionError& e) {
      throw NoSolutionError(std::string(e.what()) + " (at lambda = " + std::to_string(lam) + ")");
    }
  }
  const auto [mn, mx] = std::minmax_element(out.rs.begin(), out.rs.end());
  out.r_lo = *mn;
  out.r_hi = *mx;
  out.lambda_at_lo = out.lambdas[static_cast<std::size_t>(mn - out.rs.begin())];
  out.lambda_at_hi = out.lambdas[static_cast<std::size_t>(mx - out.rs.begin())];
  return out;
}

// ---------------------------------------------------------------------------
// Diminishing-returns approximation (deprecated method, kept for reproducing
// older estimates) and its first-order bias correction.

struct DimReturnsWindows {
  double t1, t2, t3, t4;  // windows [t1, t2] and [t3, t4], t1 < t3
  double a1, a2, a3, a4;  // A at those times
};

struct DimReturnsResult {
  double beta_approx;
  double beta_corrected;
  double bias_factor;  // (a12 - a34) / (2 a13)
  bool deprecated = true;
  std::string warning =
      "the diminishing-returns approximation is deprecated; prefer refined_naive_beta or likelihood fits";
};

inline DimReturnsResult dim_returns_beta(const DimReturnsWindows& w, const InputPath& path, double lambda) {
  if (!(w.t1 < w.t2 && w.t3 < w.t4 && w.t1 < w.t3)) throw OrderingError("dim_returns_beta: bad window order");
  if (!(w.a2 > w.a1) || !(w.a4 > w.a3))
    throw DomainError("dim_returns_beta: A must increase on both windows");
  if (!(w.a1 > 0.0 && w.a3 > 0.0)) throw DomainError("dim_returns_beta: levels must be positive");
  const double a12 = std::log(w.a2 / w.a1), a34 = std::log(w.a4 / w.a3), a13 = std::log(w.a3 / w.a1);
  if (a13 == 0.0) throw DomainError("dim_returns_beta: A(t1) = A(t3)");
  const double lj12 = path.log_integral_pow(lambda, w.t1, w.t2);
  const double lj34 = path.log_integral_pow(lambda, w.t3, w.t4);
  DimReturnsResult r{};
  r.beta_approx = ((std::log(a12) - lj12) - (std::log(a34) - lj34)) / a13;
  r.bias_factor = (a12 - a34) / (2.0 * a13);
  r.beta_corrected = r.beta_approx / (1.0 - r.bias_factor);
  return r;
}

// ---------------------------------------------------------------------------
// Ordinary least squares

struct LeastSquares {
  Eigen::VectorXd coef;
  Eigen::VectorXd stderr_;
  double residual_variance = 0.0;
  std::size_t n = 0;
};

// OLS with classical standard errors. Throws SingularDesignError when the
// design is rank deficient.
inline LeastSquares least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const auto n = x.rows(), k = x.cols();
  if (n <= k) throw IdentificationError("least squares: need more rows than columns");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) throw SingularDesignError("least squares: design matrix is rank deficient (collinear regressors)");
  LeastSquares out;
  out.n = static_cast<std::size_t>(n);
  out.coef = qr.solve(y);
  const Eigen::VectorXd resid = y - x * out.coef;
  out.residual_variance = resid.squaredNorm() / static_cast<double>(n - k);
  const Eigen::MatrixXd xtx_inv = (x.transpose() * x).inverse();
  out.stderr_ = (out.residual_variance * xtx_inv.diagonal()).cwiseSqrt();
  return out;
}

inline double effective_sample_size(double n, double rho) { return n * (1.0 - rho * rho); }

struct OlsOptions {
  bool merge_nonincreasing = false;  // merge adjacent windows until each A-increment is positive
};

struct OlsFit {
  double theta_hat = 0.0, beta_hat = 0.0, lambda_hat = 0.0;
  double se_log_theta = 0.0, se_beta = 0.0, se_lambda = 0.0;
  double residual_variance = 0.0;
  double rho = 0.0;
  double effective_n = 0.0;
  std::size_t n = 0;
  std::size_t merged_windows = 0;

  double r_hat() const { return lambda_hat / beta_hat; }
};

inline OlsFit ols_fit(const ObservationSet& obs, const InputPath& path, const OlsOptions& opt = {}) {
  // Window endpoints, optionally merged so every window has A2 > A1.
  std::vector<std::size_t> ends{0};
  std::size_t merged = 0;
  for (std::size_t k = 1; k < obs.size(); ++k) {
    if (obs[k].a > obs[ends.back()].a) {
      ends.push_back(k);
    } else if (!opt.merge_nonincreasing) {
      std::ostringstream msg;
      msg << "ols_fit: output does not increase between t = " << obs[k - 1].t << " and t = " << obs[k].t
          << " (enable window merging to combine windows)";
      throw IncreasingOutputError(msg.str());
    } else {
      ++merged;
    }
  }
  const std::size_t n = ends.size() - 1;
  if (n < 4) throw IdentificationError("ols_fit: need at least 4 increasing windows");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 3);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t w = 0; w < n; ++w) {
    const auto& p = obs[ends[w]];
    const auto& q = obs[ends[w + 1]];
    const double dt = q.t - p.t;
    const auto i = static_cast<Eigen::Index>(w);
    y(i) = std::log(std::log(q.a / p.a) / dt);
    x(i, 0) = 1.0;
    x(i, 1) = std::log(p.a);
    x(i, 2) = path.log_integral_pow(1.0, p.t, q.t) - std::log(dt);
  }
  const LeastSquares ls = least_squares(x, y);
  OlsFit f;
  f.n = n;
  f.merged_windows = merged;
  f.theta_hat = std::exp(ls.coef(0));
  f.beta_hat = -ls.coef(1);
  f.lambda_hat = ls.coef(2);
  f.se_log_theta = ls.stderr_(0);
  f.se_beta = ls.stderr_(1);
  f.se_lambda = ls.stderr_(2);
  f.residual_variance = ls.residual_variance;
  const Eigen::VectorXd c1 = x.col(1).array() - x.col(1).mean();
  const Eigen::VectorXd c2 = x.col(2).array() - x.col(2).mean();
  f.rho = c1.dot(c2) / std::sqrt(c1.squaredNorm() * c2.squaredNorm());
  f.effective_n = effective_sample_size(static_cast<double>(n), f.rho);
  return f;
}

}  // namespace ideaflow
