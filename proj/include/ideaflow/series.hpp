#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ideaflow/error.hpp"

namespace ideaflow {

// Positive-valued series on strictly increasing decimal-year times.
class TimeSeries {
 public:
  TimeSeries() = default;

  TimeSeries(std::vector<double> times, std::vector<double> values)
      : times_(std::move(times)), values_(std::move(values)) {
    if (times_.size() != values_.size())
      throw DomainError("time series: times and values differ in length");
    if (times_.size() < 2) throw DomainError("time series: need at least 2 points");
    for (std::size_t i = 0; i < times_.size(); ++i) {
      if (!std::isfinite(times_[i])) throw DomainError("time series: non-finite time");
      if (!(values_[i] > 0.0) || !std::isfinite(values_[i]))
        throw DomainError("time series: values must be positive and finite");
      if (i > 0 && !(times_[i] > times_[i - 1]))
        throw OrderingError("time series: times must be strictly increasing");
    }
  }

  std::size_t size() const noexcept { return times_.size(); }
  std::span<const double> times() const noexcept { return times_; }
  std::span<const double> values() const noexcept { return values_; }
  double time(std::size_t i) const { return times_.at(i); }
  double value(std::size_t i) const { return values_.at(i); }
  double front_time() const noexcept { return times_.front(); }
  double back_time() const noexcept { return times_.back(); }

  bool covers(double t) const noexcept { return t >= times_.front() && t <= times_.back(); }

  // Index k of the data interval [t_k, t_{k+1}] holding t (t inside the span).
  std::size_t interval_of(double t) const {
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    std::size_t k = static_cast<std::size_t>(it - times_.begin());
    k = k == 0 ? 0 : k - 1;
    return std::min(k, times_.size() - 2);
  }

  // Log-linear interpolation; exact at the knots.
  double interpolate_log(double t) const {
    if (!covers(t)) throw SpanError("time " + std::to_string(t) + " outside series span");
    const std::size_t k = interval_of(t);
    const double w = (t - times_[k]) / (times_[k + 1] - times_[k]);
    return std::exp((1.0 - w) * std::log(values_[k]) + w * std::log(values_[k + 1]));
  }

 private:
  std::vector<double> times_;
  std::vector<double> values_;
};

enum class Interpolation { StepLeft, Linear, LogLinear };

inline std::string_view to_string(Interpolation i) {
  switch (i) {
    case Interpolation::StepLeft: return "step";
    case Interpolation::Linear: return "linear";
    case Interpolation::LogLinear: return "loglinear";
  }
  return "?";
}

inline Interpolation parse_interpolation(std::string_view s) {
  if (s == "step" || s == "step-left") return Interpolation::StepLeft;
  if (s == "linear") return Interpolation::Linear;
  if (s == "loglinear" || s == "log-linear") return Interpolation::LogLinear;
  throw DomainError("unknown interpolation '" + std::string(s) + "'");
}

// One node of a quadrature rule over the input path: weight and log I(t).
struct QuadratureNode {
  double weight;
  double log_input;
};

// Input series I(t) together with its interpolation rule. Supplies the
// integrals of I^p over windows by composite Simpson on the interpolant,
// `subdivisions` panels per data interval (or per window when the window
// sits inside a single data interval). Intervals where log I jumps by more
// than 0.1 get proportionally more panels.
class InputPath {
 public:
  InputPath() = default;

  explicit InputPath(TimeSeries base, Interpolation interpolation = Interpolation::LogLinear,
                     int subdivisions = 16)
      : base_(std::move(base)), interpolation_(interpolation), subdivisions_(subdivisions) {
    if (subdivisions_ < 2) throw DomainError("input path: subdivisions must be >= 2");
    if (subdivisions_ % 2 != 0) ++subdivisions_;
  }

  const TimeSeries& base() const noexcept { return base_; }
  Interpolation interpolation() const noexcept { return interpolation_; }
  int subdivisions() const noexcept { return subdivisions_; }
  double t_begin() const noexcept { return base_.front_time(); }
  double t_end() const noexcept { return base_.back_time(); }

  InputPath with_subdivisions(int n) const { return InputPath(base_, interpolation_, n); }

  double value(double t) const { return std::exp(log_value(t)); }

  double log_value(double t) const {
    require_span(t);
    const std::size_t k = base_.interval_of(t);
    const double t0 = base_.time(k), t1 = base_.time(k + 1);
    const double v0 = base_.value(k), v1 = base_.value(k + 1);
    switch (interpolation_) {
      case Interpolation::StepLeft: return std::log(t >= t1 ? v1 : v0);
      case Interpolation::Linear: {
        const double w = (t - t0) / (t1 - t0);
        return std::log((1.0 - w) * v0 + w * v1);
      }
      case Interpolation::LogLinear: {
        const double w = (t - t0) / (t1 - t0);
        return (1.0 - w) * std::log(v0) + w * std::log(v1);
      }
    }
    return 0.0;
  }

  // Simpson nodes for the integral over [t1, t2], merged across data knots.
  std::vector<QuadratureNode> quadrature(double t1, double t2) const {
    if (!(t1 < t2)) throw OrderingError("input path: need t1 < t2");
    require_span(t1);
    require_span(t2);
    std::vector<QuadratureNode> nodes;
    auto times = base_.times();
    std::size_t k = base_.interval_of(t1);
    double a = t1;
    while (a < t2) {
      const double b = std::min(t2, times[k + 1]);
      if (b > a) append_simpson(nodes, a, b, k);
      a = b;
      ++k;
      if (k + 1 >= times.size()) break;
    }
    return nodes;
  }

  // log of the integral of I^p over [t1, t2]; p may be any real number.
  double log_integral_pow(double p, double t1, double t2) const {
    return log_integral_pow(quadrature(t1, t2), p);
  }

  static double log_integral_pow(std::span<const QuadratureNode> nodes, double p) {
    double top = -std::numeric_limits<double>::infinity();
    for (const auto& n : nodes) top = std::max(top, p * n.log_input);
    double sum = 0.0;
    for (const auto& n : nodes) sum += n.weight * std::exp(p * n.log_input - top);
    return top + std::log(sum);
  }

  double integral_pow(double p, double t1, double t2) const {
    return std::exp(log_integral_pow(p, t1, t2));
  }

 private:
  void require_span(double t) const {
    if (!base_.covers(t))
      throw SpanError("time " + std::to_string(t) + " outside input span [" +
                      std::to_string(t_begin()) + ", " + std::to_string(t_end()) + "]");
  }

  // Log-input on data interval k at time t (no span check; t in [t_k, t_{k+1}]).
  double log_on_interval(std::size_t k, double t) const {
    const double t0 = base_.time(k), t1 = base_.time(k + 1);
    const double v0 = base_.value(k), v1 = base_.value(k + 1);
    const double w = (t - t0) / (t1 - t0);
    switch (interpolation_) {
      case Interpolation::StepLeft: return std::log(v0);
      case Interpolation::Linear: return std::log((1.0 - w) * v0 + w * v1);
      case Interpolation::LogLinear: return (1.0 - w) * std::log(v0) + w * std::log(v1);
    }
    return 0.0;
  }

  // Panels on data interval k: the base count, multiplied on intervals where
  // log I moves by more than 0.1 so Simpson stays accurate on steep jumps.
  int panels_on(std::size_t k) const {
    const double jump = std::abs(std::log(base_.value(k + 1)) - std::log(base_.value(k)));
    if (interpolation_ == Interpolation::StepLeft || jump <= 0.1) return subdivisions_;
    return subdivisions_ * static_cast<int>(std::ceil(jump / 0.1));
  }

  void append_simpson(std::vector<QuadratureNode>& nodes, double a, double b, std::size_t k) const {
    const int n = panels_on(k);
    const double h = (b - a) / n;
    for (int j = 0; j <= n; ++j) {
      const double coef = (j == 0 || j == n) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
      const double t = j == n ? b : a + j * h;
      nodes.push_back({coef * h / 3.0, log_on_interval(k, t)});
    }
  }

  TimeSeries base_;
  Interpolation interpolation_ = Interpolation::LogLinear;
  int subdivisions_ = 16;
};

// (integral of I^p over [t1, t2])^(1/p).
inline double lp_norm(const InputPath& path, double p, double t1, double t2) {
  if (!(p > 0.0) || !std::isfinite(p)) throw DomainError("lp_norm: p must be positive");
  return std::exp(path.log_integral_pow(p, t1, t2) / p);
}

// Average continuously-compounded growth rate of the series between t1 and t2
// (log-linear interpolation between knots).
inline double avg_growth(const TimeSeries& series, double t1, double t2) {
  if (!(t1 < t2)) throw OrderingError("avg_growth: need t1 < t2");
  return std::log(series.interpolate_log(t2) / series.interpolate_log(t1)) / (t2 - t1);
}

// Sparse observations of the output level A.
struct Observation {
  double t;
  double a;
};

class ObservationSet {
 public:
  ObservationSet() = default;

  // Points may arrive in any order; they are sorted by time.
  explicit ObservationSet(std::vector<Observation> points) : points_(std::move(points)) {
    std::sort(points_.begin(), points_.end(),
              [](const Observation& x, const Observation& y) { return x.t < y.t; });
    if (points_.size() < 2) throw DomainError("observations: need at least 2 points");
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (!std::isfinite(points_[i].t)) throw DomainError("observations: non-finite time");
      if (!(points_[i].a > 0.0) || !std::isfinite(points_[i].a))
        throw DomainError("observations: levels must be positive");
      if (i > 0 && !(points_[i].t > points_[i - 1].t))
        throw OrderingError("observations: duplicate time");
    }
  }

  static ObservationSet from_series(const TimeSeries& s) {
    std::vector<Observation> pts;
    for (std::size_t i = 0; i < s.size(); ++i) pts.push_back({s.time(i), s.value(i)});
    return ObservationSet(std::move(pts));
  }

  TimeSeries to_series() const {
    std::vector<double> t, a;
    for (const auto& p : points_) {
      t.push_back(p.t);
      a.push_back(p.a);
    }
    return TimeSeries(std::move(t), std::move(a));
  }

  std::size_t size() const noexcept { return points_.size(); }
  std::size_t pairs() const noexcept { return points_.size() - 1; }
  const Observation& operator[](std::size_t i) const { return points_[i]; }
  std::span<const Observation> points() const noexcept { return points_; }

  // Observations with index in [first, last] (inclusive).
  ObservationSet slice(std::size_t first, std::size_t last) const {
    if (last >= points_.size() || first >= last) throw DomainError("observations: bad slice");
    return ObservationSet(std::vector<Observation>(points_.begin() + static_cast<std::ptrdiff_t>(first),
                                                   points_.begin() + static_cast<std::ptrdiff_t>(last) + 1));
  }

 private:
  std::vector<Observation> points_;
};

// Simpson rules for every consecutive observation window, built once and
// reused for any exponent. Fitting code evaluates thousands of exponents
// over the same windows.
class WindowIntegrals {
 public:
  WindowIntegrals() = default;

  WindowIntegrals(const InputPath& path, const ObservationSet& obs) {
    rules_.reserve(obs.pairs());
    offsets_.push_back(0);
    for (std::size_t k = 0; k + 1 < obs.size(); ++k) {
      auto nodes = path.quadrature(obs[k].t, obs[k + 1].t);
      rules_.insert(rules_.end(), nodes.begin(), nodes.end());
      offsets_.push_back(rules_.size());
    }
  }

  std::size_t size() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }

  std::span<const QuadratureNode> window(std::size_t k) const {
    return std::span<const QuadratureNode>(rules_).subspan(offsets_[k], offsets_[k + 1] - offsets_[k]);
  }

  // log of the integral of I^p over window k.
  double log_integral(std::size_t k, double p) const {
    return InputPath::log_integral_pow(window(k), p);
  }

 private:
  std::vector<QuadratureNode> rules_;
  std::vector<std::size_t> offsets_;
};

}  // namespace ideaflow
