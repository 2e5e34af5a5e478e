#pragma once

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "core.hpp"

namespace torus_equidist {

namespace detail {

/// Pairwise (cascade) sum; error grows as O(log n) ulps.
inline double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 16) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

inline std::vector<double> normalized_weights(std::vector<double> w, std::size_t n) {
  if (w.empty()) {
    w.assign(n, n == 0 ? 0.0 : 1.0 / static_cast<double>(n));
    return w;
  }
  if (w.size() != n) throw std::invalid_argument("empirical measure: weight/point count mismatch");
  for (double v : w)
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("empirical measure: bad weight");
  const double total = pairwise_sum(w.data(), w.size());
  if (!(total > 0.0)) throw std::invalid_argument("empirical measure: zero total mass");
  for (double& v : w) v /= total;
  return w;
}

}  // namespace detail

/// Weighted planar point cloud with total mass 1. Default weights are uniform.
class EmpiricalMeasure2D {
 public:
  EmpiricalMeasure2D() = default;
  explicit EmpiricalMeasure2D(std::vector<Point2> points, std::vector<double> weights = {})
      : points_(std::move(points)), weights_(detail::normalized_weights(std::move(weights), points_.size())) {}

  const std::vector<Point2>& points() const { return points_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  /// Kish effective sample size 1 / sum w^2.
  double effective_size() const {
    double s = 0.0;
    for (double w : weights_) s += w * w;
    return s > 0.0 ? 1.0 / s : 0.0;
  }

  /// Points reduced into the fundamental domain [0,1)^2.
  EmpiricalMeasure2D wrapped() const {
    std::vector<Point2> p = points_;
    for (auto& q : p) {
      q.x -= std::floor(q.x);
      q.y -= std::floor(q.y);
      if (q.x >= 1.0) q.x = 0.0;
      if (q.y >= 1.0) q.y = 0.0;
    }
    return EmpiricalMeasure2D(std::move(p), weights_);
  }

 private:
  std::vector<Point2> points_;
  std::vector<double> weights_;
};

/// Weighted cloud on the line, total mass 1.
class EmpiricalMeasure1D {
 public:
  EmpiricalMeasure1D() = default;
  explicit EmpiricalMeasure1D(std::vector<double> values, std::vector<double> weights = {})
      : values_(std::move(values)), weights_(detail::normalized_weights(std::move(weights), values_.size())) {}

  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double effective_size() const {
    double s = 0.0;
    for (double w : weights_) s += w * w;
    return s > 0.0 ? 1.0 / s : 0.0;
  }

 private:
  std::vector<double> values_;
  std::vector<double> weights_;
};

}  // namespace torus_equidist
