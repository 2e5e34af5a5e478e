#pragma once

// Weyl sums S(k,l) = sum_i w_i e(k x_i + l y_i), targets, comparisons and
// convergence trends.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dynamics.hpp"
#include "empirical.hpp"
#include "measures.hpp"
#include "parallel.hpp"

namespace torus_equidist {

using cplx = std::complex<double>;

/// Coefficients for |k|, |l| <= K, stored densely.
class CoeffTable {
 public:
  CoeffTable() = default;
  explicit CoeffTable(int K) : K_(K), v_(static_cast<std::size_t>((2 * K + 1) * (2 * K + 1))) {
    if (K < 0) throw std::invalid_argument("CoeffTable: K must be >= 0");
  }

  int K() const { return K_; }
  cplx& at(int k, int l) { return v_[index(k, l)]; }
  const cplx& at(int k, int l) const { return v_[index(k, l)]; }
  const std::vector<cplx>& values() const { return v_; }

 private:
  std::size_t index(int k, int l) const {
    if (std::abs(k) > K_ || std::abs(l) > K_) throw std::out_of_range("CoeffTable: index out of range");
    return static_cast<std::size_t>((k + K_) * (2 * K_ + 1) + (l + K_));
  }
  int K_ = 0;
  std::vector<cplx> v_;
};

namespace detail {

/// Entries of the half-plane k > 0, or k = 0 and l > 0. The rest of the table
/// follows from S(0,0) = 1 and S(-k,-l) = conj S(k,l).
inline std::vector<std::pair<int, int>> half_plane(int K) {
  std::vector<std::pair<int, int>> out;
  for (int l = 1; l <= K; ++l) out.emplace_back(0, l);
  for (int k = 1; k <= K; ++k)
    for (int l = -K; l <= K; ++l) out.emplace_back(k, l);
  return out;
}

inline cplx unit(double t) {
  const double a = 2.0 * std::numbers::pi * t;
  return {std::cos(a), std::sin(a)};
}

}  // namespace detail

/// Streaming half-plane Weyl sums with cascade summation: points are summed
/// in blocks of 256, and block sums are merged like a binary counter, so the
/// rounding error grows as O(log n) rather than O(n).
class WeylAccumulator {
 public:
  explicit WeylAccumulator(int K) : K_(K), entries_(detail::half_plane(K)), block_(entries_.size()) {
    if (K < 1) throw std::invalid_argument("weyl_table: K must be >= 1");
    ex_.resize(static_cast<std::size_t>(K) + 1);
    ey_.resize(static_cast<std::size_t>(2 * K) + 1);
  }

  void add(Point2 p, double w = 1.0) {
    const cplx bx = detail::unit(p.x), by = detail::unit(p.y);
    ex_[0] = 1.0;
    for (int k = 1; k <= K_; ++k) ex_[k] = ex_[k - 1] * bx;
    ey_[K_] = 1.0;
    for (int l = 1; l <= K_; ++l) {
      ey_[K_ + l] = ey_[K_ + l - 1] * by;
      ey_[K_ - l] = std::conj(ey_[K_ + l]);
    }
    for (std::size_t e = 0; e < entries_.size(); ++e) {
      const auto [k, l] = entries_[e];
      block_[e] += w * ex_[k] * ey_[K_ + l];
    }
    total_weight_ += w;
    ++count_;
    if (++in_block_ == kBlock) flush();
  }

  std::size_t count() const { return count_; }
  double total_weight() const { return total_weight_; }

  /// Sums normalised by `norm` (default: total weight), Hermitian-filled.
  CoeffTable table(std::optional<double> norm = std::nullopt) const {
    std::vector<cplx> acc = block_;
    for (const auto& lvl : levels_)
      if (lvl)
        for (std::size_t e = 0; e < acc.size(); ++e) acc[e] += (*lvl)[e];
    const double n = norm.value_or(total_weight_);
    CoeffTable t(K_);
    t.at(0, 0) = 1.0;
    for (std::size_t e = 0; e < entries_.size(); ++e) {
      const auto [k, l] = entries_[e];
      const cplx v = n > 0.0 ? acc[e] / n : cplx(0.0);
      t.at(k, l) = v;
      t.at(-k, -l) = std::conj(v);
    }
    return t;
  }

 private:
  static constexpr std::size_t kBlock = 256;

  void flush() {
    std::vector<cplx> carry = std::move(block_);
    block_.assign(entries_.size(), cplx(0.0));
    in_block_ = 0;
    for (std::size_t i = 0;; ++i) {
      if (i == levels_.size()) levels_.emplace_back();
      if (!levels_[i]) {
        levels_[i] = std::move(carry);
        return;
      }
      for (std::size_t e = 0; e < carry.size(); ++e) carry[e] += (*levels_[i])[e];
      levels_[i].reset();
    }
  }

  int K_;
  std::vector<std::pair<int, int>> entries_;
  std::vector<cplx> block_;
  std::vector<std::optional<std::vector<cplx>>> levels_;
  std::vector<cplx> ex_, ey_;
  std::size_t in_block_ = 0;
  std::size_t count_ = 0;
  double total_weight_ = 0.0;
};

/// S(k,l) for |k|,|l| <= K of a weighted cloud.
inline CoeffTable weyl_table(const EmpiricalMeasure2D& emp, int K) {
  WeylAccumulator acc(K);
  const auto& pts = emp.points();
  const auto& w = emp.weights();
  for (std::size_t i = 0; i < pts.size(); ++i) acc.add(pts[i], w[i]);
  return acc.table(1.0);
}

/// Tables of the prefixes of length Ns[0] < Ns[1] < ... of one point sequence.
inline std::vector<CoeffTable> prefix_tables(const std::vector<Point2>& pts, int K, const std::vector<std::size_t>& Ns) {
  if (!std::is_sorted(Ns.begin(), Ns.end()) || std::adjacent_find(Ns.begin(), Ns.end()) != Ns.end())
    throw std::invalid_argument("prefix_tables: Ns must be strictly increasing");
  if (!Ns.empty() && Ns.back() > pts.size()) throw std::invalid_argument("prefix_tables: N exceeds sequence length");
  WeylAccumulator acc(K);
  std::vector<CoeffTable> out;
  std::size_t i = 0;
  for (std::size_t N : Ns) {
    for (; i < N; ++i) acc.add(pts[i]);
    out.push_back(acc.table());
  }
  return out;
}

/// Equal-weight average of per-orbit tables, combined in index order.
inline CoeffTable average_tables(const std::vector<CoeffTable>& tables) {
  if (tables.empty()) throw std::invalid_argument("average_tables: empty input");
  CoeffTable out(tables.front().K());
  const int K = out.K();
  for (int k = -K; k <= K; ++k)
    for (int l = -K; l <= K; ++l) {
      std::vector<double> re, im;
      for (const auto& t : tables) {
        re.push_back(t.at(k, l).real());
        im.push_back(t.at(k, l).imag());
      }
      const double n = static_cast<double>(tables.size());
      out.at(k, l) = {detail::pairwise_sum(re.data(), re.size()) / n, detail::pairwise_sum(im.data(), im.size()) / n};
    }
  out.at(0, 0) = 1.0;
  return out;
}

// ---------------------------------------------------------------------------
// Targets
// ---------------------------------------------------------------------------

/// Lebesgue measure on the torus.
struct LambdaLambda {};

/// Lebesgue in x times a digit measure in y.
struct LambdaTimes {
  Bernoulli1D rho;
  double tol = 1e-8;
};

/// Coefficients of a reference cloud.
struct EmpiricalTarget {
  EmpiricalMeasure2D reference;
};

using Target = std::variant<LambdaLambda, LambdaTimes, EmpiricalTarget>;

inline std::string target_name(const Target& t) {
  if (std::holds_alternative<LambdaLambda>(t)) return "lambda x lambda";
  if (std::holds_alternative<LambdaTimes>(t)) return "lambda x rho";
  return "empirical";
}

inline CoeffTable target_table(const Target& target, int K) {
  if (std::holds_alternative<EmpiricalTarget>(target)) return weyl_table(std::get<EmpiricalTarget>(target).reference, K);
  CoeffTable t(K);
  t.at(0, 0) = 1.0;
  if (const auto* lt = std::get_if<LambdaTimes>(&target))
    for (int l = -K; l <= K; ++l) t.at(0, l) = fourier_coeff(lt->rho, l, lt->tol).center;
  return t;
}

// ---------------------------------------------------------------------------
// Comparison and trends
// ---------------------------------------------------------------------------

struct TrendPoint {
  std::size_t N = 0;
  double max_deviation = 0.0;
};

struct EquidistReport {
  int K = 0;
  CoeffTable coeff_table;
  CoeffTable target;
  double max_deviation = 0.0;
  int argmax_k = 0, argmax_l = 0;
  double tol = 0.0;
  bool pass = false;
  std::vector<TrendPoint> trend;
  bool trend_decreasing = true;           // strictly decreasing
  std::vector<std::size_t> trend_violations;  // N where the deviation rose beyond noise
  nlohmann::json metadata = nlohmann::json::object();
};

inline double max_deviation(const CoeffTable& s, const CoeffTable& t, int* arg_k = nullptr, int* arg_l = nullptr) {
  if (s.K() != t.K()) throw std::invalid_argument("max_deviation: table sizes differ");
  double best = 0.0;
  int bk = 0, bl = 0;
  for (int k = -s.K(); k <= s.K(); ++k)
    for (int l = -s.K(); l <= s.K(); ++l) {
      const double d = std::abs(s.at(k, l) - t.at(k, l));
      if (d > best) {
        best = d;
        bk = k;
        bl = l;
      }
    }
  if (arg_k) *arg_k = bk;
  if (arg_l) *arg_l = bl;
  return best;
}

inline EquidistReport compare_tables(const CoeffTable& s, const CoeffTable& t, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("compare: tol must be positive");
  EquidistReport r;
  r.K = s.K();
  r.coeff_table = s;
  r.target = t;
  r.max_deviation = max_deviation(s, t, &r.argmax_k, &r.argmax_l);
  r.tol = tol;
  r.pass = r.max_deviation <= tol;
  return r;
}

inline EquidistReport compare(const EmpiricalMeasure2D& emp, const Target& target, int K, double tol) {
  return compare_tables(weyl_table(emp, K), target_table(target, K), tol);
}

/// Default tolerance max(0.05, 5 / sqrt(N M)).
inline double default_tolerance(std::size_t N, std::size_t M) {
  return std::max(0.05, 5.0 / std::sqrt(static_cast<double>(N) * static_cast<double>(M)));
}

/// Deviation from the target on nested prefixes of each orbit, averaged over
/// orbits. A rise of more than 3 / sqrt(N M) is recorded as a violation.
inline std::vector<TrendPoint> trend(const std::vector<std::vector<Point2>>& orbits, const std::vector<std::size_t>& Ns,
                                     int K, const Target& target, std::vector<CoeffTable>* averaged = nullptr) {
  if (orbits.empty()) throw std::invalid_argument("trend: no orbits");
  std::vector<std::vector<CoeffTable>> per_orbit(orbits.size());
  parallel_for(orbits.size(), [&](std::size_t i) { per_orbit[i] = prefix_tables(orbits[i], K, Ns); });
  const CoeffTable tt = target_table(target, K);
  std::vector<TrendPoint> out;
  for (std::size_t n = 0; n < Ns.size(); ++n) {
    std::vector<CoeffTable> col;
    for (const auto& po : per_orbit) col.push_back(po[n]);
    CoeffTable avg = average_tables(col);
    out.push_back({Ns[n], max_deviation(avg, tt)});
    if (averaged) averaged->push_back(std::move(avg));
  }
  return out;
}

inline void annotate_trend(EquidistReport& r, std::vector<TrendPoint> t, std::size_t M) {
  r.trend = std::move(t);
  r.trend_decreasing = true;
  r.trend_violations.clear();
  for (std::size_t i = 1; i < r.trend.size(); ++i) {
    if (!(r.trend[i].max_deviation < r.trend[i - 1].max_deviation)) r.trend_decreasing = false;
    const double noise = 3.0 / std::sqrt(static_cast<double>(r.trend[i].N) * static_cast<double>(M));
    if (r.trend[i].max_deviation > r.trend[i - 1].max_deviation + noise) r.trend_violations.push_back(r.trend[i].N);
  }
}

// ---------------------------------------------------------------------------
// Star discrepancy on a grid
// ---------------------------------------------------------------------------

/// max over boxes [0, a/G) x [0, b/G), 1 <= a, b <= G, of |emp(box) - ab/G^2|.
/// A lower bound for the star discrepancy; non-decreasing when G is refined
/// to a multiple of itself (the box family only grows).
inline double star_discrepancy_grid(const EmpiricalMeasure2D& emp, int G) {
  if (G < 2) throw std::invalid_argument("star_discrepancy_grid: G must be >= 2");
  const auto g = static_cast<std::size_t>(G);
  std::vector<double> cell(g * g, 0.0);
  const auto& pts = emp.points();
  const auto& w = emp.weights();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double x = pts[i].x - std::floor(pts[i].x), y = pts[i].y - std::floor(pts[i].y);
    const auto a = std::min(g - 1, static_cast<std::size_t>(x * G));
    const auto b = std::min(g - 1, static_cast<std::size_t>(y * G));
    cell[a * g + b] += w[i];
  }
  // 2-D prefix sums
  for (std::size_t a = 0; a < g; ++a)
    for (std::size_t b = 0; b < g; ++b) {
      double v = cell[a * g + b];
      if (a) v += cell[(a - 1) * g + b];
      if (b) v += cell[a * g + b - 1];
      if (a && b) v -= cell[(a - 1) * g + b - 1];
      cell[a * g + b] = v;
    }
  double best = 0.0;
  const double inv = 1.0 / (static_cast<double>(G) * G);
  for (std::size_t a = 0; a < g; ++a)
    for (std::size_t b = 0; b < g; ++b)
      best = std::max(best, std::fabs(cell[a * g + b] - static_cast<double>((a + 1) * (b + 1)) * inv));
  return best;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const EquidistReport& r) {
  nlohmann::json trend = nlohmann::json::array();
  for (const auto& t : r.trend) trend.push_back({{"N", t.N}, {"max_deviation", t.max_deviation}});
  return {{"K", r.K},
          {"max_deviation", r.max_deviation},
          {"argmax", {r.argmax_k, r.argmax_l}},
          {"tol", r.tol},
          {"pass", r.pass},
          {"trend", trend},
          {"trend_strictly_decreasing", r.trend_decreasing},
          {"trend_violations", r.trend_violations},
          {"metadata", r.metadata}};
}

/// Columns k,l,re,im,target_re,target_im,abs_dev.
inline void write_coeff_csv(std::ostream& os, const EquidistReport& r) {
  os << "k,l,re,im,target_re,target_im,abs_dev\n";
  for (int k = -r.K; k <= r.K; ++k)
    for (int l = -r.K; l <= r.K; ++l) {
      const cplx s = r.coeff_table.at(k, l), t = r.target.at(k, l);
      os << k << ',' << l << ',' << format_double(s.real()) << ',' << format_double(s.imag()) << ','
         << format_double(t.real()) << ',' << format_double(t.imag()) << ',' << format_double(std::abs(s - t)) << '\n';
    }
}

}  // namespace torus_equidist
