#pragma once

// Linear projections, strip slices and coarse-entropy dimension estimates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dynamics.hpp"
#include "empirical.hpp"
#include "measures.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace torus_equidist {

// ---------------------------------------------------------------------------
// Projections
// ---------------------------------------------------------------------------

/// pi(x, y) = x cos(theta) + y sin(theta), theta in [0, pi).
struct Projection {
  double theta = 0.0;
  double c = 1.0, s = 0.0;
  bool is_P1 = true, is_P2 = false;

  static Projection P1() { return {}; }
  static Projection P2() { return {std::numbers::pi / 2, 0.0, 1.0, false, true}; }

  /// Angles within 1e-12 of a multiple of pi/4 get exact cos/sin, so the
  /// diagonal directions collapse graphs exactly.
  static Projection at_angle(double theta) {
    if (!(theta >= 0.0 && theta < std::numbers::pi)) throw std::invalid_argument("Projection: angle must lie in [0, pi)");
    constexpr double q = std::numbers::pi / 4;
    const double k = std::round(theta / q);
    if (std::fabs(theta - k * q) < 1e-12) {
      const double h = std::numbers::sqrt2 / 2;
      switch (static_cast<int>(k)) {
        case 0: return P1();
        case 1: return {q, h, h, false, false};
        case 2: return P2();
        case 3: return {3 * q, -h, h, false, false};
        default: break;
      }
    }
    return {theta, std::cos(theta), std::sin(theta), false, false};
  }
  static Projection at_degrees(double deg) { return at_angle(deg * std::numbers::pi / 180.0); }
  static Projection diagonal() { return at_angle(std::numbers::pi / 4); }
  /// (y - x) / sqrt 2, collapsing the diagonal.
  static Projection anti_diagonal() { return at_angle(3 * std::numbers::pi / 4); }

  double operator()(Point2 p) const { return p.x * c + p.y * s; }
  /// Coordinate along the fiber pi^-1(pi(p)).
  double along(Point2 p) const { return -p.x * s + p.y * c; }
  double degrees() const { return theta * 180.0 / std::numbers::pi; }
};

inline EmpiricalMeasure1D project(const EmpiricalMeasure2D& emp, const Projection& proj) {
  std::vector<double> v;
  v.reserve(emp.size());
  for (const auto& p : emp.points()) v.push_back(proj(p));
  return EmpiricalMeasure1D(std::move(v), emp.weights());
}

// ---------------------------------------------------------------------------
// Dimension estimate
// ---------------------------------------------------------------------------

struct DimensionParams {
  int j_min = 4;   // coarsest scale 2^-j_min
  int j_max = 10;  // finest scale 2^-j_max
  /// Scales whose entropy exceeds log(n_eff / saturation_occupancy) are
  /// dropped once three scales are in the fit.
  double saturation_occupancy = 10.0;
  double min_points = 1e4;
  double model_floor = 0.05;  // added to the half-width
};

struct DimensionReport {
  std::vector<double> scales;   // strictly decreasing
  std::vector<double> entropy;  // H at each scale, nats
  double fitted_dim = 0.0;
  double raw_fit = 0.0;
  bool clamped = false;
  int fit_j_min = 0, fit_j_max = 0;
  double residual = 0.0;  // RMS of the fit
  double half_width = 0.0;
  bool low_confidence = false;
  bool saturated = false;  // fine scales dropped
  std::size_t points = 0;
};

namespace detail {

/// Entropy of cell masses given (cell key, weight) pairs.
inline double cell_entropy(std::vector<std::pair<std::int64_t, double>>& kw) {
  std::sort(kw.begin(), kw.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  double h = 0.0;
  for (std::size_t i = 0; i < kw.size();) {
    double m = 0.0;
    std::size_t j = i;
    for (; j < kw.size() && kw[j].first == kw[i].first; ++j) m += kw[j].second;
    if (m > 0.0) h -= m * std::log(m);
    i = j;
  }
  return h;
}

inline std::int64_t cell(double v, double inv_delta) { return static_cast<std::int64_t>(std::floor(v * inv_delta)); }

struct LineFit {
  double slope = 0.0, intercept = 0.0, se = 0.0, rms = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y, std::size_t lo, std::size_t hi) {
  const auto n = static_cast<double>(hi - lo);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = lo; i < hi; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = lo; i < hi; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = lo; i < hi; ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    ssr += r * r;
  }
  f.rms = std::sqrt(ssr / n);
  f.se = (hi - lo > 2 && sxx > 0.0) ? std::sqrt(ssr / (n - 2.0) / sxx) : 0.0;
  return f;
}

template <class CellFn>
DimensionReport estimate_from_cells(std::size_t n, const std::vector<double>& w, double n_eff, double max_dim,
                                    const DimensionParams& par, CellFn&& cells) {
  if (par.j_min < 0 || par.j_max < par.j_min + 1) throw std::invalid_argument("estimate_dimension: bad scale range");
  if (n == 0) throw std::invalid_argument("estimate_dimension: empty measure");
  DimensionReport r;
  r.points = n;
  r.low_confidence = static_cast<double>(n) < par.min_points;
  const double cap = std::log(n_eff / par.saturation_occupancy);
  std::vector<double> xs;
  std::vector<std::pair<std::int64_t, double>> kw(n);
  for (int j = par.j_min; j <= par.j_max; ++j) {
    const double inv = std::ldexp(1.0, j);
    for (std::size_t i = 0; i < n; ++i) kw[i] = {cells(i, inv), w[i]};
    const double h = cell_entropy(kw);
    if (h > cap && r.entropy.size() >= 3) {
      r.saturated = true;
      break;
    }
    r.scales.push_back(1.0 / inv);
    r.entropy.push_back(h);
    xs.push_back(j * std::numbers::ln2);
  }
  r.fit_j_min = par.j_min;
  r.fit_j_max = par.j_min + static_cast<int>(xs.size()) - 1;
  const std::size_t k = xs.size();
  const LineFit all = fit_line(xs, r.entropy, 0, k);
  const std::size_t h = std::max<std::size_t>(2, (k + 1) / 2);
  const LineFit coarse = fit_line(xs, r.entropy, 0, h);
  const LineFit fine = fit_line(xs, r.entropy, k - h, k);
  r.raw_fit = all.slope;
  r.fitted_dim = std::clamp(all.slope, 0.0, max_dim);
  r.clamped = r.fitted_dim != all.slope;
  r.residual = all.rms;
  r.half_width = 2.0 * all.se + std::fabs(coarse.slope - fine.slope) / 2.0 + par.model_floor;
  if (r.low_confidence) r.half_width *= 2.0;
  return r;
}

}  // namespace detail

/// Slope of the coarse entropy H_delta against log(1/delta) over dyadic
/// delta = 2^-j. The half-width combines twice the regression standard error,
/// half the coarse/fine slope split and a fixed model floor; it is doubled for
/// clouds below `min_points`.
inline DimensionReport estimate_dimension(const EmpiricalMeasure1D& emp, const DimensionParams& par = {}) {
  const auto& v = emp.values();
  return detail::estimate_from_cells(emp.size(), emp.weights(), emp.effective_size(), 1.0, par,
                                     [&](std::size_t i, double inv) { return detail::cell(v[i], inv); });
}

inline DimensionReport estimate_dimension(const EmpiricalMeasure2D& emp, const DimensionParams& par = {}) {
  const auto& p = emp.points();
  return detail::estimate_from_cells(emp.size(), emp.weights(), emp.effective_size(), 2.0, par,
                                     [&](std::size_t i, double inv) {
                                       return detail::cell(p[i].x, inv) * (std::int64_t{1} << 32) +
                                              detail::cell(p[i].y, inv);
                                     });
}

inline nlohmann::json to_json(const DimensionReport& r) {
  return {{"scales", r.scales},
          {"entropy", r.entropy},
          {"fitted_dim", r.fitted_dim},
          {"raw_fit", r.raw_fit},
          {"clamped", r.clamped},
          {"fit_range", {{"j_min", r.fit_j_min}, {"j_max", r.fit_j_max}}},
          {"residual", r.residual},
          {"half_width", r.half_width},
          {"low_confidence", r.low_confidence},
          {"saturated", r.saturated},
          {"points", r.points}};
}

/// Columns delta,log_inv_delta,entropy.
inline void write_dimension_csv(std::ostream& os, const DimensionReport& r) {
  os << "delta,log_inv_delta,entropy\n";
  for (std::size_t i = 0; i < r.scales.size(); ++i)
    os << format_double(r.scales[i]) << ',' << format_double(-std::log(r.scales[i])) << ','
       << format_double(r.entropy[i]) << '\n';
}

// ---------------------------------------------------------------------------
// Slices
// ---------------------------------------------------------------------------

class EmptySlice : public std::runtime_error {
 public:
  explicit EmptySlice(const std::string& msg) : std::runtime_error(msg) {}
};

/// Restriction to the strip |pi(z) - x0| <= w/2, renormalised, in the
/// coordinate along the fiber.
inline EmpiricalMeasure1D slice(const EmpiricalMeasure2D& emp, const Projection& proj, double x0, double w) {
  if (!(w > 0.0)) throw std::invalid_argument("slice: width must be positive");
  std::vector<double> v, wt;
  const auto& pts = emp.points();
  const auto& ws = emp.weights();
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (std::fabs(proj(pts[i]) - x0) <= w / 2 && ws[i] > 0.0) {
      v.push_back(proj.along(pts[i]));
      wt.push_back(ws[i]);
    }
  if (v.empty()) throw EmptySlice("slice: no mass within the strip; widen it or re-center x0");
  return EmpiricalMeasure1D(std::move(v), std::move(wt));
}

// ---------------------------------------------------------------------------
// Dimension conservation
// ---------------------------------------------------------------------------

struct ConservationParams {
  std::size_t samples = 100000;
  std::size_t depth = 40;
  std::uint64_t seed = 1;
  std::vector<double> widths{std::ldexp(1.0, -6), std::ldexp(1.0, -7), std::ldexp(1.0, -8)};
  std::size_t slices = 8;  // x0 draws per width
  DimensionParams dim{};
};

struct SliceWidthResult {
  double width = 0.0;
  double dim_slice_mean = 0.0;
  double slice_half_width = 0.0;  // mean over slices
  double mean_slice_points = 0.0;
  double residual = 0.0;
  double residual_half_width = 0.0;
};

struct ConservationReport {
  DimensionReport dim_mu, dim_proj;
  std::vector<SliceWidthResult> widths;
  std::vector<double> x0;
};

/// residual = dim mu - dim pi mu - mean fiber dimension, for each strip width.
/// Slice centres x0 are drawn from the projected cloud.
inline ConservationReport conservation_report(const EmpiricalMeasure2D& emp, const Projection& proj,
                                              const ConservationParams& par = {}) {
  if (emp.empty()) throw std::invalid_argument("conservation_report: empty measure");
  ConservationReport r;
  const EmpiricalMeasure1D pm = project(emp, proj);
  r.dim_mu = estimate_dimension(emp, par.dim);
  r.dim_proj = estimate_dimension(pm, par.dim);
  Rng rng = make_rng(par.seed, 7);
  const Categorical pick(pm.weights());
  for (std::size_t i = 0; i < par.slices; ++i) r.x0.push_back(pm.values()[pick(rng)]);

  for (double w : par.widths) {
    std::vector<DimensionReport> reps(r.x0.size());
    parallel_for(r.x0.size(), [&](std::size_t i) { reps[i] = estimate_dimension(slice(emp, proj, r.x0[i], w), par.dim); });
    SliceWidthResult s;
    s.width = w;
    for (const auto& d : reps) {
      s.dim_slice_mean += d.fitted_dim;
      s.slice_half_width += d.half_width;
      s.mean_slice_points += static_cast<double>(d.points);
    }
    const auto n = static_cast<double>(reps.size());
    s.dim_slice_mean /= n;
    s.slice_half_width /= n;
    s.mean_slice_points /= n;
    s.residual = r.dim_mu.fitted_dim - r.dim_proj.fitted_dim - s.dim_slice_mean;
    s.residual_half_width = r.dim_mu.half_width + r.dim_proj.half_width + s.slice_half_width;
    r.widths.push_back(s);
  }
  return r;
}

inline ConservationReport conservation_report(const MeasureSpec& spec, const Projection& proj,
                                              const ConservationParams& par = {}) {
  return conservation_report(sample_cloud(spec, par.samples, par.depth, par.seed), proj, par);
}

inline nlohmann::json to_json(const ConservationReport& r) {
  nlohmann::json ws = nlohmann::json::array();
  for (const auto& w : r.widths)
    ws.push_back({{"width", w.width},
                  {"dim_slice_mean", w.dim_slice_mean},
                  {"slice_half_width", w.slice_half_width},
                  {"mean_slice_points", w.mean_slice_points},
                  {"residual", w.residual},
                  {"residual_half_width", w.residual_half_width}});
  return {{"dim_mu", to_json(r.dim_mu)}, {"dim_proj", to_json(r.dim_proj)}, {"widths", ws}, {"x0", r.x0}};
}

// ---------------------------------------------------------------------------
// Search for a dimension-dropping non-principal projection
// ---------------------------------------------------------------------------

struct AngleScan {
  double degrees = 0.0;
  DimensionReport dim_proj;
  bool flagged = false;  // dim mu - dim pi mu exceeds the combined half-widths
};

struct ProjectionSearch {
  DimensionReport dim_mu;
  std::vector<AngleScan> angles;

  bool any_flagged() const {
    return std::any_of(angles.begin(), angles.end(), [](const AngleScan& a) { return a.flagged; });
  }
};

/// 15, 30, ..., 165 degrees without 90.
inline std::vector<double> default_angle_grid() {
  std::vector<double> out;
  for (int d = 15; d < 180; d += 15)
    if (d != 90) out.push_back(d);
  return out;
}

inline ProjectionSearch condition_1_1_search(const EmpiricalMeasure2D& emp, const std::vector<double>& degrees,
                                             const DimensionParams& par = {}) {
  for (double d : degrees)
    if (!(d > 0.0 && d < 180.0) || d == 90.0)
      throw std::invalid_argument("condition_1_1_search: grid must exclude the principal directions");
  ProjectionSearch out;
  out.dim_mu = estimate_dimension(emp, par);
  out.angles.resize(degrees.size());
  parallel_for(degrees.size(), [&](std::size_t i) {
    AngleScan& a = out.angles[i];
    a.degrees = degrees[i];
    a.dim_proj = estimate_dimension(project(emp, Projection::at_degrees(degrees[i])), par);
    a.flagged = out.dim_mu.fitted_dim - a.dim_proj.fitted_dim > out.dim_mu.half_width + a.dim_proj.half_width;
  });
  return out;
}

inline nlohmann::json to_json(const ProjectionSearch& s) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& x : s.angles)
    a.push_back({{"degrees", x.degrees},
                 {"dim_proj", x.dim_proj.fitted_dim},
                 {"half_width", x.dim_proj.half_width},
                 {"flagged", x.flagged}});
  return {{"dim_mu", s.dim_mu.fitted_dim}, {"dim_mu_half_width", s.dim_mu.half_width}, {"angles", a},
          {"any_flagged", s.any_flagged()}};
}

}  // namespace torus_equidist
