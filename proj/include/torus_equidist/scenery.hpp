#pragma once

// Sceneries of a measure at a point: zoomed, recentred restrictions to
// shrinking squares, scalar observables along the zoom, and periodograms.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dynamics.hpp"
#include "empirical.hpp"
#include "measure_spec.hpp"
#include "measures.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace torus_equidist {

enum class Observable { LeftHalfMass, DiskMass, CovarianceAngle, LogAnisotropy };

inline constexpr std::array<Observable, 4> kObservables{Observable::LeftHalfMass, Observable::DiskMass,
                                                         Observable::CovarianceAngle, Observable::LogAnisotropy};

inline const char* to_string(Observable o) {
  switch (o) {
    case Observable::LeftHalfMass: return "left_half_mass";
    case Observable::DiskMass: return "disk_mass";
    case Observable::CovarianceAngle: return "covariance_angle";
    default: return "log_anisotropy";
  }
}

inline Observable observable_from_string(const std::string& s) {
  for (auto o : kObservables)
    if (s == to_string(o)) return o;
  throw std::invalid_argument("unknown observable: " + s);
}

/// Frame values of all four observables.
inline std::array<double, 4> evaluate_observables(const std::vector<Point2>& p, const std::vector<double>& w) {
  double left = 0.0, disk = 0.0, mu = 0.0, mv = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i].x < 0.0) left += w[i];
    if (p[i].x * p[i].x + p[i].y * p[i].y <= 0.25) disk += w[i];
    mu += w[i] * p[i].x;
    mv += w[i] * p[i].y;
  }
  double cuu = 0.0, cvv = 0.0, cuv = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double du = p[i].x - mu, dv = p[i].y - mv;
    cuu += w[i] * du * du;
    cvv += w[i] * dv * dv;
    cuv += w[i] * du * dv;
  }
  const double angle = 0.5 * std::atan2(2.0 * cuv, cuu - cvv);
  const double tr = 0.5 * (cuu + cvv);
  const double disc = std::sqrt(std::max(tr * tr - (cuu * cvv - cuv * cuv), 0.0));
  const double aniso = std::log((tr + disc) / std::max(tr - disc, 1e-300));
  return {left, disk, angle, aniso};
}

// ---------------------------------------------------------------------------
// Tracks
// ---------------------------------------------------------------------------

struct SceneryFrame {
  double t = 0.0;
  std::size_t points = 0;
  EmpiricalMeasure2D frame;  // empty unless frames are kept
};

struct SceneryTrack {
  double dt = 0.0;
  std::size_t J = 0;  // requested frame count - 1
  Point2 anchor{};
  std::vector<std::uint32_t> anchor_word;
  std::string source_hash;
  std::vector<SceneryFrame> frames;  // frames j = 0 .. frames.size()-1
  std::array<std::vector<double>, 4> series;
  bool truncated = false;
  std::size_t min_frame_points = 100;

  const std::vector<double>& observable(Observable o) const { return series[static_cast<std::size_t>(o)]; }
};

/// Frame j holds the points with |z - anchor|_inf <= e^{-j dt}, recentred and
/// scaled by e^{j dt}, reweighted to mass 1. The track stops before the first
/// frame with fewer than `min_frame_points` points and is then flagged.
inline SceneryTrack track_from_cloud(const EmpiricalMeasure2D& emp, Point2 anchor, double dt, std::size_t J,
                                     bool keep_frames = false, std::size_t min_frame_points = 100) {
  if (!(dt > 0.0)) throw std::invalid_argument("scenery_track: dt must be positive");
  SceneryTrack tr;
  tr.dt = dt;
  tr.J = J;
  tr.anchor = anchor;
  tr.min_frame_points = min_frame_points;
  std::vector<SceneryFrame> frames(J + 1);
  std::vector<std::array<double, 4>> values(J + 1);
  const auto& pts = emp.points();
  const auto& ws = emp.weights();
  parallel_for(J + 1, [&](std::size_t j) {
    const double t = static_cast<double>(j) * dt;
    const double zoom = std::exp(t), rad = std::exp(-t);
    std::vector<Point2> fp;
    std::vector<double> fw;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double du = pts[i].x - anchor.x, dv = pts[i].y - anchor.y;
      if (std::fabs(du) <= rad && std::fabs(dv) <= rad && ws[i] > 0.0) {
        fp.push_back({std::clamp(du * zoom, -1.0, 1.0), std::clamp(dv * zoom, -1.0, 1.0)});
        fw.push_back(ws[i]);
      }
    }
    frames[j].t = t;
    frames[j].points = fp.size();
    if (fp.size() < min_frame_points) return;
    EmpiricalMeasure2D f(std::move(fp), std::move(fw));
    values[j] = evaluate_observables(f.points(), f.weights());
    if (keep_frames) frames[j].frame = std::move(f);
  });
  for (std::size_t j = 0; j <= J; ++j) {
    if (frames[j].points < min_frame_points) {
      tr.truncated = true;
      break;
    }
    for (std::size_t o = 0; o < 4; ++o) tr.series[o].push_back(values[j][o]);
    tr.frames.push_back(std::move(frames[j]));
  }
  // the principal axis is defined mod pi: unwrap to the continuous branch
  auto& ang = tr.series[static_cast<std::size_t>(Observable::CovarianceAngle)];
  for (std::size_t j = 1; j < ang.size(); ++j)
    ang[j] -= std::numbers::pi * std::round((ang[j] - ang[j - 1]) / std::numbers::pi);
  return tr;
}

struct SceneryParams {
  double dt = 0.0;
  std::size_t J = 64;
  std::size_t samples_per_level = 20000;
  std::size_t depth = 0;  // 0: chosen from J dt
  bool keep_frames = false;
  std::size_t min_frame_points = 100;
};

/// Scenery of `spec` at an anchor drawn from the measure (word from stream 0
/// of `seed`). The cloud mixes, for l = 0..L, samples conditioned on the
/// first l symbols of the anchor word; each point z gets the importance weight
/// (L+1) / sum_{l <= a(z)} 1/mu(C_l), a(z) being its common prefix length with
/// the anchor, so the weighted cloud is an unbiased sample of the measure
/// that stays populated deep inside the anchor's cylinders.
inline SceneryTrack scenery_track(const MeasureSpec& spec, std::uint64_t seed, const SceneryParams& par) {
  if (!(par.dt > 0.0)) throw std::invalid_argument("scenery_track: dt must be positive");
  const Coding coding(spec);
  double r_max = 0.0;
  for (std::uint32_t s = 0; s < coding.symbols(); ++s)
    if (coding.probabilities()[s] > 0.0) r_max = std::max(r_max, coding.contraction(s));
  const double depth_scale = -std::log(r_max);
  const double horizon = static_cast<double>(par.J) * par.dt;
  auto L = static_cast<std::size_t>(std::ceil(horizon / depth_scale)) + 2;
  // resolution r_max^depth must be <= 0.01 e^{-J dt}
  const auto min_depth = static_cast<std::size_t>(std::ceil((horizon + std::log(100.0)) / depth_scale));
  const std::size_t depth = par.depth ? par.depth : std::max(min_depth, L) + 8;
  if (depth < min_depth)
    throw std::invalid_argument("scenery_track: depth " + std::to_string(depth) + " too shallow for J dt; need >= " +
                                std::to_string(min_depth));
  L = std::min(L, depth);

  Rng arng = make_rng(seed, 0);
  std::vector<std::uint32_t> anchor(depth);
  for (auto& s : anchor) s = coding.draw(arng);
  const Point2 x = coding.point(anchor);

  // 1 / mu(C_l) for l = 0..L, cumulated
  std::vector<double> inv_cum(L + 1);
  {
    double inv = 1.0, acc = 0.0;
    for (std::size_t l = 0; l <= L; ++l) {
      acc += inv;
      inv_cum[l] = acc;
      if (l < depth) inv /= coding.probabilities()[anchor[l]];
    }
  }
  const std::size_t S = par.samples_per_level;
  std::vector<Point2> pts((L + 1) * S);
  std::vector<double> w((L + 1) * S);
  parallel_for(L + 1, [&](std::size_t l) {
    Rng rng = make_rng(seed, 100 + l);
    std::vector<std::uint32_t> word(depth);
    for (std::size_t i = 0; i < S; ++i) {
      std::size_t prefix = l;
      bool agree = true;
      for (std::size_t k = 0; k < depth; ++k) {
        word[k] = k < l ? anchor[k] : coding.draw(rng);
        if (k >= l && agree) {
          if (word[k] == anchor[k]) ++prefix;
          else agree = false;
        }
      }
      pts[l * S + i] = coding.point(word);
      w[l * S + i] = static_cast<double>(L + 1) / inv_cum[std::min(prefix, L)];
    }
  });
  SceneryTrack tr =
      track_from_cloud(EmpiricalMeasure2D(std::move(pts), std::move(w)), x, par.dt, par.J, par.keep_frames, par.min_frame_points);
  tr.anchor_word = std::move(anchor);
  tr.source_hash = spec_hash(spec);
  return tr;
}

inline const std::vector<double>& observable_series(const SceneryTrack& tr, Observable o) { return tr.observable(o); }

// ---------------------------------------------------------------------------
// Periodogram
// ---------------------------------------------------------------------------

struct SpectralPeak {
  double frequency = 0.0;
  double power = 0.0;
  double snr = 0.0;  // power / noise floor
  std::size_t bin = 0;
};

struct Periodogram {
  std::vector<double> frequency;  // bins 1 .. n/2
  std::vector<double> power;
  double bin_width = 0.0;
  double noise_floor = 0.0;  // median power
  std::vector<SpectralPeak> peaks;  // up to three local maxima, strongest first
};

namespace detail {

/// Median power as the noise floor; peaks are local maxima, strongest first.
inline void find_peaks(Periodogram& pg, std::size_t top) {
  std::vector<double> sorted = pg.power;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  pg.noise_floor = sorted[sorted.size() / 2];
  pg.peaks.clear();
  for (std::size_t i = 0; i < pg.power.size(); ++i) {
    const double p = pg.power[i];
    const bool left_ok = i == 0 || p > pg.power[i - 1];
    const bool right_ok = i + 1 == pg.power.size() || p >= pg.power[i + 1];
    if (p > 0.0 && left_ok && right_ok)
      pg.peaks.push_back({pg.frequency[i], p, pg.noise_floor > 0.0 ? p / pg.noise_floor : INFINITY, i + 1});
  }
  std::stable_sort(pg.peaks.begin(), pg.peaks.end(), [](const auto& a, const auto& b) { return a.power > b.power; });
  if (pg.peaks.size() > top) pg.peaks.resize(top);
}

}  // namespace detail

struct SpectrumParams {
  bool prewhiten = true;  // first differences before windowing
  std::size_t top = 3;
};

/// Mean-removed, Hann-windowed periodogram at frequencies k / (n dt). With
/// prewhitening the series is first differenced, which removes the slow drift
/// that otherwise dominates the low bins.
inline Periodogram spectrum_estimate(const std::vector<double>& series, double dt, const SpectrumParams& par = {}) {
  if (series.size() < 32) throw std::invalid_argument("spectrum_estimate: series length must be >= 32");
  if (!(dt > 0.0)) throw std::invalid_argument("spectrum_estimate: dt must be positive");
  std::vector<double> s = series;
  if (par.prewhiten) {
    std::vector<double> d(s.size() - 1);
    for (std::size_t i = 0; i + 1 < s.size(); ++i) d[i] = s[i + 1] - s[i];
    s = std::move(d);
  }
  const std::size_t n = s.size();
  const double mean = detail::pairwise_sum(s.data(), n) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double hann = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
    s[i] = (s[i] - mean) * hann;
  }
  Periodogram pg;
  pg.bin_width = 1.0 / (static_cast<double>(n) * dt);
  for (std::size_t k = 1; k <= n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k * i % n) / static_cast<double>(n);
      acc += s[i] * std::complex<double>(std::cos(a), std::sin(a));
    }
    pg.frequency.push_back(static_cast<double>(k) * pg.bin_width);
    pg.power.push_back(std::norm(acc) / static_cast<double>(n));
  }
  detail::find_peaks(pg, par.top);
  return pg;
}

/// Power averaged bin-wise over several equally long series.
inline Periodogram average_periodograms(const std::vector<Periodogram>& pgs, std::size_t top = 3) {
  if (pgs.empty()) throw std::invalid_argument("average_periodograms: empty input");
  Periodogram out = pgs.front();
  for (std::size_t k = 1; k < pgs.size(); ++k) {
    if (pgs[k].power.size() != out.power.size()) throw std::invalid_argument("average_periodograms: lengths differ");
    for (std::size_t i = 0; i < out.power.size(); ++i) out.power[i] += pgs[k].power[i];
  }
  for (double& p : out.power) p /= static_cast<double>(pgs.size());
  detail::find_peaks(out, top);
  return out;
}

/// Whether the strongest peak lies within `bins` bins of `frequency`.
inline bool dominant_peak_near(const Periodogram& pg, double frequency, double bins = 1.0) {
  return !pg.peaks.empty() && std::fabs(pg.peaks.front().frequency - frequency) <= bins * pg.bin_width;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline void write_series_csv(std::ostream& os, const SceneryTrack& tr, Observable o) {
  os << "t,value\n";
  const auto& s = tr.observable(o);
  for (std::size_t j = 0; j < s.size(); ++j) os << format_double(tr.frames[j].t) << ',' << format_double(s[j]) << '\n';
}

inline void write_periodogram_csv(std::ostream& os, const Periodogram& pg) {
  os << "freq,power\n";
  for (std::size_t i = 0; i < pg.power.size(); ++i) os << format_double(pg.frequency[i]) << ',' << format_double(pg.power[i]) << '\n';
}

inline nlohmann::json to_json(const Periodogram& pg) {
  nlohmann::json peaks = nlohmann::json::array();
  for (const auto& p : pg.peaks) peaks.push_back({{"frequency", p.frequency}, {"power", p.power}, {"snr", p.snr}});
  return {{"bin_width", pg.bin_width}, {"noise_floor", pg.noise_floor}, {"peaks", peaks}};
}

inline nlohmann::json to_json(const SceneryTrack& tr) {
  nlohmann::json series = nlohmann::json::object();
  for (auto o : kObservables) series[to_string(o)] = tr.observable(o);
  return {{"dt", tr.dt},
          {"J", tr.J},
          {"frames", tr.frames.size()},
          {"truncated", tr.truncated},
          {"anchor", {tr.anchor.x, tr.anchor.y}},
          {"source_hash", tr.source_hash},
          {"series", series}};
}

}  // namespace torus_equidist
