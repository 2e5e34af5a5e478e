#pragma once

// Structural analysis of planar IFS: strong separation and rotation data.

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "measures.hpp"

namespace torus_equidist {

// ---------------------------------------------------------------------------
// Strong separation
// ---------------------------------------------------------------------------

enum class SSCVerdict { Certified, Refuted, Unknown };

inline const char* to_string(SSCVerdict v) {
  switch (v) {
    case SSCVerdict::Certified: return "Certified";
    case SSCVerdict::Refuted: return "Refuted";
    default: return "Unknown";
  }
}

struct SSCResult {
  SSCVerdict verdict = SSCVerdict::Unknown;
  std::size_t depth = 0;
  std::string detail;
};

namespace detail {

// Exact affine map z -> M z + t with rational entries (quarter-turn rotations).
struct RationalAffine {
  std::array<BigRational, 4> M;  // row-major
  BigRational tx, ty;

  std::pair<BigRational, BigRational> operator()(const BigRational& x, const BigRational& y) const {
    return {M[0] * x + M[1] * y + tx, M[2] * x + M[3] * y + ty};
  }
  RationalAffine compose(const RationalAffine& inner) const {  // this o inner
    RationalAffine out;
    out.M = {M[0] * inner.M[0] + M[1] * inner.M[2], M[0] * inner.M[1] + M[1] * inner.M[3],
             M[2] * inner.M[0] + M[3] * inner.M[2], M[2] * inner.M[1] + M[3] * inner.M[3]};
    auto [x, y] = (*this)(inner.tx, inner.ty);
    out.tx = x;
    out.ty = y;
    return out;
  }
  /// Unique fixed point (the map is a contraction, so I - M is invertible).
  std::pair<BigRational, BigRational> fixed_point() const {
    const BigRational a = BigRational(1) - M[0], b = -M[1], c = -M[2], d = BigRational(1) - M[3];
    const BigRational det = a * d - b * c;
    return {(d * tx - b * ty) / det, (a * ty - c * tx) / det};
  }
};

inline std::optional<std::vector<RationalAffine>> rational_maps(const PlanarIFS& ifs) {
  std::vector<RationalAffine> out;
  for (const auto& br : ifs.branches) {
    if (!br.angle.quarter_turn()) return std::nullopt;
    const BigRational c(br.angle.quarter_cos()), s(br.angle.quarter_sin());
    out.push_back({{br.ratio * c, -(br.ratio * s), br.ratio * s, br.ratio * c}, br.tx, br.ty});
  }
  return out;
}

/// Looks for a point shared by two first-level images among images of
/// periodic points of period <= 2 (all of which lie in the attractor).
inline std::optional<std::string> find_exact_overlap(const std::vector<RationalAffine>& maps) {
  std::vector<std::pair<BigRational, BigRational>> pts;
  for (const auto& f : maps) pts.push_back(f.fixed_point());
  for (const auto& f : maps)
    for (const auto& g : maps) pts.push_back(f.compose(g).fixed_point());
  for (std::size_t i = 0; i < maps.size(); ++i)
    for (std::size_t j = i + 1; j < maps.size(); ++j)
      for (const auto& p : pts)
        for (const auto& q : pts)
          if (maps[i](p.first, p.second) == maps[j](q.first, q.second)) {
            auto [x, y] = maps[i](p.first, p.second);
            return "branches " + std::to_string(i) + " and " + std::to_string(j) + " share the attractor point (" +
                   x.to_string() + ", " + y.to_string() + ")";
          }
  return std::nullopt;
}

struct CylinderBall {
  std::size_t first;
  Ball x, y;        // image of the bounding-ball center
  BigFloat radius;  // r_w R, rounded up
};

struct CylinderBox {
  std::size_t first;
  double xlo, xhi, ylo, yhi, rho;
};

inline CylinderBox to_box(const CylinderBall& c) {
  return {c.first, c.x.lower_double(), c.x.upper_double(), c.y.lower_double(), c.y.upper_double(),
          mpfr_get_d(c.radius.get(), MPFR_RNDU)};
}

/// dist(B_a, B_b) > 0 certified: the center boxes are separated by more than
/// the sum of radii, with a relative safety margin for double rounding.
inline bool certified_apart(const CylinderBox& a, const CylinderBox& b) {
  const double dx = std::max({0.0, a.xlo - b.xhi, b.xlo - a.xhi});
  const double dy = std::max({0.0, a.ylo - b.yhi, b.ylo - a.yhi});
  const double d2 = (dx * dx + dy * dy) * (1.0 - 1e-12);
  const double s = (a.rho + b.rho) * (1.0 + 1e-12);
  return d2 > s * s;
}

}  // namespace detail

/// Certified: at some depth every cylinder ball B(phi_w(c), r_w R) under one
/// first-level branch is provably disjoint from every one under another
/// (B(c, R) is the bounding ball, so the first-level images of the attractor
/// are disjoint). Refuted: an exact common point of two first-level images is
/// found (only attempted when all rotations are quarter turns, so the maps are
/// exactly rational). Unknown otherwise, after refining up to `max_balls`
/// cylinders per level.
inline SSCResult validate_ssc(const PlanarIFS& ifs, std::size_t max_balls = 4096) {
  validate(ifs);
  const std::size_t n = ifs.branches.size();
  if (n == 1) return {SSCVerdict::Certified, 0, "single branch"};
  if (auto maps = detail::rational_maps(ifs))
    if (auto overlap = detail::find_exact_overlap(*maps)) return {SSCVerdict::Refuted, 1, *overlap};

  constexpr mpfr_prec_t prec = 128;
  const BoundingBall bb = bounding_ball(ifs);
  struct Map {
    Ball a, b, tx, ty;
    BigFloat r;
  };
  std::vector<Map> maps;
  for (const auto& br : ifs.branches) {
    const Ball r = Ball::from_rational(br.ratio, prec);
    Map m{r * br.angle.cos_ball(prec), r * br.angle.sin_ball(prec), Ball::from_rational(br.tx, prec),
          Ball::from_rational(br.ty, prec), BigFloat(Ball::kRadiusPrec)};
    mpfr_set_q(m.r.get(), br.ratio.mpq().get_mpq_t(), MPFR_RNDU);
    maps.push_back(std::move(m));
  }
  // level 0: the bounding ball itself
  std::vector<detail::CylinderBall> level;
  {
    BigFloat R(Ball::kRadiusPrec);
    mpfr_set_d(R.get(), bb.radius, MPFR_RNDU);
    level.push_back({0, Ball::from_double(bb.cx, 0.0, prec), Ball::from_double(bb.cy, 0.0, prec), R});
  }
  for (std::size_t depth = 1; level.size() * n <= max_balls; ++depth) {
    std::vector<detail::CylinderBall> next;
    next.reserve(level.size() * n);
    for (std::size_t i = 0; i < n; ++i)
      for (const auto& c : level) {
        const Map& m = maps[i];
        BigFloat rad(Ball::kRadiusPrec);
        mpfr_mul(rad.get(), c.radius.get(), m.r.get(), MPFR_RNDU);
        next.push_back({i, m.a * c.x - m.b * c.y + m.tx, m.b * c.x + m.a * c.y + m.ty, std::move(rad)});
      }
    level = std::move(next);
    std::vector<detail::CylinderBox> boxes;
    boxes.reserve(level.size());
    for (const auto& c : level) boxes.push_back(detail::to_box(c));
    bool ok = true;
    for (std::size_t a = 0; a < boxes.size() && ok; ++a)
      for (std::size_t b = a + 1; b < boxes.size(); ++b)
        if (boxes[a].first != boxes[b].first && !detail::certified_apart(boxes[a], boxes[b])) {
          ok = false;
          break;
        }
    if (ok)
      return {SSCVerdict::Certified, depth,
              "cylinder balls at depth " + std::to_string(depth) + " separate the first-level images"};
  }
  return {SSCVerdict::Unknown, 0, "separation not certified within " + std::to_string(max_balls) + " cylinders"};
}

// ---------------------------------------------------------------------------
// Rotation analysis
// ---------------------------------------------------------------------------

struct IFSAnalysis {
  bool decided = false;                 // false: angles outside the decidable class
  std::optional<std::uint64_t> k_phi;   // empty = infinity
  Angle gamma = Angle::from_turns(BigRational(0));
  bool group_finite = false;
  std::optional<BigRational> uniform_ratio;
  bool ssc_certified = false;
  std::string note;
};

/// k_phi = least k with k (theta_i - theta_j) = 0 mod 1 turn for all i, j, and
/// gamma = k_phi theta_1 mod 1 turn. Decided when all angles are rational
/// turns (k_phi is the lcm of the denominators of the differences) or all
/// angles are one repeated real (k_phi = 1).
inline IFSAnalysis analyze_rotations(const PlanarIFS& ifs, bool run_ssc = true) {
  validate(ifs);
  IFSAnalysis an;
  const auto& br = ifs.branches;
  bool uniform = true;
  for (const auto& b : br) uniform = uniform && b.ratio == br.front().ratio;
  if (uniform) an.uniform_ratio = br.front().ratio;
  if (run_ssc) an.ssc_certified = validate_ssc(ifs).verdict == SSCVerdict::Certified;

  bool all_rational = true;
  for (const auto& b : br) all_rational = all_rational && b.angle.rational();
  if (all_rational) {
    mpz_class k = 1;
    for (const auto& b : br) {
      const BigRational diff = (*b.angle.turns - *br.front().angle.turns).frac();
      mpz_lcm(k.get_mpz_t(), k.get_mpz_t(), diff.den().get_mpz_t());
    }
    if (!k.fits_ulong_p()) throw std::overflow_error("analyze_rotations: k_phi exceeds 64 bits");
    an.decided = true;
    an.k_phi = k.get_ui();
    an.gamma = Angle::from_turns(BigRational(k, mpz_class(1)) * *br.front().angle.turns);
    an.group_finite = true;
    return an;
  }
  bool all_same = true;
  for (const auto& b : br) all_same = all_same && !b.angle.rational() && b.angle.radians == br.front().angle.radians;
  if (all_same) {
    an.decided = true;
    an.k_phi = 1;
    an.gamma = br.front().angle;
    an.group_finite = false;
    an.note = "single real angle; finiteness of the rotation group is not decided";
    return an;
  }
  an.note = "angles outside the decidable class (mixed or distinct real angles)";
  return an;
}

inline nlohmann::json to_json(const IFSAnalysis& an) {
  nlohmann::json j{{"decided", an.decided}, {"group_finite", an.group_finite}, {"ssc_certified", an.ssc_certified}};
  j["k_phi"] = an.k_phi ? nlohmann::json(*an.k_phi) : nlohmann::json("infinity");
  if (an.decided) {
    j["gamma"] = an.gamma.rational() ? nlohmann::json{{"turns", an.gamma.turns->to_string()}}
                                     : nlohmann::json{{"radians", an.gamma.radians}};
    j["gamma_radians"] = an.gamma.radians_double();
  }
  j["uniform_ratio"] = an.uniform_ratio ? nlohmann::json(an.uniform_ratio->to_string()) : nlohmann::json(nullptr);
  if (!an.note.empty()) j["note"] = an.note;
  return j;
}

}  // namespace torus_equidist
