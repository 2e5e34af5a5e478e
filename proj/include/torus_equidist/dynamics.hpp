#pragma once

// Orbits of points of the 2-torus under T_m x T_n, T_b(x) = b x mod 1.
//
// Three independent routes are provided so they can cross-check each other:
//   orbit_exact   modular arithmetic on rational numerators,
//   orbit_digits  left shifts of one-shot base-m / base-n expansions,
//   orbit_ball    certified expansions of error-tracked reals, then shifts.
// Iterating x -> m x on a ball multiplies its radius by m per step, so the
// digit route is the one used for long orbits: one long division up front,
// then O(N * g) digit operations and no per-step big-number arithmetic.

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "core.hpp"
#include "precision.hpp"

namespace torus_equidist {

/// A torus coordinate: exact rational or certified real, read mod 1.
using TorusCoord = std::variant<BigRational, Ball>;

struct TorusPoint {
  TorusCoord x = BigRational(0);
  TorusCoord y = BigRational(0);

  TorusPoint() = default;
  TorusPoint(TorusCoord x_, TorusCoord y_) : x(std::move(x_)), y(std::move(y_)) {
    for (const TorusCoord* c : {&x, &y})
      if (const auto* q = std::get_if<BigRational>(c); q && (*q < BigRational(0) || *q >= BigRational(1)))
        throw std::domain_error("TorusPoint: rational coordinate outside [0,1): " + q->to_string());
  }

  bool is_rational() const {
    return std::holds_alternative<BigRational>(x) && std::holds_alternative<BigRational>(y);
  }
};

struct OrbitSpec {
  unsigned m = 2;
  unsigned n = 2;
  std::size_t length = 1;         // N
  int output_precision_bits = 64;

  void validate() const {
    if (m < 2 || n < 2) throw std::invalid_argument("OrbitSpec: m and n must be >= 2");
    if (length < 1) throw std::invalid_argument("OrbitSpec: length must be >= 1");
    if (output_precision_bits < 1) throw std::invalid_argument("OrbitSpec: precision bits must be >= 1");
  }
};

/// Emitted orbit. `certified_error` bounds the torus distance between every
/// emitted point and the exact orbit point: digit truncation (<= 2^-bits)
/// plus rounding to double (<= 2^-52).
struct Orbit {
  std::vector<Point2> points;
  double certified_error = 0.0;
};

/// Emission rounding bound for doubles in [0,1).
inline constexpr double kEmissionRounding = 0x1.0p-52;

/// Smallest g with min(m,n)^g >= 2^bits.
inline std::size_t guard_digits(const OrbitSpec& spec) {
  const double lb = std::log2(static_cast<double>(std::min(spec.m, spec.n)));
  auto g = static_cast<std::size_t>(std::ceil(spec.output_precision_bits / lb));
  // correct for floating error in the ceiling
  while (g > 0 && static_cast<double>(g - 1) * lb >= spec.output_precision_bits) --g;
  while (static_cast<double>(g) * lb < spec.output_precision_bits) ++g;
  return g;
}

/// Digits each coordinate expansion must carry for an orbit of length N.
inline std::size_t required_digits(const OrbitSpec& spec) { return spec.length + guard_digits(spec); }

/// Working precision (bits) at which lifting an exact point into a Ball meets
/// the orbit_ball radius contract.
inline long required_precision_bits(const OrbitSpec& spec) {
  const double b = std::log2(static_cast<double>(std::max(spec.m, spec.n)));
  return static_cast<long>(std::ceil(static_cast<double>(required_digits(spec)) * b)) + 34;
}

/// x -> b x mod 1, exactly.
inline BigRational tmap(const BigRational& x, unsigned b) {
  return (BigRational(static_cast<long>(b)) * x).frac();
}

namespace detail {

inline double window_value(const DigitString& d, std::size_t start, std::size_t g) {
  double v = 0.0;
  const double base = d.base;
  for (std::size_t j = g; j-- > 0;) v = (v + d.digits[start + j]) / base;
  return v >= 1.0 ? 0.0 : v;
}

inline double truncation_bound(const OrbitSpec& spec, std::size_t g) {
  return std::pow(static_cast<double>(std::min(spec.m, spec.n)), -static_cast<double>(g));
}

}  // namespace detail

/// Exact orbit of a rational point: numerators follow a_{i+1} = m a_i mod q.
inline Orbit orbit_exact(const TorusPoint& z, const OrbitSpec& spec) {
  spec.validate();
  if (!z.is_rational()) throw std::invalid_argument("orbit_exact: coordinates must be rational");
  const BigRational& x = std::get<BigRational>(z.x);
  const BigRational& y = std::get<BigRational>(z.y);
  mpz_class ax = x.num(), qx = x.den(), ay = y.num(), qy = y.den();
  Orbit out;
  out.points.reserve(spec.length);
  for (std::size_t i = 0; i < spec.length; ++i) {
    const double px = mpq_class(ax, qx).get_d();
    const double py = mpq_class(ay, qy).get_d();
    out.points.push_back({px, py});
    ax *= spec.m;
    mpz_mod(ax.get_mpz_t(), ax.get_mpz_t(), qx.get_mpz_t());
    ay *= spec.n;
    mpz_mod(ay.get_mpz_t(), ay.get_mpz_t(), qy.get_mpz_t());
  }
  out.certified_error = kEmissionRounding;
  return out;
}

/// Orbit as shifts of base-m / base-n expansions. Point i is read from the
/// digit window [i, i+g).
inline Orbit orbit_digits(const DigitString& x_digits, const DigitString& y_digits, const OrbitSpec& spec) {
  spec.validate();
  if (x_digits.base != spec.m || y_digits.base != spec.n)
    throw std::invalid_argument("orbit_digits: digit bases must equal (m, n)");
  const std::size_t g = guard_digits(spec);
  const std::size_t need = spec.length + g;
  if (x_digits.length() < need || y_digits.length() < need)
    throw std::length_error("orbit_digits: need " + std::to_string(need) + " digits, got (" +
                            std::to_string(x_digits.length()) + ", " + std::to_string(y_digits.length()) + ")");
  Orbit out;
  out.points.resize(spec.length);
  for (std::size_t i = 0; i < spec.length; ++i)
    out.points[i] = {detail::window_value(x_digits, i, g), detail::window_value(y_digits, i, g)};
  out.certified_error = detail::truncation_bound(spec, g) + kEmissionRounding;
  return out;
}

namespace detail {

inline Certified<DigitString> coordinate_digits(const TorusCoord& c, unsigned base, const OrbitSpec& spec) {
  const std::size_t need = required_digits(spec);
  if (const auto* q = std::get_if<BigRational>(&c)) return rational_digits(q->frac(), base, need);
  const Ball& b = std::get<Ball>(c);
  if (!b.radius_at_most(std::max(spec.m, spec.n), need, 32))
    return InsufficientPrecision{"input radius exceeds 2^-32 * max(m,n)^-(N+g); raise working precision"};
  auto reduced = b.frac();
  if (auto* err = std::get_if<InsufficientPrecision>(&reduced)) return *err;
  return ball_digits(std::get<Ball>(reduced), base, need);
}

}  // namespace detail

/// Orbit of a point with certified real coordinates.
///
/// Precision contract: every Ball coordinate must have radius at most
/// 2^-32 * max(m,n)^-(N+g). Under it a grid line at depth N+g is straddled
/// only for points within that radius of the grid, which for generic points
/// happens with probability about 2^-31 per coordinate; straddling is
/// reported, never guessed.
inline Certified<Orbit> orbit_ball(const TorusPoint& z, const OrbitSpec& spec) {
  spec.validate();
  auto xd = detail::coordinate_digits(z.x, spec.m, spec);
  if (auto* err = std::get_if<InsufficientPrecision>(&xd)) return InsufficientPrecision{"x: " + err->detail};
  auto yd = detail::coordinate_digits(z.y, spec.n, spec);
  if (auto* err = std::get_if<InsufficientPrecision>(&yd)) return InsufficientPrecision{"y: " + err->detail};
  return orbit_digits(std::get<DigitString>(xd), std::get<DigitString>(yd), spec);
}

// ---------------------------------------------------------------------------
// Dump format: CSV (i,x,y) plus a JSON sidecar.
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_orbit_csv(std::ostream& os, const Orbit& orbit) {
  os << "i,x,y\n";
  for (std::size_t i = 0; i < orbit.points.size(); ++i)
    os << i << ',' << format_double(orbit.points[i].x) << ',' << format_double(orbit.points[i].y) << '\n';
}

inline nlohmann::json orbit_sidecar(const OrbitSpec& spec, const Orbit& orbit, std::uint64_t seed,
                                    const std::string& measure_spec_hash) {
  return {{"m", spec.m},
          {"n", spec.n},
          {"N", spec.length},
          {"certified_error", orbit.certified_error},
          {"seed", seed},
          {"measure_spec_hash", measure_spec_hash}};
}

}  // namespace torus_equidist
