#pragma once

// Number-theoretic hypothesis checkers: multiplicative independence of
// integers and of a ratio against an integer, and the spectral condition
// relating rotation data to log m.

#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ifs.hpp"
#include "precision.hpp"

namespace torus_equidist {

// ---------------------------------------------------------------------------
// Factorization of 64-bit integers
// ---------------------------------------------------------------------------

namespace detail {

using u128 = unsigned __int128;

inline std::uint64_t mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  return static_cast<std::uint64_t>(static_cast<u128>(a) * b % m);
}

inline std::uint64_t powmod(std::uint64_t a, std::uint64_t e, std::uint64_t m) {
  std::uint64_t r = 1 % m;
  a %= m;
  for (; e; e >>= 1) {
    if (e & 1) r = mulmod(r, a, m);
    a = mulmod(a, a, m);
  }
  return r;
}

/// Deterministic Miller-Rabin for 64-bit inputs.
inline bool is_prime(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t p : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37})
    if (n % p == 0) return n == p;
  std::uint64_t d = n - 1;
  int s = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++s;
  }
  for (std::uint64_t a : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37}) {
    std::uint64_t x = powmod(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int r = 1; r < s; ++r) {
      x = mulmod(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

/// Pollard-Brent; n odd composite.
inline std::uint64_t pollard_brent(std::uint64_t n) {
  for (std::uint64_t c = 1;; ++c) {
    std::uint64_t y = 2, g = 1, q = 1, x = 0, ys = 0;
    const std::uint64_t m = 128;
    std::uint64_t r = 1;
    auto f = [&](std::uint64_t v) { return (mulmod(v, v, n) + c) % n; };
    do {
      x = y;
      for (std::uint64_t i = 0; i < r; ++i) y = f(y);
      std::uint64_t k = 0;
      do {
        ys = y;
        for (std::uint64_t i = 0; i < std::min(m, r - k); ++i) {
          y = f(y);
          q = mulmod(q, x > y ? x - y : y - x, n);
        }
        g = std::gcd(q, n);
        k += m;
      } while (k < r && g == 1);
      r <<= 1;
    } while (g == 1);
    if (g == n) {
      do {
        ys = f(ys);
        g = std::gcd(x > ys ? x - ys : ys - x, n);
      } while (g == 1);
    }
    if (g != n) return g;
  }
}

inline void factor_into(std::uint64_t n, std::map<std::uint64_t, unsigned>& out) {
  if (n == 1) return;
  for (std::uint64_t p : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37})
    while (n % p == 0) {
      ++out[p];
      n /= p;
    }
  if (n == 1) return;
  if (is_prime(n)) {
    ++out[n];
    return;
  }
  const std::uint64_t d = pollard_brent(n);
  factor_into(d, out);
  factor_into(n / d, out);
}

}  // namespace detail

/// Prime factorization, primes ascending.
inline std::map<std::uint64_t, unsigned> factorize(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("factorize: zero");
  std::map<std::uint64_t, unsigned> out;
  detail::factor_into(n, out);
  return out;
}

// ---------------------------------------------------------------------------
// Multiplicative independence
// ---------------------------------------------------------------------------

enum class Dependence { Independent, Dependent, Undecidable };

/// Dependent carries the least positive (a, b) witness.
struct IndependenceVerdict {
  Dependence kind = Dependence::Independent;
  std::uint64_t a = 0, b = 0;
  std::string note;

  bool independent() const { return kind == Dependence::Independent; }
};

/// m ~ p iff m^a = p^b for some positive a, b, i.e. both are powers of one
/// integer. Decided on prime exponent vectors: a e_q(m) = b e_q(p) for all q.
inline IndependenceVerdict mult_indep_int(std::uint64_t m, std::uint64_t p) {
  if (m < 2 || p < 2) throw std::invalid_argument("mult_indep_int: m, p must be >= 2");
  const auto fm = factorize(m), fp = factorize(p);
  IndependenceVerdict v;
  if (fm.size() != fp.size()) return v;
  std::uint64_t a = 0, b = 0;
  for (auto im = fm.begin(), ip = fp.begin(); im != fm.end(); ++im, ++ip) {
    if (im->first != ip->first) return v;
    // a * em = b * ep with (a, b) = (ep, em) / gcd
    const std::uint64_t g = std::gcd<std::uint64_t>(im->second, ip->second);
    const std::uint64_t ca = ip->second / g, cb = im->second / g;
    if (a == 0) {
      a = ca;
      b = cb;
    } else if (a != ca || b != cb) {
      return v;
    }
  }
  return {Dependence::Dependent, a, b, "m^" + std::to_string(a) + " = p^" + std::to_string(b)};
}

/// r ~ m iff r^a m^b = 1 for positive a, b (r in (0,1)). Decided exactly on
/// exponent vectors of numerator/denominator; Undecidable when they do not
/// fit 64-bit factorization.
inline IndependenceVerdict mult_indep_ratio(const BigRational& r, std::uint64_t m) {
  if (m < 2) throw std::invalid_argument("mult_indep_ratio: m must be >= 2");
  if (r <= BigRational(0) || r >= BigRational(1)) throw std::invalid_argument("mult_indep_ratio: r must lie in (0,1)");
  const mpz_class num = r.num(), den = r.den();
  if (!num.fits_ulong_p() || !den.fits_ulong_p())
    return {Dependence::Undecidable, 0, 0, "numerator or denominator exceeds 64 bits"};
  std::map<std::uint64_t, long> er;
  for (auto [q, e] : factorize(num.get_ui())) er[q] += e;
  for (auto [q, e] : factorize(den.get_ui())) er[q] -= e;
  const auto em = factorize(m);
  // a e_r(q) + b e_m(q) = 0 for every prime q; fix the ratio at the smallest prime of m
  const auto [q0, e0] = *em.begin();
  const long r0 = er.count(q0) ? er[q0] : 0;
  IndependenceVerdict indep;
  if (r0 >= 0) return indep;
  const std::uint64_t g = std::gcd<std::uint64_t>(static_cast<std::uint64_t>(-r0), e0);
  const std::uint64_t a = e0 / g, b = static_cast<std::uint64_t>(-r0) / g;
  std::map<std::uint64_t, long> all = er;
  for (auto [q, e] : em) all[q];
  for (const auto& [q, unused] : all) {
    (void)unused;
    const long vr = er.count(q) ? er.at(q) : 0;
    const long vm = em.count(q) ? static_cast<long>(em.at(q)) : 0;
    if (static_cast<long>(a) * vr + static_cast<long>(b) * vm != 0) return indep;
  }
  return {Dependence::Dependent, a, b, "r^" + std::to_string(a) + " * m^" + std::to_string(b) + " = 1"};
}

inline const char* to_string(Dependence d) {
  switch (d) {
    case Dependence::Independent: return "Independent";
    case Dependence::Dependent: return "Dependent";
    default: return "Undecidable";
  }
}

inline nlohmann::json to_json(const IndependenceVerdict& v, const std::string& condition) {
  nlohmann::json j{{"condition", condition}, {"verdict", to_string(v.kind)}, {"exact", true}};
  if (v.kind == Dependence::Dependent) j["witness"] = {{"a", v.a}, {"b", v.b}};
  if (!v.note.empty()) j["note"] = v.note;
  return j;
}

// ---------------------------------------------------------------------------
// Spectral condition
// ---------------------------------------------------------------------------

enum class SpectralKind { Satisfied, Violated, SatisfiedUpTo, Vacuous, Unknown };

struct SpectralVerdict {
  SpectralKind kind = SpectralKind::Unknown;
  long q = 0, j = 0;     // witness for Violated
  long bound = 0;        // search bound B
  long precision_bits = 0;
  std::string note;
};

inline const char* to_string(SpectralKind k) {
  switch (k) {
    case SpectralKind::Satisfied: return "Satisfied";
    case SpectralKind::Violated: return "Violated";
    case SpectralKind::SatisfiedUpTo: return "SatisfiedUpTo";
    case SpectralKind::Vacuous: return "Vacuous";
    default: return "Unknown";
  }
}

/// Searches 1 <= q, j <= B for q k |log r| = j gamma log m, where gamma is the
/// common rotation angle in radians. A candidate from a double-precision
/// prefilter is tested in ball arithmetic; a difference ball containing zero
/// yields Violated(q, j), which means equality could not be excluded at
/// `bits` of precision. Otherwise SatisfiedUpTo(B).
inline SpectralVerdict spectral_search(std::uint64_t k, const Ball& abs_log_r, const Ball& gamma, std::uint64_t m,
                                       long B, long bits) {
  if (B < 1) throw std::invalid_argument("spectral_condition: bound must be >= 1");
  const auto prec = static_cast<mpfr_prec_t>(bits);
  SpectralVerdict v;
  v.bound = B;
  v.precision_bits = bits;
  if (gamma.exact() && gamma.center_double() == 0.0) {
    v.kind = SpectralKind::Satisfied;
    v.note = "gamma = 0: only q = 0 solves the relation";
    return v;
  }
  const Ball A = abs_log_r.mul_si(static_cast<long>(k));
  const Ball C = gamma * log(Ball::from_rational(BigRational(static_cast<long>(m)), prec));
  const double a = A.center_double(), c = C.center_double();
  for (long q = 1; q <= B; ++q) {
    const double target = static_cast<double>(q) * a / c;
    if (!(target >= 0.5) || target > static_cast<double>(B) + 0.5) continue;
    const long j = std::llround(target);
    if (std::fabs(static_cast<double>(q) * a - static_cast<double>(j) * c) > 1e-9 * static_cast<double>(q) * a) continue;
    if ((A.mul_si(q) - C.mul_si(j)).contains_zero()) {
      v.kind = SpectralKind::Violated;
      v.q = q;
      v.j = j;
      v.note = "relation holds to within 2^-" + std::to_string(bits) + "; equality not excluded";
      return v;
    }
  }
  v.kind = SpectralKind::SatisfiedUpTo;
  v.note = "no solution with 1 <= q, j <= " + std::to_string(B) + " at " + std::to_string(bits) + " bits";
  return v;
}

/// Condition on the pair (analysis, m): no q != 0 with q / log m in
/// Z gamma / (k |log r|).
inline SpectralVerdict spectral_condition(const IFSAnalysis& an, std::uint64_t m, long B, long bits) {
  SpectralVerdict v;
  v.bound = B;
  v.precision_bits = bits;
  if (!an.decided) {
    v.kind = SpectralKind::Unknown;
    v.note = "rotation data outside the decidable class";
    return v;
  }
  if (!an.k_phi) {
    v.kind = SpectralKind::Vacuous;
    v.note = "k_phi is infinite; the condition is vacuous";
    return v;
  }
  if (!an.uniform_ratio) {
    v.kind = SpectralKind::Unknown;
    v.note = "contraction ratios are not uniform";
    return v;
  }
  if (an.gamma.rational() && *an.gamma.turns == BigRational(0)) {
    v.kind = SpectralKind::Satisfied;
    v.note = "gamma = 0: only q = 0 solves the relation";
    return v;
  }
  const auto prec = static_cast<mpfr_prec_t>(bits);
  const Ball abs_log_r = -log(Ball::from_rational(*an.uniform_ratio, prec));
  return spectral_search(*an.k_phi, abs_log_r, an.gamma.radians_ball(prec), m, B, bits);
}

inline nlohmann::json to_json(const SpectralVerdict& v, const std::string& condition) {
  nlohmann::json j{{"condition", condition},
                   {"verdict", to_string(v.kind)},
                   {"bound", v.bound},
                   {"precision", v.precision_bits},
                   {"exact", v.kind == SpectralKind::Satisfied || v.kind == SpectralKind::Vacuous}};
  if (v.kind == SpectralKind::Violated) j["witness"] = {{"q", v.q}, {"j", v.j}};
  if (!v.note.empty()) j["note"] = v.note;
  return j;
}

}  // namespace torus_equidist
