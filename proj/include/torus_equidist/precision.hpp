#pragma once

// Arithmetic substrate: exact rationals, error-tracked arbitrary-precision
// reals ("balls") and finite base-b digit expansions.

#include <gmpxx.h>
#include <mpfr.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "core.hpp"

namespace torus_equidist {

// ---------------------------------------------------------------------------
// BigRational
// ---------------------------------------------------------------------------

/// Exact rational in lowest terms with positive denominator.
class BigRational {
 public:
  BigRational() = default;
  BigRational(long v) : q_(v) {}  // NOLINT(google-explicit-constructor)
  BigRational(const mpz_class& num, const mpz_class& den) {
    if (den == 0) throw std::domain_error("BigRational: zero denominator");
    q_ = mpq_class(num, den);
    q_.canonicalize();
  }
  explicit BigRational(mpq_class q) : q_(std::move(q)) { q_.canonicalize(); }

  /// Accepts "a", "-a", "a/b". Throws std::invalid_argument otherwise.
  static BigRational parse(std::string_view text) {
    std::string s(text);
    auto valid_int = [](const std::string& t) {
      if (t.empty()) return false;
      std::size_t i = (t[0] == '-' || t[0] == '+') ? 1 : 0;
      if (i == t.size()) return false;
      return std::all_of(t.begin() + static_cast<std::ptrdiff_t>(i), t.end(),
                         [](char c) { return c >= '0' && c <= '9'; });
    };
    auto strip_plus = [](std::string t) { return (!t.empty() && t[0] == '+') ? t.substr(1) : t; };
    const auto slash = s.find('/');
    if (slash == std::string::npos) {
      if (!valid_int(s)) throw std::invalid_argument("not a rational: '" + s + "'");
      return BigRational(mpz_class(strip_plus(s)), mpz_class(1));
    }
    const std::string a = s.substr(0, slash), b = s.substr(slash + 1);
    if (!valid_int(a) || !valid_int(b) || b[0] == '-')
      throw std::invalid_argument("not a rational: '" + s + "'");
    const mpz_class den(strip_plus(b));
    if (den == 0) throw std::invalid_argument("zero denominator: '" + s + "'");
    return BigRational(mpz_class(strip_plus(a)), den);
  }

  const mpq_class& mpq() const { return q_; }
  mpz_class num() const { return q_.get_num(); }
  mpz_class den() const { return q_.get_den(); }

  std::string to_string() const {
    if (q_.get_den() == 1) return q_.get_num().get_str();
    return q_.get_num().get_str() + "/" + q_.get_den().get_str();
  }
  /// Truncating conversion (error below one ulp).
  double to_double() const { return q_.get_d(); }

  mpz_class floor() const {
    mpz_class f;
    mpz_fdiv_q(f.get_mpz_t(), q_.get_num_mpz_t(), q_.get_den_mpz_t());
    return f;
  }
  /// Fractional part in [0,1).
  BigRational frac() const {
    mpz_class r;
    mpz_fdiv_r(r.get_mpz_t(), q_.get_num_mpz_t(), q_.get_den_mpz_t());
    return BigRational(r, q_.get_den());
  }

  friend BigRational operator+(const BigRational& a, const BigRational& b) {
    return BigRational(mpq_class(a.q_ + b.q_));
  }
  friend BigRational operator-(const BigRational& a, const BigRational& b) {
    return BigRational(mpq_class(a.q_ - b.q_));
  }
  friend BigRational operator*(const BigRational& a, const BigRational& b) {
    return BigRational(mpq_class(a.q_ * b.q_));
  }
  friend BigRational operator/(const BigRational& a, const BigRational& b) {
    if (b.q_ == 0) throw std::domain_error("BigRational: division by zero");
    return BigRational(mpq_class(a.q_ / b.q_));
  }
  BigRational operator-() const { return BigRational(mpq_class(-q_)); }

  friend bool operator==(const BigRational& a, const BigRational& b) { return a.q_ == b.q_; }
  friend bool operator<(const BigRational& a, const BigRational& b) { return a.q_ < b.q_; }
  friend bool operator<=(const BigRational& a, const BigRational& b) { return a.q_ <= b.q_; }
  friend bool operator>(const BigRational& a, const BigRational& b) { return a.q_ > b.q_; }
  friend bool operator>=(const BigRational& a, const BigRational& b) { return a.q_ >= b.q_; }

 private:
  mpq_class q_;
};

inline BigRational pow(const BigRational& q, unsigned long e) {
  mpz_class n, d;
  mpz_pow_ui(n.get_mpz_t(), q.mpq().get_num_mpz_t(), e);
  mpz_pow_ui(d.get_mpz_t(), q.mpq().get_den_mpz_t(), e);
  return BigRational(n, d);
}

// ---------------------------------------------------------------------------
// BigFloat: RAII over mpfr_t
// ---------------------------------------------------------------------------

class BigFloat {
 public:
  explicit BigFloat(mpfr_prec_t prec = 64) {
    mpfr_init2(v_, prec);
    mpfr_set_zero(v_, 1);
  }
  BigFloat(const BigFloat& o) {
    mpfr_init2(v_, mpfr_get_prec(o.v_));
    mpfr_set(v_, o.v_, MPFR_RNDN);
  }
  BigFloat(BigFloat&& o) noexcept {
    mpfr_init2(v_, MPFR_PREC_MIN);
    mpfr_swap(v_, o.v_);
  }
  BigFloat& operator=(const BigFloat& o) {
    if (this != &o) {
      mpfr_set_prec(v_, mpfr_get_prec(o.v_));
      mpfr_set(v_, o.v_, MPFR_RNDN);
    }
    return *this;
  }
  BigFloat& operator=(BigFloat&& o) noexcept {
    mpfr_swap(v_, o.v_);
    return *this;
  }
  ~BigFloat() { mpfr_clear(v_); }

  mpfr_ptr get() { return v_; }
  mpfr_srcptr get() const { return v_; }
  mpfr_prec_t prec() const { return mpfr_get_prec(v_); }

  /// Exact value as a rational (every finite binary float is dyadic).
  BigRational to_rational() const {
    if (mpfr_zero_p(v_)) return BigRational(0);
    if (!mpfr_number_p(v_)) throw std::domain_error("BigFloat: non-finite value");
    mpz_class m;
    const mpfr_exp_t e = mpfr_get_z_2exp(m.get_mpz_t(), v_);
    if (e >= 0) {
      mpz_class r;
      mpz_mul_2exp(r.get_mpz_t(), m.get_mpz_t(), static_cast<mp_bitcnt_t>(e));
      return BigRational(r, mpz_class(1));
    }
    mpz_class d;
    mpz_ui_pow_ui(d.get_mpz_t(), 2, static_cast<unsigned long>(-e));
    return BigRational(m, d);
  }

 private:
  mpfr_t v_;
};

// ---------------------------------------------------------------------------
// Ball
// ---------------------------------------------------------------------------

/// A real number known to lie in [center - radius, center + radius].
///
/// Centers are binary floats of caller-chosen precision, rounded to nearest;
/// every inexact center operation inflates the radius by one ulp of the
/// result. Radii are 64-bit binary floats with the full MPFR exponent range,
/// always rounded upward, so they never silently shrink.
class Ball {
 public:
  static constexpr mpfr_prec_t kRadiusPrec = 64;

  explicit Ball(mpfr_prec_t prec = 128) : c_(prec), r_(kRadiusPrec) {}

  static Ball from_rational(const BigRational& q, mpfr_prec_t prec) {
    Ball b(prec);
    const int t = mpfr_set_q(b.c_.get(), q.mpq().get_mpq_t(), MPFR_RNDN);
    b.add_rounding_error(t);
    return b;
  }
  static Ball from_double(double center, double radius, mpfr_prec_t prec) {
    if (!(radius >= 0.0)) throw std::invalid_argument("Ball: negative radius");
    Ball b(std::max<mpfr_prec_t>(prec, 53));
    mpfr_set_d(b.c_.get(), center, MPFR_RNDN);
    mpfr_set_d(b.r_.get(), radius, MPFR_RNDU);
    return b;
  }
  /// Decimal literal (e.g. "1.2618595071429148") taken as exact, then rounded.
  static Ball from_decimal(const std::string& text, mpfr_prec_t prec) {
    Ball b(prec);
    char* end = nullptr;
    const int t = mpfr_strtofr(b.c_.get(), text.c_str(), &end, 10, MPFR_RNDN);
    if (end == text.c_str() || *end != '\0')
      throw std::invalid_argument("Ball: not a decimal number: '" + text + "'");
    b.add_rounding_error(t);
    return b;
  }
  static Ball pi(mpfr_prec_t prec) {
    Ball b(prec);
    b.add_rounding_error(mpfr_const_pi(b.c_.get(), MPFR_RNDN));
    return b;
  }

  mpfr_prec_t precision() const { return c_.prec(); }
  const BigFloat& center() const { return c_; }
  const BigFloat& radius() const { return r_; }
  double center_double() const { return mpfr_get_d(c_.get(), MPFR_RNDN); }
  /// Upper bound of the radius as a double (underflows to the least subnormal,
  /// never to zero, for nonzero radii).
  double radius_double() const { return mpfr_get_d(r_.get(), MPFR_RNDU); }
  bool exact() const { return mpfr_zero_p(r_.get()) != 0; }

  BigRational lower() const { return c_.to_rational() - r_.to_rational(); }
  BigRational upper() const { return c_.to_rational() + r_.to_rational(); }
  /// Double that is <= every point of the ball.
  double lower_double() const {
    BigFloat t(kRadiusPrec);
    mpfr_sub(t.get(), c_.get(), r_.get(), MPFR_RNDD);
    return mpfr_get_d(t.get(), MPFR_RNDD);
  }
  /// Double that is >= every point of the ball.
  double upper_double() const {
    BigFloat t(kRadiusPrec);
    mpfr_add(t.get(), c_.get(), r_.get(), MPFR_RNDU);
    return mpfr_get_d(t.get(), MPFR_RNDU);
  }

  bool contains(const BigRational& q) const { return lower() <= q && q <= upper(); }
  bool contains_zero() const {
    BigFloat a(kRadiusPrec);
    mpfr_abs(a.get(), c_.get(), MPFR_RNDD);
    return mpfr_lessequal_p(a.get(), r_.get()) != 0;
  }

  /// radius <= extra is added (extra must be an upper bound; rounded up).
  Ball& inflate(const BigFloat& extra) {
    mpfr_add(r_.get(), r_.get(), extra.get(), MPFR_RNDU);
    return *this;
  }
  Ball& inflate(double extra) {
    BigFloat e(kRadiusPrec);
    mpfr_set_d(e.get(), extra, MPFR_RNDU);
    return inflate(e);
  }

  /// True iff radius <= 2^(-extra_bits) * base^(-exponent).
  bool radius_at_most(unsigned long base, unsigned long exponent, long extra_bits) const {
    BigFloat bound(kRadiusPrec);
    mpfr_ui_pow_ui(bound.get(), base, exponent, MPFR_RNDU);
    mpfr_ui_div(bound.get(), 1, bound.get(), MPFR_RNDD);
    mpfr_div_2si(bound.get(), bound.get(), extra_bits, MPFR_RNDD);
    return mpfr_lessequal_p(r_.get(), bound.get()) != 0;
  }

  friend Ball operator+(const Ball& a, const Ball& b) {
    Ball out(std::max(a.precision(), b.precision()));
    const int t = mpfr_add(out.c_.get(), a.c_.get(), b.c_.get(), MPFR_RNDN);
    mpfr_add(out.r_.get(), a.r_.get(), b.r_.get(), MPFR_RNDU);
    out.add_rounding_error(t);
    return out;
  }
  friend Ball operator-(const Ball& a, const Ball& b) {
    Ball out(std::max(a.precision(), b.precision()));
    const int t = mpfr_sub(out.c_.get(), a.c_.get(), b.c_.get(), MPFR_RNDN);
    mpfr_add(out.r_.get(), a.r_.get(), b.r_.get(), MPFR_RNDU);
    out.add_rounding_error(t);
    return out;
  }
  Ball operator-() const {
    Ball out(*this);
    mpfr_neg(out.c_.get(), out.c_.get(), MPFR_RNDN);
    return out;
  }
  friend Ball operator*(const Ball& a, const Ball& b) {
    Ball out(std::max(a.precision(), b.precision()));
    const int t = mpfr_mul(out.c_.get(), a.c_.get(), b.c_.get(), MPFR_RNDN);
    // |ab - ca*cb| <= |ca| rb + |cb| ra + ra rb
    BigFloat acc(kRadiusPrec), tmp(kRadiusPrec);
    mpfr_abs(tmp.get(), a.c_.get(), MPFR_RNDU);
    mpfr_mul(acc.get(), tmp.get(), b.r_.get(), MPFR_RNDU);
    mpfr_abs(tmp.get(), b.c_.get(), MPFR_RNDU);
    mpfr_mul(tmp.get(), tmp.get(), a.r_.get(), MPFR_RNDU);
    mpfr_add(acc.get(), acc.get(), tmp.get(), MPFR_RNDU);
    mpfr_mul(tmp.get(), a.r_.get(), b.r_.get(), MPFR_RNDU);
    mpfr_add(out.r_.get(), acc.get(), tmp.get(), MPFR_RNDU);
    out.add_rounding_error(t);
    return out;
  }
  friend Ball operator/(const Ball& a, const Ball& b) {
    if (b.contains_zero()) throw std::domain_error("Ball: division by a ball containing zero");
    Ball out(std::max(a.precision(), b.precision()));
    const int t = mpfr_div(out.c_.get(), a.c_.get(), b.c_.get(), MPFR_RNDN);
    // |a/b - ca/cb| <= (ra + |ca/cb| rb) / (|cb| - rb)
    BigFloat q(kRadiusPrec), num(kRadiusPrec), den(kRadiusPrec), ulp(kRadiusPrec);
    mpfr_abs(q.get(), out.c_.get(), MPFR_RNDU);
    out.ulp_of_center(ulp);
    mpfr_add(q.get(), q.get(), ulp.get(), MPFR_RNDU);
    mpfr_mul(num.get(), q.get(), b.r_.get(), MPFR_RNDU);
    mpfr_add(num.get(), num.get(), a.r_.get(), MPFR_RNDU);
    mpfr_abs(den.get(), b.c_.get(), MPFR_RNDD);
    mpfr_sub(den.get(), den.get(), b.r_.get(), MPFR_RNDD);
    mpfr_div(out.r_.get(), num.get(), den.get(), MPFR_RNDU);
    out.add_rounding_error(t);
    return out;
  }

  Ball mul_si(long k) const {
    Ball out(precision());
    const int t = mpfr_mul_si(out.c_.get(), c_.get(), k, MPFR_RNDN);
    mpfr_mul_ui(out.r_.get(), r_.get(), static_cast<unsigned long>(k < 0 ? -k : k), MPFR_RNDU);
    out.add_rounding_error(t);
    return out;
  }

  friend Ball sin(const Ball& a) { return a.lipschitz_one(mpfr_sin); }
  friend Ball cos(const Ball& a) { return a.lipschitz_one(mpfr_cos); }
  friend Ball exp(const Ball& a) {
    Ball out(a.precision());
    const int t = mpfr_exp(out.c_.get(), a.c_.get(), MPFR_RNDN);
    // |e^x - e^c| <= e^(c+r) r
    BigFloat hi(kRadiusPrec);
    mpfr_add(hi.get(), a.c_.get(), a.r_.get(), MPFR_RNDU);
    mpfr_exp(hi.get(), hi.get(), MPFR_RNDU);
    mpfr_mul(out.r_.get(), hi.get(), a.r_.get(), MPFR_RNDU);
    out.add_rounding_error(t);
    return out;
  }
  friend Ball log(const Ball& a) {
    BigFloat lo(kRadiusPrec);
    mpfr_sub(lo.get(), a.c_.get(), a.r_.get(), MPFR_RNDD);
    if (mpfr_sgn(lo.get()) <= 0) throw std::domain_error("Ball: log of a non-positive ball");
    Ball out(a.precision());
    const int t = mpfr_log(out.c_.get(), a.c_.get(), MPFR_RNDN);
    mpfr_div(out.r_.get(), a.r_.get(), lo.get(), MPFR_RNDU);
    out.add_rounding_error(t);
    return out;
  }
  friend Ball abs(const Ball& a) {
    Ball out(a);
    mpfr_abs(out.c_.get(), out.c_.get(), MPFR_RNDN);
    return out;
  }

  /// Reduction mod 1 into [0,1); fails when the ball straddles an integer.
  Certified<Ball> frac() const {
    const BigRational lo = lower(), hi = upper();
    const mpz_class fl = lo.floor();
    if (fl != hi.floor() || BigRational(fl + 1, mpz_class(1)) <= hi)
      return InsufficientPrecision{"ball straddles an integer"};
    if (fl == 0) return *this;
    Ball out(precision());
    const int t = mpfr_sub_z(out.c_.get(), c_.get(), fl.get_mpz_t(), MPFR_RNDN);
    mpfr_set(out.r_.get(), r_.get(), MPFR_RNDU);
    out.add_rounding_error(t);
    return out;
  }

 private:
  template <class Fn>
  Ball lipschitz_one(Fn fn) const {
    Ball out(precision());
    const int t = fn(out.c_.get(), c_.get(), MPFR_RNDN);
    mpfr_set(out.r_.get(), r_.get(), MPFR_RNDU);
    out.add_rounding_error(t);
    return out;
  }

  void ulp_of_center(BigFloat& ulp) const {
    if (mpfr_zero_p(c_.get()) || !mpfr_regular_p(c_.get())) {
      mpfr_set_ui_2exp(ulp.get(), 1, mpfr_get_emin(), MPFR_RNDU);
      return;
    }
    mpfr_set_ui_2exp(ulp.get(), 1, mpfr_get_exp(c_.get()) - precision(), MPFR_RNDU);
  }

  void add_rounding_error(int ternary) {
    if (ternary == 0) return;
    BigFloat ulp(kRadiusPrec);
    ulp_of_center(ulp);
    mpfr_add(r_.get(), r_.get(), ulp.get(), MPFR_RNDU);
  }

  BigFloat c_;
  BigFloat r_;
};

/// Upper bound (64-bit, rounded up) of q^e for q > 0.
inline BigFloat upper_bound_pow(const BigRational& q, unsigned long e) {
  BigFloat out(Ball::kRadiusPrec);
  mpfr_set_q(out.get(), q.mpq().get_mpq_t(), MPFR_RNDU);
  mpfr_pow_ui(out.get(), out.get(), e, MPFR_RNDU);
  return out;
}

// ---------------------------------------------------------------------------
// DigitString
// ---------------------------------------------------------------------------

/// Finite base-b expansion 0.d1 d2 ... dL, value = sum d_j b^-j in [0,1).
/// The map x -> b x mod 1 acts on it as the left shift.
struct DigitString {
  unsigned base = 2;
  std::vector<std::uint16_t> digits;

  DigitString() = default;
  DigitString(unsigned b, std::vector<std::uint16_t> d) : base(b), digits(std::move(d)) {
    if (base < 2 || base > 65535) throw std::invalid_argument("DigitString: base out of range");
    for (auto v : digits)
      if (v >= base) throw std::invalid_argument("DigitString: digit out of range");
  }

  std::size_t length() const { return digits.size(); }
  friend bool operator==(const DigitString&, const DigitString&) = default;
};

namespace detail {

inline int digit_value(char ch, unsigned base) {
  if (ch >= '0' && ch <= '9') return ch - '0';
  if (base <= 36) return ch - 'a' + 10;
  if (ch >= 'A' && ch <= 'Z') return ch - 'A' + 10;
  return ch - 'a' + 36;
}

inline char digit_char(unsigned v, unsigned base) {
  if (v < 10) return static_cast<char>('0' + v);
  if (base <= 36) return static_cast<char>('a' + v - 10);
  if (v < 36) return static_cast<char>('A' + v - 10);
  return static_cast<char>('a' + v - 36);
}

/// The `count` lowest base-b digits of n >= 0, most significant first.
inline std::vector<std::uint16_t> integer_to_digits(const mpz_class& n, unsigned base, std::size_t count) {
  std::vector<std::uint16_t> out(count, 0);
  if (n == 0 || count == 0) return out;
  if (base <= 62) {
    const std::string s = n.get_str(static_cast<int>(base));
    if (s.size() > count) throw std::logic_error("integer_to_digits: value exceeds digit budget");
    const std::size_t off = count - s.size();
    for (std::size_t i = 0; i < s.size(); ++i)
      out[off + i] = static_cast<std::uint16_t>(digit_value(s[i], base));
    return out;
  }
  mpz_class q = n;
  for (std::size_t i = count; i-- > 0 && q != 0;)
    out[i] = static_cast<std::uint16_t>(mpz_fdiv_q_ui(q.get_mpz_t(), q.get_mpz_t(), base));
  if (q != 0) throw std::logic_error("integer_to_digits: value exceeds digit budget");
  return out;
}

inline mpz_class digits_to_integer(std::span<const std::uint16_t> digits, unsigned base) {
  if (digits.empty()) return 0;
  if (base <= 62) {
    std::string s(digits.size(), '0');
    for (std::size_t i = 0; i < digits.size(); ++i) s[i] = digit_char(digits[i], base);
    return mpz_class(s, static_cast<int>(base));
  }
  mpz_class acc = 0;
  for (auto d : digits) acc = acc * base + d;
  return acc;
}

inline mpz_class upow(unsigned long base, unsigned long e) {
  mpz_class out;
  mpz_ui_pow_ui(out.get_mpz_t(), base, e);
  return out;
}

inline DigitString floor_digits(const BigRational& x, unsigned base, std::size_t count) {
  mpz_class scaled = x.num() * upow(base, count);
  mpz_fdiv_q(scaled.get_mpz_t(), scaled.get_mpz_t(), x.mpq().get_den_mpz_t());
  return DigitString(base, integer_to_digits(scaled, base, count));
}

}  // namespace detail

/// First `count` base-b digits of x in [0,1) (long division; grid points take
/// the terminating expansion).
inline DigitString rational_digits(const BigRational& x, unsigned base, std::size_t count) {
  if (base < 2) throw std::invalid_argument("rational_digits: base must be >= 2");
  if (x < BigRational(0) || x >= BigRational(1))
    throw std::domain_error("rational_digits: x outside [0,1): " + x.to_string());
  return detail::floor_digits(x, base, count);
}

/// Digits certified for every point of the ball, or InsufficientPrecision when
/// the ball straddles a base^-count grid line (or the ends of [0,1)).
inline Certified<DigitString> ball_digits(const Ball& x, unsigned base, std::size_t count) {
  if (base < 2) throw std::invalid_argument("ball_digits: base must be >= 2");
  const BigRational lo = x.lower(), hi = x.upper();
  if (hi < BigRational(0) || lo >= BigRational(1))
    throw std::domain_error("ball_digits: ball outside [0,1)");
  if (lo < BigRational(0) || hi >= BigRational(1))
    return InsufficientPrecision{"ball straddles an end of [0,1)"};
  DigitString a = detail::floor_digits(lo, base, count);
  DigitString b = detail::floor_digits(hi, base, count);
  if (a != b)
    return InsufficientPrecision{"ball straddles a base-" + std::to_string(base) + " grid line at depth <= " +
                                 std::to_string(count)};
  return a;
}

/// Value of the digits after position k, i.e. T_b^k applied to value(d) up to
/// the truncation of the string.
inline BigRational suffix_point(const DigitString& d, std::size_t k) {
  if (k >= d.length() && !(k == 0 && d.length() == 0))
    throw std::out_of_range("suffix_point: shift " + std::to_string(k) + " out of range");
  const std::span<const std::uint16_t> tail(d.digits.data() + k, d.length() - k);
  return BigRational(detail::digits_to_integer(tail, d.base), detail::upow(d.base, tail.size()));
}

inline BigRational value(const DigitString& d) {
  if (d.length() == 0) return BigRational(0);
  return suffix_point(d, 0);
}

}  // namespace torus_equidist
