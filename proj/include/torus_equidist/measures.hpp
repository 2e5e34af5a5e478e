#pragma once

// Samplers, codings and closed-form quantities of the measure classes.

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "dynamics.hpp"
#include "empirical.hpp"
#include "measure_spec.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace torus_equidist {

// ---------------------------------------------------------------------------
// Coding: symbol alphabet, symbol probabilities, word -> point
// ---------------------------------------------------------------------------

/// Symbolic coding of a spec. Digit measures use one symbol per digit (or per
/// digit pair, dx * base_y + dy); IFS specs use one symbol per branch.
class Coding {
 public:
  explicit Coding(MeasureSpec spec) : spec_(std::move(spec)) {
    validate(spec_);
    std::visit([this](const auto& s) { init(s); }, spec_);
    sampler_ = Categorical(probs_);
  }

  const MeasureSpec& spec() const { return spec_; }
  std::size_t symbols() const { return probs_.size(); }
  const std::vector<double>& probabilities() const { return probs_; }
  std::uint32_t draw(Rng& rng) const { return static_cast<std::uint32_t>(sampler_(rng)); }

  /// Contraction of one symbol (the cell side for digit measures, the
  /// larger side for mixed bases).
  double contraction(std::uint32_t s) const { return ratio_[s]; }

  /// Coding map in double precision: digits summed from the deepest one,
  /// IFS maps composed innermost first and applied to the origin.
  Point2 point(std::span<const std::uint32_t> word) const {
    double x = 0.0, y = 0.0;
    for (std::size_t j = word.size(); j-- > 0;) {
      const auto& a = maps_[word[j]];
      const double nx = a.a * x - a.b * y + a.tx;
      const double ny = a.b * x + a.d * y + a.ty;
      x = nx;
      y = ny;
    }
    if (line_) return {x, slope_ * x + intercept_};
    return {x, y};
  }

 private:
  // z -> [[a, -b], [b, d]] z + t. Digit measures are diagonal (b = 0).
  struct Affine {
    double a, b, d, tx, ty;
  };

  void init(const Bernoulli1D& s) {
    for (unsigned k = 0; k < s.base; ++k) {
      probs_.push_back(s.weights[k].to_double());
      maps_.push_back({1.0 / s.base, 0.0, 0.0, static_cast<double>(k) / s.base, 0.0});
      ratio_.push_back(1.0 / s.base);
    }
  }
  void init(const ProductBernoulli& s) { init_pairs(s.base, s.base, s.weights); }
  void init(const MixedBaseBernoulli& s) { init_pairs(s.base_x, s.base_y, s.weights); }
  void init_pairs(unsigned px, unsigned py, const std::vector<std::vector<BigRational>>& w) {
    for (unsigned dx = 0; dx < px; ++dx)
      for (unsigned dy = 0; dy < py; ++dy) {
        probs_.push_back(w[dx][dy].to_double());
        maps_.push_back({1.0 / px, 0.0, 1.0 / py, static_cast<double>(dx) / px, static_cast<double>(dy) / py});
        ratio_.push_back(1.0 / std::min(px, py));
      }
  }
  void init(const PlanarIFS& s) {
    for (std::size_t k = 0; k < s.branches.size(); ++k) {
      const auto& br = s.branches[k];
      const double r = br.ratio.to_double();
      double c, sn;
      if (br.angle.quarter_turn()) {
        c = static_cast<double>(br.angle.quarter_cos());
        sn = static_cast<double>(br.angle.quarter_sin());
      } else {
        const double th = br.angle.radians_double();
        c = std::cos(th);
        sn = std::sin(th);
      }
      probs_.push_back(s.weights[k].to_double());
      maps_.push_back({r * c, r * sn, r * c, br.tx.to_double(), br.ty.to_double()});
      ratio_.push_back(r);
    }
  }
  void init(const LineEmbedding& s) {
    init(s.digits);
    line_ = true;
    slope_ = s.slope.to_double();
    intercept_ = s.intercept.to_double();
  }

  MeasureSpec spec_;
  std::vector<double> probs_;
  std::vector<Affine> maps_;
  std::vector<double> ratio_;
  Categorical sampler_;
  bool line_ = false;
  double slope_ = 1.0, intercept_ = 0.0;
};

// ---------------------------------------------------------------------------
// IFS bounding ball
// ---------------------------------------------------------------------------

/// Closed disk B(c, R) mapped into itself by every branch, hence containing
/// the attractor. c is the mean of the branch fixed points (a double, used as
/// an exact dyadic); R = max_k |phi_k(c) - c| / (1 - r_k), rounded up.
struct BoundingBall {
  double cx = 0.0, cy = 0.0;
  double radius = 0.0;
};

inline BoundingBall bounding_ball(const PlanarIFS& ifs) {
  validate(ifs);
  BoundingBall out;
  // fixed point of z -> rRz + t solves (I - rR) z = t
  for (const auto& br : ifs.branches) {
    const double r = br.ratio.to_double(), th = br.angle.radians_double();
    const double a = 1.0 - r * std::cos(th), b = r * std::sin(th);
    const double det = a * a + b * b;
    const double tx = br.tx.to_double(), ty = br.ty.to_double();
    out.cx += (a * tx - b * ty) / det;
    out.cy += (b * tx + a * ty) / det;
  }
  out.cx /= static_cast<double>(ifs.branches.size());
  out.cy /= static_cast<double>(ifs.branches.size());

  constexpr mpfr_prec_t prec = 128;
  const Ball cx = Ball::from_double(out.cx, 0.0, prec), cy = Ball::from_double(out.cy, 0.0, prec);
  for (const auto& br : ifs.branches) {
    const Ball r = Ball::from_rational(br.ratio, prec);
    const Ball c = br.angle.cos_ball(prec), s = br.angle.sin_ball(prec);
    const Ball dx = r * (c * cx - s * cy) + Ball::from_rational(br.tx, prec) - cx;
    const Ball dy = r * (s * cx + c * cy) + Ball::from_rational(br.ty, prec) - cy;
    const double ux = std::max(std::fabs(dx.lower_double()), std::fabs(dx.upper_double()));
    const double uy = std::max(std::fabs(dy.lower_double()), std::fabs(dy.upper_double()));
    double d = std::nextafter(std::sqrt(std::nextafter(ux * ux + uy * uy, HUGE_VAL)), HUGE_VAL);
    // 1 - r_k rounded down
    const double gap = std::nextafter(1.0 - br.ratio.to_double(), 0.0) * (1.0 - 0x1.0p-50);
    out.radius = std::max(out.radius, std::nextafter(d / gap, HUGE_VAL));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exact / certified sampling
// ---------------------------------------------------------------------------

struct MeasureSample {
  TorusPoint point;
  std::vector<std::uint32_t> word;
};

namespace detail {

inline BigRational digits_value(std::span<const std::uint32_t> digits, unsigned base) {
  mpz_class acc = 0;
  if (base <= 62 && !digits.empty()) {
    // string conversion is subquadratic in GMP; matters for words of 10^5 digits
    std::string s(digits.size(), '0');
    for (std::size_t i = 0; i < digits.size(); ++i) s[i] = digit_char(digits[i], base);
    acc.set_str(s, static_cast<int>(base));
  } else {
    for (auto d : digits) acc = acc * base + d;
  }
  return BigRational(acc, upow(base, digits.size()));
}

/// phi_{w_1} o ... o phi_{w_D}(c) in ball arithmetic, widened by the cylinder
/// radius r_w * R so the result contains every attractor point coded by w.
inline TorusPoint ifs_point(const PlanarIFS& ifs, std::span<const std::uint32_t> word, long prec_bits) {
  const BoundingBall bb = bounding_ball(ifs);
  if (prec_bits <= 0) {
    double bits = 64.0;
    for (auto s : word) bits += std::log2(1.0 / ifs.branches[s].ratio.to_double());
    prec_bits = static_cast<long>(std::ceil(bits));
  }
  const auto prec = static_cast<mpfr_prec_t>(prec_bits);
  struct Map {
    Ball a, b, tx, ty;
  };
  std::vector<Map> maps;
  for (const auto& br : ifs.branches) {
    const Ball r = Ball::from_rational(br.ratio, prec);
    maps.push_back({r * br.angle.cos_ball(prec), r * br.angle.sin_ball(prec), Ball::from_rational(br.tx, prec),
                    Ball::from_rational(br.ty, prec)});
  }
  Ball x = Ball::from_double(bb.cx, 0.0, prec), y = Ball::from_double(bb.cy, 0.0, prec);
  BigFloat cyl(Ball::kRadiusPrec);
  mpfr_set_d(cyl.get(), bb.radius, MPFR_RNDU);
  for (std::size_t j = word.size(); j-- > 0;) {
    const Map& m = maps[word[j]];
    Ball nx = m.a * x - m.b * y + m.tx;
    Ball ny = m.b * x + m.a * y + m.ty;
    x = std::move(nx);
    y = std::move(ny);
    BigFloat r(Ball::kRadiusPrec);
    mpfr_set_q(r.get(), ifs.branches[word[j]].ratio.mpq().get_mpq_t(), MPFR_RNDU);
    mpfr_mul(cyl.get(), cyl.get(), r.get(), MPFR_RNDU);
  }
  x.inflate(cyl);
  y.inflate(cyl);
  return TorusPoint(std::move(x), std::move(y));
}

}  // namespace detail

/// The point coded by a given word. Digit measures give exact rationals with
/// denominator dividing base^D; IFS specs give Balls (precision in bits, 0 =
/// enough for the cylinder radius).
inline MeasureSample sample_from_word(const MeasureSpec& spec, std::vector<std::uint32_t> word, long prec_bits = 0) {
  validate(spec);
  TorusPoint pt = std::visit(
      [&](const auto& s) -> TorusPoint {
        using T = std::decay_t<decltype(s)>;
        const std::size_t D = word.size();
        if constexpr (std::is_same_v<T, Bernoulli1D>) {
          for (auto w : word)
            if (w >= s.base) throw std::out_of_range("sample_from_word: digit out of range");
          return TorusPoint(detail::digits_value(word, s.base), BigRational(0));
        } else if constexpr (std::is_same_v<T, ProductBernoulli> || std::is_same_v<T, MixedBaseBernoulli>) {
          unsigned px, py;
          if constexpr (std::is_same_v<T, ProductBernoulli>) {
            px = py = s.base;
          } else {
            px = s.base_x;
            py = s.base_y;
          }
          std::vector<std::uint32_t> xs(D), ys(D);
          for (std::size_t k = 0; k < D; ++k) {
            if (word[k] >= px * py) throw std::out_of_range("sample_from_word: symbol out of range");
            xs[k] = word[k] / py;
            ys[k] = word[k] % py;
          }
          return TorusPoint(detail::digits_value(xs, px), detail::digits_value(ys, py));
        } else if constexpr (std::is_same_v<T, PlanarIFS>) {
          for (auto w : word)
            if (w >= s.branches.size()) throw std::out_of_range("sample_from_word: branch out of range");
          return detail::ifs_point(s, word, prec_bits);
        } else {
          for (auto w : word)
            if (w >= s.digits.base) throw std::out_of_range("sample_from_word: digit out of range");
          const BigRational u = detail::digits_value(word, s.digits.base);
          return TorusPoint(u, s.slope * u + s.intercept);
        }
      },
      spec);
  return MeasureSample{std::move(pt), std::move(word)};
}

/// A random point of the measure at coding depth D, deterministic in `seed`.
inline MeasureSample sample(const MeasureSpec& spec, std::size_t depth, std::uint64_t seed, long prec_bits = 0) {
  if (depth < 1) throw std::invalid_argument("sample: depth must be >= 1");
  const Coding coding(spec);
  Rng rng = make_rng(seed, 0);
  std::vector<std::uint32_t> word(depth);
  for (auto& w : word) w = coding.draw(rng);
  return sample_from_word(spec, std::move(word), prec_bits);
}

/// `count` double-precision samples at coding depth D. Samples are drawn in
/// fixed blocks, one PRNG stream per block, so output is independent of the
/// worker count.
inline EmpiricalMeasure2D sample_cloud(const MeasureSpec& spec, std::size_t count, std::size_t depth, std::uint64_t seed) {
  const Coding coding(spec);
  constexpr std::size_t kBlock = 4096;
  std::vector<Point2> pts(count);
  const std::size_t blocks = (count + kBlock - 1) / kBlock;
  parallel_for(blocks, [&](std::size_t b) {
    Rng rng = make_rng(seed, 1000 + b);
    std::vector<std::uint32_t> word(depth);
    const std::size_t end = std::min(count, (b + 1) * kBlock);
    for (std::size_t i = b * kBlock; i < end; ++i) {
      for (auto& w : word) w = coding.draw(rng);
      pts[i] = coding.point(word);
    }
  });
  return EmpiricalMeasure2D(std::move(pts));
}

// ---------------------------------------------------------------------------
// Marginals and entropy dimension
// ---------------------------------------------------------------------------

enum class Axis { X, Y };

namespace detail {

inline Bernoulli1D delta_zero(unsigned base) {
  Bernoulli1D b{base, std::vector<BigRational>(base, BigRational(0))};
  b.weights[0] = BigRational(1);
  return b;
}

inline Bernoulli1D matrix_marginal(const std::vector<std::vector<BigRational>>& w, unsigned px, unsigned py, Axis axis) {
  Bernoulli1D out{axis == Axis::X ? px : py, {}};
  out.weights.assign(out.base, BigRational(0));
  for (unsigned i = 0; i < px; ++i)
    for (unsigned j = 0; j < py; ++j) {
      auto& slot = out.weights[axis == Axis::X ? i : j];
      slot = slot + w[i][j];
    }
  return out;
}

}  // namespace detail

/// Digit distribution of one coordinate (default: the y-coordinate, P_2).
inline Bernoulli1D marginal(const MeasureSpec& spec, Axis axis = Axis::Y) {
  validate(spec);
  return std::visit(
      [axis](const auto& s) -> Bernoulli1D {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Bernoulli1D>) {
          return axis == Axis::X ? s : detail::delta_zero(s.base);
        } else if constexpr (std::is_same_v<T, ProductBernoulli>) {
          return detail::matrix_marginal(s.weights, s.base, s.base, axis);
        } else if constexpr (std::is_same_v<T, MixedBaseBernoulli>) {
          return detail::matrix_marginal(s.weights, s.base_x, s.base_y, axis);
        } else if constexpr (std::is_same_v<T, LineEmbedding>) {
          if (axis == Axis::X || (s.slope == BigRational(1) && s.intercept == BigRational(0))) return s.digits;
          throw std::invalid_argument("marginal: y-marginal of a non-diagonal line is not a digit measure");
        } else {
          throw std::invalid_argument("marginal: IFS marginals are not digit measures");
        }
      },
      spec);
}

/// Shannon entropy (nats) of a probability vector given as doubles.
inline double shannon_entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

namespace detail {

inline std::vector<double> to_doubles(const std::vector<BigRational>& w) {
  std::vector<double> out;
  for (const auto& q : w) out.push_back(q.to_double());
  return out;
}

inline double entropy_of(const std::vector<BigRational>& w) { return shannon_entropy(to_doubles(w)); }

}  // namespace detail

/// Closed-form dimension of the measure.
///   digit measures:  H / log p
///   mixed bases:     H(W) / log p_W + H(V | W) / log p_V, W the coordinate
///                    with the smaller base
///   IFS:             H(p) / sum p_k log(1/r_k) (exact under separation),
///                    capped at 2
inline double entropy_dimension(const MeasureSpec& spec) {
  validate(spec);
  return std::visit(
      [](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Bernoulli1D>) {
          return detail::entropy_of(s.weights) / std::log(static_cast<double>(s.base));
        } else if constexpr (std::is_same_v<T, LineEmbedding>) {
          return detail::entropy_of(s.digits.weights) / std::log(static_cast<double>(s.digits.base));
        } else if constexpr (std::is_same_v<T, ProductBernoulli>) {
          std::vector<BigRational> flat;
          for (const auto& row : s.weights) flat.insert(flat.end(), row.begin(), row.end());
          return detail::entropy_of(flat) / std::log(static_cast<double>(s.base));
        } else if constexpr (std::is_same_v<T, MixedBaseBernoulli>) {
          std::vector<BigRational> flat;
          for (const auto& row : s.weights) flat.insert(flat.end(), row.begin(), row.end());
          const double joint = detail::entropy_of(flat);
          const bool y_coarse = s.base_y <= s.base_x;
          const unsigned pw = y_coarse ? s.base_y : s.base_x, pv = y_coarse ? s.base_x : s.base_y;
          const double hw = detail::entropy_of(
              detail::matrix_marginal(s.weights, s.base_x, s.base_y, y_coarse ? Axis::Y : Axis::X).weights);
          return hw / std::log(static_cast<double>(pw)) + (joint - hw) / std::log(static_cast<double>(pv));
        } else {
          const double h = detail::entropy_of(s.weights);
          double lyap = 0.0;
          for (std::size_t k = 0; k < s.branches.size(); ++k)
            lyap += s.weights[k].to_double() * std::log(1.0 / s.branches[k].ratio.to_double());
          return std::min(2.0, h / lyap);
        }
      },
      spec);
}

// ---------------------------------------------------------------------------
// Fourier coefficients of digit measures
// ---------------------------------------------------------------------------

/// Complex value c with |true - c| <= radius.
struct ComplexBall {
  std::complex<double> center;
  double radius = 0.0;

  bool contains(std::complex<double> z) const { return std::abs(z - center) <= radius; }
};

/// mu^(l) = E[e(l X)] = prod_{j>=1} sum_d q_d e(l d / p^j), e(s) = exp(2 pi i s).
///
/// The product is truncated at J with exp(2 pi |l| p^-J) - 1 < tol/2, which
/// bounds the tail since sum_{j>J} (p-1) p^-j = p^-J. Phases that are whole
/// turns contribute their weights exactly, so l = 0 yields exactly 1. With
/// uniform digits and l != 0 the factor j = v_p(l) + 1 is a full sum of
/// roots of unity and the result is exactly 0.
inline ComplexBall fourier_coeff(const Bernoulli1D& b, long l, double tol) {
  validate(b);
  if (!(tol > 0.0)) throw std::invalid_argument("fourier_coeff: tol must be positive");
  if (l == 0) return {{1.0, 0.0}, 0.0};
  const unsigned p = b.base;
  bool uniform = true;
  for (const auto& w : b.weights) uniform = uniform && w == BigRational(1, p);
  if (uniform) return {{0.0, 0.0}, 0.0};

  const double al = std::fabs(static_cast<double>(l));
  std::size_t J = 1;
  while (std::expm1(2.0 * std::numbers::pi * al * std::pow(static_cast<double>(p), -static_cast<double>(J))) >= tol / 2)
    ++J;

  const std::vector<double> q = detail::to_doubles(b.weights);
  std::complex<double> prod(1.0, 0.0);
  mpz_class pj = 1;
  for (std::size_t j = 1; j <= J; ++j) {
    pj *= p;
    BigRational whole(0);
    std::complex<double> f(0.0, 0.0);
    for (unsigned d = 0; d < p; ++d) {
      if (b.weights[d] == BigRational(0)) continue;
      mpz_class num = mpz_class(l) * d;
      mpz_fdiv_r(num.get_mpz_t(), num.get_mpz_t(), pj.get_mpz_t());
      if (num == 0) {
        whole = whole + b.weights[d];
        continue;
      }
      const double phase = 2.0 * std::numbers::pi * mpq_class(num, pj).get_d();
      f += q[d] * std::complex<double>(std::cos(phase), std::sin(phase));
    }
    f += whole.to_double();
    prod *= f;
  }
  const double tail = std::expm1(2.0 * std::numbers::pi * al * std::pow(static_cast<double>(p), -static_cast<double>(J)));
  const double rounding = static_cast<double>(J) * (8.0 * p + 8.0) * 0x1.0p-52;
  return {prod, tail + rounding};
}

/// Coefficient of the y-marginal (P_2) of a digit measure.
inline ComplexBall fourier_coeff(const MeasureSpec& spec, long l, double tol) {
  if (const auto* b = std::get_if<Bernoulli1D>(&spec)) return fourier_coeff(*b, l, tol);
  return fourier_coeff(marginal(spec, Axis::Y), l, tol);
}

}  // namespace torus_equidist
