#include <gtest/gtest.h>

#include <random>

#include "torus_equidist/precision.hpp"

using namespace torus_equidist;

namespace {

// Schoolbook long division, one digit per step.
std::vector<std::uint16_t> long_division(const BigRational& x, unsigned base, std::size_t count) {
  mpz_class r = x.num();
  const mpz_class q = x.den();
  std::vector<std::uint16_t> out;
  for (std::size_t i = 0; i < count; ++i) {
    r *= base;
    mpz_class d = r / q;
    r -= d * q;
    out.push_back(static_cast<std::uint16_t>(d.get_ui()));
  }
  return out;
}

BigRational random_rational(std::mt19937_64& rng, unsigned long max_den) {
  const unsigned long den = 1 + rng() % max_den;
  const unsigned long num = rng() % den;
  return BigRational(mpz_class(num), mpz_class(den));
}

}  // namespace

TEST(BigRational, ParseAndPrint) {
  EXPECT_EQ(BigRational::parse("6/8").to_string(), "3/4");
  EXPECT_EQ(BigRational::parse("-4/2").to_string(), "-2");
  EXPECT_EQ(BigRational::parse("7").to_string(), "7");
  EXPECT_THROW(BigRational::parse("1/0"), std::invalid_argument);
  EXPECT_THROW(BigRational::parse("x"), std::invalid_argument);
  EXPECT_THROW(BigRational::parse("1/-2"), std::invalid_argument);
}

TEST(BigRational, LowestTermsInvariant) {
  const BigRational q(mpz_class(-10), mpz_class(4));
  EXPECT_EQ(q.num(), -5);
  EXPECT_EQ(q.den(), 2);
  EXPECT_EQ(q.frac(), BigRational(1, 2));
  EXPECT_EQ(q.floor(), -3);
}

TEST(RationalDigits, Examples) {
  EXPECT_EQ(rational_digits(BigRational(1, 3), 3, 4).digits, (std::vector<std::uint16_t>{1, 0, 0, 0}));
  EXPECT_EQ(rational_digits(BigRational(1, 3), 2, 4).digits, (std::vector<std::uint16_t>{0, 1, 0, 1}));
  EXPECT_EQ(rational_digits(BigRational(7, 9), 3, 3).digits, long_division(BigRational(7, 9), 3, 3));
  EXPECT_EQ(rational_digits(BigRational(7, 9), 3, 3).digits, (std::vector<std::uint16_t>{2, 1, 0}));
}

TEST(RationalDigits, DomainErrors) {
  EXPECT_THROW(rational_digits(BigRational(1), 2, 3), std::domain_error);
  EXPECT_THROW(rational_digits(BigRational(-1, 2), 2, 3), std::domain_error);
}

TEST(RationalDigits, MatchesLongDivisionOracle) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 300; ++i) {
    const BigRational x = random_rational(rng, 1000000007UL);
    for (unsigned base : {2u, 3u, 5u, 10u, 37u, 100u}) {
      EXPECT_EQ(rational_digits(x, base, 50).digits, long_division(x, base, 50)) << x.to_string() << " base " << base;
    }
  }
}

TEST(RationalDigits, RoundTripWithinOneUnit) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 1000; ++i) {
    const BigRational x = random_rational(rng, 1UL << 40);
    const unsigned base = 2 + static_cast<unsigned>(rng() % 9);
    const std::size_t L = 30;
    const BigRational v = value(rational_digits(x, base, L));
    const BigRational unit(mpz_class(1), detail::upow(base, L));
    EXPECT_LE(v, x);
    EXPECT_LT(x, v + unit);
  }
}

TEST(RationalDigits, ShiftCommutation) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const BigRational x = random_rational(rng, 1UL << 50);
    const unsigned b = 2 + static_cast<unsigned>(rng() % 5);
    const std::size_t L = 40;
    const DigitString d = rational_digits(x, b, L);
    BigRational tx = x;
    for (std::size_t k = 0; k < L; ++k) {
      EXPECT_EQ(suffix_point(d, k), value(rational_digits(tx, b, L - k)));
      tx = (BigRational(static_cast<long>(b)) * tx).frac();
    }
  }
}

TEST(SuffixPoint, Examples) {
  EXPECT_EQ(suffix_point(DigitString(2, {1, 0, 1}), 1), BigRational(1, 4));
  EXPECT_EQ(suffix_point(DigitString(3, {2, 1}), 0), BigRational(7, 9));
  std::vector<std::uint16_t> d;
  for (int i = 0; i < 10; ++i) {
    d.push_back(0);
    d.push_back(2);
  }
  // direct evaluation of 0.0202...(3), 18 digits
  BigRational expect(0);
  BigRational scale(1);
  for (std::size_t j = 2; j < 20; ++j) {
    scale = scale * BigRational(1, 3);
    expect = expect + BigRational(static_cast<long>(d[j])) * scale;
  }
  EXPECT_EQ(suffix_point(DigitString(3, d), 2), expect);
  EXPECT_THROW(suffix_point(DigitString(2, {1}), 1), std::out_of_range);
}

TEST(DigitString, RejectsBadDigits) {
  EXPECT_THROW(DigitString(2, {2}), std::invalid_argument);
  EXPECT_THROW(DigitString(1, {}), std::invalid_argument);
}

TEST(BallDigits, Examples) {
  auto a = ball_digits(Ball::from_double(0.5, 0.0, 64), 2, 1);
  ASSERT_TRUE(is_certified(a));
  EXPECT_EQ(std::get<DigitString>(a).digits, (std::vector<std::uint16_t>{1}));

  EXPECT_FALSE(is_certified(ball_digits(Ball::from_double(0.4999, 0.01, 64), 2, 1)));

  // 1/3 is a base-3 grid point: any ball around it straddles a grid line.
  Ball third = Ball::from_rational(BigRational(1, 3), 128);
  third.inflate(1e-9);
  EXPECT_FALSE(is_certified(ball_digits(third, 3, 6)));

  // A ball strictly inside the cell [1/3, 1/3 + 3^-6) certifies the digits of 1/3.
  Ball inside = Ball::from_rational(BigRational(1, 3) + BigRational(1, 2 * 729), 128);
  inside.inflate(1e-9);
  auto c = ball_digits(inside, 3, 6);
  ASSERT_TRUE(is_certified(c));
  EXPECT_EQ(std::get<DigitString>(c), rational_digits(BigRational(1, 3), 3, 6));
}

TEST(BallDigits, SoundAgainstRationalDigits) {
  std::mt19937_64 rng(4);
  int certified = 0;
  for (int i = 0; i < 2000; ++i) {
    const BigRational x = random_rational(rng, 1UL << 30);
    const unsigned base = 2 + static_cast<unsigned>(rng() % 6);
    const std::size_t L = 1 + rng() % 12;
    Ball b = Ball::from_rational(x, 96);
    b.inflate(std::ldexp(1.0, -static_cast<int>(rng() % 40)));
    auto r = ball_digits(b, base, L);
    if (auto* d = std::get_if<DigitString>(&r)) {
      ++certified;
      EXPECT_EQ(*d, rational_digits(x, base, L));
    }
  }
  EXPECT_GT(certified, 100);
}

TEST(Ball, EnclosesExactResults) {
  // 3.14159265358979323846264338327950288 < pi < 3.14159265358979323846264338327950289
  const Ball pi = Ball::pi(128);
  EXPECT_GT(pi.lower(), BigRational::parse("314159265358979323846264338327950288/100000000000000000000000000000000000"));
  EXPECT_LT(pi.upper(), BigRational::parse("314159265358979323846264338327950289/100000000000000000000000000000000000"));
  const Ball third = Ball::from_rational(BigRational(1, 3), 64);
  EXPECT_FALSE(third.exact());
  EXPECT_TRUE(third.contains(BigRational(1, 3)));
  const Ball prod = third * Ball::from_rational(BigRational(3), 64);
  EXPECT_TRUE(prod.contains(BigRational(1)));
  const Ball sum = third + third + third;
  EXPECT_TRUE(sum.contains(BigRational(1)));
  const Ball q = Ball::from_rational(BigRational(1), 64) / Ball::from_rational(BigRational(3), 64);
  EXPECT_TRUE(q.contains(BigRational(1, 3)));
  // cos(pi/3) = 1/2, sin(pi/6) = 1/2
  EXPECT_TRUE(cos(pi / Ball::from_rational(BigRational(3), 128)).contains(BigRational(1, 2)));
  EXPECT_TRUE(sin(pi / Ball::from_rational(BigRational(6), 128)).contains(BigRational(1, 2)));
  // log(exp(1/7)) = 1/7
  EXPECT_TRUE(log(exp(Ball::from_rational(BigRational(1, 7), 128))).contains(BigRational(1, 7)));
}

TEST(Ball, RadiusNeverShrinks) {
  Ball a = Ball::from_double(0.3, 1e-20, 64);
  const double r0 = a.radius_double();
  const Ball b = a * Ball::from_rational(BigRational(1), 64);
  EXPECT_GE(b.radius_double(), r0);
  const Ball c = a + Ball::from_rational(BigRational(0), 64);
  EXPECT_GE(c.radius_double(), r0);
}

TEST(Ball, FracReducesModOne) {
  auto f = Ball::from_rational(BigRational(7, 2), 64).frac();
  ASSERT_TRUE(is_certified(f));
  EXPECT_TRUE(std::get<Ball>(f).contains(BigRational(1, 2)));
  EXPECT_FALSE(is_certified(Ball::from_double(1.0, 1e-10, 64).frac()));
}

TEST(Ball, TinyRadiiDoNotUnderflow) {
  Ball b = Ball::from_rational(BigRational(1, 2), 64);
  BigFloat tiny(Ball::kRadiusPrec);
  mpfr_set_ui_2exp(tiny.get(), 1, -100000, MPFR_RNDU);
  b.inflate(tiny);
  EXPECT_FALSE(b.exact());
  EXPECT_TRUE(b.radius_at_most(5, 40000, 32));
  EXPECT_FALSE(b.radius_at_most(5, 50000, 32));
}
