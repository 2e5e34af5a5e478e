#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "torus_equidist/ifs.hpp"
#include "torus_equidist/measures.hpp"

using namespace torus_equidist;

namespace {

PlanarIFS interval_ifs(std::vector<std::pair<BigRational, BigRational>> maps) {
  PlanarIFS ifs;
  for (auto& [r, t] : maps) ifs.branches.push_back({r, Angle::from_turns(0), t, BigRational(0)});
  ifs.weights.assign(ifs.branches.size(), BigRational(1, static_cast<long>(ifs.branches.size())));
  return ifs;
}

PlanarIFS rotation_ifs(std::vector<BigRational> turns) {
  PlanarIFS ifs;
  for (std::size_t k = 0; k < turns.size(); ++k)
    ifs.branches.push_back({BigRational(1, 5), Angle::from_turns(turns[k]), BigRational(static_cast<long>(k), 3), 0});
  ifs.weights.assign(turns.size(), BigRational(1, static_cast<long>(turns.size())));
  return ifs;
}

double w1_sorted(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

}  // namespace

TEST(Sample, CantorWord) {
  const MeasureSample s = sample_from_word(fixtures::cantor(), {0, 2, 0});
  EXPECT_EQ(std::get<BigRational>(s.point.x), BigRational(2, 9));
  EXPECT_EQ(std::get<BigRational>(s.point.y), BigRational(0));
}

TEST(Sample, MixedBaseWord) {
  // symbols dx * 2 + dy: (1,1) -> 3, (0,0) -> 0
  const MeasureSample s = sample_from_word(fixtures::mixed_4x2(), {3, 0});
  EXPECT_EQ(std::get<BigRational>(s.point.x), BigRational(1, 4));
  EXPECT_EQ(std::get<BigRational>(s.point.y), BigRational(1, 2));
}

TEST(Sample, DeterministicAndExactDenominator) {
  const MeasureSpec spec = fixtures::diagonal(fixtures::cantor());
  const MeasureSample a = sample(spec, 30, 99), b = sample(spec, 30, 99);
  EXPECT_EQ(a.word, b.word);
  const BigRational x = std::get<BigRational>(a.point.x);
  EXPECT_EQ(x, std::get<BigRational>(a.point.y));
  EXPECT_EQ(detail::upow(3, 30) % x.den(), 0);
  for (auto d : a.word) EXPECT_TRUE(d == 0 || d == 2);
}

TEST(Sample, IfsRadiusBookkeeping) {
  const PlanarIFS ifs = fixtures::rotating_quarter();
  const BoundingBall bb = bounding_ball(ifs);
  const MeasureSample s = sample(ifs, 40, 5);
  const double bound = 2.0 * bb.radius * std::pow(4.0, -40.0);
  EXPECT_LE(std::get<Ball>(s.point.x).radius_double(), bound);
  EXPECT_LE(std::get<Ball>(s.point.y).radius_double(), bound);
  // the double-precision coding map lands inside the ball up to double error
  const Point2 p = Coding(ifs).point(s.word);
  EXPECT_NEAR(p.x, std::get<Ball>(s.point.x).center_double(), 1e-12);
  EXPECT_NEAR(p.y, std::get<Ball>(s.point.y).center_double(), 1e-12);
}

TEST(BoundingBall, ContainsBranchImages) {
  const PlanarIFS ifs = fixtures::rotating_quarter();
  const BoundingBall bb = bounding_ball(ifs);
  const EmpiricalMeasure2D cloud = sample_cloud(ifs, 20000, 30, 1);
  for (const auto& p : cloud.points()) EXPECT_LE(std::hypot(p.x - bb.cx, p.y - bb.cy), bb.radius * (1 + 1e-9));
}

TEST(Sampler, DigitFrequenciesWithinThreeSigma) {
  Bernoulli1D b{4, {BigRational(1, 10), BigRational(2, 10), BigRational(3, 10), BigRational(4, 10)}};
  const Coding c(b);
  Rng rng = make_rng(11, 0);
  const int n = 100000;
  std::vector<int> counts(4, 0);
  for (int i = 0; i < n; ++i) ++counts[c.draw(rng)];
  for (int d = 0; d < 4; ++d) {
    const double p = (d + 1) / 10.0;
    EXPECT_LE(std::fabs(counts[d] - n * p), 3.0 * std::sqrt(n * p * (1 - p))) << d;
  }
}

TEST(Sampler, CloudIndependentOfWorkerCount) {
  const MeasureSpec spec = fixtures::rotating_quarter();
  const EmpiricalMeasure2D a = sample_cloud(spec, 10000, 20, 3);
  setenv("TORUS_EQUIDIST_THREADS", "3", 1);
  const EmpiricalMeasure2D b = sample_cloud(spec, 10000, 20, 3);
  unsetenv("TORUS_EQUIDIST_THREADS");
  EXPECT_EQ(a.points(), b.points());
}

TEST(Sampler, HutchinsonSelfSimilarity) {
  const PlanarIFS ifs = fixtures::rotating_quarter();
  const Coding c(ifs);
  const std::size_t D = 8, n = 40000;
  const BoundingBall bb = bounding_ball(ifs);
  // push depth-D samples through a random first branch: a depth-(D+1) sample
  Rng rng = make_rng(21, 0);
  std::vector<double> ax, ay, bx, by;
  std::vector<std::uint32_t> w(D + 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 1; j <= D; ++j) w[j] = c.draw(rng);
    w[0] = c.draw(rng);
    const Point2 p = c.point(std::span<const std::uint32_t>(w).subspan(1));
    const auto& br = ifs.branches[w[0]];
    const double r = br.ratio.to_double(), th = br.angle.radians_double();
    ax.push_back(r * (std::cos(th) * p.x - std::sin(th) * p.y) + br.tx.to_double());
    ay.push_back(r * (std::sin(th) * p.x + std::cos(th) * p.y) + br.ty.to_double());
  }
  const EmpiricalMeasure2D deep = sample_cloud(ifs, n, D + 1, 22);
  for (const auto& p : deep.points()) {
    bx.push_back(p.x);
    by.push_back(p.y);
  }
  const double bound = 2.0 * (2.0 * bb.radius) * std::pow(0.25, static_cast<double>(D)) + 0.02;
  EXPECT_LE(w1_sorted(ax, bx), bound);
  EXPECT_LE(w1_sorted(ay, by), bound);
}

TEST(ValidateSSC, Examples) {
  const auto thirds = validate_ssc(interval_ifs({{BigRational(1, 3), 0}, {BigRational(1, 3), BigRational(2, 3)}}));
  EXPECT_EQ(thirds.verdict, SSCVerdict::Certified);
  const auto halves = validate_ssc(interval_ifs({{BigRational(1, 2), 0}, {BigRational(1, 2), BigRational(1, 2)}}));
  EXPECT_EQ(halves.verdict, SSCVerdict::Refuted) << halves.detail;
  const auto rot = validate_ssc(fixtures::rotating_quarter());
  EXPECT_EQ(rot.verdict, SSCVerdict::Certified) << rot.detail;
}

TEST(ValidateSSC, OverlappingRotationsNotCertified) {
  // two copies of the same map: images coincide
  PlanarIFS ifs = fixtures::rotating_quarter();
  ifs.branches[1] = ifs.branches[0];
  EXPECT_NE(validate_ssc(ifs).verdict, SSCVerdict::Certified);
}

TEST(AnalyzeRotations, Examples) {
  const IFSAnalysis a = analyze_rotations(fixtures::rotating_quarter());
  ASSERT_TRUE(a.decided);
  EXPECT_EQ(*a.k_phi, 1u);
  EXPECT_EQ(*a.gamma.turns, BigRational(1, 3));
  EXPECT_TRUE(a.group_finite);
  EXPECT_EQ(*a.uniform_ratio, BigRational(1, 4));
  EXPECT_TRUE(a.ssc_certified);

  const IFSAnalysis b = analyze_rotations(rotation_ifs({BigRational(1, 4), BigRational(1, 2)}), false);
  EXPECT_EQ(*b.k_phi, 4u);
  EXPECT_EQ(*b.gamma.turns, BigRational(0));

  const IFSAnalysis c = analyze_rotations(rotation_ifs({BigRational(0)}), false);
  EXPECT_EQ(*c.k_phi, 1u);
  EXPECT_EQ(*c.gamma.turns, BigRational(0));
}

TEST(AnalyzeRotations, RealAngles) {
  PlanarIFS ifs = rotation_ifs({0, 0});
  ifs.branches[0].angle = ifs.branches[1].angle = Angle::from_radians("1");
  const IFSAnalysis same = analyze_rotations(ifs, false);
  EXPECT_TRUE(same.decided);
  EXPECT_EQ(*same.k_phi, 1u);
  ifs.branches[1].angle = Angle::from_radians("2");
  EXPECT_FALSE(analyze_rotations(ifs, false).decided);
}

TEST(AnalyzeRotations, AgreesWithBruteForce) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 200; ++t) {
    std::vector<BigRational> turns;
    const int nb = 1 + static_cast<int>(rng() % 4);
    for (int i = 0; i < nb; ++i) {
      const long den = 1 + static_cast<long>(rng() % 12);
      turns.emplace_back(mpz_class(static_cast<long>(rng() % den)), mpz_class(den));
    }
    const IFSAnalysis an = analyze_rotations(rotation_ifs(turns), false);
    // least k <= 27720 with k (t_i - t_j) integral for all pairs
    std::uint64_t brute = 0;
    for (std::uint64_t k = 1; k <= 27720 && !brute; ++k) {
      bool ok = true;
      for (const auto& a : turns)
        for (const auto& b : turns) ok = ok && (BigRational(static_cast<long>(k)) * (a - b)).den() == 1;
      if (ok) brute = k;
    }
    ASSERT_NE(brute, 0u);
    EXPECT_EQ(*an.k_phi, brute);
    EXPECT_EQ(*an.gamma.turns, (BigRational(static_cast<long>(brute)) * turns[0]).frac());
  }
}

TEST(FourierCoeff, Examples) {
  for (const auto& b : {fixtures::cantor(), fixtures::uniform_digits(5), fixtures::cantor(7)}) {
    const ComplexBall z = fourier_coeff(b, 0, 1e-8);
    EXPECT_EQ(z.center, std::complex<double>(1.0, 0.0));
    EXPECT_EQ(z.radius, 0.0);
  }
  for (unsigned p : {2u, 3u, 10u})
    for (long l = -16; l <= 16; ++l)
      if (l != 0) {
        EXPECT_EQ(std::abs(fourier_coeff(fixtures::uniform_digits(p), l, 1e-8).center), 0.0);
      }
}

TEST(FourierCoeff, CantorMatchesTruncatedProduct) {
  for (long l : {1L, 2L, 5L, -3L, 13L}) {
    // digits {0, 2} with weight 1/2: factor (1 + e(2 l / 3^j)) / 2
    std::complex<long double> prod(1.0L, 0.0L);
    long double pj = 1.0L;
    for (int j = 1; j <= 60; ++j) {
      pj *= 3.0L;
      const long double a = 2.0L * std::acos(-1.0L) * 2.0L * static_cast<long double>(l) / pj;
      prod *= (std::complex<long double>(1.0L, 0.0L) + std::complex<long double>(std::cos(a), std::sin(a))) / 2.0L;
    }
    const ComplexBall z = fourier_coeff(fixtures::cantor(), l, 1e-8);
    EXPECT_LE(z.radius, 1e-8);
    EXPECT_NEAR(z.center.real(), static_cast<double>(prod.real()), 1e-8) << l;
    EXPECT_NEAR(z.center.imag(), static_cast<double>(prod.imag()), 1e-8) << l;
  }
}

TEST(FourierCoeff, BoundedByOne) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 1000; ++t) {
    const unsigned p = 2 + static_cast<unsigned>(rng() % 8);
    std::vector<long> raw(p);
    long total = 0;
    for (auto& v : raw) total += (v = static_cast<long>(rng() % 10));
    if (total == 0) {
      raw[0] = 1;
      total = 1;
    }
    Bernoulli1D b{p, {}};
    for (long v : raw) b.weights.emplace_back(mpz_class(v), mpz_class(total));
    const long l = static_cast<long>(rng() % 65) - 32;
    const ComplexBall z = fourier_coeff(b, l, 1e-10);
    EXPECT_LE(std::abs(z.center) - z.radius, 1.0);
  }
}

TEST(Marginal, Examples) {
  const Bernoulli1D y = marginal(fixtures::mixed_4x2());
  EXPECT_EQ(y.base, 2u);
  EXPECT_EQ(y.weights, (std::vector<BigRational>{BigRational(1, 2), BigRational(1, 2)}));
  const Bernoulli1D x = marginal(fixtures::mixed_4x2(), Axis::X);
  EXPECT_EQ(x.base, 4u);

  const Bernoulli1D c = marginal(ProductBernoulli::product(fixtures::cantor(), fixtures::cantor()));
  EXPECT_EQ(c.weights, fixtures::cantor().weights);

  ProductBernoulli atom{3, std::vector<std::vector<BigRational>>(3, std::vector<BigRational>(3, BigRational(0)))};
  atom.weights[0][0] = 1;
  EXPECT_EQ(marginal(atom).weights, (std::vector<BigRational>{1, 0, 0}));

  EXPECT_THROW(marginal(fixtures::rotating_quarter()), std::invalid_argument);
}

TEST(EntropyDimension, Examples) {
  EXPECT_NEAR(entropy_dimension(fixtures::cantor()), std::log(2.0) / std::log(3.0), 1e-12);
  EXPECT_NEAR(entropy_dimension(fixtures::mixed_4x2()), 1.0, 1e-12);
  EXPECT_NEAR(entropy_dimension(fixtures::uniform_digits(7)), 1.0, 1e-12);
  EXPECT_NEAR(entropy_dimension(ProductBernoulli::product(fixtures::cantor(), fixtures::cantor())),
              2 * std::log(2.0) / std::log(3.0), 1e-12);
  EXPECT_NEAR(entropy_dimension(fixtures::rotating_quarter()), std::log(3.0) / std::log(4.0), 1e-12);
}

TEST(MeasureSpecJson, RoundTripAndHash) {
  const std::vector<MeasureSpec> specs = {fixtures::cantor(), fixtures::mixed_4x2(), fixtures::rotating_quarter(),
                                          fixtures::diagonal(fixtures::cantor()),
                                          ProductBernoulli::product(fixtures::cantor(), fixtures::cantor())};
  for (const auto& s : specs) {
    const auto j = to_json(s);
    const MeasureSpec back = measure_spec_from_json(j);
    EXPECT_EQ(to_json(back), j);
    EXPECT_EQ(spec_hash(back), spec_hash(s));
    EXPECT_EQ(spec_hash(s).size(), 16u);
  }
  EXPECT_NE(spec_hash(fixtures::cantor()), spec_hash(fixtures::cantor(5)));
}

TEST(MeasureSpecJson, ErrorsCarryPointers) {
  auto pointer_of = [](const nlohmann::json& j) {
    try {
      measure_spec_from_json(j, "/measure");
    } catch (const ConfigError& e) {
      return e.pointer();
    }
    return std::string("no error");
  };
  EXPECT_EQ(pointer_of({{"kind", "bernoulli"}, {"base", 2}, {"weights", {"1/2", "1/3"}}}), "/measure/weights");
  EXPECT_EQ(pointer_of({{"kind", "bernoulli"}, {"base", 2}, {"weights", {"1/2", "x"}}}), "/measure/weights/1");
  EXPECT_EQ(pointer_of({{"kind", "torus"}}), "/measure/kind");
  EXPECT_EQ(pointer_of({{"kind", "bernoulli"}, {"weights", {"1"}}}), "/measure/base");
  nlohmann::json ifs = to_json(fixtures::rotating_quarter());
  ifs["branches"][2]["ratio"] = "3/2";
  EXPECT_EQ(pointer_of(ifs), "/measure/branches/2/ratio");
  nlohmann::json line = to_json(fixtures::diagonal(fixtures::cantor()));
  line["slope"] = "0";
  EXPECT_EQ(pointer_of(line), "/measure/slope");
}
