#include <gtest/gtest.h>

#include <random>

#include "ncsiegel/scalar.hpp"

using namespace ncsiegel;

namespace {

const ScalarContext kCtx{5, 3};

// Inverse of a modulo m by brute-force search, independent of GMP's invert.
long brute_inverse(long a, long m) {
  for (long x = 1; x < m; ++x)
    if ((a * x) % m == 1) return x;
  return -1;
}

}  // namespace

TEST(Scalar, ValuationOfSeventyFive) {
  auto a = Capped::from_rational({5, 10}, 75);
  EXPECT_EQ(a.valuation(), Valuation::exact(2));
  EXPECT_EQ(a.unit(), 3);
}

TEST(Scalar, InverseOfOnePlusEll) {
  EXPECT_EQ(brute_inverse(6, 125), 21);
  auto inv = Capped::one(kCtx) / Capped::from_rational(kCtx, 6);
  EXPECT_EQ(inv.valuation(), Valuation::exact(0));
  EXPECT_EQ(inv.unit(), brute_inverse(6, 125));
  EXPECT_EQ(inv.relative_precision(), 3);
}

TEST(Scalar, AdditionTakesMinimumAbsolutePrecision) {
  // Values known modulo 5^5.
  auto a = Capped::from_digits(5, 40, 0, 7, 5);
  auto b = Capped::from_digits(5, 40, 1, 2, 4);
  auto s = a + b;
  ASSERT_TRUE(s.absolute_precision().has_value());
  EXPECT_EQ(*s.absolute_precision(), 5);
  EXPECT_EQ(s.to_rational(), 17);
}

TEST(Scalar, ValuationExamples) {
  ScalarContext ctx{5, 0};
  EXPECT_TRUE(Rational::zero(ctx).valuation().infinite);
  EXPECT_EQ(Rational(5, mpq_class(1, 20)).valuation(), Valuation::exact(-1));
  EXPECT_EQ(Rational(5, 7775).valuation(), Valuation::exact(2));
  // v((1+l)^i - 1) = 1 + v(i) for l odd, spot values.
  mpz_class six = 6;
  for (long i = 1; i <= 200; ++i) {
    mpz_class p;
    mpz_pow_ui(p.get_mpz_t(), six.get_mpz_t(), static_cast<unsigned long>(i));
    long vi = 0;
    for (long t = i; t % 5 == 0; t /= 5) ++vi;
    EXPECT_EQ(Rational(5, mpq_class(p - 1)).valuation(), Valuation::exact(1 + vi)) << i;
  }
}

TEST(Scalar, CancellationLosesPrecision) {
  auto a = Capped::from_rational({5, 4}, 26);
  auto b = Capped::from_rational({5, 4}, 1);
  auto d = a - b;  // 25, known modulo 5^4
  EXPECT_EQ(d.valuation(), Valuation::exact(2));
  EXPECT_EQ(d.relative_precision(), 2);
  auto z = a - a;
  EXPECT_TRUE(z.indistinguishable_zero());
  EXPECT_EQ(z.valuation(), Valuation::at_least(4));
}

TEST(Scalar, DivisionErrors) {
  auto z = Capped::from_rational(kCtx, 7) - Capped::from_rational(kCtx, 7);
  EXPECT_THROW(Capped::one(kCtx) / z, Error);
  try {
    (void)(Capped::one(kCtx) / z);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DivisionByIndistinguishableZero);
  }
  EXPECT_THROW(Capped::from_digits(5, 40, 0, 1, 0), Error);
  EXPECT_THROW(Rational::one({5, 0}) / Rational::zero({5, 0}), Error);
}

TEST(Scalar, QuotientLosesDivisorValuation) {
  auto a = Capped::from_digits(5, 40, 0, 3, 10);  // abs precision 10
  auto b = Capped::from_digits(5, 40, 2, 1, 10);
  auto q = a / b;
  EXPECT_EQ(*q.absolute_precision(), 8);
}

TEST(ScalarProperty, Ultrametric) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<long> num(-5000, 5000), den(1, 300);
  for (int t = 0; t < 1000; ++t) {
    Rational a(5, mpq_class(num(rng), den(rng)));
    Rational b(5, mpq_class(num(rng), den(rng)));
    Valuation va = a.valuation(), vb = b.valuation(), vs = (a + b).valuation();
    if (va.infinite || vb.infinite) continue;
    ASSERT_FALSE(!vs.infinite && vs.value < std::min(va.value, vb.value));
    if (va.value != vb.value) {
      ASSERT_FALSE(vs.infinite);
      ASSERT_EQ(vs.value, std::min(va.value, vb.value));
    }
  }
}

TEST(ScalarProperty, MultiplicativeValuationAndRoundTrip) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<long> num(1, 100000), den(1, 999);
  const long P = 12;
  mpz_class mod = detail::ipow(5, P);
  for (int t = 0; t < 500; ++t) {
    mpq_class qa(num(rng), den(rng)), qb(num(rng), den(rng));
    qa.canonicalize();
    qb.canonicalize();
    Rational a(5, qa), b(5, qb);
    EXPECT_EQ((a * b).valuation().value, a.valuation().value + b.valuation().value);
    // exact -> capped -> rational agrees with the original modulo l^{v+P}.
    Capped c = Capped::from_rational({5, P}, qa);
    mpq_class diff = c.to_rational() - qa;
    if (diff != 0) {
      EXPECT_GE(detail::rational_valuation(diff, 5), a.valuation().value + P);
    }
  }
}
