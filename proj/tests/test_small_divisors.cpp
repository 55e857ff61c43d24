#include <gtest/gtest.h>

#include "ncsiegel/small_divisors.hpp"

using namespace ncsiegel;

namespace {

Rational r(long a, long b = 1) { return Rational(5, mpq_class(a, b)); }

long v5(long i) {
  long v = 0;
  for (; i % 5 == 0; i /= 5) ++v;
  return v;
}

// Independent evaluation of |lambda^i - lambda_j| >= c (N/2)^{-mu} in exact
// arithmetic for integer mu.
bool holds_exactly(const std::vector<Rational>& lambdas, const Divisor& d, const mpq_class& c, long mu) {
  mpq_class value = 1;
  for (std::size_t t = 0; t < lambdas.size(); ++t)
    for (long k = 0; k < d.exponents[t]; ++k) value *= lambdas[t].value();
  mpq_class diff = value - lambdas[static_cast<std::size_t>(d.j - 1)].value();
  long v = detail::rational_valuation(diff, 5);
  mpq_class lhs = 1;
  for (long k = 0; k < mu; ++k) lhs *= mpq_class(d.degree, 2);
  mpq_class p5 = 1;
  for (long k = 0; k < std::abs(v); ++k) p5 *= 5;
  lhs = v >= 0 ? mpq_class(lhs / p5) : mpq_class(lhs * p5);
  return lhs >= c;
}

}  // namespace

TEST(SmallDivisors, OnePlusEllHoldsWithMuOne) {
  // v(6^i - 6) = 1 + v(i - 1); worst at i - 1 = 5^k.
  SiegelParams params{mpq_class(1, 10), 1};
  auto cert = check_siegel({r(6)}, params, 10000);
  EXPECT_EQ(cert.verdict, Verdict::Holds);
  EXPECT_EQ(cert.checked, 9999);
  ASSERT_FALSE(cert.witnesses.empty());
  const Divisor& tight = cert.witnesses.front();
  EXPECT_EQ(tight.degree, 3126);
  EXPECT_EQ(tight.valuation, 1 + v5(3125));
}

TEST(SmallDivisors, AllResonantIsVacuous) {
  auto cert = check_siegel({r(1)}, SiegelParams{1, 1}, 50);
  EXPECT_EQ(cert.verdict, Verdict::Holds);
  EXPECT_EQ(cert.checked, 0);
  EXPECT_EQ(cert.resonant, 49);
}

TEST(SmallDivisors, ConstantTooLargeIsViolated) {
  auto cert = check_siegel({r(126)}, SiegelParams{1, 1}, 20);
  ASSERT_EQ(cert.verdict, Verdict::Violated);
  ASSERT_TRUE(cert.failing.has_value());
  EXPECT_EQ(cert.failing->valuation, 3 + v5(cert.failing->degree - 1));
  EXPECT_LE(cert.failing->degree, 20);
  EXPECT_FALSE(holds_exactly({r(126)}, *cert.failing, 1, 1));
}

TEST(SmallDivisors, RejectsLargeEigenvalueAndSmallBudget) {
  EXPECT_THROW(check_siegel({r(1, 5)}, SiegelParams{1, 1}, 10), Error);
  EXPECT_THROW(check_siegel({r(6)}, SiegelParams{1, 1}, 1), Error);
  std::vector<Capped> capped{Capped::from_rational({5, 10}, 6)};
  EXPECT_THROW(check_siegel(capped, SiegelParams{1, 1}, 10), Error);
}

TEST(SmallDivisors, FitOnePlusEll) {
  auto fit = fit_siegel({r(6)}, 10000, default_mu_grid());
  EXPECT_EQ(fit.params.mu, 1);
  // min over i of (i/2) 5^{-1 - v(i-1)}, attained at i = 3126.
  EXPECT_EQ(fit.params.c, mpq_class(1563, 15625));
  EXPECT_EQ(check_siegel({r(6)}, fit.params, 10000).verdict, Verdict::Holds);
  SiegelParams bigger{fit.params.c * mpq_class(1000001, 1000000), 1};
  EXPECT_EQ(check_siegel({r(6)}, bigger, 10000).verdict, Verdict::Violated);
}

TEST(SmallDivisors, FitPowerPair) {
  Rational u = r(6);
  auto fit = fit_siegel({u, u * u}, 1000, default_mu_grid());
  EXPECT_GT(fit.params.c, 0);
  EXPECT_LE(fit.params.mu, 5);
  EXPECT_EQ(check_siegel({u, u * u}, fit.params, 1000).verdict, Verdict::Holds);
}

TEST(SmallDivisors, RootOfUnityDegenerate) {
  auto fit = fit_siegel({r(-1)}, 200, default_mu_grid());
  EXPECT_EQ(fit.params.mu, 0);
  EXPECT_EQ(fit.params.c, 1);
}

TEST(SmallDivisors, EmptyGrid) {
  try {
    fit_siegel({r(6)}, 10, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyGrid);
  }
}

TEST(SmallDivisorsProperty, MonotoneInConstants) {
  std::vector<std::vector<Rational>> tuples{{r(6)}, {r(11)}, {r(6), r(36)}, {r(6), r(11)}, {r(26), r(31, 6)}};
  for (const auto& lambdas : tuples) {
    long nmax = lambdas.size() == 1 ? 2000 : 150;
    auto fit = fit_siegel(lambdas, nmax, default_mu_grid());
    ASSERT_EQ(check_siegel(lambdas, fit.params, nmax).verdict, Verdict::Holds);
    SiegelParams weaker{fit.params.c / 3, fit.params.mu + 1};
    ASSERT_EQ(check_siegel(lambdas, weaker, nmax).verdict, Verdict::Holds);
  }
}

TEST(SmallDivisorsProperty, NormalizationChangesOnlyConstants) {
  // For unit eigenvalues |lambda^i - lambda_j| = |lambda^i lambda_j^{-1} - 1|,
  // and c (N/2)^{-mu} = (c 2^mu) N^{-mu}.
  std::vector<std::vector<Rational>> tuples{{r(6)}, {r(6), r(36)}, {r(126)}, {r(6), r(11)}};
  for (const auto& lambdas : tuples)
    for (long mu : {1L, 2L})
      for (mpq_class c : {mpq_class(1, 10), mpq_class(1, 100), mpq_class(1, 2)}) {
        auto a = check_siegel(lambdas, SiegelParams{c, mu}, 120);
        auto b = check_siegel(lambdas, SiegelParams{c * (1L << mu), mu}, 120, 5, SiegelForm::UnitTarget);
        ASSERT_EQ(a.verdict, b.verdict);
      }
}

TEST(SmallDivisorsProperty, WitnessesAreGenuine) {
  std::vector<std::vector<Rational>> tuples{{r(126)}, {r(6), r(11)}, {r(6), r(36)}};
  for (const auto& lambdas : tuples) {
    auto cert = check_siegel(lambdas, SiegelParams{mpq_class(1, 2), 1}, 80);
    if (cert.verdict == Verdict::Violated) {
      ASSERT_FALSE(holds_exactly(lambdas, *cert.failing, mpq_class(1, 2), 1));
    }
    for (const auto& w : cert.witnesses) {
      long total = 0;
      for (long e : w.exponents) total += e;
      ASSERT_EQ(total, w.degree);
      ASSERT_LE(total, 80);
    }
  }
}
