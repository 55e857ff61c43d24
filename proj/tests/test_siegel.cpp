#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "ncsiegel/siegel.hpp"
#include "test_support.hpp"

using namespace ncsiegel;
using namespace ncsiegel::testing;
using S = Series<Rational>;
using E = EndoTuple<Rational>;

namespace {

const ScalarContext kCtx{5, 0};

Rational r(long a, long b = 1) { return q<Rational>(kCtx, a, b); }
S mono(int n, int D, Word w, long c = 1, long d = 1) { return S::monomial(n, D, w, r(c, d)); }
S xpow(int D, int k, long c = 1) { return mono(1, D, Word(std::vector<int>(static_cast<std::size_t>(k), 1)), c); }

E cubic(int D = 8) { return E({xpow(D, 1, 6) + xpow(D, 3)}); }
SiegelParams tenth() { return {mpq_class(1, 10), 1}; }

// n = 2, lambda = (6, 36); x1^2 in component 2 is resonant and absent.
E resonant_compliant(int D) {
  return E({mono(2, D, Word{1}, 6) + mono(2, D, Word{1, 2}) + mono(2, D, Word{2, 2}, 3),
            mono(2, D, Word{2}, 36) + mono(2, D, Word{1, 2, 1}) + mono(2, D, Word{2, 1}, 5)});
}

}  // namespace

// ---------------------------------------------------------------------------

TEST(Calculus, SupHalfOne) {
  SupCheck c = verify_calculus_sup(0.5, 1.0);
  EXPECT_DOUBLE_EQ(c.bound, 14.0);
  EXPECT_TRUE(c.sup.contains(0.5));
  EXPECT_TRUE(c.argmax == 1 || c.argmax == 2);
  EXPECT_TRUE(c.holds);
}

TEST(Calculus, SupTenthTwoAgainstEnumeration) {
  SupCheck c = verify_calculus_sup(0.1, 2.0);
  EXPECT_NEAR(c.bound, 19600.0, 1e-9);
  double best = 0.0;
  for (int i = 0; i <= 1000; ++i) best = std::max(best, std::pow(0.9, i) * i * i);
  EXPECT_TRUE(c.sup.lo <= best * (1 + 1e-12) && best <= c.sup.hi * (1 + 1e-12));
  EXPECT_TRUE(c.holds);
}

TEST(Calculus, SupBoundDecreasesInEta) {
  double prev = calculus_sup_bound(0.01, 1.5);
  for (double eta = 0.02; eta < 1.0; eta += 0.01) {
    double b = calculus_sup_bound(eta, 1.5);
    EXPECT_LT(b, prev);
    prev = b;
  }
}

TEST(Calculus, SupSweepHolds) {
  for (double eta : {0.01, 0.05, 0.3, 0.7, 0.95})
    for (double mu : {0.3, 1.0, 2.5, 5.0}) EXPECT_TRUE(verify_calculus_sup(eta, mu).holds) << eta << " " << mu;
}

TEST(Calculus, ProductQuarterTwo) {
  ProductCheck c = verify_calculus_product(0.25, 2.0);
  long double p = 1;
  for (int n = 0; n <= 40; ++n) p *= 1 - 0.25L / std::pow(2.0L, n);
  EXPECT_TRUE(c.product.contains(static_cast<double>(p)));
  EXPECT_NEAR(c.product.mid(), 0.5776, 1e-3);
  EXPECT_NEAR(c.bound, std::exp(-2.0), 1e-15);
  EXPECT_TRUE(c.holds);
}

TEST(Calculus, ProductNearHalf) {
  ProductCheck c = verify_calculus_product(0.49, 1.5);
  EXPECT_TRUE(c.holds);
  EXPECT_LT(c.product.hi - c.product.lo, 1e-5);
}

TEST(Calculus, ProductTendsToOne) {
  ProductCheck c = verify_calculus_product(1e-9, 3.0);
  EXPECT_GT(c.product.lo, 1.0 - 1e-8);
}

TEST(Calculus, DomainErrors) {
  EXPECT_THROW(calculus_sup_bound(1.0, 1.0), Error);
  EXPECT_THROW(calculus_product_bound(0.5, 2.0), Error);
  EXPECT_THROW(calculus_product_bound(0.2, 1.0), Error);
}

// ---------------------------------------------------------------------------

TEST(Homological, ZeroInZeroOut) {
  E z = E::zero(2, 5, kCtx);
  auto sol = solve_homological(z, {r(6), r(36)});
  EXPECT_TRUE(sol.psi_hat.is_zero());
  EXPECT_FALSE(sol.ledger.worst_divisor_valuation.has_value());
}

TEST(Homological, LambdaFiveSquare) {
  const int D = 4;
  auto sol = solve_homological(E({xpow(D, 2)}), {r(5)});
  EXPECT_EQ(sol.psi_hat[0], mono(1, D, Word{1, 1}, 1, 20));
  EXPECT_EQ(sol.psi_hat[0].coeff(Word{1, 1}).valuation().value, -1);
  // psi-hat(5x) - 5 psi-hat(x) = (25/20 - 5/20) x^2
  E lhs = compose(sol.psi_hat, E({xpow(D, 1, 5)})) - E({r(5) * sol.psi_hat[0]});
  EXPECT_EQ(lhs, E({xpow(D, 2)}));
  EXPECT_EQ(*sol.ledger.worst_divisor_valuation, 1);
}

TEST(Homological, TwoVariableDivisor) {
  const int D = 4;
  E fhat({mono(2, D, Word{1, 2}), S(2, D, kCtx)});
  auto sol = solve_homological(fhat, {r(6), r(36)});
  Rational c = sol.psi_hat[0].coeff(Word{1, 2});
  EXPECT_EQ(c, r(1, 6 * 36 - 6));
  EXPECT_EQ(c.valuation().value, -1);
  EXPECT_EQ(*sol.ledger.worst_divisor_valuation, 1);
}

TEST(Homological, ResonantObstruction) {
  const int D = 3;
  E fhat({S(2, D, kCtx), mono(2, D, Word{1, 1})});
  try {
    solve_homological(fhat, {r(6), r(36)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ResonantObstruction);
  }
}

TEST(Homological, RejectsLinearTermsAndLargeEigenvalues) {
  EXPECT_THROW(solve_homological(E({xpow(3, 1)}), {r(6)}), Error);
  EXPECT_THROW(solve_homological(E({xpow(3, 2)}), {r(1, 5)}), Error);
}

TEST(Homological, FunctionalEquationOnRandomInputs) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 40; ++t) {
    SiegelInstance inst = random_siegel_instance(rng, 2, 5, kCtx);
    auto lambdas = *inst.f.diagonal_eigenvalues();
    E a = E::diagonal(5, lambdas);
    E fhat = inst.f - a;
    auto sol = solve_homological(fhat, lambdas);
    std::vector<S> scaled;
    for (std::size_t j = 0; j < 2; ++j) scaled.push_back(lambdas[j] * sol.psi_hat[j]);
    EXPECT_EQ(compose(sol.psi_hat, a) - E(scaled), fhat);
  }
}

TEST(Homological, CappedIndistinguishableDivisorIsUndecidable) {
  ScalarContext ctx{5, 3};
  using C = Capped;
  auto lam = C::from_rational(ctx, 1 + 625);  // lambda^2 - lambda = 626*625, invisible at 3 digits
  EndoTuple<C> fhat({Series<C>::monomial(1, 3, Word{1, 1}, C::one(ctx))});
  try {
    solve_homological(fhat, {lam});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Undecidable);
  }
}

// ---------------------------------------------------------------------------

TEST(Step, LinearInputIsFixed) {
  E f = E::diagonal(5, {r(6), r(36)});
  auto st = siegel_step(f, Radius::exact(2), 0.5, tenth());
  EXPECT_EQ(st.psi, E::identity(2, 5, kCtx));
  EXPECT_TRUE(st.delta_next.is_infinite());
}

TEST(Step, SixPlusQuadratic) {
  const int D = 6;
  E f({xpow(D, 1, 6) + xpow(D, 2, 125)});
  Radius rad = Radius::exact(2);
  auto st = siegel_step(f, rad, 0.5, tenth());
  EXPECT_EQ(*st.delta.exact_value(), mpq_class(7));  // |125| 5^{-4}
  E direct = compose(invert(st.psi), compose(f, st.psi)) - E({xpow(D, 1, 6)});
  EXPECT_TRUE(direct.norm(st.r_next).box().contains(st.delta_next.approx()));
  EXPECT_TRUE(certainly_le(st.delta_next, st.delta_bound));
  EXPECT_TRUE(certainly_le(st.psi_norm, st.psi_bound));
  EXPECT_TRUE(certainly_lt(st.delta_next, st.delta));
  EXPECT_EQ(st.psi[0].coeff(Word{1, 1}), r(125, 30));
  // f_next has no x^2 term left.
  EXPECT_TRUE(st.f_next[0].coeff(Word{1, 1}).is_zero());
}

TEST(Step, ResonantInputRejected) {
  const int D = 3;
  E f({mono(2, D, Word{1}, 6), mono(2, D, Word{2}, 36) + mono(2, D, Word{1, 1})});
  try {
    siegel_step(f, Radius::exact(2), 0.5, SiegelParams{mpq_class(1, 20), 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ResonantObstruction);
  }
}

TEST(Step, PreconditionViolations) {
  const int D = 4;
  E f({xpow(D, 1, 6) + xpow(D, 2)});
  auto code_of = [&](auto fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;
  };
  EXPECT_EQ(code_of([&] { siegel_step(f, Radius::exact(1), 1.5, tenth()); }), ErrorCode::ScheduleViolation);
  EXPECT_EQ(code_of([&] { siegel_step(f, Radius::exact(1), 0.5, tenth()); }), ErrorCode::ScheduleViolation);
  EXPECT_EQ(code_of([&] { siegel_step(f, Radius::exact(1), 0.5, tenth(), 1.0); }), ErrorCode::ScheduleViolation);
}

// ---------------------------------------------------------------------------

TEST(ChooseB, ConcreteRunAgainstDirectEvaluation) {
  LogValue r1 = LogValue::exact(2), d1 = LogValue::exact(8);
  BCheck c = choose_B(r1, d1, 1.0, 1.0, 5);
  EXPECT_EQ(c.B, 32.0);
  auto direct = [](double B) {
    long double u = std::sqrt(7.0L * B / 390625.0L), alpha = std::sqrt(B - 1.0L), p = 1;
    for (int n = 0; n < 400; ++n) p *= 1 - u / std::pow(alpha, n);
    return 1.0L / B < p / 25.0L;
  };
  EXPECT_TRUE(direct(c.B));
  EXPECT_FALSE(direct(c.B / 2));
  EXPECT_TRUE(b_inequality(c.B, r1, d1, 1.0, 1.0, 5).holds);
  EXPECT_FALSE(b_inequality(c.B / 2, r1, d1, 1.0, 1.0, 5).holds);
}

TEST(ChooseB, StabilizesAsDeltaVanishes) {
  LogValue r1 = LogValue::exact(2);
  double prev = 0;
  for (long s : {20, 40, 80, 160}) prev = choose_B(r1, LogValue::exact(s), 1.0, 1.0, 5).B;
  EXPECT_EQ(prev, choose_B(r1, LogValue::infinity(), 1.0, 1.0, 5).B);
  EXPECT_EQ(prev, 32.0);  // smallest power of two above 1/r1 = 25
}

TEST(ChooseB, TinyCap) {
  try {
    choose_B(LogValue::exact(2), LogValue::exact(8), 1.0, 1.0, 5, 4.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoFeasibleB);
  }
}

// ---------------------------------------------------------------------------

TEST(Linearize, LinearInput) {
  E f = E::diagonal(6, {r(6), r(36)});
  auto res = linearize(f, Radius::exact(2), SiegelParams{mpq_class(1, 20), 1});
  EXPECT_EQ(res.Psi, E::identity(2, 6, kCtx));
  EXPECT_TRUE(res.schedule.steps.empty());
  EXPECT_EQ(res.schedule.scale_exponent, 0);
  EXPECT_EQ(res.r_prime.log().approx(), res.schedule.r1.approx());
  EXPECT_TRUE(res.residual_zero);
}

TEST(Linearize, CubicAgainstFormalOracle) {
  E f = cubic();
  auto res = linearize(f, Radius::exact(2), tenth());
  EXPECT_TRUE(res.residual_zero);
  EXPECT_TRUE(res.residual.is_infinite());
  EXPECT_EQ(compose(res.PsiInv, compose(f, res.Psi)), E({xpow(8, 1, 6)}));
  E formal = formal_linearize(f);
  EXPECT_EQ(res.Psi, formal);
  EXPECT_EQ(res.Psi[0].coeff(Word{1, 1, 1}), r(1, 210));
  EXPECT_EQ(res.semisimple_degree, 8);
  // r' >= 1/B in working coordinates
  EXPECT_LT(res.r_prime_working.log().box().hi, std::log2(res.schedule.B) / std::log2(5.0));
}

TEST(Linearize, ScheduleInvariants) {
  auto res = linearize(cubic(), Radius::exact(2), tenth());
  const auto& st = res.schedule.steps;
  ASSERT_FALSE(st.empty());
  const double ln5 = std::log(5.0);
  for (std::size_t i = 0; i < st.size(); ++i) {
    EXPECT_GT(st[i].eta, 0.0);
    EXPECT_LT(st[i].eta, 1.0);
    // eta^{mu+1} = B c' (7 mu)^mu delta
    double lhs = 2 * std::log(st[i].eta);
    double rhs = std::log(res.schedule.B * res.schedule.c_prime * 7.0) - st[i].delta.approx() * ln5;
    EXPECT_NEAR(lhs, rhs, 1e-9);
    EXPECT_LT(st[i].r.approx() * ln5, std::log(res.schedule.B));
    if (i + 1 < st.size()) {
      EXPECT_GE(st[i + 1].delta.approx() * ln5, st[i].delta.approx() * ln5 + std::log(res.schedule.B - 1) - 1e-9);
      EXPECT_NEAR(st[i + 1].r.approx() * ln5, st[i].r.approx() * ln5 - std::log1p(-st[i].eta), 1e-9);
    }
  }
}

TEST(Linearize, ResonantCompliantTwoVariables) {
  const int D = 6;
  E f = resonant_compliant(D);
  auto res = linearize(f, Radius::exact(2), SiegelParams{mpq_class(1, 20), 1});
  EXPECT_TRUE(res.residual_zero);
  std::vector<Rational> lambdas{r(6), r(36)};
  for (std::size_t j = 0; j < 2; ++j)
    for (const auto& w : words_in_range(2, 2, D)) {
      if (word_eigenvalue(lambdas, w) == lambdas[j]) {
        EXPECT_TRUE(res.Psi[j].coeff(w).is_zero()) << w.str();
      }
    }
  EXPECT_EQ(compose(res.PsiInv, compose(f, res.Psi)), compose(invert(formal_linearize(f)), compose(f, formal_linearize(f))));
}

TEST(Linearize, RaisesSmallMu) {
  auto res = linearize(cubic(5), Radius::exact(2), SiegelParams{mpq_class(1, 10), mpq_class(1, 4)});
  EXPECT_EQ(res.params.mu, mpq_class(3, 10));
  EXPECT_TRUE(res.residual_zero);
}

TEST(Linearize, SiegelFailureIsScheduleViolation) {
  E f({xpow(5, 1, 126) + xpow(5, 2)});
  try {
    linearize(f, Radius::exact(2), SiegelParams{1, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ScheduleViolation);
  }
}

TEST(Linearize, RejectsNonDiagonalAndResonant) {
  E nd({mono(2, 3, Word{1}, 6) + mono(2, 3, Word{2}), mono(2, 3, Word{2}, 36)});
  EXPECT_THROW(linearize(nd, Radius::exact(2), tenth()), Error);
  E res({mono(2, 3, Word{1}, 6), mono(2, 3, Word{2}, 36) + mono(2, 3, Word{1, 1})});
  try {
    linearize(res, Radius::exact(2), tenth());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ResonantObstruction);
  }
}

TEST(Linearize, RescaleRoundTrip) {
  std::mt19937_64 rng(3);
  E f = random_endo<Rational>(rng, 2, 5, kCtx, 1, 0.4);
  EXPECT_EQ(rescale(rescale(f, 3), -3), f);
  E s = E({mono(2, 5, Word{1}, 5), mono(2, 5, Word{2}, 5)});  // S = 5x
  E sinv = E({mono(2, 5, Word{1}, 1, 5), mono(2, 5, Word{2}, 1, 5)});
  EXPECT_EQ(rescale(f, 1), compose(sinv, compose(f, s)));
}

TEST(Linearize, CappedBackendMatchesExact) {
  ScalarContext ctx{5, 30};
  using C = Capped;
  const int D = 6;
  EndoTuple<C> f({Series<C>::monomial(1, D, Word{1}, C::from_rational(ctx, 6)) +
                  Series<C>::monomial(1, D, Word{1, 1, 1}, C::one(ctx))});
  auto res = linearize(f, Radius::exact(2), tenth());
  EXPECT_TRUE(res.residual_zero);
  EXPECT_EQ(res.semisimple_degree, 0);
  ASSERT_TRUE(res.ledger.min_absolute_precision.has_value());
  auto exact = formal_linearize(cubic(D));
  for (const auto& [w, c] : exact[0].terms()) {
    C got = res.Psi[0].coeff(w);
    C want = C::from_rational(ctx, c.value());
    EXPECT_TRUE((got - want).is_zero()) << w.str();
  }
}

TEST(Linearize, RandomInstancesAgreeWithFormal) {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 10; ++t) {
    SiegelInstance inst = random_siegel_instance(rng, 2, 6, kCtx);
    auto res = linearize(inst.f, Radius::exact(2), inst.params);
    EXPECT_TRUE(res.residual_zero);
    E formal = formal_linearize(inst.f);
    E a = E::diagonal(6, *inst.f.diagonal_eigenvalues());
    EXPECT_EQ(compose(res.PsiInv, compose(inst.f, res.Psi)), a);
    EXPECT_EQ(compose(invert(formal), compose(inst.f, formal)), a);
  }
}

// ---------------------------------------------------------------------------

TEST(Formal, QuadraticHandFormula) {
  const int D = 5;
  E f({xpow(D, 1, 6) + xpow(D, 2, 7)});
  E psi = formal_linearize(f);
  EXPECT_EQ(psi[0].coeff(Word{1, 1}), r(7, 30));
  EXPECT_EQ(compose(invert(psi), compose(f, psi)), E({xpow(D, 1, 6)}));
}

TEST(Formal, LinearIsIdentity) {
  EXPECT_EQ(formal_linearize(E::diagonal(4, {r(6), r(11)})), E::identity(2, 4, kCtx));
}

TEST(Formal, Resonance) {
  E f({mono(2, 3, Word{1}, 6), mono(2, 3, Word{2}, 36) + mono(2, 3, Word{1, 1})});
  try {
    formal_linearize(f);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ResonantObstruction);
  }
}

// ---------------------------------------------------------------------------

TEST(Eigen, LinearDiagonal) {
  auto ec = eigen_coordinates(E::diagonal(5, {r(6), r(36)}), Radius::exact(2), SiegelParams{mpq_class(1, 20), 1});
  EXPECT_EQ(ec.y[0], mono(2, 5, Word{1}));
  EXPECT_EQ(ec.y[1], mono(2, 5, Word{2}));
  EXPECT_TRUE(ec.eigen_relation);
  EXPECT_TRUE(ec.invertible);
}

TEST(Eigen, CubicCoordinate) {
  const int D = 8;
  E f = cubic(D);
  auto ec = eigen_coordinates(f, Radius::exact(2), tenth());
  EXPECT_EQ(ec.y[0].coeff(Word{1}), r(1));
  EXPECT_EQ(ec.y[0].coeff(Word{1, 1, 1}), r(-1, 210));
  EXPECT_EQ(substitute(ec.y[0], f.components()), r(6) * ec.y[0]);
  EXPECT_TRUE(ec.eigen_relation);
  EXPECT_EQ(ec.unit_blocks.size(), static_cast<std::size_t>(D));
  EXPECT_TRUE(ec.invertible);
}

TEST(Eigen, DiagonalizesRationalLinearPart) {
  const int D = 5;
  // linear part [[6, 1], [0, 36]]
  E f({mono(2, D, Word{1}, 6) + mono(2, D, Word{2}) + mono(2, D, Word{1, 2}),
       mono(2, D, Word{2}, 36) + mono(2, D, Word{2, 1, 2})});
  auto ec = eigen_coordinates(f, Radius::exact(2), SiegelParams{mpq_class(1, 20), 1});
  ASSERT_TRUE(ec.change.has_value());
  EXPECT_EQ(ec.change->eigenvalues, (std::vector<mpq_class>{6, 36}));
  EXPECT_TRUE(ec.eigen_relation);
  for (std::size_t i = 0; i < 2; ++i)
    EXPECT_EQ(substitute(ec.y[i], f.components()), ec.lambdas[i] * ec.y[i]);
  EXPECT_TRUE(ec.invertible);
}

TEST(Eigen, NotDiagonalizable) {
  E jordan({mono(2, 3, Word{1}, 6) + mono(2, 3, Word{2}), mono(2, 3, Word{2}, 6)});
  try {
    eigen_coordinates(jordan, Radius::exact(2), tenth());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotDiagonal);
  }
}

TEST(Eigen, RationalRoots) {
  QPoly p({mpq_class(-6), mpq_class(11), mpq_class(-6), mpq_class(1)});  // (x-1)(x-2)(x-3)
  EXPECT_EQ(detail::rational_roots(p), (std::vector<mpq_class>{1, 2, 3}));
  QPoly h({mpq_class(-1, 2), mpq_class(0), mpq_class(2)});  // 2x^2 - 1/2
  EXPECT_EQ(detail::rational_roots(h), (std::vector<mpq_class>{mpq_class(-1, 2), mpq_class(1, 2)}));
}
