#include <gtest/gtest.h>

#include "ncsiegel/endo.hpp"
#include "test_support.hpp"

using namespace ncsiegel;
using namespace ncsiegel::testing;
using S = Series<Rational>;
using E = EndoTuple<Rational>;

namespace {

const ScalarContext kCtx{5, 0};

Rational r(long a, long b = 1) { return q<Rational>(kCtx, a, b); }
S mono(int n, int D, Word w, long c = 1) { return S::monomial(n, D, w, r(c)); }
S xpow(int D, int k, long c = 1) { return mono(1, D, Word(std::vector<int>(static_cast<std::size_t>(k), 1)), c); }

}  // namespace

TEST(Compose, IdentityIsNeutral) {
  E id = E::identity(2, 5, kCtx);
  EXPECT_EQ(compose(id, id), id);
}

TEST(Compose, OneVariableHandExpansion) {
  const int D = 6;
  E f({xpow(D, 1) + xpow(D, 2)});
  E g({xpow(D, 1) + xpow(D, 3)});
  // (x + x^3) + (x + x^3)^2 = x + x^2 + x^3 + 2x^4 + x^6
  E expected({xpow(D, 1) + xpow(D, 2) + xpow(D, 3) + xpow(D, 4, 2) + xpow(D, 6)});
  EXPECT_EQ(compose(f, g), expected);
  EXPECT_EQ(compose(f, g).truncated(4), E({xpow(4, 1) + xpow(4, 2) + xpow(4, 3) + xpow(4, 4, 2)}));
}

TEST(Invert, IdentityInverse) {
  E id = E::identity(2, 5, kCtx);
  EXPECT_EQ(invert(id), id);
}

TEST(Invert, SignedCatalanNumbers) {
  const int D = 8;
  // Oracle: g = x - g^2 by fixed-point iteration (each pass fixes one degree).
  S g = xpow(D, 1);
  for (int it = 0; it < D; ++it) g = xpow(D, 1) - g * g;
  const long catalan[] = {1, 1, 2, 5, 14, 42, 132, 429};
  for (int k = 1; k <= D; ++k)
    EXPECT_EQ(g.coeff(Word(std::vector<int>(static_cast<std::size_t>(k), 1))), r((k % 2 ? 1 : -1) * catalan[k - 1]));
  E inv = invert(E({xpow(D, 1) + xpow(D, 2)}));
  EXPECT_EQ(inv[0], g);
}

TEST(Invert, TwoVariableGeometricTail) {
  const int D = 5;
  E psi({mono(2, D, {1}) + mono(2, D, {2, 1}), mono(2, D, {2})});
  // Frozen from the triangular solve g_1 = (1 + x_2)^{-1} x_1.
  S g1(2, D, kCtx);
  for (int k = 0; k < D; ++k) {
    std::vector<int> w(static_cast<std::size_t>(k), 2);
    w.push_back(1);
    g1.set(Word(w), r(k % 2 ? -1 : 1));
  }
  E g = invert(psi);
  EXPECT_EQ(g[0], g1);
  EXPECT_EQ(g[1], mono(2, D, {2}));
  EXPECT_EQ(compose(psi, g), E::identity(2, D, kCtx));
  EXPECT_EQ(compose(g, psi), E::identity(2, D, kCtx));
}

TEST(Invert, Errors) {
  E notnorm({xpow(4, 1, 2)});
  try {
    invert(notnorm);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotNormalized);
  }
  E big({xpow(4, 1) + xpow(4, 2)});  // ||x^2||_r = r^2 < r: fine at r = 1/5
  EXPECT_NO_THROW(invert(big, Radius::exact(1)));
  E bigger({xpow(4, 1) + xpow(4, 2, 1) * S::constant(1, 4, r(1, 25))});
  try {
    invert(bigger, Radius::exact(1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NormTooLarge);
  }
}

TEST(Invert, TwoSidedOnRandomCappedInputs) {
  std::mt19937_64 rng(3);
  ScalarContext ctx{5, 40};
  Radius rad = Radius::exact(1);
  for (int t = 0; t < 20; ++t) {
    auto hat = random_endo<Capped>(rng, 2, 6, ctx, 2, 0.3, 3, -1);
    auto psi = EndoTuple<Capped>::identity(2, 6, ctx) + hat;
    auto g = invert(psi, rad);
    auto id = EndoTuple<Capped>::identity(2, 6, ctx);
    ASSERT_TRUE((compose(g, psi) - id).is_zero());
    ASSERT_TRUE((compose(psi, g) - id).is_zero());
    ASSERT_TRUE(certainly_le((g - id).norm(rad), hat.norm(rad)));
  }
}

TEST(Taylor, ZeroPerturbation) {
  E f({xpow(4, 2)});
  EXPECT_TRUE(taylor_gap(f, {r(1)}, E::zero(1, 4, kCtx), Radius::exact(1)).is_infinite());
}

TEST(Taylor, WitnessSaturatesSharpBound) {
  const int D = 4;
  Radius rad = Radius::exact(1);
  E f({xpow(D, 1)});
  E eps({xpow(D, 2)});
  LogNorm gap = taylor_gap(f, {r(1)}, eps, rad);
  EXPECT_EQ(*gap.exact_value(), 2);                              // r^2
  EXPECT_EQ(*taylor_bound(f, eps, rad).exact_value(), 2);         // r * r^2 / r
  EXPECT_FALSE(certainly_le(gap, f.norm(rad) + eps.norm(rad)));  // r^3: display without /r fails
}

TEST(Taylor, RadiusViolation) {
  E f({xpow(4, 1)});
  E eps({xpow(4, 1)});
  try {
    taylor_gap(f, {r(1)}, eps, Radius::exact(1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RadiusViolation);
  }
}

TEST(Taylor, RandomSamplesRespectSharpBound) {
  std::mt19937_64 rng(300);
  Radius rad = Radius::exact(1);
  int stronger = 0;
  for (int t = 0; t < 100; ++t) {
    E f = random_endo<Rational>(rng, 2, 5, kCtx, 1, 0.25, 0, -1);
    E eps = random_endo<Rational>(rng, 2, 5, kCtx, 1, 0.25, 1, 0);
    std::vector<Rational> lambdas{random_scalar<Rational>(rng, kCtx, 0, 2), random_scalar<Rational>(rng, kCtx, 0, 2)};
    LogNorm gap = taylor_gap(f, lambdas, eps, rad);
    ASSERT_TRUE(certainly_le(gap, taylor_bound(f, eps, rad)));
    if (certainly_le(gap, f.norm(rad) + eps.norm(rad))) ++stronger;
  }
  RecordProperty("stronger_bound_rate", stronger);
}

TEST(Jet, DiagonalLinearMap) {
  E f = E::diagonal(3, {r(2), r(3)});
  auto jet = jet_matrix(f, 3);
  for (std::size_t i = 0; i < jet.basis.size(); ++i)
    for (std::size_t j = 0; j < jet.basis.size(); ++j) {
      if (i != j) {
        EXPECT_TRUE(jet.matrix(i, j).is_zero());
        continue;
      }
      auto e = jet.basis[i].exponents(2);
      mpq_class expect = 1;
      for (long k = 0; k < e[0]; ++k) expect *= 2;
      for (long k = 0; k < e[1]; ++k) expect *= 3;
      EXPECT_EQ(jet.matrix(i, i), r(expect.get_num().get_si()));
    }
}

TEST(Jet, OneVariableQuadratic) {
  E f({xpow(3, 1, 6) + xpow(3, 2)});
  auto jet = jet_matrix(f, 2);
  ASSERT_EQ(jet.basis.size(), 2u);
  // Column P holds x^P o f: x -> 6x + x^2, x^2 -> 36x^2 + ...
  EXPECT_EQ(jet.matrix(0, 0), r(6));
  EXPECT_EQ(jet.matrix(1, 0), r(1));
  EXPECT_EQ(jet.matrix(0, 1), r(0));
  EXPECT_EQ(jet.matrix(1, 1), r(36));
}

TEST(Jet, WeightTriangularAndFunctorial) {
  std::mt19937_64 rng(41);
  for (int t = 0; t < 20; ++t) {
    E f = random_endo<Rational>(rng, 2, 4, kCtx, 1, 0.4);
    E g = random_endo<Rational>(rng, 2, 4, kCtx, 1, 0.4);
    auto jf = jet_matrix(f, 4);
    for (std::size_t i = 0; i < jf.basis.size(); ++i)
      for (std::size_t j = 0; j < jf.basis.size(); ++j)
        if (jf.basis[i].weight() < jf.basis[j].weight()) {
          ASSERT_TRUE(jf.matrix(i, j).is_zero());
        }
    auto jfg = jet_matrix(compose(f, g), 3);
    ASSERT_TRUE(jfg.matrix == jet_matrix(g, 3).matrix * jet_matrix(f, 3).matrix);
  }
}

TEST(Semisimple, Examples) {
  EXPECT_TRUE(is_semisimple_jet(E::diagonal(3, {r(2), r(3)}), 3));
  EXPECT_TRUE(is_semisimple_jet(E({xpow(3, 1, 6) + xpow(3, 2)}), 2));
  EXPECT_FALSE(is_semisimple_jet(E({xpow(3, 1) + xpow(3, 2)}), 2));
  EXPECT_TRUE(is_semisimple_jet(E({xpow(3, 1)}), 3));
  auto capped = EndoTuple<Capped>::identity(1, 3, {5, 10});
  EXPECT_THROW(is_semisimple_jet(capped, 2), Error);
}

TEST(Resonance, Examples) {
  const int D = 4;
  Rational u = r(6);
  std::vector<Rational> lam{u, u * u};
  E compliant({mono(2, D, {1}, 6) + mono(2, D, {1, 2}), mono(2, D, {2}, 36) + mono(2, D, {2, 2})});
  EXPECT_TRUE(resonance_check(compliant).empty());
  E violating({mono(2, D, {1}, 6), mono(2, D, {2}, 36) + mono(2, D, {1, 1})});
  auto v = resonance_check(violating);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].word, (Word{1, 1}));
  EXPECT_EQ(v[0].component, 2);
  EXPECT_FALSE(v[0].undecidable);

  // lambda = 1 + l is never resonant: lambda^k != lambda for k >= 2.
  for (int k = 2; k <= 8; ++k) {
    mpz_class p;
    mpz_ui_pow_ui(p.get_mpz_t(), 6, static_cast<unsigned long>(k));
    EXPECT_NE(p, 6);
  }
  std::mt19937_64 rng(8);
  for (int t = 0; t < 20; ++t) {
    E f = E({xpow(8, 1, 6)}) + random_endo<Rational>(rng, 1, 8, kCtx, 2, 0.6);
    EXPECT_TRUE(resonance_check(f).empty());
  }
  E nondiag({mono(2, D, {1}) + mono(2, D, {2}), mono(2, D, {2})});
  EXPECT_THROW(resonance_check(nondiag), Error);
}

TEST(Resonance, SemisimpleImpliesNoViolation) {
  std::mt19937_64 rng(12);
  const int D = 3;
  int semisimple = 0;
  for (int t = 0; t < 40; ++t) {
    E f({mono(2, D, {1}, 6), mono(2, D, {2}, 36)});
    E hat = random_endo<Rational>(rng, 2, D, kCtx, 2, 0.3);
    if (t % 2 == 0) {  // zero out resonant coefficients half the time
      std::vector<S> comps = hat.components();
      comps[1].set(Word{1, 1}, r(0));
      hat = E(comps);
    }
    f = f + hat;
    bool all = true;
    for (int m = 1; m <= D && all; ++m) all = is_semisimple_jet(f, m);
    if (all) {
      ++semisimple;
      ASSERT_TRUE(resonance_check(f).empty());
    }
  }
  EXPECT_GT(semisimple, 0);
}
