#pragma once

// Seeded random inputs: scalars, series, tuples and Siegel instances.

#include <gmpxx.h>

#include <cstdlib>
#include <random>
#include <vector>

#include "endo.hpp"
#include "series.hpp"
#include "small_divisors.hpp"

namespace ncsiegel::sampling {

// l^v * (unit with |unit| small, coprime to l), v uniform in [vmin, vmax].
template <LadicScalar K>
K random_scalar(std::mt19937_64& rng, const ScalarContext& ctx, long vmin, long vmax) {
  std::uniform_int_distribution<long> vd(vmin, vmax), ud(1, 60), sd(0, 1);
  long u = ud(rng);
  while (u % ctx.ell == 0) u = ud(rng);
  if (sd(rng)) u = -u;
  long v = vd(rng);
  mpq_class val(u);
  mpq_class p(ctx.ell);
  for (long i = 0; i < std::abs(v); ++i) {
    if (v > 0) val *= p;
    else val /= p;
  }
  return K::from_rational(ctx, val);
}

// Random series with terms of weight in [wmin, D]; each word present with
// probability `density`; coefficient valuation in [vlo(w), vlo(w) + 3] where
// vlo(w) = base + slope * w.
template <LadicScalar K>
Series<K> random_series(std::mt19937_64& rng, int n, int D, const ScalarContext& ctx, int wmin, double density,
                        long base = 0, long slope = 0) {
  Series<K> s(n, D, ctx);
  std::bernoulli_distribution keep(density);
  for (const Word& w : words_in_range(n, wmin, D)) {
    if (!keep(rng)) continue;
    long lo = base + slope * static_cast<long>(w.weight());
    s.set(w, random_scalar<K>(rng, ctx, lo, lo + 3));
  }
  if (wmin == 0 && keep(rng)) s.set(Word{}, random_scalar<K>(rng, ctx, 0, 2));
  return s;
}

template <LadicScalar K>
EndoTuple<K> random_endo(std::mt19937_64& rng, int n, int D, const ScalarContext& ctx, int wmin, double density,
                         long base = 0, long slope = 0) {
  std::vector<Series<K>> comps;
  for (int i = 0; i < n; ++i) comps.push_back(random_series<K>(rng, n, D, ctx, wmin, density, base, slope));
  return EndoTuple<K>(std::move(comps));
}

// A random n-variable map A x + f-hat with lambda_i = 1 + l a_i pairwise
// distinct, no resonant monomial present, and Siegel parameters fitted up to D.
struct SiegelInstance {
  EndoTuple<Rational> f;
  SiegelParams params;
};

inline SiegelInstance random_siegel_instance(std::mt19937_64& rng, int n, int D, const ScalarContext& ctx, double density = 0.3) {
  std::uniform_int_distribution<long> ad(-6, 6);
  for (;;) {
    std::vector<Rational> lambdas;
    for (int i = 0; i < n; ++i) {
      long a = ad(rng);
      while (a == 0) a = ad(rng);
      lambdas.push_back(Rational(ctx.ell, 1 + ctx.ell * a));
    }
    EndoTuple<Rational> fhat = random_endo<Rational>(rng, n, D, ctx, 2, density);
    std::vector<Series<Rational>> comps;
    for (int j = 0; j < n; ++j) {
      Series<Rational> s = Series<Rational>::monomial(n, D, Word{j + 1}, lambdas[static_cast<std::size_t>(j)]);
      for (const auto& [w, c] : fhat[static_cast<std::size_t>(j)].terms()) {
        Rational li = Rational::one(ctx);
        for (int a : w.letters()) li = li * lambdas[static_cast<std::size_t>(a - 1)];
        if (!(li - lambdas[static_cast<std::size_t>(j)]).is_zero()) s.set(w, c);
      }
      comps.push_back(std::move(s));
    }
    bool distinct = true;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < i; ++j)
        if (lambdas[static_cast<std::size_t>(i)] == lambdas[static_cast<std::size_t>(j)]) distinct = false;
    if (!distinct) continue;
    SiegelFit fit = fit_siegel(lambdas, D, default_mu_grid());
    return {EndoTuple<Rational>(std::move(comps)), fit.params};
  }
}

}  // namespace ncsiegel::sampling
