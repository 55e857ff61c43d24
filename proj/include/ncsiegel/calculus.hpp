#pragma once

// Two elementary real bounds that drive the linearization schedule, each with
// an enumeration-plus-tail verifier.

#include <cmath>

#include "errors.hpp"
#include "lognorm.hpp"

namespace ncsiegel {

// (eta / (7 mu))^{-mu}, an upper bound for sup_{i >= 0} (1 - eta)^i i^mu.
inline double calculus_sup_bound(double eta, double mu) {
  if (!(eta > 0.0 && eta < 1.0) || !(mu > 0.0)) raise(ErrorCode::InvalidArgument, "need eta in (0,1) and mu > 0");
  return std::pow(eta / (7.0 * mu), -mu);
}

struct SupCheck {
  double bound = 0.0;
  Interval sup;           // enclosure of the integer supremum
  long argmax = 0;
  long enumerated_to = 0;  // terms i <= enumerated_to were evaluated
  double tail = 0.0;       // every term beyond enumerated_to is <= tail
  bool holds = false;
};

// (1 - eta)^x x^mu increases up to x* = mu / -log(1 - eta) and decreases after,
// so the supremum over integers is attained at floor(x*) or ceil(x*). The
// enumeration runs past x* until the terms drop below `tail_tolerance`; the
// last evaluated term then bounds the whole tail.
inline SupCheck verify_calculus_sup(double eta, double mu, double tail_tolerance = 1e-6) {
  SupCheck out;
  out.bound = calculus_sup_bound(eta, mu);
  const double turnover = mu / -std::log1p(-eta);
  const Interval log_q = Interval::log1m(Interval::point(eta));
  auto term = [&](long i) {
    if (i == 0) return Interval::point(0.0);
    Interval li = Interval::log(Interval::point(static_cast<double>(i)));
    return Interval::exp(log_q * Interval::point(static_cast<double>(i)) + li * Interval::point(mu));
  };
  out.sup = Interval::point(0.0);
  long i = 0;
  for (;; ++i) {
    Interval t = term(i);
    if (t.hi > out.sup.hi) {
      out.sup = t;
      out.argmax = i;
    }
    if (static_cast<double>(i) > turnover + 1.0 && t.hi < tail_tolerance) break;
  }
  out.enumerated_to = i;
  out.tail = term(i).hi;
  out.holds = out.sup.hi <= out.bound && out.tail <= out.bound;
  return out;
}

// exp(-alpha / (alpha - 1)), a lower bound for prod_{n >= 0} (1 - u / alpha^n).
inline double calculus_product_bound(double u, double alpha) {
  if (!(u > 0.0 && u < 0.5) || !(alpha > 1.0)) raise(ErrorCode::InvalidArgument, "need u in (0, 0.5) and alpha > 1");
  return std::exp(-alpha / (alpha - 1.0));
}

struct ProductCheck {
  double bound = 0.0;
  Interval product;  // enclosure of the infinite product
  long terms = 0;
  bool holds = false;
};

// Enclosure of prod_{n>=0} (1 - u alpha^{-n}): the partial product over
// n < terms, times a tail factor in [1 - u alpha^{-terms} / (1 - 1/alpha), 1]
// (Weierstrass product inequality). `terms` grows until the tail deficit
// falls below `tail_tolerance`.
inline Interval product_enclosure(Interval u, Interval alpha, double tail_tolerance, long* terms_used = nullptr) {
  Interval partial = Interval::point(1.0);
  Interval inv_alpha = Interval::point(1.0) / alpha;
  Interval scale = Interval::point(1.0);  // alpha^{-n}
  long n = 0;
  Interval deficit;
  for (;; ++n) {
    Interval geometric = Interval::point(1.0) - inv_alpha;
    deficit = u * scale / geometric;
    if (deficit.hi < tail_tolerance || n > 100000) break;
    partial = partial * (Interval::point(1.0) - u * scale);
    scale = scale * inv_alpha;
  }
  if (terms_used) *terms_used = n;
  Interval tail{Interval::down(1.0 - deficit.hi, 2), 1.0};
  if (tail.lo <= 0.0) tail.lo = 0.0;
  return partial * tail;
}

inline ProductCheck verify_calculus_product(double u, double alpha, double tail_tolerance = 1e-6) {
  ProductCheck out;
  out.bound = calculus_product_bound(u, alpha);
  out.product = product_enclosure(Interval::point(u), Interval::point(alpha), tail_tolerance, &out.terms);
  out.holds = out.product.lo > out.bound;
  return out;
}

}  // namespace ncsiegel
