#pragma once

// Siegel linearization: homological equation, one conjugation step, the
// B/eta/delta/r schedule and the full driver.
//
// Constants. The small-divisor bound is used in reciprocal form
// 1/|lambda^I - lambda_j| <= C (|I|/2)^mu with C = 1/c. A step at radius r
// takes an adjusted constant c' >= C / min(r, 1); the driver fixes c' = C B,
// which is admissible because every radius it visits stays above 1/B.

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "calculus.hpp"
#include "endo.hpp"
#include "errors.hpp"
#include "lognorm.hpp"
#include "series.hpp"
#include "small_divisors.hpp"

namespace ncsiegel {

namespace detail {

inline Interval ln_ell(long ell) { return Interval::log(Interval::point(static_cast<double>(ell))); }

inline Interval exponent_box(const LogValue& s) { return s.exact_value() ? Interval::of(*s.exact_value()) : s.box(); }

// ln of the magnitude l^{-s}; callers handle the infinite (zero) case first.
inline Interval ln_magnitude(const LogValue& s, long ell) { return -(exponent_box(s) * ln_ell(ell)); }

inline LogValue from_ln_magnitude(Interval ln_mag, long ell) { return LogValue::enclosed(-(ln_mag / ln_ell(ell))); }

inline Interval ln_point(double x) { return Interval::log(Interval::point(x)); }

// mu ln(7 mu), the log of (7 mu)^mu.
inline Interval ln_k0(double mu) { return Interval::point(mu) * ln_point(7.0 * mu); }

template <LadicScalar K>
K scalar_from(const ScalarContext& ctx, const mpq_class& q) {
  return K::from_rational(ctx, q);
}

}  // namespace detail

struct PrecisionLedger {
  std::optional<long> worst_divisor_valuation;  // largest v(lambda^I - lambda_j) divided by
  long divisions = 0;
  std::optional<long> min_absolute_precision;  // capped backend only

  void absorb(const PrecisionLedger& o) {
    if (o.worst_divisor_valuation)
      worst_divisor_valuation = std::max(worst_divisor_valuation.value_or(*o.worst_divisor_valuation), *o.worst_divisor_valuation);
    divisions += o.divisions;
    if (o.min_absolute_precision)
      min_absolute_precision = std::min(min_absolute_precision.value_or(*o.min_absolute_precision), *o.min_absolute_precision);
  }
};

template <LadicScalar K>
struct HomologicalSolution {
  EndoTuple<K> psi_hat;
  PrecisionLedger ledger;
};

namespace detail {

template <LadicScalar K>
void note_precision(PrecisionLedger& ledger, const K& x) {
  if constexpr (!K::is_exact_backend) {
    if (x.is_exact_zero()) return;
    long a = *x.absolute_precision();
    ledger.min_absolute_precision = std::min(ledger.min_absolute_precision.value_or(a), a);
  }
}

template <LadicScalar K>
std::vector<K> require_diagonal(const EndoTuple<K>& f) {
  auto lambdas = f.diagonal_eigenvalues();
  if (!lambdas) raise(ErrorCode::NotDiagonal, "linear part is not diagonal");
  return *lambdas;
}

template <LadicScalar K>
void require_unit_disc(const std::vector<K>& lambdas) {
  for (const auto& l : lambdas) {
    Valuation v = l.valuation();
    if (!v.infinite && v.value < 0) raise(ErrorCode::InvalidArgument, "eigenvalues must satisfy |lambda| <= 1");
  }
}

template <LadicScalar K>
void require_formal_preconditions(const EndoTuple<K>& f, const std::vector<K>& lambdas) {
  require_unit_disc(lambdas);
  auto violations = resonance_check(f);
  for (const auto& v : violations) {
    if (v.undecidable)
      raise(ErrorCode::Undecidable, "resonance of x^" + v.word.str() + " in component " + std::to_string(v.component) +
                                        " is undecidable at working precision");
    if (!v.coefficient.is_zero())
      raise(ErrorCode::ResonantObstruction,
            "nonzero resonant coefficient of x^" + v.word.str() + " in component " + std::to_string(v.component));
  }
}

// Norm over the coefficients with at least one known digit. Indistinguishable
// zeros only bound the working precision, not the map.
template <LadicScalar K>
LogNorm known_norm(const EndoTuple<K>& f, const Radius& r) {
  if constexpr (K::is_exact_backend) {
    return f.norm(r);
  } else {
    return f.map([](const Series<K>& s) {
              Series<K> out(s.variables(), s.degree(), s.context());
              for (const auto& [w, c] : s.terms())
                if (!c.indistinguishable_zero()) out.set(w, c);
              return out;
            })
        .norm(r);
  }
}

// A map with the same known_norm at every radius: per component and weight,
// one term of least valuation.
template <LadicScalar K>
EndoTuple<K> norm_skeleton(const EndoTuple<K>& f) {
  return f.map([](const Series<K>& s) {
    std::vector<std::optional<std::pair<Word, K>>> best(static_cast<std::size_t>(s.degree()) + 1);
    for (const auto& [w, c] : s.terms()) {
      if (c.is_zero()) continue;
      auto& slot = best[w.weight()];
      if (!slot || c.valuation().value < slot->second.valuation().value) slot = std::make_pair(w, c);
    }
    Series<K> out(s.variables(), s.degree(), s.context());
    for (const auto& b : best)
      if (b) out.set(b->first, b->second);
    return out;
  });
}

// Coefficient a / (lambda^I - lambda_j), or zero on a resonance with a = 0.
template <LadicScalar K>
std::optional<K> homological_coefficient(const std::vector<K>& lambdas, const Word& w, std::size_t j, const K& a,
                                         PrecisionLedger& ledger) {
  if (a.is_exact_zero()) return std::nullopt;
  K diff = word_eigenvalue(lambdas, w) - lambdas[j];
  if (diff.is_exact_zero()) {
    if (a.is_zero()) return std::nullopt;
    raise(ErrorCode::ResonantObstruction,
          "nonzero resonant coefficient of x^" + w.str() + " in component " + std::to_string(j + 1));
  }
  if (diff.is_zero()) {
    if (a.is_zero()) return std::nullopt;
    raise(ErrorCode::Undecidable,
          "lambda^I - lambda_j is indistinguishable from zero for x^" + w.str() + " in component " + std::to_string(j + 1));
  }
  long v = diff.valuation().value;
  ledger.worst_divisor_valuation = std::max(ledger.worst_divisor_valuation.value_or(v), v);
  ++ledger.divisions;
  K out = a / diff;
  note_precision(ledger, out);
  return out;
}

template <LadicScalar K>
EndoTuple<K> scale_components(const EndoTuple<K>& f, const std::vector<K>& lambdas) {
  std::vector<Series<K>> comps;
  for (std::size_t j = 0; j < lambdas.size(); ++j) comps.push_back(lambdas[j] * f[j]);
  return EndoTuple<K>(std::move(comps));
}

}  // namespace detail

// Solves psi-hat(A x) - A psi-hat(x) = fhat coefficientwise.
template <LadicScalar K>
HomologicalSolution<K> solve_homological(const EndoTuple<K>& fhat, const std::vector<K>& lambdas) {
  const int n = fhat.variables();
  if (static_cast<int>(lambdas.size()) != n) raise(ErrorCode::ShapeMismatch, "need one eigenvalue per variable");
  for (const auto& c : fhat.components())
    if (!c.in_ideal_power(2)) raise(ErrorCode::InvalidArgument, "fhat must lie in I^2");
  detail::require_unit_disc(lambdas);

  HomologicalSolution<K> out{EndoTuple<K>::zero(n, fhat.degree(), fhat.context()), {}};
  std::vector<Series<K>> comps;
  for (std::size_t j = 0; j < static_cast<std::size_t>(n); ++j) {
    Series<K> s(n, fhat.degree(), fhat.context());
    for (const auto& [w, a] : fhat[j].terms())
      if (auto b = detail::homological_coefficient(lambdas, w, j, a, out.ledger)) s.set(w, *b);
    comps.push_back(std::move(s));
  }
  out.psi_hat = EndoTuple<K>(std::move(comps));

  EndoTuple<K> a = EndoTuple<K>::diagonal(fhat.degree(), lambdas);
  EndoTuple<K> lhs = compose(out.psi_hat, a) - detail::scale_components(out.psi_hat, lambdas);
  if (!(lhs - fhat).is_zero()) raise(ErrorCode::PrecisionExhausted, "homological equation fails to verify at working precision");
  return out;
}

template <LadicScalar K>
struct StepResult {
  EndoTuple<K> psi;
  EndoTuple<K> psi_inv;
  EndoTuple<K> f_next;
  LogNorm delta;        // ||f-hat||_r
  LogNorm delta_next;   // ||f_next - A x||_{r(1-eta)}
  LogNorm psi_norm;     // ||psi - x||_{r(1-eta)}
  LogNorm psi_inv_norm; // ||psi^{-1} - x||_{r(1-eta)}
  LogNorm psi_bound;
  LogNorm delta_bound;
  Radius r_next;
  PrecisionLedger ledger;
};

struct StepConstants {
  double c_prime = 0.0;  // adjusted constant; defaults to C / min(r, 1)
  double mu = 1.0;
};

// Smallest admissible adjusted constant for a step at radius r.
inline double minimal_c_prime(const SiegelParams& params, const Radius& r, long ell) {
  double c_sigma = params.c_sigma().get_d();
  Interval ln_r = detail::ln_magnitude(r.log(), ell);
  double ln_over = std::max(0.0, -ln_r.lo);
  return Interval::up(c_sigma * std::exp(ln_over));
}

template <LadicScalar K>
StepResult<K> siegel_step(const EndoTuple<K>& f, const Radius& r, double eta, const SiegelParams& params,
                          std::optional<double> c_prime = std::nullopt) {
  const long ell = f.context().ell;
  const double mu = params.mu_approx();
  if (!(eta > 0.0 && eta < 1.0)) raise(ErrorCode::ScheduleViolation, "eta must lie in (0,1)");
  if (!(mu > 0.0) || params.c <= 0) raise(ErrorCode::InvalidArgument, "Siegel parameters must be positive");
  const double c_min = minimal_c_prime(params, r, ell);
  const double cp = c_prime.value_or(c_min);
  if (cp < c_min) raise(ErrorCode::ScheduleViolation, "adjusted constant c' is below C / min(r, 1)");

  std::vector<K> lambdas = detail::require_diagonal(f);
  detail::require_formal_preconditions(f, lambdas);
  const int n = f.variables();
  const int degree = f.degree();
  const ScalarContext& ctx = f.context();
  EndoTuple<K> a = EndoTuple<K>::diagonal(degree, lambdas);
  EndoTuple<K> fhat = f - a;

  StepResult<K> out;
  out.r_next = r.shrunk(Interval::point(eta), ell);
  out.delta = detail::known_norm(fhat, r);
  EndoTuple<K> id = EndoTuple<K>::identity(n, degree, ctx);

  if (fhat.is_zero()) {
    out.psi = id;
    out.psi_inv = id;
    out.f_next = f;
    out.delta_next = detail::known_norm(fhat, out.r_next);
    out.psi_norm = out.psi_inv_norm = out.psi_bound = out.delta_bound = LogNorm::infinity();
    return out;
  }

  // c' (7 mu)^mu eta^{-mu} delta < 1, i.e. C (7 mu)^mu eta^{-mu} delta < r.
  const Interval ln_eta = detail::ln_point(eta);
  const Interval ln_c = detail::ln_point(cp);
  const Interval ln_k0 = detail::ln_k0(mu);
  const Interval ln_delta = detail::ln_magnitude(out.delta, ell);
  const Interval ln_mu = Interval::point(mu);
  Interval ln_pre = ln_c + ln_k0 - ln_mu * ln_eta + ln_delta;
  if (!(ln_pre.hi < 0.0)) raise(ErrorCode::ScheduleViolation, "c' (7mu)^mu eta^-mu delta < 1 fails");

  HomologicalSolution<K> sol = solve_homological(fhat, lambdas);
  out.ledger = sol.ledger;
  out.psi = id + sol.psi_hat;
  out.psi_inv = invert(out.psi, out.r_next);
  out.f_next = compose(out.psi_inv, compose(f, out.psi));
  out.delta_next = detail::known_norm(out.f_next - a, out.r_next);
  out.psi_norm = detail::known_norm(sol.psi_hat, out.r_next);
  out.psi_inv_norm = detail::known_norm(out.psi_inv - id, out.r_next);

  // c' delta (1 - eta) (eta / 7mu)^{-mu}
  Interval ln_psi_bound = ln_c + ln_delta + Interval::log1m(Interval::point(eta)) + ln_k0 - ln_mu * ln_eta;
  out.psi_bound = detail::from_ln_magnitude(ln_psi_bound, ell);
  // c' (7mu)^mu delta^2 / (eta^mu - delta c' (7mu)^mu)
  Interval ck = Interval::exp(ln_c + ln_k0 + ln_delta);
  Interval denom = Interval::exp(ln_mu * ln_eta) - ck;
  if (!(denom.lo > 0.0)) raise(ErrorCode::ScheduleViolation, "eta^mu - delta c' (7mu)^mu must be positive");
  Interval ln_delta_bound = ln_c + ln_k0 + ln_delta + ln_delta - Interval::log(denom);
  out.delta_bound = detail::from_ln_magnitude(ln_delta_bound, ell);

  if (!certainly_le(out.psi_norm, out.psi_bound))
    raise(ErrorCode::ContractionFailure, "||psi - x|| = " + out.psi_norm.str() + " exceeds bound " + out.psi_bound.str());
  // Equal in the exact limit whenever the leading terms coincide, so only a
  // certain excess counts.
  if (certainly_lt(out.psi_norm, out.psi_inv_norm))
    raise(ErrorCode::ContractionFailure, "||psi^-1 - x|| exceeds ||psi - x||");
  if (!certainly_le(out.delta_next, out.delta_bound))
    raise(ErrorCode::ContractionFailure,
          "delta_next = " + out.delta_next.str() + " exceeds bound " + out.delta_bound.str());
  return out;
}

// ---------------------------------------------------------------------------
// The B parameter.

struct BCheck {
  double B = 0.0;
  Interval u;        // (c' (7mu)^mu B delta1)^{1/(mu+1)}
  Interval rhs;      // r1 * prod_{n>=0} (1 - u / (B-1)^{n/(mu+1)})
  bool holds = false;
};

// Evaluates B^{-1} < r1 prod (1 - u alpha^{-n}) with alpha = (B-1)^{1/(mu+1)};
// the infinite product is enclosed by partial products and a tail bound.
inline BCheck b_inequality(double B, const LogValue& r1, const LogValue& delta1, double c_prime, double mu, long ell) {
  BCheck out;
  out.B = B;
  Interval ln_r1 = detail::ln_magnitude(r1, ell);
  Interval prod = Interval::point(1.0);
  if (delta1.is_infinite()) {
    out.u = Interval::point(0.0);
  } else {
    Interval ln_u = (detail::ln_point(c_prime) + detail::ln_k0(mu) + detail::ln_point(B) + detail::ln_magnitude(delta1, ell)) /
                    Interval::point(mu + 1.0);
    out.u = Interval::exp(ln_u);
    if (!(out.u.hi < 0.5)) {
      out.rhs = Interval::point(0.0);
      return out;
    }
    Interval alpha = Interval::exp(detail::ln_point(B - 1.0) / Interval::point(mu + 1.0));
    if (!(alpha.lo > 1.0)) {
      out.rhs = Interval::point(0.0);
      return out;
    }
    prod = product_enclosure(out.u, alpha, 1e-9);
  }
  out.rhs = Interval::exp(ln_r1 + Interval::log(prod));
  if (prod.lo <= 0.0) out.rhs.lo = 0.0;
  out.holds = Interval::up(1.0 / B) < out.rhs.lo;
  return out;
}

// Doubling search B = 2, 4, 8, ... up to `cap`.
inline BCheck choose_B(const LogValue& r1, const LogValue& delta1, double c_prime, double mu, long ell, double cap = 0x1p60) {
  for (double B = 2.0; B <= cap; B *= 2.0) {
    BCheck c = b_inequality(B, r1, delta1, c_prime, mu, ell);
    if (c.holds) return c;
  }
  raise(ErrorCode::NoFeasibleB, "no B <= " + std::to_string(cap) + " satisfies the schedule inequality");
}

inline BCheck choose_B(const Radius& r1, const LogValue& delta1, const SiegelParams& params, long ell, double cap = 0x1p60) {
  return choose_B(r1.log(), delta1, minimal_c_prime(params, r1, ell), params.mu_approx(), ell, cap);
}

// ---------------------------------------------------------------------------
// The driver.

struct ScheduleStep {
  int n = 0;
  LogValue r;  // r_n
  double eta = 0.0;
  LogValue delta;       // delta_n = ||f_n - A x||_{r_n}
  LogValue delta_next;  // measured at r_{n+1}
  LogValue delta_bound;
  LogValue psi_norm;  // ||psi_n - x||_{r_{n+1}}
  LogValue psi_bound;
};

struct SiegelSchedule {
  double B = 0.0;
  double c_prime = 0.0;  // C B
  double mu = 0.0;       // effective exponent
  long scale_exponent = 0;  // working coordinates are x = l^k x_original
  LogValue r1;
  Interval u;  // eta_1 as predicted by the B inequality
  Interval b_rhs;
  std::vector<ScheduleStep> steps;
  std::string termination;
};

template <LadicScalar K>
struct LinearizationResult {
  EndoTuple<K> Psi;     // Psi^{-1} o f o Psi = A x
  EndoTuple<K> PsiInv;
  std::vector<K> lambdas;
  Radius r_prime;          // convergence radius of Psi, original coordinates
  Radius r_prime_working;  // the same in working coordinates, >= 1/B
  SiegelSchedule schedule;
  LogNorm residual;        // ||Psi^{-1} o f o Psi - A x||_{r'}
  bool residual_zero = false;
  SiegelParams params;     // after raising mu
  SiegelCertificate certificate;
  int semisimple_degree = 0;  // jets certified semisimple up to this weight; 0 if asserted
  PrecisionLedger ledger;
};

struct LinearizeOptions {
  long max_scale = 64;
  double b_cap = 0x1p60;
  int max_steps = 200;
  std::optional<int> semisimple_degree;  // default: largest weight with a jet basis of <= 14 words
};

// Multiplies the coefficient of every weight-w word by l^{k (w - 1)}; this is
// S^{-1} o f o S for S = l^k x (and its inverse for negative k).
template <LadicScalar K>
EndoTuple<K> rescale(const EndoTuple<K>& f, long k) {
  if (k == 0) return f;
  const ScalarContext& ctx = f.context();
  mpz_class ell = ctx.ell;
  return f.map([&](const Series<K>& s) {
    Series<K> out(s.variables(), s.degree(), ctx);
    for (const auto& [w, c] : s.terms()) {
      long e = k * (static_cast<long>(w.weight()) - 1);
      mpz_class p;
      mpz_pow_ui(p.get_mpz_t(), ell.get_mpz_t(), static_cast<unsigned long>(e < 0 ? -e : e));
      mpq_class factor = e < 0 ? mpq_class(1, p) : mpq_class(p);
      factor.canonicalize();
      out.set(w, detail::scalar_from<K>(ctx, factor) * c);
    }
    return out;
  });
}

namespace detail {

inline int auto_semisimple_degree(int n, int degree) {
  long size = 0, power = 1;
  int m = 0;
  while (m < degree) {
    power *= n;
    if (size + power > 14) break;
    size += power;
    ++m;
  }
  return std::max(m, 1);
}

template <LadicScalar K>
std::vector<Rational> rational_eigenvalues(const std::vector<K>& lambdas) {
  std::vector<Rational> out;
  for (const auto& l : lambdas) out.push_back(Rational(l.ell(), l.to_rational()));
  return out;
}

// (ln B) / (2 ln l) added to the exponent: the radius r / sqrt(B).
inline Radius divide_by_sqrt(const Radius& r, double B, long ell) {
  Interval shift = ln_point(B) / (Interval::point(2.0) * ln_ell(ell));
  return Radius::from_log(LogValue::enclosed(exponent_box(r.log()) + shift));
}

}  // namespace detail

template <LadicScalar K>
LinearizationResult<K> linearize(const EndoTuple<K>& f, const Radius& r, const SiegelParams& params,
                                 const LinearizeOptions& options = {}) {
  const long ell = f.context().ell;
  const int n = f.variables();
  const int degree = f.degree();
  const ScalarContext& ctx = f.context();
  if (params.c <= 0 || params.mu < 0) raise(ErrorCode::InvalidArgument, "need c > 0 and mu >= 0");

  LinearizationResult<K> res;
  res.lambdas = detail::require_diagonal(f);
  detail::require_formal_preconditions(f, res.lambdas);
  res.params = params;
  if (res.params.mu <= mpq_class(2, 7)) res.params.mu = mpq_class(3, 10);

  res.certificate = check_siegel(detail::rational_eigenvalues(res.lambdas), res.params, std::max(degree, 2));
  if (res.certificate.verdict != Verdict::Holds)
    raise(ErrorCode::ScheduleViolation, "Siegel condition with the given (c, mu) fails up to degree " + std::to_string(degree));

  if constexpr (K::is_exact_backend) {
    int m = std::min(degree, options.semisimple_degree.value_or(detail::auto_semisimple_degree(n, degree)));
    if (!is_semisimple_jet(f, m)) raise(ErrorCode::ResonantObstruction, "jet of weight " + std::to_string(m) + " is not semisimple");
    res.semisimple_degree = m;
  }

  const double mu = res.params.mu_approx();
  const double c_sigma = Interval::up(res.params.c_sigma().get_d());
  EndoTuple<K> a = EndoTuple<K>::diagonal(degree, res.lambdas);

  // Preamble: pass to coordinates x = l^k x' until some B satisfies the
  // schedule inequality at r1 = r / sqrt(B).
  std::optional<BCheck> chosen;
  EndoTuple<K> work = f;
  long k = 0;
  for (; k <= options.max_scale && !chosen; ++k) {
    work = rescale(f, k);
    EndoTuple<K> fhat = detail::norm_skeleton(work - a);
    for (double B = 2.0; B <= options.b_cap; B *= 2.0) {
      Radius r1 = detail::divide_by_sqrt(r, B, ell);
      BCheck c = b_inequality(B, r1.log(), fhat.norm(r1), Interval::up(c_sigma * B), mu, ell);
      if (c.holds) {
        chosen = c;
        break;
      }
    }
    if (chosen) break;
  }
  if (!chosen) raise(ErrorCode::NoFeasibleB, "no feasible B after rescaling by l^" + std::to_string(options.max_scale));

  SiegelSchedule& sched = res.schedule;
  sched.B = chosen->B;
  sched.c_prime = Interval::up(c_sigma * sched.B);
  sched.mu = mu;
  sched.scale_exponent = k;
  sched.u = chosen->u;
  sched.b_rhs = chosen->rhs;
  Radius rn = detail::divide_by_sqrt(r, sched.B, ell);
  sched.r1 = rn.log();

  const Interval ln_b = detail::ln_point(sched.B);
  const Interval ln_b1 = detail::ln_point(sched.B - 1.0);
  const Interval ln_c = detail::ln_point(sched.c_prime);
  const Interval ln_k0 = detail::ln_k0(mu);

  EndoTuple<K> id = EndoTuple<K>::identity(n, degree, ctx);
  EndoTuple<K> psi_total = id;
  EndoTuple<K> fn = work;
  for (int step = 1;; ++step) {
    EndoTuple<K> fhat = fn - a;
    if (fhat.is_zero()) {
      sched.termination = "delta vanished at degree " + std::to_string(degree);
      break;
    }
    if (step > options.max_steps) raise(ErrorCode::ScheduleDivergence, "no termination after " + std::to_string(options.max_steps) + " steps");
    LogValue delta = detail::known_norm(fhat, rn);
    Interval ln_eta = (ln_b + ln_c + ln_k0 + detail::ln_magnitude(delta, ell)) / Interval::point(mu + 1.0);
    double eta = Interval::exp(ln_eta).hi;
    if (!(eta < 1.0)) raise(ErrorCode::ScheduleViolation, "eta_" + std::to_string(step) + " >= 1");

    StepResult<K> st = siegel_step(fn, rn, eta, res.params, sched.c_prime);
    res.ledger.absorb(st.ledger);
    if (!(detail::ln_magnitude(st.r_next.log(), ell).lo > -ln_b.lo))
      raise(ErrorCode::ScheduleViolation, "r_" + std::to_string(step + 1) + " fell below 1/B");
    LogValue allowed = detail::from_ln_magnitude(detail::ln_magnitude(delta, ell) - ln_b1, ell);
    if (!certainly_le(st.delta_next, allowed))
      raise(ErrorCode::ScheduleDivergence, "delta_" + std::to_string(step + 1) + " exceeds delta_" + std::to_string(step) + "/(B-1)");

    sched.steps.push_back({step, rn.log(), eta, delta, st.delta_next, st.delta_bound, st.psi_norm, st.psi_bound});
    psi_total = compose(psi_total, st.psi);
    fn = st.f_next;
    rn = st.r_next;
  }

  res.r_prime_working = rn;
  res.r_prime = Radius::from_log(rn.log() + LogValue::exact(mpq_class(k)));
  res.Psi = rescale(psi_total, -k);
  res.PsiInv = rescale(invert(psi_total), -k);
  EndoTuple<K> diff = compose(res.PsiInv, compose(f, res.Psi)) - a;
  res.residual = diff.norm(res.r_prime);
  res.residual_zero = diff.is_zero();
  return res;
}

// Degree-by-degree solution of Psi(A x) = f(Psi(x)):
// (lambda^I - lambda_j) h_I^j = [f-hat_j(Psi_{<k})]_I on weight k.
template <LadicScalar K>
EndoTuple<K> formal_linearize(const EndoTuple<K>& f) {
  std::vector<K> lambdas = detail::require_diagonal(f);
  detail::require_formal_preconditions(f, lambdas);
  const int n = f.variables();
  const int degree = f.degree();
  EndoTuple<K> a = EndoTuple<K>::diagonal(degree, lambdas);
  EndoTuple<K> fhat = f - a;
  EndoTuple<K> psi = EndoTuple<K>::identity(n, degree, f.context());
  PrecisionLedger scratch;
  for (int k = 2; k <= degree; ++k) {
    EndoTuple<K> through = compose(fhat, psi);
    std::vector<Series<K>> next;
    for (std::size_t j = 0; j < static_cast<std::size_t>(n); ++j) {
      Series<K> comp = psi[j];
      Series<K> layer = through[j].homogeneous(k);
      for (const auto& [w, rhs] : layer.terms())
        if (auto h = detail::homological_coefficient(lambdas, w, j, rhs, scratch)) comp.set(w, *h);
      next.push_back(std::move(comp));
    }
    psi = EndoTuple<K>(std::move(next));
  }
  return psi;
}

// ---------------------------------------------------------------------------
// Diagonalization of a rational linear part.

struct LinearChange {
  Matrix<Rational> M;     // columns are eigenvectors
  Matrix<Rational> Minv;
  std::vector<mpq_class> eigenvalues;  // diagonal of Minv L M
};

namespace detail {

inline std::vector<mpz_class> positive_divisors(mpz_class a) {
  a = abs(a);
  if (a > mpz_class("1000000000000")) raise(ErrorCode::BackendUnsupported, "characteristic polynomial too large to factor");
  std::vector<mpz_class> small, large;
  for (mpz_class d = 1; d * d <= a; ++d) {
    if (a % d == 0) {
      small.push_back(d);
      if (d * d != a) large.push_back(a / d);
    }
  }
  small.insert(small.end(), large.rbegin(), large.rend());
  return small;
}

inline std::vector<mpq_class> rational_roots(const QPoly& p) {
  std::vector<mpq_class> c = p.coeffs();
  std::vector<mpq_class> roots;
  std::size_t shift = 0;
  while (shift < c.size() && c[shift] == 0) ++shift;
  if (shift > 0) roots.push_back(0);
  c.erase(c.begin(), c.begin() + static_cast<long>(shift));
  if (c.size() <= 1) return roots;
  mpz_class l = 1;
  for (const auto& x : c) l = lcm(l, mpz_class(x.get_den()));
  std::vector<mpz_class> z;
  for (const auto& x : c) z.push_back(mpz_class(x * l));
  auto eval = [&](const mpq_class& t) {
    mpq_class acc = 0;
    for (auto it = z.rbegin(); it != z.rend(); ++it) acc = acc * t + mpq_class(*it);
    return acc;
  };
  for (const auto& num : positive_divisors(z.front()))
    for (const auto& den : positive_divisors(z.back()))
      for (int sign : {1, -1}) {
        mpq_class t(sign * num, den);
        t.canonicalize();
        if (eval(t) == 0 && std::find(roots.begin(), roots.end(), t) == roots.end()) roots.push_back(t);
      }
  std::sort(roots.begin(), roots.end());
  return roots;
}

// Basis of the kernel of a (rows x cols) rational matrix.
inline std::vector<std::vector<mpq_class>> kernel(std::vector<std::vector<mpq_class>> a, std::size_t cols) {
  std::vector<int> pivot_col;
  std::size_t row = 0;
  for (std::size_t col = 0; col < cols && row < a.size(); ++col) {
    std::size_t p = row;
    while (p < a.size() && a[p][col] == 0) ++p;
    if (p == a.size()) continue;
    std::swap(a[p], a[row]);
    mpq_class inv = 1 / a[row][col];
    for (auto& x : a[row]) x *= inv;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (i == row || a[i][col] == 0) continue;
      mpq_class f = a[i][col];
      for (std::size_t j = 0; j < cols; ++j) a[i][j] -= f * a[row][j];
    }
    pivot_col.push_back(static_cast<int>(col));
    ++row;
  }
  std::vector<std::vector<mpq_class>> basis;
  for (std::size_t free = 0; free < cols; ++free) {
    if (std::find(pivot_col.begin(), pivot_col.end(), static_cast<int>(free)) != pivot_col.end()) continue;
    std::vector<mpq_class> v(cols, 0);
    v[free] = 1;
    for (std::size_t i = 0; i < pivot_col.size(); ++i) v[static_cast<std::size_t>(pivot_col[i])] = -a[i][free];
    basis.push_back(v);
  }
  return basis;
}

inline Matrix<Rational> rational_inverse(const Matrix<Rational>& m) {
  const std::size_t n = m.rows();
  std::vector<std::vector<mpq_class>> a(n, std::vector<mpq_class>(2 * n, 0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) a[i][j] = m(i, j).value();
    a[i][n + i] = 1;
  }
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t p = col;
    while (p < n && a[p][col] == 0) ++p;
    if (p == n) raise(ErrorCode::InvalidArgument, "singular change of basis");
    std::swap(a[p], a[col]);
    mpq_class inv = 1 / a[col][col];
    for (auto& x : a[col]) x *= inv;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == col || a[i][col] == 0) continue;
      mpq_class f = a[i][col];
      for (std::size_t j = 0; j < 2 * n; ++j) a[i][j] -= f * a[col][j];
    }
  }
  Matrix<Rational> out(n, n, Rational::zero({m(0, 0).ell(), 0}));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = Rational(m(0, 0).ell(), a[i][n + j]);
  return out;
}

}  // namespace detail

// Eigenbasis of L over Q, or nullopt when L is not diagonalizable over Q.
inline std::optional<LinearChange> rational_diagonalization(const Matrix<Rational>& L) {
  const std::size_t n = L.rows();
  const long ell = L(0, 0).ell();
  std::vector<std::vector<mpq_class>> columns;
  std::vector<mpq_class> eigenvalues;
  for (const auto& root : detail::rational_roots(characteristic_polynomial(L))) {
    std::vector<std::vector<mpq_class>> shifted(n, std::vector<mpq_class>(n, 0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) shifted[i][j] = L(i, j).value() - (i == j ? root : mpq_class(0));
    for (auto& v : detail::kernel(shifted, n)) {
      columns.push_back(std::move(v));
      eigenvalues.push_back(root);
    }
  }
  if (columns.size() != n) return std::nullopt;
  Matrix<Rational> m(n, n, Rational::zero({ell, 0}));
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) m(i, j) = Rational(ell, columns[j][i]);
  return LinearChange{m, detail::rational_inverse(m), eigenvalues};
}

template <LadicScalar K>
EndoTuple<K> linear_map(const Matrix<Rational>& m, int degree, const ScalarContext& ctx) {
  const int n = static_cast<int>(m.rows());
  std::vector<Series<K>> comps;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    Series<K> s(n, degree, ctx);
    for (std::size_t j = 0; j < m.cols(); ++j)
      if (!m(i, j).is_zero()) s.set(Word{static_cast<int>(j + 1)}, detail::scalar_from<K>(ctx, m(i, j).value()));
    comps.push_back(std::move(s));
  }
  return EndoTuple<K>(std::move(comps));
}

// ---------------------------------------------------------------------------
// Eigen-coordinates.

template <LadicScalar K>
struct EigenCoordinates {
  std::vector<Series<K>> y;  // y_i o f = lambda_i y_i
  std::vector<K> lambdas;
  bool eigen_relation = false;
  // unit_blocks[m-1]: every weight-m monomial in the diagonal coordinates
  // expands in y-monomials of weight >= m with identity leading block.
  std::vector<bool> unit_blocks;
  bool invertible = false;
  std::optional<LinearChange> change;  // set when the linear part was diagonalized first
  LinearizationResult<K> linearization;
};

template <LadicScalar K>
bool unit_leading_block(const EndoTuple<K>& psi, const Word& p) {
  const int n = psi.variables();
  const int weight = static_cast<int>(p.weight());
  const ScalarContext& ctx = psi.context();
  // Every factor lies in I, so x^p o psi starts in weight |p| and its
  // weight-|p| part is the product of the linear parts.
  Series<K> lead = Series<K>::constant(n, weight, K::one(ctx));
  for (int a : p.letters()) {
    const Series<K>& c = psi[static_cast<std::size_t>(a - 1)];
    if (!c.constant_term().is_zero()) return false;
    lead = Series<K>::product_to(lead, c.homogeneous(1).truncated(weight), weight);
  }
  return (lead - Series<K>::monomial(n, weight, p, K::one(ctx))).is_zero();
}

template <LadicScalar K>
EigenCoordinates<K> eigen_coordinates(const EndoTuple<K>& f, const Radius& r, const SiegelParams& params,
                                      const LinearizeOptions& options = {}) {
  const int n = f.variables();
  const int degree = f.degree();
  const ScalarContext& ctx = f.context();
  EigenCoordinates<K> out;
  EndoTuple<K> g = f;
  std::optional<EndoTuple<K>> m, minv;
  if (!f.diagonal_eigenvalues()) {
    if constexpr (!K::is_exact_backend) {
      raise(ErrorCode::BackendUnsupported, "diagonalization needs the exact backend");
    } else {
      out.change = rational_diagonalization(f.linear_part());
      if (!out.change) raise(ErrorCode::NotDiagonal, "linear part is not diagonalizable over Q");
      m = linear_map<K>(out.change->M, degree, ctx);
      minv = linear_map<K>(out.change->Minv, degree, ctx);
      g = compose(*minv, compose(f, *m));
    }
  }
  out.linearization = linearize(g, r, params, options);
  out.lambdas = out.linearization.lambdas;
  EndoTuple<K> y_map = m ? compose(out.linearization.PsiInv, *minv) : out.linearization.PsiInv;
  out.y = y_map.components();

  out.eigen_relation = true;
  for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
    Series<K> lhs = substitute(out.y[i], f.components());
    if (!(lhs - out.lambdas[i] * out.y[i]).is_zero()) out.eigen_relation = false;
  }
  out.invertible = true;
  for (int w = 1; w <= degree; ++w) {
    bool ok = true;
    for (const auto& p : words_of_weight(n, w))
      if (!unit_leading_block(out.linearization.Psi, p)) {
        ok = false;
        break;
      }
    out.unit_blocks.push_back(ok);
    out.invertible = out.invertible && ok;
  }
  return out;
}

}  // namespace ncsiegel
