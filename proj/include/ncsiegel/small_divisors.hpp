#pragma once

// Verification and fitting of the l-adic Siegel condition
//
//   |lambda^i - lambda_j|_l >= c (N/2)^{-mu}   whenever lambda^i != lambda_j,
//
// over all exponent vectors i with 2 <= N = |i| <= N_max.

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "scalar.hpp"

namespace ncsiegel {

struct SiegelParams {
  mpq_class c = 1;   // lower-bound constant of the definition
  mpq_class mu = 1;  // exponent

  double c_approx() const { return c.get_d(); }
  double mu_approx() const { return mu.get_d(); }
  // Reciprocal constant: 1/|lambda^I - lambda_j| <= C_sigma (|I|/2)^mu.
  mpq_class c_sigma() const { return 1 / c; }
};

// The divisor lambda^i - lambda_j for one exponent vector and target index.
struct Divisor {
  std::vector<long> exponents;
  int j = 0;  // 1-based
  long degree = 0;
  long valuation = 0;
  double log_slack = 0.0;  // ln(l^{-v} (N/2)^mu); the definition holds iff >= ln c
};

enum class Verdict { Holds, Violated, Undecidable };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Holds: return "holds";
    case Verdict::Violated: return "violated";
    case Verdict::Undecidable: return "undecidable";
  }
  return "?";
}

struct SiegelCertificate {
  std::vector<Rational> lambdas;
  SiegelParams params;
  long n_max = 0;
  std::vector<Divisor> witnesses;  // tightest first
  Verdict verdict = Verdict::Holds;
  std::optional<Divisor> failing;  // set unless the verdict is Holds
  long checked = 0;                // non-resonant (i, j) pairs examined
  long resonant = 0;               // pairs skipped as exact resonances
};

// Which normalization of the condition to test.
//   Standard:   |lambda^i - lambda_j| >= c (N/2)^{-mu}
//   UnitTarget: |lambda^i lambda_j^{-1} - 1| >= c N^{-mu}
enum class SiegelForm { Standard, UnitTarget };

namespace detail {

// l^{-v q} (N/2)^p >= c^q, or the unit-target analogue with N in place of N/2.
inline bool siegel_inequality_exact(long ell, long v, long degree, const mpq_class& c, const mpq_class& mu, SiegelForm form) {
  if (mu < 0) raise(ErrorCode::InvalidArgument, "mu must be >= 0");
  mpz_class p = mu.get_num(), q = mu.get_den();
  unsigned long pe = p.get_ui(), qe = q.get_ui();
  mpq_class base = form == SiegelForm::Standard ? mpq_class(degree, 2) : mpq_class(degree);
  base.canonicalize();
  mpq_class lhs;
  mpz_class num, den;
  mpz_pow_ui(num.get_mpz_t(), base.get_num().get_mpz_t(), pe);
  mpz_pow_ui(den.get_mpz_t(), base.get_den().get_mpz_t(), pe);
  lhs = mpq_class(num, den);
  long e = v * static_cast<long>(qe);
  mpz_class lpow = ipow(ell, std::abs(e));
  if (e >= 0) lhs /= mpq_class(lpow);
  else lhs *= mpq_class(lpow);
  mpz_pow_ui(num.get_mpz_t(), c.get_num().get_mpz_t(), qe);
  mpz_pow_ui(den.get_mpz_t(), c.get_den().get_mpz_t(), qe);
  mpq_class rhs(num, den);
  lhs.canonicalize();
  rhs.canonicalize();
  return lhs >= rhs;
}

inline int max_modular_digits(long ell) {
  int p = 0;
  unsigned __int128 m = 1;
  while (m * static_cast<unsigned>(ell) < (static_cast<unsigned __int128>(1) << 62)) {
    m *= static_cast<unsigned>(ell);
    ++p;
  }
  return p;
}

// Per-degree worst divisor over all exponent vectors and targets.
struct DivisorScan {
  std::vector<std::optional<Divisor>> worst;  // index N
  long checked = 0;
  long resonant = 0;
};

inline DivisorScan scan_divisors(const std::vector<Rational>& lambdas, long n_max) {
  if (lambdas.empty()) raise(ErrorCode::InvalidArgument, "no eigenvalues");
  const long ell = lambdas.front().ell();
  for (const auto& l : lambdas) {
    Valuation v = l.valuation();
    if (!v.infinite && v.value < 0) raise(ErrorCode::InvalidArgument, "eigenvalues must satisfy |lambda| <= 1");
  }
  const int digits = max_modular_digits(ell);
  const mpz_class mod_z = ipow(ell, digits);
  const uint64_t mod = mod_z.get_ui();
  const std::size_t n = lambdas.size();

  // Residues lambda_t^k mod l^digits.
  std::vector<std::vector<uint64_t>> pow(n, std::vector<uint64_t>(static_cast<std::size_t>(n_max) + 1));
  std::vector<uint64_t> target(n);
  for (std::size_t t = 0; t < n; ++t) {
    const mpq_class& q = lambdas[t].value();
    mpz_class res = mod_pos(q.get_num() * mod_inverse(q.get_den(), mod_z), mod_z);
    uint64_t r = res.get_ui();
    target[t] = r;
    pow[t][0] = 1 % mod;
    for (long k = 1; k <= n_max; ++k)
      pow[t][static_cast<std::size_t>(k)] =
          static_cast<uint64_t>(static_cast<unsigned __int128>(pow[t][static_cast<std::size_t>(k - 1)]) * r % mod);
  }

  DivisorScan scan;
  scan.worst.resize(static_cast<std::size_t>(n_max) + 1);
  std::vector<long> e(n, 0);

  auto visit = [&](long degree, uint64_t residue) {
    for (std::size_t j = 0; j < n; ++j) {
      uint64_t diff = (residue + mod - target[j]) % mod;
      long v = 0;
      if (diff == 0) {
        // No known digit: decide exactly.
        mpq_class value = 1;
        for (std::size_t t = 0; t < n; ++t) {
          mpz_class num, den;
          mpz_pow_ui(num.get_mpz_t(), lambdas[t].value().get_num().get_mpz_t(), static_cast<unsigned long>(e[t]));
          mpz_pow_ui(den.get_mpz_t(), lambdas[t].value().get_den().get_mpz_t(), static_cast<unsigned long>(e[t]));
          value *= mpq_class(num, den);
        }
        value.canonicalize();
        mpq_class d = value - lambdas[j].value();
        if (d == 0) {
          ++scan.resonant;
          continue;
        }
        v = rational_valuation(d, ell);
      } else {
        while (diff % static_cast<uint64_t>(ell) == 0) {
          diff /= static_cast<uint64_t>(ell);
          ++v;
        }
      }
      ++scan.checked;
      auto& slot = scan.worst[static_cast<std::size_t>(degree)];
      if (!slot || v > slot->valuation) slot = Divisor{e, static_cast<int>(j + 1), degree, v, 0.0};
    }
  };

  // Enumerate exponent vectors of total degree N in lexicographic order.
  for (long degree = 2; degree <= n_max; ++degree) {
    std::fill(e.begin(), e.end(), 0);
    auto rec = [&](auto&& self, std::size_t t, long remaining, uint64_t residue) -> void {
      if (t + 1 == n) {
        e[t] = remaining;
        visit(degree, static_cast<uint64_t>(static_cast<unsigned __int128>(residue) * pow[t][static_cast<std::size_t>(remaining)] % mod));
        return;
      }
      for (long k = remaining; k >= 0; --k) {
        e[t] = k;
        self(self, t + 1, remaining - k,
             static_cast<uint64_t>(static_cast<unsigned __int128>(residue) * pow[t][static_cast<std::size_t>(k)] % mod));
      }
    };
    rec(rec, 0, degree, 1 % mod);
  }
  return scan;
}

inline double log_slack(long ell, long v, long degree, double mu, SiegelForm form) {
  double base = form == SiegelForm::Standard ? static_cast<double>(degree) / 2.0 : static_cast<double>(degree);
  return -static_cast<double>(v) * std::log(static_cast<double>(ell)) + mu * std::log(base);
}

}  // namespace detail

inline SiegelCertificate check_siegel(const std::vector<Rational>& lambdas, const SiegelParams& params, long n_max,
                                      std::size_t witness_count = 5, SiegelForm form = SiegelForm::Standard) {
  if (n_max < 2) raise(ErrorCode::InvalidArgument, "N_max must be >= 2");
  if (params.c <= 0 || params.mu < 0) raise(ErrorCode::InvalidArgument, "need c > 0 and mu >= 0");
  SiegelCertificate cert;
  cert.lambdas = lambdas;
  cert.params = params;
  cert.n_max = n_max;
  const long ell = lambdas.front().ell();

  detail::DivisorScan scan = detail::scan_divisors(lambdas, n_max);
  cert.checked = scan.checked;
  cert.resonant = scan.resonant;
  std::vector<Divisor> all;
  for (auto& w : scan.worst) {
    if (!w) continue;
    w->log_slack = detail::log_slack(ell, w->valuation, w->degree, params.mu_approx(), form);
    all.push_back(*w);
  }
  std::sort(all.begin(), all.end(), [](const Divisor& a, const Divisor& b) {
    if (a.log_slack != b.log_slack) return a.log_slack < b.log_slack;
    return a.degree < b.degree;
  });
  for (const auto& d : all) {
    if (!detail::siegel_inequality_exact(ell, d.valuation, d.degree, params.c, params.mu, form)) {
      if (!cert.failing || d.log_slack < cert.failing->log_slack) cert.failing = d;
    }
  }
  if (cert.failing) cert.verdict = Verdict::Violated;
  all.resize(std::min(all.size(), witness_count));
  cert.witnesses = std::move(all);
  return cert;
}

// Backend-generic entry point; only exact scalars can be certified.
template <LadicScalar K>
SiegelCertificate check_siegel(const std::vector<K>& lambdas, const SiegelParams& params, long n_max) {
  if constexpr (!K::is_exact_backend) {
    raise(ErrorCode::BackendUnsupported, "the Siegel check needs the exact backend");
  } else {
    return check_siegel(std::vector<Rational>(lambdas.begin(), lambdas.end()), params, n_max);
  }
}

struct SiegelFit {
  SiegelParams params;
  std::vector<std::pair<long, long>> scatter;  // (N, worst valuation) per degree
  std::vector<std::pair<mpq_class, mpq_class>> per_mu;  // (mu, largest c) tried
};

namespace detail {

// Largest c (rounded down to a rational) for which every recorded divisor
// satisfies the condition at exponent mu.
inline mpq_class largest_c(long ell, const DivisorScan& scan, const mpq_class& mu) {
  const Divisor* best = nullptr;
  double best_slack = 0.0;
  for (const auto& w : scan.worst) {
    if (!w) continue;
    double s = log_slack(ell, w->valuation, w->degree, mu.get_d(), SiegelForm::Standard);
    if (!best || s < best_slack) {
      best = &*w;
      best_slack = s;
    }
  }
  if (!best) return mpq_class(1);  // nothing to bound: every divisor resonant
  mpq_class c;
  if (mu.get_den() == 1) {
    mpq_class base(best->degree, 2);
    base.canonicalize();
    mpq_class val = 1;
    for (unsigned long k = 0; k < mu.get_num().get_ui(); ++k) val *= base;
    val /= mpq_class(ipow(ell, best->valuation));
    c = val;
  } else {
    c = mpq_class(std::exp(best_slack) * (1.0 - 1e-12));
  }
  // Shrink until the exact check passes everywhere (guards near-ties).
  for (int attempt = 0; attempt < 64; ++attempt) {
    bool ok = true;
    for (const auto& w : scan.worst)
      if (w && !siegel_inequality_exact(ell, w->valuation, w->degree, c, mu, SiegelForm::Standard)) {
        ok = false;
        break;
      }
    if (ok) return c;
    c *= mpq_class(999999, 1000000);
  }
  raise(ErrorCode::InvalidArgument, "could not certify a fitted constant");
}

}  // namespace detail

// Default floor on the fitted constant: 1 / (2 l^2).
inline mpq_class default_c_floor(long ell) { return mpq_class(1, 2 * ell * ell); }

// Smallest mu in the grid whose largest admissible c is at least c_floor.
inline SiegelFit fit_siegel(const std::vector<Rational>& lambdas, long n_max, const std::vector<mpq_class>& mu_grid,
                            std::optional<mpq_class> c_floor = std::nullopt) {
  if (mu_grid.empty()) raise(ErrorCode::EmptyGrid, "empty mu grid");
  if (n_max < 2) raise(ErrorCode::InvalidArgument, "N_max must be >= 2");
  const long ell = lambdas.front().ell();
  mpq_class floor = c_floor.value_or(default_c_floor(ell));
  std::vector<mpq_class> grid = mu_grid;
  std::sort(grid.begin(), grid.end());

  detail::DivisorScan scan = detail::scan_divisors(lambdas, n_max);
  SiegelFit fit;
  for (const auto& w : scan.worst)
    if (w) fit.scatter.emplace_back(w->degree, w->valuation);
  std::optional<SiegelParams> chosen;
  for (const auto& mu : grid) {
    mpq_class c = detail::largest_c(ell, scan, mu);
    fit.per_mu.emplace_back(mu, c);
    if (!chosen && c >= floor) chosen = SiegelParams{c, mu};
  }
  if (!chosen) {
    // No grid point reaches the floor: report the largest mu with its constant.
    chosen = SiegelParams{fit.per_mu.back().second, fit.per_mu.back().first};
  }
  fit.params = *chosen;
  return fit;
}

inline std::vector<mpq_class> default_mu_grid() {
  return {mpq_class(0), mpq_class(1, 2), mpq_class(1), mpq_class(3, 2), mpq_class(2), mpq_class(3), mpq_class(5)};
}

}  // namespace ncsiegel
