#pragma once

// Representations trivial modulo l^N: extension to convergent series and the
// weight-kill deduction that forces unipotence.

#include <gmpxx.h>

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "lognorm.hpp"
#include "series.hpp"

namespace ncsiegel {

// rho(x_i) = rho(gamma_i) - 1 as m x m matrices with |X_i| <= C = l^{-N}.
template <LadicScalar K>
struct ReprSpec {
  long ell = 5;
  std::size_t m = 0;
  mpq_class N = 1;
  std::vector<Matrix<K>> images;

  LogValue bound_log() const { return LogValue::exact(N); }  // C = l^{-N}

  void validate() const {
    if (N <= 0) raise(ErrorCode::InvalidArgument, "triviality level N must be positive");
    for (std::size_t i = 0; i < images.size(); ++i) {
      const auto& x = images[i];
      if (x.rows() != m || x.cols() != m) raise(ErrorCode::ShapeMismatch, "image " + std::to_string(i + 1) + " is not m x m");
      Valuation v = x.valuation();
      if (!v.infinite && mpq_class(v.value) < N)
        raise(ErrorCode::InvalidArgument, "image " + std::to_string(i + 1) + " is not trivial modulo l^N");
    }
  }
};

template <LadicScalar K>
LogValue matrix_norm(const Matrix<K>& x) {
  Valuation v = x.valuation();
  if (v.infinite) return LogValue::infinity();
  LogValue out = LogValue::exact(v.value);
  return v.lower_bound ? out.with_upper_bound_flag() : out;
}

template <LadicScalar K>
struct Extension {
  Matrix<K> value;      // f(X_1, ..., X_n)
  LogValue value_norm;  // |f(X)|
  LogValue sharp_bound; // max_I |a_I| C^{|I|}
  LogValue norm_bound;  // ||f||_r max_{|I| <= D} (C/r)^{|I|} = ||f||_r
  bool holds = false;
};

// Every X^w for the words of f, built from the product for the word's prefix.
template <LadicScalar K>
class MonomialImages {
 public:
  MonomialImages(const std::vector<Matrix<K>>& xs, std::size_t m, const ScalarContext& ctx) : xs_(xs) {
    cache_.emplace(Word{}, Matrix<K>::identity(m, ctx));
  }

  const Matrix<K>& operator()(const Word& w) {
    auto it = cache_.find(w);
    if (it != cache_.end()) return it->second;
    std::vector<int> prefix(w.letters().begin(), w.letters().end() - 1);
    Matrix<K> value = (*this)(Word(prefix)) * xs_[static_cast<std::size_t>(w.letters().back() - 1)];
    return cache_.emplace(w, std::move(value)).first->second;
  }

 private:
  const std::vector<Matrix<K>>& xs_;
  std::map<Word, Matrix<K>, GradedLex> cache_;
};

template <LadicScalar K>
Extension<K> extend_representation(const ReprSpec<K>& rho, const Series<K>& f, const Radius& r) {
  rho.validate();
  if (static_cast<int>(rho.images.size()) != f.variables()) raise(ErrorCode::ShapeMismatch, "need one image per variable");
  if (!certainly_lt(rho.bound_log(), r.log())) raise(ErrorCode::RadiusViolation, "extension needs r > C = l^{-N}");
  const ScalarContext& ctx = f.context();
  MonomialImages<K> images(rho.images, rho.m, ctx);
  Extension<K> out;
  out.value = Matrix<K>(rho.m, rho.m, K::zero(ctx));
  out.sharp_bound = LogValue::infinity();
  for (const auto& [w, a] : f.terms()) {
    out.value = out.value + images(w).scaled(a);
    Valuation v = a.valuation();
    if (v.infinite) continue;
    LogValue term = LogValue::exact(v.value) + rho.bound_log().scaled(mpq_class(static_cast<long>(w.weight())));
    out.sharp_bound = LogValue::max_magnitude(out.sharp_bound, v.lower_bound ? term.with_upper_bound_flag() : term);
  }
  out.value_norm = matrix_norm(out.value);
  out.norm_bound = f.norm(r);
  out.holds = certainly_le(out.value_norm, out.sharp_bound) && certainly_le(out.sharp_bound, out.norm_bound);
  return out;
}

// Archimedean weight tags: y_i has weight eigen_weights[i] < 0; conjugation by
// A on m x m matrices has weights conj_weights.
struct WeightTable {
  std::vector<mpq_class> eigen_weights;
  std::vector<mpq_class> conj_weights;

  mpq_class highest() const { return *std::max_element(conj_weights.begin(), conj_weights.end()); }
};

// Least d such that every y-monomial of degree >= d weighs less than every
// conjugation weight. The heaviest degree-d monomial weighs d * max(eigen).
inline long weight_kill_cutoff(const WeightTable& t) {
  if (t.eigen_weights.empty() || t.conj_weights.empty()) raise(ErrorCode::InvalidArgument, "weight table is empty");
  for (const auto& w : t.eigen_weights)
    if (w >= 0) raise(ErrorCode::InconsistentWeights, "eigen weight " + w.get_str() + " is not negative");
  mpq_class heaviest = *std::max_element(t.eigen_weights.begin(), t.eigen_weights.end());
  mpq_class floor = *std::min_element(t.conj_weights.begin(), t.conj_weights.end());
  // d * heaviest < floor  <=>  d > floor / heaviest
  mpq_class ratio = floor / heaviest;
  mpz_class d = ratio.get_num() / ratio.get_den();  // floor for ratio >= 0
  if (ratio < 0) d = 0;
  d += 1;
  return std::max(1L, d.get_si());
}

enum class UnipotenceVerdict { Unipotent, Trivial, Counterexample };

inline const char* to_string(UnipotenceVerdict v) {
  switch (v) {
    case UnipotenceVerdict::Unipotent: return "unipotent";
    case UnipotenceVerdict::Trivial: return "trivial";
    case UnipotenceVerdict::Counterexample: return "counterexample";
  }
  return "?";
}

template <LadicScalar K>
struct UnipotenceReport {
  UnipotenceVerdict verdict = UnipotenceVerdict::Unipotent;
  long cutoff = 0;
  int degree = 0;
  long checked = 0;
  std::optional<Word> witness;
  std::optional<Matrix<K>> witness_image;
};

// Evaluates rho-hat on every y-monomial of weight in [cutoff, D]; rho is taken
// to be F-equivariant by assertion.
template <LadicScalar K>
UnipotenceReport<K> forced_unipotence_check(const ReprSpec<K>& rho, const std::vector<Series<K>>& ys, const WeightTable& table,
                                            const Radius& r, bool semisimple = false) {
  if (ys.empty()) raise(ErrorCode::InvalidArgument, "no coordinates");
  if (table.eigen_weights.size() != ys.size()) raise(ErrorCode::ShapeMismatch, "need one eigen weight per coordinate");
  UnipotenceReport<K> out;
  out.cutoff = weight_kill_cutoff(table);
  out.degree = ys.front().degree();
  const int n = static_cast<int>(ys.size());
  std::vector<Matrix<K>> images;
  for (const auto& y : ys) images.push_back(extend_representation(rho, y, r).value);
  MonomialImages<K> monomials(images, rho.m, ys.front().context());
  for (int d = static_cast<int>(out.cutoff); d <= out.degree; ++d) {
    for (const auto& w : words_of_weight(n, d)) {
      ++out.checked;
      const Matrix<K>& img = monomials(w);
      if (!img.is_zero()) {
        out.verdict = UnipotenceVerdict::Counterexample;
        out.witness = w;
        out.witness_image = img;
        return out;
      }
    }
  }
  out.verdict = semisimple ? UnipotenceVerdict::Trivial : UnipotenceVerdict::Unipotent;
  return out;
}

// -log(r') / log(l): the level above which representations trivial mod l^N
// extend over the radius r'.
inline LogValue n_threshold(const Radius& r_prime) { return r_prime.log(); }

}  // namespace ncsiegel
