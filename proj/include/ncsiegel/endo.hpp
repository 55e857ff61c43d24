#pragma once

// n-tuples of series without constant term under substitution: the monoid
// End^op. compose(f, g) = (f_1(g), ..., f_n(g)).

#include <algorithm>
#include <optional>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "lognorm.hpp"
#include "scalar.hpp"
#include "series.hpp"

namespace ncsiegel {

template <LadicScalar K>
class EndoTuple {
 public:
  EndoTuple() = default;
  explicit EndoTuple(std::vector<Series<K>> components) : components_(std::move(components)) {
    if (components_.empty()) raise(ErrorCode::InvalidArgument, "empty endomorphism tuple");
    const auto& first = components_.front();
    if (static_cast<int>(components_.size()) != first.variables())
      raise(ErrorCode::ShapeMismatch, "tuple length must equal the variable count");
    for (const auto& c : components_) {
      if (c.variables() != first.variables() || c.degree() != first.degree() || c.context().ell != first.context().ell)
        raise(ErrorCode::ShapeMismatch, "components disagree on n, D or ell");
      if (!c.constant_term().is_zero()) raise(ErrorCode::ConstantTermNonzero, "components must lie in I");
    }
  }

  static EndoTuple identity(int n, int degree, const ScalarContext& ctx) {
    std::vector<Series<K>> comps;
    for (int i = 1; i <= n; ++i) comps.push_back(Series<K>::variable(n, degree, ctx, i));
    return EndoTuple(std::move(comps));
  }
  static EndoTuple zero(int n, int degree, const ScalarContext& ctx) {
    return EndoTuple(std::vector<Series<K>>(static_cast<std::size_t>(n), Series<K>(n, degree, ctx)));
  }
  // A x for A = diag(lambdas).
  static EndoTuple diagonal(int degree, const std::vector<K>& lambdas) {
    const int n = static_cast<int>(lambdas.size());
    std::vector<Series<K>> comps;
    for (int i = 1; i <= n; ++i)
      comps.push_back(Series<K>::monomial(n, degree, Word{i}, lambdas[static_cast<std::size_t>(i - 1)]));
    return EndoTuple(std::move(comps));
  }

  int variables() const { return components_.front().variables(); }
  int degree() const { return components_.front().degree(); }
  const ScalarContext& context() const { return components_.front().context(); }
  const std::vector<Series<K>>& components() const { return components_; }
  const Series<K>& operator[](std::size_t i) const { return components_[i]; }

  LogNorm norm(const Radius& r) const {
    LogNorm out = LogNorm::infinity();
    for (const auto& c : components_) out = LogNorm::max_magnitude(out, c.norm(r));
    return out;
  }

  // Coefficient of x_j in component i (0-based indices).
  Matrix<K> linear_part() const {
    const auto n = static_cast<std::size_t>(variables());
    Matrix<K> m(n, n, K::zero(context()));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) m(i, j) = components_[i].coeff(Word{static_cast<int>(j + 1)});
    return m;
  }

  std::optional<std::vector<K>> diagonal_eigenvalues() const {
    Matrix<K> a = linear_part();
    std::vector<K> lambdas;
    for (std::size_t i = 0; i < a.rows(); ++i) {
      for (std::size_t j = 0; j < a.cols(); ++j)
        if (i != j && !a(i, j).is_zero()) return std::nullopt;
      lambdas.push_back(a(i, i));
    }
    return lambdas;
  }

  // The part of weight >= 2 (f-hat).
  EndoTuple nonlinear_part() const { return map([](const Series<K>& s) { return s.weight_at_least(2); }); }
  EndoTuple truncated(int degree) const { return map([degree](const Series<K>& s) { return s.truncated(degree); }); }

  bool is_zero() const {
    return std::all_of(components_.begin(), components_.end(), [](const auto& c) { return c.is_zero(); });
  }

  template <typename F>
  EndoTuple map(F&& fn) const {
    std::vector<Series<K>> out;
    for (const auto& c : components_) out.push_back(fn(c));
    return EndoTuple(std::move(out));
  }

  friend EndoTuple operator+(const EndoTuple& a, const EndoTuple& b) { return zip(a, b, [](auto& x, auto& y) { return x + y; }); }
  friend EndoTuple operator-(const EndoTuple& a, const EndoTuple& b) { return zip(a, b, [](auto& x, auto& y) { return x - y; }); }
  friend bool operator==(const EndoTuple& a, const EndoTuple& b) { return a.components_ == b.components_; }

 private:
  template <typename F>
  static EndoTuple zip(const EndoTuple& a, const EndoTuple& b, F&& fn) {
    if (a.components_.size() != b.components_.size()) raise(ErrorCode::ShapeMismatch, "tuple sizes differ");
    std::vector<Series<K>> out;
    for (std::size_t i = 0; i < a.components_.size(); ++i) out.push_back(fn(a.components_[i], b.components_[i]));
    return EndoTuple(std::move(out));
  }

  std::vector<Series<K>> components_;
};

template <LadicScalar K>
EndoTuple<K> compose(const EndoTuple<K>& f, const EndoTuple<K>& g) {
  if (f.variables() != g.variables() || f.context().ell != g.context().ell)
    raise(ErrorCode::ShapeMismatch, "cannot compose tuples of different shapes");
  return f.map([&g](const Series<K>& fi) { return substitute(fi, g.components()); });
}

template <LadicScalar K>
EndoTuple<K> compose(const EndoTuple<K>& f, const EndoTuple<K>& g, const EndoTuple<K>& h) {
  return compose(compose(f, g), h);
}

// Two-sided compositional inverse of psi = x + psi-hat, psi-hat in I^2.
//
// Solves g(psi) = x weight by weight: the weight-k part of g-hat is
// -(psi-hat + g-hat_{<k}(psi))_k, the triangular back-substitution in the
// monomial basis. When a radius is supplied, ||psi-hat||_r < r is enforced.
template <LadicScalar K>
EndoTuple<K> invert(const EndoTuple<K>& psi, const std::optional<Radius>& r = std::nullopt) {
  const int n = psi.variables();
  const int degree = psi.degree();
  const ScalarContext& ctx = psi.context();
  EndoTuple<K> id = EndoTuple<K>::identity(n, degree, ctx);
  EndoTuple<K> hat = psi - id;
  for (const auto& c : hat.components())
    if (!c.in_ideal_power(2)) raise(ErrorCode::NotNormalized, "linear part of psi is not the identity");
  if (r && !certainly_lt(hat.norm(*r), r->log()))
    raise(ErrorCode::NormTooLarge, "||psi - x||_r must be < r");

  std::vector<Series<K>> ghat(static_cast<std::size_t>(n), Series<K>(n, degree, ctx));
  for (int k = 2; k <= degree; ++k) {
    // Only weights <= k of g-hat_{<k}(psi) are needed.
    EndoTuple<K> low = EndoTuple<K>(ghat).truncated(k);
    EndoTuple<K> through = compose(low, psi.truncated(k));
    for (std::size_t j = 0; j < static_cast<std::size_t>(n); ++j) {
      Series<K> own = hat[j].homogeneous(k);
      for (const auto& [w, c] : own.terms()) ghat[j].add_to(w, -c);
      Series<K> layer = through[j].homogeneous(k);
      for (const auto& [w, c] : layer.terms()) ghat[j].add_to(w, -c);
    }
  }
  return id + EndoTuple<K>(std::move(ghat));
}

// ||f(Ax + eps) - f(Ax)||_r for A = diag(lambdas).
template <LadicScalar K>
LogNorm taylor_gap(const EndoTuple<K>& f, const std::vector<K>& lambdas, const EndoTuple<K>& eps, const Radius& r) {
  if (static_cast<int>(lambdas.size()) != f.variables()) raise(ErrorCode::ShapeMismatch, "diagonal size");
  for (const auto& l : lambdas) {
    Valuation v = l.valuation();
    if (!v.infinite && v.value < 0) raise(ErrorCode::InvalidArgument, "diagonal entries must satisfy |lambda| <= 1");
  }
  if (!certainly_lt(eps.norm(r), r.log())) raise(ErrorCode::RadiusViolation, "||eps||_r must be < r");
  EndoTuple<K> ax = EndoTuple<K>::diagonal(f.degree(), lambdas);
  EndoTuple<K> gap = compose(f, ax + eps) - compose(f, ax);
  return gap.norm(r);
}

// The sharp bound ||f||_r ||eps||_r / r that taylor_gap never exceeds.
template <LadicScalar K>
LogNorm taylor_bound(const EndoTuple<K>& f, const EndoTuple<K>& eps, const Radius& r) {
  LogNorm prod = f.norm(r) + eps.norm(r);
  if (prod.is_infinite()) return prod;
  return prod - r.log();
}

// Matrix of P -> P o f on the monomial basis of I / I^{m+1} (words of weight
// 1..m, graded-lex). Column P holds the coefficients of x^P o f, so
// jet(compose(f, g)) = jet(g) * jet(f). Entry (Q, P) vanishes whenever
// |Q| < |P|: substitution never lowers weight.
template <LadicScalar K>
struct JetOperator {
  int m = 0;
  std::vector<Word> basis;
  Matrix<K> matrix;
};

template <LadicScalar K>
JetOperator<K> jet_matrix(const EndoTuple<K>& f, int m) {
  if (m < 1 || m > f.degree()) raise(ErrorCode::InvalidArgument, "jet order must be in 1..D");
  const int n = f.variables();
  const ScalarContext& ctx = f.context();
  EndoTuple<K> fm = f.truncated(m);
  JetOperator<K> jet;
  jet.m = m;
  jet.basis = words_in_range(n, 1, m);
  const std::size_t size = jet.basis.size();
  jet.matrix = Matrix<K>(size, size, K::zero(ctx));
  std::map<Word, std::size_t, GradedLex> index;
  for (std::size_t i = 0; i < size; ++i) index[jet.basis[i]] = i;
  for (std::size_t col = 0; col < size; ++col) {
    Series<K> mono = Series<K>::monomial(n, m, jet.basis[col], K::one(ctx));
    Series<K> image = substitute(mono, fm.components());
    for (const auto& [w, c] : image.terms()) {
      if (w.empty()) continue;
      jet.matrix(index.at(w), col) = c;
    }
  }
  return jet;
}

// True when the jet action on I / I^{m+1} has squarefree minimal polynomial,
// i.e. rad(charpoly)(J) = 0. Only the exact backend can certify this.
template <LadicScalar K>
bool is_semisimple_jet(const EndoTuple<K>& f, int m) {
  if constexpr (!K::is_exact_backend) {
    raise(ErrorCode::BackendUnsupported, "semisimplicity needs the exact backend");
  } else {
    JetOperator<K> jet = jet_matrix(f, m);
    // Substitution preserves the weight filtration, so the characteristic
    // polynomial factors over the diagonal weight blocks.
    QPoly charpoly({mpq_class(1)});
    std::size_t start = 0;
    while (start < jet.basis.size()) {
      std::size_t end = start;
      while (end < jet.basis.size() && jet.basis[end].weight() == jet.basis[start].weight()) ++end;
      Matrix<K> block(end - start, end - start, K::zero(f.context()));
      for (std::size_t i = start; i < end; ++i)
        for (std::size_t j = start; j < end; ++j) block(i - start, j - start) = jet.matrix(i, j);
      charpoly = charpoly * characteristic_polynomial(block);
      start = end;
    }
    return evaluate(charpoly.radical(), jet.matrix).is_zero();
  }
}

// lambda^I for the abelianized exponent vector of the word.
template <LadicScalar K>
K word_eigenvalue(const std::vector<K>& lambdas, const Word& w) {
  K out = K::one(lambdas.front().context());
  for (int a : w.letters()) out = out * lambdas[static_cast<std::size_t>(a - 1)];
  return out;
}

template <LadicScalar K>
struct ResonanceViolation {
  Word word;
  int component = 0;  // 1-based j
  K coefficient;
  bool undecidable = false;  // capped mode: lambda^I - lambda_j has no known digit
};

// Every (I, j) with lambda^I = lambda_j but a nonzero coefficient of x^I in f_j.
template <LadicScalar K>
std::vector<ResonanceViolation<K>> resonance_check(const EndoTuple<K>& f) {
  auto lambdas = f.diagonal_eigenvalues();
  if (!lambdas) raise(ErrorCode::NotDiagonal, "linear part is not diagonal");
  std::vector<ResonanceViolation<K>> out;
  for (std::size_t j = 0; j < static_cast<std::size_t>(f.variables()); ++j) {
    for (const auto& [w, c] : f[j].terms()) {
      if (w.weight() < 2 || c.is_zero()) continue;
      K diff = word_eigenvalue(*lambdas, w) - (*lambdas)[j];
      if (diff.is_exact_zero()) out.push_back({w, static_cast<int>(j + 1), c, false});
      else if (diff.indistinguishable_zero()) out.push_back({w, static_cast<int>(j + 1), c, true});
    }
  }
  return out;
}

}  // namespace ncsiegel
