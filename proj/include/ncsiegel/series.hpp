#pragma once

// Sparse truncated noncommutative power series over l-adic scalars.
//
// A series in x_1..x_n is a finite map from words (ordered monomials) of
// length <= D to scalars. Every operation is exact modulo I^{D+1}, where I is
// the augmentation ideal (series with zero constant term) and I^m consists of
// the terms of weight >= m.

#include <gmpxx.h>

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "lognorm.hpp"
#include "scalar.hpp"

namespace ncsiegel {

// A word over the alphabet {1..n}; its length is the weight of x^I.
class Word {
 public:
  Word() = default;
  Word(std::initializer_list<int> letters) : letters_(letters.begin(), letters.end()) {}
  explicit Word(std::vector<int> letters) : letters_(std::move(letters)) {}

  std::size_t weight() const { return letters_.size(); }
  bool empty() const { return letters_.empty(); }
  const std::vector<int>& letters() const { return letters_; }
  int operator[](std::size_t i) const { return letters_[i]; }
  int front() const { return letters_.front(); }

  Word tail() const { return Word(std::vector<int>(letters_.begin() + 1, letters_.end())); }
  Word operator+(const Word& other) const {
    std::vector<int> out = letters_;
    out.insert(out.end(), other.letters_.begin(), other.letters_.end());
    return Word(std::move(out));
  }

  // Multiplicities of each letter: the abelianized exponent vector.
  std::vector<long> exponents(int n) const {
    std::vector<long> e(static_cast<std::size_t>(n), 0);
    for (int a : letters_) ++e[static_cast<std::size_t>(a - 1)];
    return e;
  }

  bool valid_for(int n) const {
    return std::all_of(letters_.begin(), letters_.end(), [n](int a) { return a >= 1 && a <= n; });
  }

  std::string str() const {
    if (letters_.empty()) return "1";
    std::string s;
    for (int a : letters_) s += "x" + std::to_string(a);
    return s;
  }

  friend bool operator==(const Word&, const Word&) = default;

 private:
  std::vector<int> letters_;
};

// Graded lexicographic order: by weight, then lexicographically.
struct GradedLex {
  bool operator()(const Word& a, const Word& b) const {
    if (a.weight() != b.weight()) return a.weight() < b.weight();
    return a.letters() < b.letters();
  }
};

// All words of weight exactly m over n letters, in graded-lex order.
inline std::vector<Word> words_of_weight(int n, int m) {
  std::vector<Word> out;
  std::vector<int> cur(static_cast<std::size_t>(m), 1);
  while (true) {
    out.emplace_back(cur);
    int i = m - 1;
    while (i >= 0 && cur[static_cast<std::size_t>(i)] == n) cur[static_cast<std::size_t>(i--)] = 1;
    if (i < 0) break;
    ++cur[static_cast<std::size_t>(i)];
  }
  return out;
}

// Words of weight in [lo, hi], graded-lex.
inline std::vector<Word> words_in_range(int n, int lo, int hi) {
  std::vector<Word> out;
  for (int m = lo; m <= hi; ++m) {
    auto w = words_of_weight(n, m);
    out.insert(out.end(), w.begin(), w.end());
  }
  return out;
}

template <LadicScalar K>
class Series {
 public:
  using Map = std::map<Word, K, GradedLex>;

  Series() = default;
  Series(int n, int degree, ScalarContext ctx) : n_(n), degree_(degree), ctx_(ctx) {
    if (n < 1) raise(ErrorCode::InvalidArgument, "variable count must be >= 1");
    if (degree < 0) raise(ErrorCode::InvalidArgument, "truncation degree must be >= 0");
  }

  static Series zero(int n, int degree, ScalarContext ctx) { return Series(n, degree, ctx); }
  static Series constant(int n, int degree, const K& c) {
    Series s(n, degree, c.context());
    s.set(Word{}, c);
    return s;
  }
  static Series monomial(int n, int degree, const Word& w, const K& c) {
    Series s(n, degree, c.context());
    s.set(w, c);
    return s;
  }
  static Series variable(int n, int degree, ScalarContext ctx, int i) {
    return monomial(n, degree, Word{i}, K::one(ctx));
  }

  int variables() const { return n_; }
  int degree() const { return degree_; }
  const ScalarContext& context() const { return ctx_; }
  const Map& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }

  // Exact zeros are dropped; indistinguishable zeros keep their precision.
  void set(const Word& w, const K& c) {
    if (!w.valid_for(n_)) raise(ErrorCode::InvalidArgument, "word " + w.str() + " has a letter outside 1.." + std::to_string(n_));
    if (static_cast<int>(w.weight()) > degree_) return;
    if (c.is_zero() && !c.indistinguishable_zero()) {
      terms_.erase(w);
      return;
    }
    terms_.insert_or_assign(w, c);
  }
  void add_to(const Word& w, const K& c) {
    if (static_cast<int>(w.weight()) > degree_) return;
    auto it = terms_.lower_bound(w);
    if (it != terms_.end() && !GradedLex{}(w, it->first)) {
      K sum = it->second + c;
      if (sum.is_zero() && !sum.indistinguishable_zero()) terms_.erase(it);
      else it->second = std::move(sum);
      return;
    }
    if (c.is_zero() && !c.indistinguishable_zero()) return;
    if (!w.valid_for(n_)) raise(ErrorCode::InvalidArgument, "word " + w.str() + " has a letter outside 1.." + std::to_string(n_));
    terms_.emplace_hint(it, w, c);
  }

  K coeff(const Word& w) const {
    auto it = terms_.find(w);
    return it == terms_.end() ? K::zero(ctx_) : it->second;
  }
  K constant_term() const { return coeff(Word{}); }

  // True when every stored coefficient vanishes within tracked precision.
  bool is_zero() const {
    return std::all_of(terms_.begin(), terms_.end(), [](const auto& kv) { return kv.second.is_zero(); });
  }

  // Lowest weight carrying a nonzero coefficient; degree()+1 for zero.
  int order() const {
    for (const auto& [w, c] : terms_)
      if (!c.is_zero()) return static_cast<int>(w.weight());
    return degree_ + 1;
  }

  Series truncated(int degree) const {
    Series out(n_, std::min(degree, degree_), ctx_);
    for (const auto& [w, c] : terms_)
      if (static_cast<int>(w.weight()) <= out.degree_) out.terms_.insert_or_assign(w, c);
    return out;
  }

  // Terms of weight >= m; f lies in I^m iff weight_at_least(m) == f.
  Series weight_at_least(int m) const {
    Series out(n_, degree_, ctx_);
    for (const auto& [w, c] : terms_)
      if (static_cast<int>(w.weight()) >= m) out.terms_.insert_or_assign(w, c);
    return out;
  }
  Series homogeneous(int m) const {
    Series out(n_, degree_, ctx_);
    for (const auto& [w, c] : terms_)
      if (static_cast<int>(w.weight()) == m) out.terms_.insert_or_assign(w, c);
    return out;
  }
  bool in_ideal_power(int m) const {
    return std::all_of(terms_.begin(), terms_.end(), [m](const auto& kv) {
      return static_cast<int>(kv.first.weight()) >= m || kv.second.is_zero();
    });
  }

  // ||f||_r = sup_I |a_I| r^{|I|}, in log scale.
  LogNorm norm(const Radius& r) const {
    // Smallest valuation per weight, kept apart for known and unknown digits.
    std::vector<std::optional<long>> known(static_cast<std::size_t>(degree_) + 1), bound(known.size());
    for (const auto& [w, c] : terms_) {
      Valuation v = c.valuation();
      if (v.infinite) continue;
      auto& slot = (v.lower_bound ? bound : known)[w.weight()];
      slot = std::min(slot.value_or(v.value), v.value);
    }
    LogNorm out = LogNorm::infinity();
    for (std::size_t m = 0; m < known.size(); ++m) {
      if (known[m]) out = LogNorm::max_magnitude(out, LogNorm::exact(*known[m]) + r.power(static_cast<long>(m)));
      if (bound[m])
        out = LogNorm::max_magnitude(out, (LogNorm::exact(*bound[m]) + r.power(static_cast<long>(m))).with_upper_bound_flag());
    }
    return out;
  }

  friend Series operator+(const Series& a, const Series& b) {
    check_shape(a, b);
    Series out = a.truncated(std::min(a.degree_, b.degree_));
    for (const auto& [w, c] : b.terms_) out.add_to(w, c);
    return out;
  }
  Series operator-() const {
    Series out(n_, degree_, ctx_);
    for (const auto& [w, c] : terms_) out.terms_.insert_or_assign(w, -c);
    return out;
  }
  friend Series operator-(const Series& a, const Series& b) { return a + (-b); }

  // Noncommutative product: concatenation of words.
  friend Series operator*(const Series& a, const Series& b) {
    check_shape(a, b);
    return product_to(a, b, std::min(a.degree_, b.degree_));
  }
  // Product kept to weight `degree`. Valid beyond min(D_a, D_b) only when the
  // caller knows the missing terms cannot contribute (e.g. one factor in I^k).
  static Series product_to(const Series& a, const Series& b, int degree) {
    check_shape(a, b);
    Series out(a.n_, degree, a.ctx_);
    for (const auto& [u, x] : a.terms_) {
      int room = degree - static_cast<int>(u.weight());
      if (room < 0) break;
      for (const auto& [w, y] : b.terms_) {
        if (static_cast<int>(w.weight()) > room) break;
        out.add_to(u + w, x * y);
      }
    }
    return out;
  }
  friend Series operator*(const K& k, const Series& a) {
    Series out(a.n_, a.degree_, a.ctx_);
    for (const auto& [w, c] : a.terms_) out.set(w, k * c);
    return out;
  }

  // Coefficientwise equality; exact zeros and absent words coincide.
  friend bool operator==(const Series& a, const Series& b) {
    if (a.n_ != b.n_ || a.degree_ != b.degree_ || a.ctx_.ell != b.ctx_.ell) return false;
    return a.terms_ == b.terms_;
  }

  std::string str() const {
    if (terms_.empty()) return "0";
    std::string s;
    for (const auto& [w, c] : terms_) {
      if (!s.empty()) s += " + ";
      s += "(" + c.str() + ")" + (w.empty() ? "" : "*" + w.str());
    }
    return s;
  }

 private:
  static void check_shape(const Series& a, const Series& b) {
    if (a.n_ != b.n_) raise(ErrorCode::ShapeMismatch, "series in different numbers of variables");
    if (a.ctx_.ell != b.ctx_.ell) raise(ErrorCode::ShapeMismatch, "series over different primes");
  }

  int n_ = 1;
  int degree_ = 0;
  ScalarContext ctx_{};
  Map terms_;
};

enum class RingOp { Add, Mul };

template <LadicScalar K>
Series<K> ring_op(const Series<K>& f, const Series<K>& g, RingOp op) {
  return op == RingOp::Add ? f + g : f * g;
}

template <LadicScalar K>
LogNorm norm_r(const Series<K>& f, const Radius& r) {
  return f.norm(r);
}

template <LadicScalar K>
Series<K> ideal_truncate(const Series<K>& f, int m) {
  if (m < 0 || m > f.degree() + 1) raise(ErrorCode::InvalidArgument, "ideal power out of range");
  return f.weight_at_least(m);
}

namespace detail {

// f(g_1, ..., g_n) modulo I^{budget+1}, via the left factorization
// f = c + sum_i x_i * f_i, so f(g) = c + sum_i g_i * f_i(g).
template <LadicScalar K>
Series<K> substitute_rec(const Series<K>& f, const std::vector<Series<K>>& args, int budget) {
  const int n = f.variables();
  Series<K> out(n, budget, f.context());
  std::vector<Series<K>> tails(static_cast<std::size_t>(n), Series<K>(n, std::max(budget - 1, 0), f.context()));
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  for (const auto& [w, c] : f.terms()) {
    if (w.empty()) {
      out.set(w, c);
      continue;
    }
    if (static_cast<int>(w.weight()) > budget) break;
    auto i = static_cast<std::size_t>(w.front() - 1);
    tails[i].set(w.tail(), c);
    used[i] = true;
  }
  if (budget == 0) return out;
  for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
    if (!used[i]) continue;
    Series<K> inner = substitute_rec(tails[i], args, budget - 1);
    // args[i] lies in I, so inner is only needed to weight budget-1.
    for (const auto& [u, x] : args[i].terms()) {
      int room = budget - static_cast<int>(u.weight());
      if (room < 0) break;
      for (const auto& [w, y] : inner.terms()) {
        if (static_cast<int>(w.weight()) > room) break;
        out.add_to(u + w, x * y);
      }
    }
  }
  return out;
}

// Exact substitution over one common denominator L. A trie node at depth k
// holds L^{D-k+1} times its partial value, so every contribution lands on the
// same denominator L^{D+1} and coefficients are reduced once at the end. Words
// index a dense array: offset(|w|) + (letters read in base n).
class DenseWords {
 public:
  DenseWords(int n, int degree) : n_(n) {
    power_.push_back(1);
    offset_.push_back(0);
    for (int k = 0; k <= degree; ++k) {
      offset_.push_back(offset_.back() + power_.back());
      power_.push_back(power_.back() * static_cast<std::size_t>(n));
    }
  }
  static bool fits(int n, int degree, std::size_t limit) {
    std::size_t total = 0, p = 1;
    for (int k = 0; k <= degree; ++k) {
      total += p;
      if (total > limit) return false;
      p *= static_cast<std::size_t>(n);
    }
    return true;
  }
  std::size_t size(int degree) const { return offset_[static_cast<std::size_t>(degree) + 1]; }
  std::size_t rank(const Word& w) const {
    std::size_t r = 0;
    for (int a : w.letters()) r = r * static_cast<std::size_t>(n_) + static_cast<std::size_t>(a - 1);
    return r;
  }
  std::size_t index(std::size_t weight, std::size_t rank) const { return offset_[weight] + rank; }
  std::size_t power(std::size_t k) const { return power_[k]; }
  Word word(std::size_t weight, std::size_t rank) const {
    std::vector<int> letters(weight);
    for (std::size_t k = weight; k-- > 0;) {
      letters[k] = static_cast<int>(rank % static_cast<std::size_t>(n_)) + 1;
      rank /= static_cast<std::size_t>(n_);
    }
    return Word(std::move(letters));
  }

 private:
  int n_;
  std::vector<std::size_t> power_;
  std::vector<std::size_t> offset_;
};

struct ScaledTerm {
  std::size_t weight;
  std::size_t rank;
  mpz_class value;
};

struct TrieItem {
  const std::vector<int>* letters;
  const mpz_class* numerator;  // coefficient times L
};

inline void substitute_dense_rec(const std::vector<TrieItem>& items, std::size_t depth, int degree, const DenseWords& words,
                                 const std::vector<std::vector<ScaledTerm>>& args, const std::vector<mpz_class>& lpow,
                                 std::vector<mpz_class>& out) {
  const int budget = degree - static_cast<int>(depth);
  const std::size_t n = args.size();
  std::vector<std::vector<TrieItem>> children(n);
  for (const auto& it : items) {
    if (it.letters->size() == depth) out[0] += *it.numerator * lpow[static_cast<std::size_t>(budget)];
    else children[static_cast<std::size_t>((*it.letters)[depth] - 1)].push_back(it);
  }
  if (budget == 0) return;
  for (std::size_t i = 0; i < n; ++i) {
    if (children[i].empty()) continue;
    std::vector<mpz_class> inner(words.size(budget - 1));
    substitute_dense_rec(children[i], depth + 1, degree, words, args, lpow, inner);
    std::vector<std::pair<std::size_t, std::size_t>> nonzero;  // (weight, rank)
    for (int b = 0; b <= budget - 1; ++b)
      for (std::size_t r = 0; r < words.power(static_cast<std::size_t>(b)); ++r)
        if (inner[words.index(static_cast<std::size_t>(b), r)] != 0) nonzero.emplace_back(b, r);
    for (const auto& g : args[i]) {
      if (static_cast<int>(g.weight) > budget) break;
      for (const auto& [b, r] : nonzero) {
        if (static_cast<int>(g.weight + b) > budget) break;
        mpz_class& slot = out[words.index(g.weight + b, g.rank * words.power(b) + r)];
        mpz_addmul(slot.get_mpz_t(), g.value.get_mpz_t(), inner[words.index(b, r)].get_mpz_t());
      }
    }
  }
}

inline Series<Rational> substitute_exact_dense(const Series<Rational>& f, const std::vector<Series<Rational>>& args, int degree) {
  const int n = f.variables();
  const ScalarContext& ctx = f.context();
  DenseWords words(n, degree);
  mpz_class l = 1;
  for (const auto& [w, c] : f.terms()) mpz_lcm(l.get_mpz_t(), l.get_mpz_t(), c.value().get_den_mpz_t());
  for (const auto& g : args)
    for (const auto& [w, c] : g.terms()) mpz_lcm(l.get_mpz_t(), l.get_mpz_t(), c.value().get_den_mpz_t());
  auto scaled = [&](const Rational& c) { return mpz_class(c.value().get_num() * (l / c.value().get_den())); };

  std::vector<std::vector<ScaledTerm>> gs(args.size());
  for (std::size_t i = 0; i < args.size(); ++i)
    for (const auto& [w, c] : args[i].terms())
      if (static_cast<int>(w.weight()) <= degree) gs[i].push_back({w.weight(), words.rank(w), scaled(c)});
  std::vector<mpz_class> numerators;
  numerators.reserve(f.size());
  std::vector<TrieItem> items;
  for (const auto& [w, c] : f.terms()) {
    if (static_cast<int>(w.weight()) > degree) break;
    numerators.push_back(scaled(c));
  }
  std::size_t k = 0;
  for (const auto& [w, c] : f.terms()) {
    if (k == numerators.size()) break;
    items.push_back({&w.letters(), &numerators[k++]});
  }
  std::vector<mpz_class> lpow(static_cast<std::size_t>(degree) + 1, 1);
  for (std::size_t j = 1; j < lpow.size(); ++j) lpow[j] = lpow[j - 1] * l;
  std::vector<mpz_class> out(words.size(degree));
  substitute_dense_rec(items, 0, degree, words, gs, lpow, out);

  mpz_class denominator = lpow.back() * l;
  Series<Rational> result(n, degree, ctx);
  for (int b = 0; b <= degree; ++b)
    for (std::size_t r = 0; r < words.power(static_cast<std::size_t>(b)); ++r) {
      const mpz_class& num = out[words.index(static_cast<std::size_t>(b), r)];
      if (num == 0) continue;
      mpq_class q(num, denominator);
      q.canonicalize();
      result.set(words.word(static_cast<std::size_t>(b), r), Rational::from_rational(ctx, q));
    }
  return result;
}

}  // namespace detail

// f(args) with every argument in I^1; exact modulo I^{D+1}.
template <LadicScalar K>
Series<K> substitute(const Series<K>& f, const std::vector<Series<K>>& args) {
  if (static_cast<int>(args.size()) != f.variables())
    raise(ErrorCode::ShapeMismatch, "substitution needs one argument per variable");
  int degree = f.degree();
  for (const auto& g : args) {
    if (g.variables() != f.variables() || g.context().ell != f.context().ell)
      raise(ErrorCode::ShapeMismatch, "argument shape differs from the series");
    if (!g.constant_term().is_zero()) raise(ErrorCode::ConstantTermNonzero, "substituted series must lie in I");
    degree = std::min(degree, g.degree());
  }
  if constexpr (K::is_exact_backend) {
    if (detail::DenseWords::fits(f.variables(), degree, std::size_t{1} << 14)) return detail::substitute_exact_dense(f, args, degree);
  }
  return detail::substitute_rec(f.truncated(degree), args, degree);
}

}  // namespace ncsiegel
