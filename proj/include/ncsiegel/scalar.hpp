#pragma once

// l-adic scalars. Two backends share one interface:
//   Rational  exact element of Q embedded in Q_l through v_l,
//   Capped    l^v * unit with the unit known modulo l^P (relative precision P).
// Both are immutable values; every operation returns a new scalar.

#include <gmpxx.h>

#include <algorithm>
#include <compare>
#include <concepts>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>

#include "errors.hpp"

namespace ncsiegel {

struct ScalarContext {
  long ell = 5;
  long precision = 40;  // capped backend only

  friend bool operator==(const ScalarContext&, const ScalarContext&) = default;
};

// v_l of a scalar. `infinite` marks an exact zero. `lower_bound` marks a capped
// value whose known digits are all zero: the true valuation is >= value.
struct Valuation {
  bool infinite = false;
  long value = 0;
  bool lower_bound = false;

  static Valuation infinity() { return {true, 0, false}; }
  static Valuation exact(long v) { return {false, v, false}; }
  static Valuation at_least(long v) { return {false, v, true}; }

  friend bool operator==(const Valuation&, const Valuation&) = default;
};

namespace detail {

inline bool is_prime(long p) {
  if (p < 2) return false;
  for (long d = 2; d * d <= p; ++d)
    if (p % d == 0) return false;
  return true;
}

inline void check_prime(long ell) {
  if (!is_prime(ell)) raise(ErrorCode::InvalidArgument, "ell = " + std::to_string(ell) + " is not prime");
}

// Strips all factors of ell from z in place, returns how many were removed.
inline long remove_factor(mpz_class& z, long ell) {
  if (z == 0) return 0;
  mpz_class p(ell);
  return static_cast<long>(mpz_remove(z.get_mpz_t(), z.get_mpz_t(), p.get_mpz_t()));
}

inline mpz_class ipow(long base, long e) {
  mpz_class out;
  mpz_ui_pow_ui(out.get_mpz_t(), static_cast<unsigned long>(base), static_cast<unsigned long>(e));
  return out;
}

inline mpz_class mod_pos(const mpz_class& a, const mpz_class& m) {
  mpz_class r;
  mpz_mod(r.get_mpz_t(), a.get_mpz_t(), m.get_mpz_t());
  return r;
}

inline mpz_class mod_inverse(const mpz_class& a, const mpz_class& m) {
  mpz_class r;
  if (mpz_invert(r.get_mpz_t(), a.get_mpz_t(), m.get_mpz_t()) == 0)
    raise(ErrorCode::DivisionByIndistinguishableZero, "unit is not invertible");
  return r;
}

// v_l of a nonzero rational.
inline long rational_valuation(const mpq_class& q, long ell) {
  mpz_class num = q.get_num();
  mpz_class den = q.get_den();
  return remove_factor(num, ell) - remove_factor(den, ell);
}

}  // namespace detail

// Exact backend.
class Rational {
 public:
  static constexpr bool is_exact_backend = true;

  Rational() = default;
  Rational(long ell, mpq_class value) : ell_(ell), value_(std::move(value)) { value_.canonicalize(); }

  static Rational from_rational(const ScalarContext& ctx, const mpq_class& q) { return Rational(ctx.ell, q); }
  static Rational zero(const ScalarContext& ctx) { return Rational(ctx.ell, 0); }
  static Rational one(const ScalarContext& ctx) { return Rational(ctx.ell, 1); }

  long ell() const { return ell_; }
  ScalarContext context() const { return {ell_, 0}; }
  const mpq_class& value() const { return value_; }
  mpq_class to_rational() const { return value_; }

  bool is_zero() const { return value_ == 0; }
  bool is_exact_zero() const { return is_zero(); }
  bool indistinguishable_zero() const { return false; }

  Valuation valuation() const {
    if (is_zero()) return Valuation::infinity();
    return Valuation::exact(detail::rational_valuation(value_, ell_));
  }

  // Absolute precision: exact values are known to every digit.
  std::optional<long> absolute_precision() const { return std::nullopt; }

  friend Rational operator+(const Rational& a, const Rational& b) {
    check_same(a, b);
    return Rational(a.ell_, a.value_ + b.value_);
  }
  friend Rational operator-(const Rational& a, const Rational& b) {
    check_same(a, b);
    return Rational(a.ell_, a.value_ - b.value_);
  }
  friend Rational operator*(const Rational& a, const Rational& b) {
    check_same(a, b);
    return Rational(a.ell_, a.value_ * b.value_);
  }
  friend Rational operator/(const Rational& a, const Rational& b) {
    check_same(a, b);
    if (b.is_zero()) raise(ErrorCode::DivisionByIndistinguishableZero, "division by exact zero");
    return Rational(a.ell_, a.value_ / b.value_);
  }
  Rational operator-() const { return Rational(ell_, -value_); }

  friend bool operator==(const Rational& a, const Rational& b) { return a.ell_ == b.ell_ && a.value_ == b.value_; }

  std::string str() const { return value_.get_str(); }

 private:
  static void check_same(const Rational& a, const Rational& b) {
    if (a.ell_ != b.ell_) raise(ErrorCode::ShapeMismatch, "scalars over different primes");
  }

  long ell_ = 5;
  mpq_class value_ = 0;
};

// Capped-precision backend.
//
// Three states: exact zero; an indistinguishable zero known to vanish modulo
// l^abs_prec; or l^v * unit with unit in [1, l^prec) coprime to l.
class Capped {
 public:
  static constexpr bool is_exact_backend = false;

  Capped() = default;

  static Capped exact_zero(long ell, long cap) {
    Capped c;
    c.ell_ = ell;
    c.cap_ = cap;
    return c;
  }

  static Capped indistinguishable(long ell, long cap, long abs_prec) {
    Capped c = exact_zero(ell, cap);
    c.state_ = State::IndistinguishableZero;
    c.v_ = abs_prec;
    return c;
  }

  // l^v * unit with `prec` known digits. The unit is reduced and any factors of
  // l it carries are folded into the valuation.
  static Capped from_digits(long ell, long cap, long v, const mpz_class& unit, long prec) {
    if (prec < 1) raise(ErrorCode::PrecisionExhausted, "fewer than one known digit");
    prec = std::min(prec, cap);
    mpz_class u = detail::mod_pos(unit, detail::ipow(ell, prec));
    if (u == 0) return indistinguishable(ell, cap, v + prec);
    long extra = detail::remove_factor(u, ell);
    Capped c = exact_zero(ell, cap);
    c.state_ = State::Value;
    c.v_ = v + extra;
    c.prec_ = prec - extra;
    c.unit_ = u;
    return c;
  }

  static Capped from_rational(const ScalarContext& ctx, const mpq_class& q) {
    detail::check_prime(ctx.ell);
    if (ctx.precision < 1) raise(ErrorCode::PrecisionExhausted, "precision cap must be >= 1");
    if (q == 0) return exact_zero(ctx.ell, ctx.precision);
    mpz_class num = q.get_num();
    mpz_class den = q.get_den();
    long v = detail::remove_factor(num, ctx.ell) - detail::remove_factor(den, ctx.ell);
    mpz_class mod = detail::ipow(ctx.ell, ctx.precision);
    mpz_class unit = detail::mod_pos(num * detail::mod_inverse(den, mod), mod);
    return from_digits(ctx.ell, ctx.precision, v, unit, ctx.precision);
  }
  static Capped zero(const ScalarContext& ctx) { return exact_zero(ctx.ell, ctx.precision); }
  static Capped one(const ScalarContext& ctx) { return from_rational(ctx, 1); }

  long ell() const { return ell_; }
  long cap() const { return cap_; }
  ScalarContext context() const { return {ell_, cap_}; }

  bool is_exact_zero() const { return state_ == State::ExactZero; }
  bool indistinguishable_zero() const { return state_ == State::IndistinguishableZero; }
  bool is_zero() const { return state_ != State::Value; }

  // Digits of the unit that are known (0 for zeros).
  long relative_precision() const { return state_ == State::Value ? prec_ : 0; }
  const mpz_class& unit() const { return unit_; }

  Valuation valuation() const {
    switch (state_) {
      case State::ExactZero: return Valuation::infinity();
      case State::IndistinguishableZero: return Valuation::at_least(v_);
      case State::Value: break;
    }
    return Valuation::exact(v_);
  }

  // The value is known modulo l^absolute_precision; nullopt for exact zero.
  std::optional<long> absolute_precision() const {
    switch (state_) {
      case State::ExactZero: return std::nullopt;
      case State::IndistinguishableZero: return v_;
      case State::Value: break;
    }
    return v_ + prec_;
  }

  // Canonical rational representative l^v * unit.
  mpq_class to_rational() const {
    if (state_ != State::Value) return 0;
    mpq_class out(unit_);
    if (v_ >= 0) out *= mpq_class(detail::ipow(ell_, v_));
    else out /= mpq_class(detail::ipow(ell_, -v_));
    out.canonicalize();
    return out;
  }

  friend Capped operator+(const Capped& a, const Capped& b) {
    check_same(a, b);
    if (a.is_exact_zero()) return b;
    if (b.is_exact_zero()) return a;
    long abs_prec = std::min(*a.absolute_precision(), *b.absolute_precision());
    long base = std::min(a.low_valuation(), b.low_valuation());
    if (abs_prec <= base) return indistinguishable(a.ell_, a.cap_, abs_prec);
    mpz_class sum = a.scaled_to(base) + b.scaled_to(base);
    return from_digits(a.ell_, a.cap_, base, sum, abs_prec - base);
  }
  Capped operator-() const {
    if (state_ != State::Value) return *this;
    return from_digits(ell_, cap_, v_, -unit_, prec_);
  }
  friend Capped operator-(const Capped& a, const Capped& b) { return a + (-b); }

  friend Capped operator*(const Capped& a, const Capped& b) {
    check_same(a, b);
    if (a.is_exact_zero() || b.is_exact_zero()) return exact_zero(a.ell_, a.cap_);
    if (a.indistinguishable_zero() || b.indistinguishable_zero()) {
      // Known-to-vanish digits shift by the other factor's (lower) valuation.
      long abs_prec = a.low_valuation() + b.low_valuation();
      return indistinguishable(a.ell_, a.cap_, abs_prec);
    }
    long prec = std::min(a.prec_, b.prec_);
    return from_digits(a.ell_, a.cap_, a.v_ + b.v_, a.unit_ * b.unit_, prec);
  }

  friend Capped operator/(const Capped& a, const Capped& b) {
    check_same(a, b);
    if (b.is_zero())
      raise(ErrorCode::DivisionByIndistinguishableZero, "divisor has no nonzero known digit");
    if (a.is_exact_zero()) return a;
    if (a.indistinguishable_zero()) return indistinguishable(a.ell_, a.cap_, a.v_ - b.v_);
    long prec = std::min(a.prec_, b.prec_);
    mpz_class mod = detail::ipow(a.ell_, prec);
    mpz_class u = a.unit_ * detail::mod_inverse(b.unit_, mod);
    return from_digits(a.ell_, a.cap_, a.v_ - b.v_, u, prec);
  }

  // Representation equality (same digits, same precision).
  friend bool operator==(const Capped& a, const Capped& b) {
    return a.ell_ == b.ell_ && a.state_ == b.state_ && a.v_ == b.v_ && a.prec_ == b.prec_ && a.unit_ == b.unit_;
  }

  std::string str() const {
    switch (state_) {
      case State::ExactZero: return "0";
      case State::IndistinguishableZero: return "O(" + std::to_string(ell_) + "^" + std::to_string(v_) + ")";
      case State::Value: break;
    }
    return to_rational().get_str() + " + O(" + std::to_string(ell_) + "^" + std::to_string(v_ + prec_) + ")";
  }

 private:
  enum class State { ExactZero, IndistinguishableZero, Value };

  static void check_same(const Capped& a, const Capped& b) {
    if (a.ell_ != b.ell_) raise(ErrorCode::ShapeMismatch, "scalars over different primes");
  }

  // Valuation, or its certified lower bound for an indistinguishable zero.
  long low_valuation() const { return v_; }

  // Integer representative of the known digits scaled to l^base (base <= v).
  mpz_class scaled_to(long base) const {
    if (state_ != State::Value) return 0;
    return unit_ * detail::ipow(ell_, v_ - base);
  }

  long ell_ = 5;
  long cap_ = 40;
  State state_ = State::ExactZero;
  long v_ = 0;
  long prec_ = 0;
  mpz_class unit_ = 0;
};

template <typename K>
concept LadicScalar = requires(const K& a, const K& b, const ScalarContext& ctx, const mpq_class& q) {
  { K::from_rational(ctx, q) } -> std::same_as<K>;
  { K::zero(ctx) } -> std::same_as<K>;
  { a + b } -> std::same_as<K>;
  { a - b } -> std::same_as<K>;
  { a * b } -> std::same_as<K>;
  { a / b } -> std::same_as<K>;
  { -a } -> std::same_as<K>;
  { a.valuation() } -> std::same_as<Valuation>;
  { a.is_zero() } -> std::convertible_to<bool>;
  { a.indistinguishable_zero() } -> std::convertible_to<bool>;
  { a.context() } -> std::same_as<ScalarContext>;
  { a.to_rational() } -> std::same_as<mpq_class>;
  { K::is_exact_backend } -> std::convertible_to<bool>;
};

static_assert(LadicScalar<Rational>);
static_assert(LadicScalar<Capped>);

enum class ArithOp { Add, Sub, Mul, Div };

template <LadicScalar K>
K scalar_arith(const K& a, const K& b, ArithOp op) {
  switch (op) {
    case ArithOp::Add: return a + b;
    case ArithOp::Sub: return a - b;
    case ArithOp::Mul: return a * b;
    case ArithOp::Div: return a / b;
  }
  return a;
}

template <LadicScalar K>
Valuation valuation(const K& a) {
  return a.valuation();
}

// Convenience constructors used throughout tests and the CLI.
template <LadicScalar K>
K make_scalar(const ScalarContext& ctx, long num, long den = 1) {
  return K::from_rational(ctx, mpq_class(num, den));
}

}  // namespace ncsiegel
