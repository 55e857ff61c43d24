#pragma once

// Log-scale magnitudes. A magnitude m = l^{-s} is stored through its exponent s,
// exactly when s is rational and known, otherwise as an outward-rounded
// interval [lo, hi] containing s. s = +inf encodes the magnitude 0.

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "errors.hpp"

namespace ncsiegel {

// Closed interval of doubles with outward rounding after every operation.
// libm transcendental functions are accurate to within an ulp or two on the
// supported platforms; every result is widened by kSlack ulps.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  static constexpr int kSlack = 4;
  static constexpr double inf = std::numeric_limits<double>::infinity();

  static double down(double x, int k = kSlack) {
    for (int i = 0; i < k; ++i) x = std::nextafter(x, -inf);
    return x;
  }
  static double up(double x, int k = kSlack) {
    for (int i = 0; i < k; ++i) x = std::nextafter(x, inf);
    return x;
  }

  static Interval point(double x) { return {x, x}; }
  static Interval around(double x) { return {down(x), up(x)}; }
  static Interval of(const mpq_class& q) {
    double d = q.get_d();
    return {down(d, 2), up(d, 2)};
  }

  bool contains(double x) const { return lo <= x && x <= hi; }
  double mid() const { return 0.5 * (lo + hi); }

  friend Interval operator+(Interval a, Interval b) { return {down(a.lo + b.lo, 1), up(a.hi + b.hi, 1)}; }
  friend Interval operator-(Interval a, Interval b) { return {down(a.lo - b.hi, 1), up(a.hi - b.lo, 1)}; }
  Interval operator-() const { return {-hi, -lo}; }

  friend Interval operator*(Interval a, Interval b) {
    double c[4] = {a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi};
    return {down(*std::min_element(c, c + 4), 1), up(*std::max_element(c, c + 4), 1)};
  }
  // Division by an interval not containing zero.
  friend Interval operator/(Interval a, Interval b) {
    if (b.lo <= 0.0 && b.hi >= 0.0) raise(ErrorCode::InvalidArgument, "interval division by zero");
    double c[4] = {a.lo / b.lo, a.lo / b.hi, a.hi / b.lo, a.hi / b.hi};
    return {down(*std::min_element(c, c + 4), 1), up(*std::max_element(c, c + 4), 1)};
  }

  // Monotone increasing functions.
  static Interval log(Interval a) { return {down(std::log(a.lo)), up(std::log(a.hi))}; }
  static Interval exp(Interval a) { return {down(std::exp(a.lo)), up(std::exp(a.hi))}; }
  static Interval log1m(Interval a) {  // log(1 - a), decreasing in a
    return {down(std::log1p(-a.hi)), up(std::log1p(-a.lo))};
  }
};

// Exponent s of a magnitude l^{-s}.
class LogValue {
 public:
  LogValue() : LogValue(infinity()) {}

  static LogValue infinity() {
    LogValue v(Tag{});
    v.infinite_ = true;
    v.box_ = {Interval::inf, Interval::inf};
    return v;
  }
  static LogValue exact(const mpq_class& s) {
    LogValue v(Tag{});
    v.exact_ = s;
    v.box_ = Interval::of(s);
    return v;
  }
  static LogValue enclosed(Interval box) {
    if (!(box.lo <= box.hi)) raise(ErrorCode::InvalidArgument, "empty log-scale interval");
    LogValue v(Tag{});
    v.box_ = box;
    return v;
  }
  // Magnitude m > 0 given as a real number.
  static LogValue from_magnitude(Interval m, long ell) {
    if (m.lo <= 0.0) raise(ErrorCode::InvalidArgument, "magnitude must be positive");
    Interval s = -(Interval::log(m) / Interval::log(Interval::point(static_cast<double>(ell))));
    return enclosed(s);
  }

  bool is_infinite() const { return infinite_; }
  bool is_exact() const { return infinite_ || exact_.has_value(); }
  const std::optional<mpq_class>& exact_value() const { return exact_; }
  Interval box() const { return box_; }
  double approx() const { return exact_ ? exact_->get_d() : box_.mid(); }

  // Set when some contributing coefficient was an indistinguishable zero: the
  // magnitude is then only an upper bound for the true one.
  bool upper_bound_only() const { return upper_bound_only_; }
  LogValue with_upper_bound_flag(bool flag = true) const {
    LogValue v = *this;
    v.upper_bound_only_ = v.upper_bound_only_ || flag;
    return v;
  }

  // Product of magnitudes.
  friend LogValue operator+(const LogValue& a, const LogValue& b) {
    LogValue out = sum_impl(a, b);
    out.upper_bound_only_ = a.upper_bound_only_ || b.upper_bound_only_;
    return out;
  }
  // Quotient of magnitudes (b finite).
  friend LogValue operator-(const LogValue& a, const LogValue& b) {
    if (b.infinite_) raise(ErrorCode::InvalidArgument, "division by a zero magnitude");
    if (a.infinite_) return a;
    LogValue out = (a.exact_ && b.exact_) ? exact(*a.exact_ - *b.exact_) : enclosed(a.box_ - b.box_);
    out.upper_bound_only_ = a.upper_bound_only_;
    return out;
  }
  // Magnitude raised to a rational power k >= 0.
  LogValue scaled(const mpq_class& k) const {
    if (infinite_) return k == 0 ? exact(0) : *this;
    LogValue out = exact_ ? exact(*exact_ * k) : enclosed(box_ * Interval::of(k));
    out.upper_bound_only_ = upper_bound_only_;
    return out;
  }

  // The larger of two magnitudes (smaller exponent).
  static LogValue max_magnitude(const LogValue& a, const LogValue& b) {
    LogValue out;
    if (a.infinite_) out = b;
    else if (b.infinite_) out = a;
    else if (a.exact_ && b.exact_) out = exact(std::min(*a.exact_, *b.exact_));
    else out = enclosed({std::min(a.box_.lo, b.box_.lo), std::min(a.box_.hi, b.box_.hi)});
    out.upper_bound_only_ = a.upper_bound_only_ || b.upper_bound_only_;
    return out;
  }

  // Sound comparisons of magnitudes; false when undecidable.
  friend bool certainly_le(const LogValue& a, const LogValue& b) {  // |a| <= |b|
    if (a.infinite_) return true;
    if (b.infinite_) return false;
    if (a.exact_ && b.exact_) return *a.exact_ >= *b.exact_;
    return lower_exponent(a) >= upper_exponent(b);
  }
  friend bool certainly_lt(const LogValue& a, const LogValue& b) {  // |a| < |b|
    if (b.infinite_) return false;
    if (a.infinite_) return true;
    if (a.exact_ && b.exact_) return *a.exact_ > *b.exact_;
    return lower_exponent(a) > upper_exponent(b);
  }

  // Magnitude as a double interval; may underflow to 0 for tiny magnitudes.
  Interval magnitude(long ell) const {
    if (infinite_) return {0.0, 0.0};
    Interval s = box_;
    Interval ln_ell = Interval::log(Interval::point(static_cast<double>(ell)));
    return Interval::exp(-(s * ln_ell));
  }

  std::string str() const {
    if (infinite_) return "inf";
    if (exact_) return exact_->get_str();
    return "[" + std::to_string(box_.lo) + ", " + std::to_string(box_.hi) + "]";
  }

 private:
  struct Tag {};
  explicit LogValue(Tag) {}

  static LogValue sum_impl(const LogValue& a, const LogValue& b) {
    if (a.infinite_ || b.infinite_) return infinity();
    if (a.exact_ && b.exact_) return exact(*a.exact_ + *b.exact_);
    return enclosed(a.box_ + b.box_);
  }
  static mpq_class lower_exponent(const LogValue& v) { return v.exact_ ? *v.exact_ : mpq_class(v.box_.lo); }
  static mpq_class upper_exponent(const LogValue& v) { return v.exact_ ? *v.exact_ : mpq_class(v.box_.hi); }

  bool infinite_ = false;
  std::optional<mpq_class> exact_;
  Interval box_{};
  bool upper_bound_only_ = false;
};

// r-norms and other magnitudes.
using LogNorm = LogValue;

// Radius r = l^{-s} with 0 < r < 1.
class Radius {
 public:
  Radius() : s_(LogValue::exact(1)) {}
  static Radius exact(const mpq_class& s) {
    if (s <= 0) raise(ErrorCode::InvalidArgument, "radius must satisfy 0 < r < 1");
    return Radius(LogValue::exact(s));
  }
  static Radius from_log(const LogValue& s) {
    if (s.is_infinite() || s.box().lo <= 0.0) raise(ErrorCode::InvalidArgument, "radius must satisfy 0 < r < 1");
    return Radius(s);
  }

  const LogValue& log() const { return s_; }
  bool is_exact() const { return s_.is_exact(); }
  // r^k as a magnitude.
  LogValue power(long k) const { return s_.scaled(mpq_class(k)); }
  // r * (1 - eta) for a real shrink factor eta in [0, 1).
  Radius shrunk(Interval eta, long ell) const {
    if (eta.hi <= 0.0) return *this;
    Interval ln_ell = Interval::log(Interval::point(static_cast<double>(ell)));
    Interval delta_s = -(Interval::log1m(eta) / ln_ell);
    return from_log(LogValue::enclosed(s_.box() + delta_s));
  }

 private:
  explicit Radius(LogValue s) : s_(std::move(s)) {}
  LogValue s_;
};

}  // namespace ncsiegel
