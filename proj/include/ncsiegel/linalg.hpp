#pragma once

// Small dense matrices over scalars and univariate polynomials over Q.

#include <gmpxx.h>

#include <cstddef>
#include <string>
#include <vector>

#include "errors.hpp"
#include "scalar.hpp"

namespace ncsiegel {

template <LadicScalar K>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, const K& fill) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n, const ScalarContext& ctx) {
    Matrix m(n, n, K::zero(ctx));
    for (std::size_t i = 0; i < n; ++i) m(i, i) = K::one(ctx);
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  K& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const K& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols_ != b.rows_) raise(ErrorCode::ShapeMismatch, "matrix product dimensions");
    Matrix out(a.rows_, b.cols_, K::zero(a(0, 0).context()));
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        if (a(i, k).is_zero() && !a(i, k).indistinguishable_zero()) continue;
        for (std::size_t j = 0; j < b.cols_; ++j) out(i, j) = out(i, j) + a(i, k) * b(k, j);
      }
    return out;
  }
  friend Matrix operator+(const Matrix& a, const Matrix& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_) raise(ErrorCode::ShapeMismatch, "matrix sum dimensions");
    Matrix out = a;
    for (std::size_t i = 0; i < a.data_.size(); ++i) out.data_[i] = a.data_[i] + b.data_[i];
    return out;
  }
  Matrix scaled(const K& k) const {
    Matrix out = *this;
    for (auto& x : out.data_) x = k * x;
    return out;
  }

  bool is_zero() const {
    for (const auto& x : data_)
      if (!x.is_zero()) return false;
    return true;
  }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

  // |A|_l = l^{-v(A)} with v(A) the minimal valuation of the entries.
  Valuation valuation() const {
    Valuation out = Valuation::infinity();
    for (const auto& x : data_) {
      Valuation v = x.valuation();
      if (v.infinite) continue;
      if (out.infinite || v.value < out.value) out = v;
      else if (v.value == out.value) out.lower_bound = out.lower_bound && v.lower_bound;
    }
    return out;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<K> data_;
};

// Dense polynomial over Q, coefficients in increasing degree, no trailing zeros.
class QPoly {
 public:
  QPoly() = default;
  explicit QPoly(std::vector<mpq_class> c) : c_(std::move(c)) { trim(); }

  int degree() const { return static_cast<int>(c_.size()) - 1; }
  bool is_zero() const { return c_.empty(); }
  const std::vector<mpq_class>& coeffs() const { return c_; }
  const mpq_class& lead() const { return c_.back(); }

  friend QPoly operator*(const QPoly& a, const QPoly& b) {
    if (a.is_zero() || b.is_zero()) return {};
    std::vector<mpq_class> out(a.c_.size() + b.c_.size() - 1, 0);
    for (std::size_t i = 0; i < a.c_.size(); ++i)
      for (std::size_t j = 0; j < b.c_.size(); ++j) out[i + j] += a.c_[i] * b.c_[j];
    return QPoly(std::move(out));
  }

  QPoly derivative() const {
    std::vector<mpq_class> out;
    for (std::size_t i = 1; i < c_.size(); ++i) out.push_back(c_[i] * static_cast<long>(i));
    return QPoly(std::move(out));
  }

  // Quotient and remainder of division by a nonzero polynomial.
  static std::pair<QPoly, QPoly> divmod(const QPoly& a, const QPoly& b) {
    if (b.is_zero()) raise(ErrorCode::InvalidArgument, "polynomial division by zero");
    std::vector<mpq_class> rem = a.c_;
    std::vector<mpq_class> quo(a.c_.size() >= b.c_.size() ? a.c_.size() - b.c_.size() + 1 : 0, 0);
    for (int i = static_cast<int>(rem.size()) - 1; i >= b.degree(); --i) {
      mpq_class q = rem[static_cast<std::size_t>(i)] / b.lead();
      if (q == 0) continue;
      auto shift = static_cast<std::size_t>(i - b.degree());
      quo[shift] = q;
      for (std::size_t j = 0; j < b.c_.size(); ++j) rem[shift + j] -= q * b.c_[j];
    }
    return {QPoly(std::move(quo)), QPoly(std::move(rem))};
  }

  static QPoly gcd(QPoly a, QPoly b) {
    while (!b.is_zero()) {
      QPoly r = divmod(a, b).second;
      a = std::move(b);
      b = std::move(r);
    }
    if (a.is_zero()) return a;
    mpq_class l = a.lead();
    for (auto& x : a.c_) x /= l;
    return a;
  }

  // p / gcd(p, p'): the product of the distinct irreducible factors.
  QPoly radical() const {
    QPoly g = gcd(*this, derivative());
    return divmod(*this, g).first;
  }

 private:
  void trim() {
    while (!c_.empty() && c_.back() == 0) c_.pop_back();
  }
  std::vector<mpq_class> c_;
};

// Characteristic polynomial det(tI - M) by Faddeev-LeVerrier.
inline QPoly characteristic_polynomial(const Matrix<Rational>& m) {
  const std::size_t n = m.rows();
  if (n == 0) return QPoly({mpq_class(1)});
  ScalarContext ctx = m(0, 0).context();
  std::vector<mpq_class> c(n + 1, 0);
  c[n] = 1;
  Matrix<Rational> mk(n, n, Rational::zero(ctx));  // M_0 = 0
  Matrix<Rational> id = Matrix<Rational>::identity(n, ctx);
  for (std::size_t k = 1; k <= n; ++k) {
    // M_k = M * M_{k-1} + c_{n-k+1} I ; c_{n-k} = -tr(M * M_k) / k
    mk = m * mk + id.scaled(Rational(ctx.ell, c[n - k + 1]));
    Matrix<Rational> prod = m * mk;
    mpq_class tr = 0;
    for (std::size_t i = 0; i < n; ++i) tr += prod(i, i).value();
    c[n - k] = -tr / static_cast<long>(k);
  }
  return QPoly(std::move(c));
}

// p(M) by Horner's rule.
inline Matrix<Rational> evaluate(const QPoly& p, const Matrix<Rational>& m) {
  const std::size_t n = m.rows();
  ScalarContext ctx = m(0, 0).context();
  Matrix<Rational> out(n, n, Rational::zero(ctx));
  Matrix<Rational> id = Matrix<Rational>::identity(n, ctx);
  for (int i = p.degree(); i >= 0; --i)
    out = m * out + id.scaled(Rational(ctx.ell, p.coeffs()[static_cast<std::size_t>(i)]));
  return out;
}

}  // namespace ncsiegel
