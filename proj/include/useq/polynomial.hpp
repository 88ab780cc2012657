#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace useq {

/// Dense univariate polynomial, coefficient k multiplies x^k.
template <typename T>
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(std::vector<T> coeffs) : coeffs_(std::move(coeffs)) { trim(); }

  static Polynomial constant(const T& c) { return Polynomial(std::vector<T>{c}); }
  static Polynomial monomial(std::size_t k, const T& c = T(1)) {
    std::vector<T> v(k + 1, T(0));
    v[k] = c;
    return Polynomial(std::move(v));
  }

  const std::vector<T>& coeffs() const { return coeffs_; }
  std::size_t size() const { return coeffs_.size(); }
  int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
  T coeff(std::size_t k) const { return k < coeffs_.size() ? coeffs_[k] : T(0); }

  template <typename X>
  X operator()(const X& x) const {
    X acc = X(0);
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * x + X(*it);
    return acc;
  }

  Polynomial& operator+=(const Polynomial& o) {
    if (o.coeffs_.size() > coeffs_.size()) coeffs_.resize(o.coeffs_.size(), T(0));
    for (std::size_t k = 0; k < o.coeffs_.size(); ++k) coeffs_[k] += o.coeffs_[k];
    trim();
    return *this;
  }
  Polynomial& operator-=(const Polynomial& o) {
    if (o.coeffs_.size() > coeffs_.size()) coeffs_.resize(o.coeffs_.size(), T(0));
    for (std::size_t k = 0; k < o.coeffs_.size(); ++k) coeffs_[k] -= o.coeffs_[k];
    trim();
    return *this;
  }
  Polynomial& operator*=(const T& c) {
    for (auto& a : coeffs_) a *= c;
    trim();
    return *this;
  }

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, const T& c) { return a *= c; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    if (a.coeffs_.empty() || b.coeffs_.empty()) return Polynomial();
    std::vector<T> out(a.coeffs_.size() + b.coeffs_.size() - 1, T(0));
    for (std::size_t i = 0; i < a.coeffs_.size(); ++i)
      for (std::size_t j = 0; j < b.coeffs_.size(); ++j) out[i + j] += a.coeffs_[i] * b.coeffs_[j];
    return Polynomial(std::move(out));
  }

  /// Integral over [0, 1].
  T integrate_unit() const {
    T acc = T(0);
    for (std::size_t k = 0; k < coeffs_.size(); ++k) acc += coeffs_[k] / T(static_cast<long>(k + 1));
    return acc;
  }

  /// Coefficients rescaled for the substitution x -> c * x.
  Polynomial compose_scale(const T& c) const {
    std::vector<T> out(coeffs_);
    T pw = T(1);
    for (auto& a : out) {
      a *= pw;
      pw *= c;
    }
    return Polynomial(std::move(out));
  }

  bool is_zero() const { return coeffs_.empty(); }

  template <typename U>
  Polynomial<U> convert(U (*cast)(const T&)) const {
    std::vector<U> out;
    out.reserve(coeffs_.size());
    for (const auto& a : coeffs_) out.push_back(cast(a));
    return Polynomial<U>(std::move(out));
  }

 private:
  void trim() {
    while (!coeffs_.empty() && coeffs_.back() == T(0)) coeffs_.pop_back();
  }
  std::vector<T> coeffs_;
};

/// Largest absolute coefficient.
template <typename T>
double max_abs_coeff(const Polynomial<T>& p) {
  double m = 0.0;
  for (const auto& a : p.coeffs()) m = std::max(m, std::abs(static_cast<double>(a)));
  return m;
}

}  // namespace useq
