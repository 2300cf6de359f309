#ifndef FEATPINN_DUAL_HPP
#define FEATPINN_DUAL_HPP

#include "featpinn/tape.hpp"

namespace featpinn {

// First-order forward-mode number: primal `a` plus tangent `b` along one
// direction. Nestable (DualT<DualT<double>> carries a second derivative) and
// usable as the value type of TapeT for forward-over-reverse sweeps.
template <class T>
struct DualT {
  T a{};  // primal
  T b{};  // tangent

  DualT() = default;
  DualT(double v) : a(v), b(0.0) {}  // NOLINT(google-explicit-constructor)
  DualT(T primal, T tangent) : a(primal), b(tangent) {}

  DualT& operator+=(const DualT& o) {
    a += o.a;
    b += o.b;
    return *this;
  }
};

using Dual = DualT<double>;

template <class T>
inline double primal_of(const DualT<T>& d) {
  return primal_of(d.a);
}
template <class T>
inline bool is_zero(const DualT<T>& d) {
  return is_zero(d.a) && is_zero(d.b);
}
template <class T>
inline double value_of(const DualT<T>& d) {
  return primal_of(d);
}

template <class T>
inline DualT<T> operator+(const DualT<T>& x, const DualT<T>& y) {
  return {x.a + y.a, x.b + y.b};
}
template <class T>
inline DualT<T> operator-(const DualT<T>& x, const DualT<T>& y) {
  return {x.a - y.a, x.b - y.b};
}
template <class T>
inline DualT<T> operator-(const DualT<T>& x) {
  return {T(0.0) - x.a, T(0.0) - x.b};
}
template <class T>
inline DualT<T> operator*(const DualT<T>& x, const DualT<T>& y) {
  return {x.a * y.a, x.a * y.b + x.b * y.a};
}
template <class T>
inline DualT<T> operator/(const DualT<T>& x, const DualT<T>& y) {
  const T q = x.a / y.a;
  return {q, (x.b - q * y.b) / y.a};
}

template <class T>
inline DualT<T> operator+(const DualT<T>& x, double c) {
  return {x.a + c, x.b};
}
template <class T>
inline DualT<T> operator+(double c, const DualT<T>& x) {
  return x + c;
}
template <class T>
inline DualT<T> operator-(const DualT<T>& x, double c) {
  return {x.a - c, x.b};
}
template <class T>
inline DualT<T> operator-(double c, const DualT<T>& x) {
  return {c - x.a, T(0.0) - x.b};
}
template <class T>
inline DualT<T> operator*(const DualT<T>& x, double c) {
  return {x.a * c, x.b * c};
}
template <class T>
inline DualT<T> operator*(double c, const DualT<T>& x) {
  return x * c;
}
template <class T>
inline DualT<T> operator/(const DualT<T>& x, double c) {
  return {x.a / c, x.b / c};
}
template <class T>
inline DualT<T> operator/(double c, const DualT<T>& x) {
  const T q = T(c) / x.a;
  return {q, (T(0.0) - q * x.b) / x.a};
}

template <class T>
inline DualT<T> exp(const DualT<T>& x) {
  const T e = exp(x.a);
  return {e, e * x.b};
}
template <class T>
inline DualT<T> log(const DualT<T>& x) {
  return {log(x.a), x.b / x.a};
}
template <class T>
inline DualT<T> sin(const DualT<T>& x) {
  return {sin(x.a), cos(x.a) * x.b};
}
template <class T>
inline DualT<T> cos(const DualT<T>& x) {
  return {cos(x.a), (T(0.0) - sin(x.a)) * x.b};
}
template <class T>
inline DualT<T> tanh(const DualT<T>& x) {
  const T t = tanh(x.a);
  return {t, (T(1.0) - t * t) * x.b};
}
template <class T>
inline DualT<T> sqrt(const DualT<T>& x) {
  const T s = sqrt(x.a);
  return {s, x.b / (T(2.0) * s)};
}
template <class T>
inline DualT<T> erf(const DualT<T>& x) {
  constexpr double two_over_sqrt_pi = 1.1283791670955126;
  return {erf(x.a), T(two_over_sqrt_pi) * exp(T(0.0) - x.a * x.a) * x.b};
}
template <class T>
inline DualT<T> pow(const DualT<T>& x, double p) {
  return {pow(x.a, p), T(p) * pow(x.a, p - 1.0) * x.b};
}
template <class T>
inline DualT<T> abs(const DualT<T>& x) {
  return primal_of(x.a) >= 0.0 ? x : -x;
}
template <class T>
inline DualT<T> max(const DualT<T>& x, const DualT<T>& y) {
  return primal_of(x.a) >= primal_of(y.a) ? x : y;
}
template <class T>
inline DualT<T> max(const DualT<T>& x, double y) {
  return primal_of(x.a) >= y ? x : DualT<T>(y);
}
template <class T>
inline DualT<T> madd(const DualT<T>& x, const DualT<T>& y, const DualT<T>& c) {
  return {madd(x.a, y.a, c.a), madd(x.a, y.b, madd(x.b, y.a, c.b))};
}

}  // namespace featpinn

#endif  // FEATPINN_DUAL_HPP
