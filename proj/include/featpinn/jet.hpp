#ifndef FEATPINN_JET_HPP
#define FEATPINN_JET_HPP

#include <array>
#include <concepts>
#include <cstddef>

#include "featpinn/dual.hpp"

namespace featpinn {

// Truncated second-order Taylor jet along up to kMaxJetDirs input directions.
// Directions [0, k2) carry both first and second derivatives, directions
// [k2, k) only first derivatives. One network evaluation with jets yields
// every u, du/dx_j and d2u/dx_j^2 a PDE residual needs, sharing the primal
// work across directions. The scalar S may be double (plain evaluation) or a
// tape variable (so the probe stays differentiable in the parameters).
//
// Slots past k/k2 are deliberately left uninitialized and must never be read.
inline constexpr std::size_t kMaxJetDirs = 12;

template <class S>
struct JetV {
  S v;
  std::array<S, kMaxJetDirs> d1;
  std::array<S, kMaxJetDirs> d2;
  int k;   // number of first-order directions
  int k2;  // leading directions that also carry second order (k2 <= k)
};

template <class S>
inline double value_of(const JetV<S>& j) {
  return value_of(j.v);
}

template <class S>
inline JetV<S> jet_raw(int k, int k2) {
  JetV<S> r;
  r.k = k;
  r.k2 = k2;
  return r;
}

// Seeds an input coordinate: unit tangent along direction `dir` (or no
// dependence when dir < 0). `zero` supplies an S-typed zero; for tape
// variables that is a tape constant.
template <class S>
inline JetV<S> jet_input(S value, int dir, int k, int k2, S zero) {
  JetV<S> r = jet_raw<S>(k, k2);
  r.v = value;
  for (int i = 0; i < k; ++i) r.d1[i] = zero;
  for (int i = 0; i < k2; ++i) r.d2[i] = zero;
  if (dir >= 0) r.d1[dir] = zero + 1.0;
  return r;
}

template <class S>
inline JetV<S> operator+(const JetV<S>& a, const JetV<S>& b) {
  JetV<S> r = jet_raw<S>(a.k, a.k2);
  r.v = a.v + b.v;
  for (int i = 0; i < a.k; ++i) r.d1[i] = a.d1[i] + b.d1[i];
  for (int i = 0; i < a.k2; ++i) r.d2[i] = a.d2[i] + b.d2[i];
  return r;
}
template <class S>
inline JetV<S> operator-(const JetV<S>& a, const JetV<S>& b) {
  JetV<S> r = jet_raw<S>(a.k, a.k2);
  r.v = a.v - b.v;
  for (int i = 0; i < a.k; ++i) r.d1[i] = a.d1[i] - b.d1[i];
  for (int i = 0; i < a.k2; ++i) r.d2[i] = a.d2[i] - b.d2[i];
  return r;
}
template <class S>
inline JetV<S> operator-(const JetV<S>& a) {
  JetV<S> r = jet_raw<S>(a.k, a.k2);
  r.v = -a.v;
  for (int i = 0; i < a.k; ++i) r.d1[i] = -a.d1[i];
  for (int i = 0; i < a.k2; ++i) r.d2[i] = -a.d2[i];
  return r;
}
template <class S>
inline JetV<S> operator*(const JetV<S>& a, const JetV<S>& b) {
  JetV<S> r = jet_raw<S>(a.k, a.k2);
  r.v = a.v * b.v;
  for (int i = 0; i < a.k; ++i) r.d1[i] = a.d1[i] * b.v + a.v * b.d1[i];
  for (int i = 0; i < a.k2; ++i)
    r.d2[i] = a.d2[i] * b.v + 2.0 * (a.d1[i] * b.d1[i]) + a.v * b.d2[i];
  return r;
}
template <class S>
inline JetV<S> operator/(const JetV<S>& a, const JetV<S>& b) {
  JetV<S> r = jet_raw<S>(a.k, a.k2);
  r.v = a.v / b.v;
  for (int i = 0; i < a.k; ++i) r.d1[i] = (a.d1[i] - r.v * b.d1[i]) / b.v;
  for (int i = 0; i < a.k2; ++i)
    r.d2[i] = (a.d2[i] - r.v * b.d2[i] - 2.0 * (r.d1[i] * b.d1[i])) / b.v;
  return r;
}

// Mixed jet/scalar arithmetic. The scalar is constant along every jet
// direction, so only the primal shifts (adds) or everything scales (muls).
template <class S>
inline JetV<S> operator+(const JetV<S>& a, const S& c) {
  JetV<S> r = a;
  r.v = a.v + c;
  return r;
}
template <class S>
inline JetV<S> operator+(const S& c, const JetV<S>& a) {
  return a + c;
}
template <class S>
inline JetV<S> operator-(const JetV<S>& a, const S& c) {
  JetV<S> r = a;
  r.v = a.v - c;
  return r;
}
template <class S>
inline JetV<S> operator-(const S& c, const JetV<S>& a) {
  JetV<S> r = -a;
  r.v = c - a.v;
  return r;
}
template <class S>
inline JetV<S> operator*(const JetV<S>& a, const S& c) {
  JetV<S> r = jet_raw<S>(a.k, a.k2);
  r.v = a.v * c;
  for (int i = 0; i < a.k; ++i) r.d1[i] = a.d1[i] * c;
  for (int i = 0; i < a.k2; ++i) r.d2[i] = a.d2[i] * c;
  return r;
}
template <class S>
inline JetV<S> operator*(const S& c, const JetV<S>& a) {
  return a * c;
}
template <class S>
inline JetV<S> operator/(const JetV<S>& a, const S& c) {
  JetV<S> r = jet_raw<S>(a.k, a.k2);
  r.v = a.v / c;
  for (int i = 0; i < a.k; ++i) r.d1[i] = a.d1[i] / c;
  for (int i = 0; i < a.k2; ++i) r.d2[i] = a.d2[i] / c;
  return r;
}
template <class S>
inline JetV<S> jet_apply(const JetV<S>& a, const S& f, const S& fp, const S& fpp);
template <class S>
inline JetV<S> operator/(const S& c, const JetV<S>& a) {
  const S f = c / a.v;
  const S fp = -(f / a.v);
  const S fpp = -2.0 * (fp / a.v);
  return jet_apply(a, f, fp, fpp);
}

// Same again for plain double constants (needed when S is itself a tape
// variable or dual; excluded for S = double to avoid ambiguity).
template <class S>
  requires(!std::same_as<S, double>)
inline JetV<S> operator+(const JetV<S>& a, double c) {
  JetV<S> r = a;
  r.v = a.v + c;
  return r;
}
template <class S>
  requires(!std::same_as<S, double>)
inline JetV<S> operator+(double c, const JetV<S>& a) {
  return a + c;
}
template <class S>
  requires(!std::same_as<S, double>)
inline JetV<S> operator-(const JetV<S>& a, double c) {
  JetV<S> r = a;
  r.v = a.v - c;
  return r;
}
template <class S>
  requires(!std::same_as<S, double>)
inline JetV<S> operator-(double c, const JetV<S>& a) {
  JetV<S> r = -a;
  r.v = c - a.v;
  return r;
}
template <class S>
  requires(!std::same_as<S, double>)
inline JetV<S> operator*(const JetV<S>& a, double c) {
  JetV<S> r = jet_raw<S>(a.k, a.k2);
  r.v = a.v * c;
  for (int i = 0; i < a.k; ++i) r.d1[i] = a.d1[i] * c;
  for (int i = 0; i < a.k2; ++i) r.d2[i] = a.d2[i] * c;
  return r;
}
template <class S>
  requires(!std::same_as<S, double>)
inline JetV<S> operator*(double c, const JetV<S>& a) {
  return a * c;
}
template <class S>
  requires(!std::same_as<S, double>)
inline JetV<S> operator/(const JetV<S>& a, double c) {
  return a * (1.0 / c);
}

template <class S>
  requires(!std::same_as<S, double>)
inline JetV<S> operator/(double c, const JetV<S>& a) {
  const S f = c / a.v;
  const S fp = -(f / a.v);
  const S fpp = -2.0 * (fp / a.v);
  return jet_apply(a, f, fp, fpp);
}

// Unary chain rule: given f(v), f'(v), f''(v).
template <class S>
inline JetV<S> jet_apply(const JetV<S>& a, const S& f, const S& fp, const S& fpp) {  // NOLINT
  JetV<S> r = jet_raw<S>(a.k, a.k2);
  r.v = f;
  for (int i = 0; i < a.k; ++i) r.d1[i] = fp * a.d1[i];
  for (int i = 0; i < a.k2; ++i) r.d2[i] = fpp * (a.d1[i] * a.d1[i]) + fp * a.d2[i];
  return r;
}

template <class S>
inline JetV<S> exp(const JetV<S>& a) {
  const S e = exp(a.v);
  return jet_apply(a, e, e, e);
}
template <class S>
inline JetV<S> log(const JetV<S>& a) {
  const S inv = 1.0 / a.v;
  return jet_apply(a, log(a.v), inv, -(inv * inv));
}
template <class S>
inline JetV<S> sin(const JetV<S>& a) {
  const S s = sin(a.v);
  const S c = cos(a.v);
  return jet_apply(a, s, c, -s);
}
template <class S>
inline JetV<S> cos(const JetV<S>& a) {
  const S s = sin(a.v);
  const S c = cos(a.v);
  return jet_apply(a, c, -s, -c);
}
template <class S>
inline JetV<S> tanh(const JetV<S>& a) {
  const S t = tanh(a.v);
  const S tp = 1.0 - t * t;
  return jet_apply(a, t, tp, -2.0 * (t * tp));
}
template <class S>
inline JetV<S> sqrt(const JetV<S>& a) {
  const S s = sqrt(a.v);
  const S fp = 0.5 / s;
  return jet_apply(a, s, fp, (-0.5 * fp) / a.v);
}
template <class S>
inline JetV<S> erf(const JetV<S>& a) {
  constexpr double two_over_sqrt_pi = 1.1283791670955126;
  const S fp = two_over_sqrt_pi * exp(-(a.v * a.v));
  return jet_apply(a, erf(a.v), fp, -2.0 * (a.v * fp));
}
template <class S>
inline JetV<S> pow(const JetV<S>& a, double p) {
  return jet_apply(a, pow(a.v, p), p * pow(a.v, p - 1.0),
                   (p * (p - 1.0)) * pow(a.v, p - 2.0));
}
template <class S>
inline JetV<S> abs(const JetV<S>& a) {
  return value_of(a.v) >= 0.0 ? a : -a;
}
template <class S>
inline JetV<S> max(const JetV<S>& a, const JetV<S>& b) {
  return value_of(a.v) >= value_of(b.v) ? a : b;
}
template <class S>
inline JetV<S> max(const JetV<S>& a, double b) {
  if (value_of(a.v) >= b) return a;
  // Constant branch: derivatives vanish identically.
  JetV<S> r = jet_raw<S>(a.k, a.k2);
  r.v = 0.0 * a.v + b;
  for (int i = 0; i < a.k; ++i) r.d1[i] = 0.0 * a.d1[i];
  for (int i = 0; i < a.k2; ++i) r.d2[i] = 0.0 * a.d2[i];
  return r;
}

// Fused multiply-add with a scalar factor: a*b + c componentwise.
template <class S>
inline JetV<S> madd(const JetV<S>& a, const S& b, const JetV<S>& c) {
  JetV<S> r = jet_raw<S>(a.k, a.k2);
  r.v = madd(a.v, b, c.v);
  for (int i = 0; i < a.k; ++i) r.d1[i] = madd(a.d1[i], b, c.d1[i]);
  for (int i = 0; i < a.k2; ++i) r.d2[i] = madd(a.d2[i], b, c.d2[i]);
  return r;
}
template <class S>
  requires(!std::same_as<S, double>)
inline JetV<S> madd(const JetV<S>& a, double b, const JetV<S>& c) {
  JetV<S> r = jet_raw<S>(a.k, a.k2);
  r.v = madd(a.v, b, c.v);
  for (int i = 0; i < a.k; ++i) r.d1[i] = madd(a.d1[i], b, c.d1[i]);
  for (int i = 0; i < a.k2; ++i) r.d2[i] = madd(a.d2[i], b, c.d2[i]);
  return r;
}

}  // namespace featpinn

#endif  // FEATPINN_JET_HPP
