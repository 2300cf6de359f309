#ifndef FEATPINN_TAPE_HPP
#define FEATPINN_TAPE_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "featpinn/common.hpp"

namespace featpinn {

// Scalar helpers shared by all differentiable value types. The tape is
// generic over its value type T so that forward-mode duals can be pushed
// through a reverse pass (T = DualT<double>) for second input derivatives.
//
// The std functions are re-exported so that generic code written against the
// differentiable types also instantiates with plain double.

using std::abs;
using std::cos;
using std::erf;
using std::exp;
using std::log;
using std::max;
using std::pow;
using std::sin;
using std::sqrt;
using std::tanh;

inline double primal_of(double x) { return x; }
inline bool is_zero(double x) { return x == 0.0; }

template <class T>
class TapeT;

// Lightweight handle to a tape node. Copies are cheap; the tape owns storage.
// Kept trivially constructible so jet arrays of handles cost nothing to
// default-construct.
template <class T>
struct VarT {
  TapeT<T>* tape;
  std::int32_t id;
};

// Reverse-mode computation graph. Nodes are appended in evaluation order, so
// ids are topologically sorted by construction and one backward sweep
// suffices. A tape is rebuilt (or truncated back to its leaves) for every
// evaluation; there is no retained graph.
template <class T>
class TapeT {
 public:
  using Index = std::int32_t;

  struct Node {
    T value{};
    T c0{};      // d value / d parent0
    T c1{};      // d value / d parent1
    T c2{};      // d value / d parent2 (fused multiply-add)
    Index p0 = -1;
    Index p1 = -1;
    Index p2 = -1;
  };

  explicit TapeT(std::size_t reserve_nodes = 1024) { nodes_.reserve(reserve_nodes); }

  std::size_t size() const { return nodes_.size(); }

  // Drops every node past the first `keep` (typically the leaves), so the
  // leaf handles stay valid across evaluations.
  void clear_keep(std::size_t keep) {
    if (keep < nodes_.size()) nodes_.resize(keep);
  }

  VarT<T> input(T v) {
    Node nd;
    nd.value = v;
    nodes_.push_back(nd);
    return {this, static_cast<Index>(nodes_.size() - 1)};
  }

  VarT<T> constant(T v) { return input(v); }

  Index push1(T v, Index p0, T c0, const char* prim) {
    check_finite(v, prim);
    Node nd;
    nd.value = v;
    nd.c0 = c0;
    nd.p0 = p0;
    nodes_.push_back(nd);
    return static_cast<Index>(nodes_.size() - 1);
  }

  Index push2(T v, Index p0, T c0, Index p1, T c1, const char* prim) {
    check_finite(v, prim);
    Node nd;
    nd.value = v;
    nd.c0 = c0;
    nd.c1 = c1;
    nd.p0 = p0;
    nd.p1 = p1;
    nodes_.push_back(nd);
    return static_cast<Index>(nodes_.size() - 1);
  }

  Index push3(T v, Index p0, T c0, Index p1, T c1, Index p2, T c2, const char* prim) {
    check_finite(v, prim);
    Node nd;
    nd.value = v;
    nd.c0 = c0;
    nd.c1 = c1;
    nd.c2 = c2;
    nd.p0 = p0;
    nd.p1 = p1;
    nd.p2 = p2;
    nodes_.push_back(nd);
    return static_cast<Index>(nodes_.size() - 1);
  }

  const T& value(Index i) const { return nodes_[static_cast<std::size_t>(i)].value; }

  // Propagates adjoints from `root` down to the leaves. After the call the
  // root's adjoint is exactly 1.
  void backward(VarT<T> root) {
    adjoint_.assign(nodes_.size(), T{});
    adjoint_[static_cast<std::size_t>(root.id)] = T(1.0);
    for (Index i = root.id; i >= 0; --i) {
      const T a = adjoint_[static_cast<std::size_t>(i)];
      if (is_zero(a)) continue;
      const Node& nd = nodes_[static_cast<std::size_t>(i)];
      if (nd.p0 >= 0) adjoint_[static_cast<std::size_t>(nd.p0)] += nd.c0 * a;
      if (nd.p1 >= 0) adjoint_[static_cast<std::size_t>(nd.p1)] += nd.c1 * a;
      if (nd.p2 >= 0) adjoint_[static_cast<std::size_t>(nd.p2)] += nd.c2 * a;
    }
  }

  const T& adjoint(VarT<T> v) const { return adjoint_[static_cast<std::size_t>(v.id)]; }

 private:
  static void check_finite(const T& v, const char* prim) {
    if (!std::isfinite(primal_of(v))) {
      throw NumericError(std::string("non-finite value in primitive '") + prim + "'");
    }
  }

  std::vector<Node> nodes_;
  std::vector<T> adjoint_;
};

using Tape = TapeT<double>;
using Var = VarT<double>;

template <class T>
inline T value_of_impl(const VarT<T>& v) {
  return v.tape->value(v.id);
}
inline double value_of(double x) { return x; }
template <class T>
inline double value_of(const VarT<T>& v) {
  return primal_of(value_of_impl(v));
}

// --- arithmetic -------------------------------------------------------------

template <class T>
inline VarT<T> operator+(VarT<T> a, VarT<T> b) {
  TapeT<T>* t = a.tape;
  return {t, t->push2(t->value(a.id) + t->value(b.id), a.id, T(1.0), b.id, T(1.0), "add")};
}
template <class T>
inline VarT<T> operator-(VarT<T> a, VarT<T> b) {
  TapeT<T>* t = a.tape;
  return {t, t->push2(t->value(a.id) - t->value(b.id), a.id, T(1.0), b.id, T(-1.0), "sub")};
}
template <class T>
inline VarT<T> operator*(VarT<T> a, VarT<T> b) {
  TapeT<T>* t = a.tape;
  const T va = t->value(a.id);
  const T vb = t->value(b.id);
  return {t, t->push2(va * vb, a.id, vb, b.id, va, "mul")};
}
template <class T>
inline VarT<T> operator/(VarT<T> a, VarT<T> b) {
  TapeT<T>* t = a.tape;
  const T va = t->value(a.id);
  const T vb = t->value(b.id);
  if (primal_of(vb) == 0.0) throw NumericError("division by zero in primitive 'div'");
  const T q = va / vb;
  return {t, t->push2(q, a.id, T(1.0) / vb, b.id, T(0.0) - q / vb, "div")};
}
template <class T>
inline VarT<T> operator-(VarT<T> a) {
  TapeT<T>* t = a.tape;
  return {t, t->push1(T(0.0) - t->value(a.id), a.id, T(-1.0), "neg")};
}

// Constants fold into the local derivative; they never allocate nodes.
template <class T>
inline VarT<T> operator+(VarT<T> a, double c) {
  TapeT<T>* t = a.tape;
  return {t, t->push1(t->value(a.id) + c, a.id, T(1.0), "add")};
}
template <class T>
inline VarT<T> operator+(double c, VarT<T> a) {
  return a + c;
}
template <class T>
inline VarT<T> operator-(VarT<T> a, double c) {
  return a + (-c);
}
template <class T>
inline VarT<T> operator-(double c, VarT<T> a) {
  TapeT<T>* t = a.tape;
  return {t, t->push1(c - t->value(a.id), a.id, T(-1.0), "sub")};
}
template <class T>
inline VarT<T> operator*(VarT<T> a, double c) {
  TapeT<T>* t = a.tape;
  return {t, t->push1(t->value(a.id) * c, a.id, T(c), "mul")};
}
template <class T>
inline VarT<T> operator*(double c, VarT<T> a) {
  return a * c;
}
template <class T>
inline VarT<T> operator/(VarT<T> a, double c) {
  if (c == 0.0) throw NumericError("division by zero in primitive 'div'");
  return a * (1.0 / c);
}
template <class T>
inline VarT<T> operator/(double c, VarT<T> a) {
  TapeT<T>* t = a.tape;
  const T va = t->value(a.id);
  if (primal_of(va) == 0.0) throw NumericError("division by zero in primitive 'div'");
  const T q = T(c) / va;
  return {t, t->push1(q, a.id, T(0.0) - q / va, "div")};
}

// --- elementary functions ---------------------------------------------------

template <class T>
inline VarT<T> exp(VarT<T> a) {
  TapeT<T>* t = a.tape;
  const T e = exp(t->value(a.id));
  return {t, t->push1(e, a.id, e, "exp")};
}
template <class T>
inline VarT<T> log(VarT<T> a) {
  TapeT<T>* t = a.tape;
  const T va = t->value(a.id);
  return {t, t->push1(log(va), a.id, T(1.0) / va, "log")};
}
template <class T>
inline VarT<T> sin(VarT<T> a) {
  TapeT<T>* t = a.tape;
  const T va = t->value(a.id);
  return {t, t->push1(sin(va), a.id, cos(va), "sin")};
}
template <class T>
inline VarT<T> cos(VarT<T> a) {
  TapeT<T>* t = a.tape;
  const T va = t->value(a.id);
  return {t, t->push1(cos(va), a.id, T(0.0) - sin(va), "cos")};
}
template <class T>
inline VarT<T> tanh(VarT<T> a) {
  TapeT<T>* t = a.tape;
  const T th = tanh(t->value(a.id));
  return {t, t->push1(th, a.id, T(1.0) - th * th, "tanh")};
}
template <class T>
inline VarT<T> sqrt(VarT<T> a) {
  TapeT<T>* t = a.tape;
  const T s = sqrt(t->value(a.id));
  return {t, t->push1(s, a.id, T(0.5) / s, "sqrt")};
}
template <class T>
inline VarT<T> erf(VarT<T> a) {
  TapeT<T>* t = a.tape;
  const T va = t->value(a.id);
  constexpr double two_over_sqrt_pi = 1.1283791670955126;
  return {t, t->push1(erf(va), a.id, T(two_over_sqrt_pi) * exp(T(0.0) - va * va), "erf")};
}
template <class T>
inline VarT<T> pow(VarT<T> a, double p) {
  TapeT<T>* t = a.tape;
  const T va = t->value(a.id);
  return {t, t->push1(pow(va, p), a.id, T(p) * pow(va, p - 1.0), "pow")};
}
// Derivative convention at kinks: abs takes the +1 branch at 0, max prefers
// its first argument on ties.
template <class T>
inline VarT<T> abs(VarT<T> a) {
  TapeT<T>* t = a.tape;
  const T va = t->value(a.id);
  if (primal_of(va) >= 0.0) return {t, t->push1(va, a.id, T(1.0), "abs")};
  return {t, t->push1(T(0.0) - va, a.id, T(-1.0), "abs")};
}
template <class T>
inline VarT<T> max(VarT<T> a, VarT<T> b) {
  TapeT<T>* t = a.tape;
  if (primal_of(t->value(a.id)) >= primal_of(t->value(b.id)))
    return {t, t->push1(t->value(a.id), a.id, T(1.0), "max")};
  return {t, t->push1(t->value(b.id), b.id, T(1.0), "max")};
}
template <class T>
inline VarT<T> max(VarT<T> a, double b) {
  TapeT<T>* t = a.tape;
  const T va = t->value(a.id);
  if (primal_of(va) >= b) return {t, t->push1(va, a.id, T(1.0), "max")};
  return t->constant(T(b));
}

// Fused multiply-add a*b + c: one node where mul+add would take two. This is
// the hot operation of every matrix-vector product in the forward pass.
inline double madd(double a, double b, double c) { return a * b + c; }
template <class T>
inline VarT<T> madd(VarT<T> a, VarT<T> b, VarT<T> c) {
  TapeT<T>* t = a.tape;
  const T va = t->value(a.id);
  const T vb = t->value(b.id);
  return {t, t->push3(va * vb + t->value(c.id), a.id, vb, b.id, va, c.id, T(1.0), "madd")};
}
template <class T>
inline VarT<T> madd(VarT<T> a, double b, VarT<T> c) {
  TapeT<T>* t = a.tape;
  return {t, t->push2(t->value(a.id) * b + t->value(c.id), a.id, T(b), c.id, T(1.0), "madd")};
}

}  // namespace featpinn

#endif  // FEATPINN_TAPE_HPP
