#ifndef FEATPINN_AUTODIFF_HPP
#define FEATPINN_AUTODIFF_HPP

#include <algorithm>
#include <span>
#include <type_traits>
#include <vector>

#include "featpinn/dual.hpp"
#include "featpinn/jet.hpp"
#include "featpinn/tape.hpp"

namespace featpinn {

// Gradient of a scalar function of a parameter vector, reverse mode.
// f must be callable with std::vector<VarT<T>> for T = double (and, for the
// second-derivative paths below, T = Dual); a generic lambda does.
template <class F>
std::vector<double> grad(F&& f, std::span<const double> params) {
  Tape tape(64 + 8 * params.size());
  std::vector<Var> xs;
  xs.reserve(params.size());
  for (double p : params) xs.push_back(tape.input(p));
  Var y = f(xs);
  tape.backward(y);
  std::vector<double> g(params.size());
  for (std::size_t i = 0; i < xs.size(); ++i) g[i] = tape.adjoint(xs[i]);
  return g;
}

// Jacobian of a vector-to-vector function at x: entry (i, j) = df_i/dx_j.
// One backward sweep per output component on a shared forward graph.
template <class F>
Matrix input_jacobian(F&& f, std::span<const double> x) {
  Tape tape(64 + 8 * x.size());
  std::vector<Var> xs;
  xs.reserve(x.size());
  for (double v : x) xs.push_back(tape.input(v));
  std::vector<Var> ys = f(xs);
  Matrix j(ys.size(), x.size());
  for (std::size_t i = 0; i < ys.size(); ++i) {
    tape.backward(ys[i]);
    for (std::size_t c = 0; c < xs.size(); ++c) j(i, c) = tape.adjoint(xs[c]);
  }
  return j;
}

// Diagonal of the input Hessian of a scalar function: forward-mode duals
// pushed through the reverse pass, one sweep per coordinate. The tangent of
// the j-th input's adjoint is d2f/dx_j^2.
template <class F>
std::vector<double> input_hessian_diag(F&& f, std::span<const double> x) {
  std::vector<double> h(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    TapeT<Dual> tape(64 + 8 * x.size());
    std::vector<VarT<Dual>> xs;
    xs.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
      xs.push_back(tape.input(Dual{x[i], i == j ? 1.0 : 0.0}));
    VarT<Dual> y = f(xs);
    tape.backward(y);
    h[j] = tape.adjoint(xs[j]).b;
  }
  return h;
}

namespace detail {

inline double rel_err(double a, double b) {
  // Relative to max(|a|, |b|, 1): plain relative error for O(1)+ values,
  // absolute for values below 1 where finite-difference noise dominates.
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

template <class F>
double fd_check_scalar(F&& f, std::span<const double> x, double step) {
  std::vector<double> g = grad(f, x);
  std::vector<double> xp(x.begin(), x.end());
  double worst = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    xp[j] = x[j] + step;
    const double fp = f(xp);
    xp[j] = x[j] - step;
    const double fm = f(xp);
    xp[j] = x[j];
    worst = std::max(worst, rel_err(g[j], (fp - fm) / (2.0 * step)));
  }
  return worst;
}

template <class F>
double fd_check_vector(F&& f, std::span<const double> x, double step) {
  Matrix j = input_jacobian(f, x);
  std::vector<double> xp(x.begin(), x.end());
  double worst = 0.0;
  for (std::size_t c = 0; c < x.size(); ++c) {
    xp[c] = x[c] + step;
    const std::vector<double> fp = f(xp);
    xp[c] = x[c] - step;
    const std::vector<double> fm = f(xp);
    xp[c] = x[c];
    for (std::size_t i = 0; i < fp.size(); ++i)
      worst = std::max(worst, rel_err(j(i, c), (fp[i] - fm[i]) / (2.0 * step)));
  }
  return worst;
}

}  // namespace detail

// Compares grad / input_jacobian against central differences and returns the
// worst relative error over all coordinates. f must additionally be callable
// on a plain std::vector<double>.
template <class F>
double check_gradient(F&& f, std::span<const double> x, double step) {
  if (!(step > 0.0)) throw SpecError("check_gradient: step must be > 0");
  using R = std::invoke_result_t<F&, const std::vector<double>&>;
  if constexpr (std::is_same_v<R, double>) {
    return detail::fd_check_scalar(f, x, step);
  } else {
    return detail::fd_check_vector(f, x, step);
  }
}

}  // namespace featpinn

#endif  // FEATPINN_AUTODIFF_HPP
