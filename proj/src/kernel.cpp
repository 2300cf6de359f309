#include "featpinn/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "featpinn/autodiff.hpp"

namespace featpinn {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double off_diag_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

}  // namespace

EigResult sym_eig(const Matrix& a0) {
  if (a0.rows != a0.cols) throw SpecError("sym_eig: matrix not square");
  const std::size_t n = a0.rows;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(a0(i, j) - a0(j, i)) > 1e-8)
        throw Error("sym_eig: asymmetric input");

  Matrix a = a0;
  // Work on the exactly symmetric average.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = v;
      a(j, i) = v;
    }
  Matrix v = Matrix::identity(n);
  const double fro = frobenius_norm(a);
  const double tol = std::max(1e-12, 1e-15 * fro);

  for (int sweep = 0; sweep < 200; ++sweep) {
    if (off_diag_norm(a) < tol) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double app = a(p, p);
        const double aqq = a(q, q);
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (i == p || i == q) continue;
          const double aip = a(i, p);
          const double aiq = a(i, q);
          a(i, p) = c * aip - s * aiq;
          a(p, i) = a(i, p);
          a(i, q) = s * aip + c * aiq;
          a(q, i) = a(i, q);
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vip = v(i, p);
          const double viq = v(i, q);
          v(i, p) = c * vip - s * viq;
          v(i, q) = s * vip + c * viq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
  EigResult r;
  r.values.resize(n);
  r.vectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    r.values[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) r.vectors(i, k) = v(i, order[k]);
  }
  return r;
}

KernelMatrix KernelMatrix::checked(Matrix m, int layer, KernelKind kind) {
  if (m.rows != m.cols) throw SpecError("kernel matrix must be square");
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = i + 1; j < m.cols; ++j)
      if (std::abs(m(i, j) - m(j, i)) > 1e-10)
        throw NumericError("kernel matrix not symmetric within 1e-10");
  if (kind == KernelKind::CK || kind == KernelKind::NTK) {
    const EigResult eig = sym_eig(m);
    const double lmax = std::max(std::abs(eig.values.front()), std::abs(eig.values.back()));
    if (eig.values.back() < -1e-8 * std::max(lmax, 1e-30))
      throw NumericError("kernel matrix not positive semi-definite");
  }
  return KernelMatrix{std::move(m), layer, kind};
}

void gauss_hermite(int order, std::vector<double>& nodes, std::vector<double>& weights) {
  if (order < 2) throw SpecError("gauss_hermite: order must be >= 2");
  // Golub-Welsch on the Hermite Jacobi matrix (physicists' weight e^{-t^2}).
  Matrix j(static_cast<std::size_t>(order), static_cast<std::size_t>(order));
  for (int k = 0; k + 1 < order; ++k) {
    const double b = std::sqrt((k + 1) / 2.0);
    j(static_cast<std::size_t>(k), static_cast<std::size_t>(k + 1)) = b;
    j(static_cast<std::size_t>(k + 1), static_cast<std::size_t>(k)) = b;
  }
  const EigResult eig = sym_eig(j);
  nodes.resize(static_cast<std::size_t>(order));
  weights.resize(static_cast<std::size_t>(order));
  const double sqrt_pi = std::sqrt(std::numbers::pi);
  // sym_eig sorts descending; reverse for ascending nodes.
  for (int i = 0; i < order; ++i) {
    const std::size_t k = static_cast<std::size_t>(order - 1 - i);
    nodes[static_cast<std::size_t>(i)] = eig.values[k];
    const double v0 = eig.vectors(0, k);
    weights[static_cast<std::size_t>(i)] = sqrt_pi * v0 * v0;
  }
}

namespace {

enum class Fn { Tanh, DTanh };

inline double eval_fn(Fn f, double x) {
  const double t = std::tanh(x);
  return f == Fn::Tanh ? t : 1.0 - t * t;
}

struct ExpectationContext {
  std::vector<double> gh_nodes;
  std::vector<double> gh_weights;
  std::vector<double> mc_z1;
  std::vector<double> mc_z2;

  explicit ExpectationContext(const GaussianExpectationRule& rule) {
    if (rule.method == GaussianExpectationRule::Method::GaussHermite) {
      gauss_hermite(rule.order, gh_nodes, gh_weights);
    } else {
      std::mt19937_64 rng = make_rng(rule.seed, "bivariate_mc");
      std::normal_distribution<double> g(0.0, 1.0);
      mc_z1.resize(static_cast<std::size_t>(rule.mc_samples));
      mc_z2.resize(static_cast<std::size_t>(rule.mc_samples));
      for (long i = 0; i < rule.mc_samples; ++i) {
        mc_z1[static_cast<std::size_t>(i)] = g(rng);
        mc_z2[static_cast<std::size_t>(i)] = g(rng);
      }
    }
  }

  // E[f(X) g(X')] with (X, X') centered Gaussian, covariance
  // [[s11, s12], [s12, s22]].
  double bivariate(Fn f, Fn g, double s11, double s12, double s22,
                   KernelDiagnostics& diag) const {
    s11 = std::max(s11, 0.0);
    s22 = std::max(s22, 0.0);
    if (s11 < 1e-14 || s22 < 1e-14) {
      const double fa = s11 < 1e-14 ? eval_fn(f, 0.0) : univariate(f, s11);
      const double gb = s22 < 1e-14 ? eval_fn(g, 0.0) : univariate(g, s22);
      return fa * gb;
    }
    double rho = s12 / std::sqrt(s11 * s22);
    if (rho > 1.0 || rho < -1.0) {
      rho = std::clamp(rho, -1.0, 1.0);
      ++diag.correlation_clips;
    }
    const double sx = std::sqrt(s11);
    const double sy = std::sqrt(s22);
    const double c1 = rho;
    const double c2 = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    if (!gh_nodes.empty()) {
      const double inv_pi = 1.0 / std::numbers::pi;
      double acc = 0.0;
      for (std::size_t i = 0; i < gh_nodes.size(); ++i) {
        const double z1 = std::numbers::sqrt2 * gh_nodes[i];
        const double fx = eval_fn(f, sx * z1);
        double inner = 0.0;
        for (std::size_t j = 0; j < gh_nodes.size(); ++j) {
          const double z2 = std::numbers::sqrt2 * gh_nodes[j];
          inner += gh_weights[j] * eval_fn(g, sy * (c1 * z1 + c2 * z2));
        }
        acc += gh_weights[i] * fx * inner;
      }
      return acc * inv_pi;
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < mc_z1.size(); ++i) {
      const double x = sx * mc_z1[i];
      const double y = sy * (c1 * mc_z1[i] + c2 * mc_z2[i]);
      acc += eval_fn(f, x) * eval_fn(g, y);
    }
    return acc / static_cast<double>(mc_z1.size());
  }

  double univariate(Fn f, double s) const {
    if (!gh_nodes.empty()) {
      double acc = 0.0;
      const double sx = std::sqrt(s);
      for (std::size_t i = 0; i < gh_nodes.size(); ++i)
        acc += gh_weights[i] * eval_fn(f, sx * std::numbers::sqrt2 * gh_nodes[i]);
      return acc / std::sqrt(std::numbers::pi);
    }
    double acc = 0.0;
    const double sx = std::sqrt(s);
    for (double z : mc_z1) acc += eval_fn(f, sx * z);
    return acc / static_cast<double>(mc_z1.size());
  }
};

double dot_rows(const Matrix& x, std::size_t i, std::size_t j) {
  double s = 0.0;
  for (std::size_t c = 0; c < x.cols; ++c) s += x(i, c) * x(j, c);
  return s;
}

double sq_dist_rows(const Matrix& x, std::size_t i, std::size_t j) {
  double s = 0.0;
  for (std::size_t c = 0; c < x.cols; ++c) {
    const double d = x(i, c) - x(j, c);
    s += d * d;
  }
  return s;
}

double sq_sum_rows(const Matrix& x, std::size_t i, std::size_t j) {
  double s = 0.0;
  for (std::size_t c = 0; c < x.cols; ++c) {
    const double d = x(i, c) + x(j, c);
    s += d * d;
  }
  return s;
}

// Layer-2+ kernel step: entries E[a(X) a(X')] (+1 added by caller) from the
// previous layer's kernel. Identity activation has the exact closed form.
Matrix activation_kernel(const Matrix& prev, Activation act, Fn fn,
                         const ExpectationContext& ctx, KernelDiagnostics& diag) {
  const std::size_t n = prev.rows;
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double e;
      if (act == Activation::Identity) {
        e = fn == Fn::Tanh ? prev(i, j) : 1.0;
      } else {
        e = ctx.bivariate(fn, fn, prev(i, i), prev(i, j), prev(j, j), diag);
      }
      out(i, j) = e;
      out(j, i) = e;
    }
  }
  return out;
}

}  // namespace

void feature_layer_kernels(const Matrix& inputs, const FeatureMap& map,
                           const GaussianExpectationRule& rule, Matrix& sigma1,
                           Matrix& sigma1_dot) {
  const std::size_t n = inputs.rows;
  const int d = map.input_dim();
  if (static_cast<int>(inputs.cols) != d)
    throw SpecError("feature_layer_kernels: input dimension mismatch");
  sigma1 = Matrix(n, n);
  sigma1_dot = Matrix(n, n);
  const Family family = map.spec().family;
  const double sig = map.spec().sigma;
  const int m = map.spec().m;

  switch (family) {
    case Family::Identity: {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
          sigma1(i, j) = sigma1(j, i) = dot_rows(inputs, i, j) / d;
          sigma1_dot(i, j) = sigma1_dot(j, i) = 1.0;
        }
      return;
    }
    case Family::RandomFourier: {
      // Exact averages over B ~ N(0, I): E[cos(2 pi sigma b . delta)] and the
      // matching gradient kernel, halved for the cos/sin pair normalization.
      const double a = kTwoPi * sig;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
          const double dsq = sq_dist_rows(inputs, i, j);
          const double e = std::exp(-0.5 * a * a * dsq);
          sigma1(i, j) = sigma1(j, i) = 0.5 * e;
          const double g = 0.5 * a * a * (d - a * a * dsq) * e;
          sigma1_dot(i, j) = sigma1_dot(j, i) = g;
        }
      return;
    }
    case Family::Sinusoidal: {
      // sin(2 pi W x + b), W, b standard normal: closed forms through the
      // characteristic function, split over g - g' and g + g'.
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
          const double dsq = sq_dist_rows(inputs, i, j);
          const double ssq = sq_sum_rows(inputs, i, j);
          const double ed = std::exp(-0.5 * kTwoPi * kTwoPi * dsq);
          const double es = std::exp(-0.5 * kTwoPi * kTwoPi * ssq - 2.0);
          sigma1(i, j) = sigma1(j, i) = 0.5 * (ed - es);
          const double gd = (d - kTwoPi * kTwoPi * dsq) * ed;
          const double gs = (d - kTwoPi * kTwoPi * ssq) * es;
          sigma1_dot(i, j) = sigma1_dot(j, i) = 0.5 * kTwoPi * kTwoPi * (gd + gs);
        }
      return;
    }
    case Family::BasicEncoding:
    case Family::PositionalEncoding: {
      // Deterministic encodings: the per-feature average is exact.
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
          double s = 0.0;
          double sd = 0.0;
          for (int t = 0; t < m; ++t) {
            const double freq = family == Family::BasicEncoding
                                    ? kTwoPi
                                    : kTwoPi * std::pow(sig, static_cast<double>(t) / m);
            for (int c = 0; c < d; ++c) {
              const double delta = inputs(i, static_cast<std::size_t>(c)) -
                                   inputs(j, static_cast<std::size_t>(c));
              s += std::cos(freq * delta);
              sd += freq * freq * std::cos(freq * delta);
            }
          }
          const double norm = 1.0 / (2.0 * m * d);
          sigma1(i, j) = sigma1(j, i) = norm * s;
          sigma1_dot(i, j) = sigma1_dot(j, i) = norm * sd;
        }
      return;
    }
    default:
      break;
  }

  // Remaining families: Monte Carlo over independent realizations of the map.
  const long draws = rule.feature_draws;
  const std::size_t dim_out = static_cast<std::size_t>(map.output_dim());
  Matrix s_acc(n, n);
  Matrix g_acc(n, n);
  std::vector<std::vector<double>> feats(n);
  std::vector<std::vector<std::vector<double>>> grads(n);
  for (long r = 0; r < draws; ++r) {
    FeatureMapSpec sp = map.spec();
    sp.seed = hash_tag(rule.seed, "feature_draw", static_cast<std::uint64_t>(r));
    FeatureMap fm(sp, map.domain());
    const std::vector<double> train = fm.initial_trainable();
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<JetV<double>> xj(static_cast<std::size_t>(d));
      for (int c = 0; c < d; ++c)
        xj[static_cast<std::size_t>(c)] =
            jet_input(inputs(i, static_cast<std::size_t>(c)), c, d, 0, 0.0);
      std::vector<JetV<double>> out;
      fm.eval(std::span<const JetV<double>>(xj), std::span<const double>(train), out);
      feats[i].assign(dim_out, 0.0);
      grads[i].assign(dim_out, std::vector<double>(static_cast<std::size_t>(d), 0.0));
      for (std::size_t k = 0; k < dim_out; ++k) {
        feats[i][k] = out[k].v;
        for (int c = 0; c < d; ++c) grads[i][k][static_cast<std::size_t>(c)] = out[k].d1[c];
      }
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        double s = 0.0;
        double g = 0.0;
        for (std::size_t k = 0; k < dim_out; ++k) {
          s += feats[i][k] * feats[j][k];
          for (int c = 0; c < d; ++c)
            g += grads[i][k][static_cast<std::size_t>(c)] * grads[j][k][static_cast<std::size_t>(c)];
        }
        s_acc(i, j) += s;
        g_acc(i, j) += g;
      }
  }
  const double norm = 1.0 / (static_cast<double>(draws) * static_cast<double>(dim_out));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      sigma1(i, j) = sigma1(j, i) = s_acc(i, j) * norm;
      sigma1_dot(i, j) = sigma1_dot(j, i) = g_acc(i, j) * norm;
    }
}

CkResult ck_propagate(const Matrix& inputs, const FeatureMap& map, int depth,
                      const GaussianExpectationRule& rule, Activation activation) {
  rule.validate();
  if (depth < 1) throw SpecError("ck_propagate: depth must be >= 1");
  const std::size_t n = inputs.rows;
  for (double v : inputs.data)
    if (!std::isfinite(v)) throw NumericError("ck_propagate: non-finite input");

  CkResult result;
  Matrix s0(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) s0(i, j) = s0(j, i) = dot_rows(inputs, i, j) + 1.0;
  result.sigma.push_back(KernelMatrix::checked(s0, 0, KernelKind::CK));

  Matrix s1;
  Matrix s1dot_unused;
  feature_layer_kernels(inputs, map, rule, s1, s1dot_unused);
  for (double& v : s1.data) v += 1.0;
  result.sigma.push_back(KernelMatrix::checked(std::move(s1), 1, KernelKind::CK));

  const ExpectationContext ctx(rule);
  for (int l = 2; l <= depth; ++l) {
    Matrix e = activation_kernel(result.sigma.back().entries, activation, Fn::Tanh, ctx,
                                 result.diag);
    for (double& v : e.data) v += 1.0;
    result.sigma.push_back(KernelMatrix::checked(std::move(e), l, KernelKind::CK));
  }
  return result;
}

NtkResult ntk_propagate(const Matrix& inputs, const FeatureMap& map, int depth,
                        const GaussianExpectationRule& rule, Activation activation) {
  rule.validate();
  if (depth < 1) throw SpecError("ntk_propagate: depth must be >= 1");
  const std::size_t n = inputs.rows;

  NtkResult result;
  CkResult ck = ck_propagate(inputs, map, depth, rule, activation);
  result.diag = ck.diag;

  Matrix s1;
  Matrix s1dot;
  feature_layer_kernels(inputs, map, rule, s1, s1dot);

  result.sigma = std::move(ck.sigma);
  result.sigma_dot.push_back(
      KernelMatrix{Matrix(n, n), 0, KernelKind::CKDerivative});  // placeholder at index 0
  result.sigma_dot.push_back(KernelMatrix::checked(std::move(s1dot), 1, KernelKind::CKDerivative));

  const ExpectationContext ctx(rule);
  for (int l = 2; l <= depth; ++l) {
    Matrix e = activation_kernel(result.sigma[static_cast<std::size_t>(l - 1)].entries,
                                 activation, Fn::DTanh, ctx, result.diag);
    result.sigma_dot.push_back(KernelMatrix::checked(std::move(e), l, KernelKind::CKDerivative));
  }

  // Theta^0 = Sigma^0; Theta^l = Theta^{l-1} .* SigmaDot^l + Sigma^l.
  result.theta.push_back(
      KernelMatrix::checked(result.sigma[0].entries, 0, KernelKind::NTK));
  for (int l = 1; l <= depth; ++l) {
    Matrix t(n, n);
    const Matrix& prev = result.theta.back().entries;
    const Matrix& sd = result.sigma_dot[static_cast<std::size_t>(l)].entries;
    const Matrix& s = result.sigma[static_cast<std::size_t>(l)].entries;
    for (std::size_t i = 0; i < n * n; ++i) t.data[i] = prev.data[i] * sd.data[i] + s.data[i];
    result.theta.push_back(KernelMatrix::checked(std::move(t), l, KernelKind::NTK));
  }
  return result;
}

KernelMatrix empirical_ntk(const PinnModel& model, std::span<const double> theta,
                           const Matrix& inputs) {
  if (model.shape.widths.back() != 1)
    throw SpecError("empirical_ntk: scalar-output network required");
  const std::size_t n = inputs.rows;
  std::vector<std::vector<double>> jac(n);
  std::vector<double> x(inputs.cols);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < inputs.cols; ++c) x[c] = inputs(i, c);
    jac[i] = grad(
        [&](const std::vector<Var>& th) {
          std::vector<Var> xs;
          Tape* tape = th[0].tape;
          xs.reserve(x.size());
          for (double xv : x) xs.push_back(tape->constant(xv));
          return model.forward(std::span<const Var>(xs), std::span<const Var>(th))[0];
        },
        theta);
  }
  Matrix k(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < jac[i].size(); ++p) s += jac[i][p] * jac[j][p];
      k(i, j) = s;
      k(j, i) = s;
    }
  return KernelMatrix::checked(std::move(k), model.shape.n_layers(), KernelKind::Empirical);
}

DecayPrediction spectral_decay_predict(const KernelMatrix& ntk, std::span<const double> targets,
                                       std::span<const double> times) {
  const std::size_t n = ntk.entries.rows;
  if (targets.size() != n) throw SpecError("spectral_decay_predict: targets length mismatch");
  const EigResult eig = sym_eig(ntk.entries);
  DecayPrediction p;
  p.eigenvalues = eig.values;
  p.times.assign(times.begin(), times.end());
  p.modes = Matrix(n, times.size());
  p.total = Matrix(n, times.size());
  std::vector<double> proj(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) proj[i] += eig.vectors(k, i) * targets[k];
  for (std::size_t ti = 0; ti < times.size(); ++ti) {
    const double t = times[ti];
    for (std::size_t i = 0; i < n; ++i)
      p.modes(i, ti) = std::exp(-eig.values[i] * t) * proj[i];
    for (std::size_t r = 0; r < n; ++r) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        s += eig.vectors(r, i) * std::exp(-eig.values[i] * t) * proj[i];
      p.total(r, ti) = -s;
    }
  }
  return p;
}

double fourier_composed_kernel(std::span<const double> amplitudes, const Matrix& frequencies,
                               std::span<const double> x, std::span<const double> xp) {
  if (amplitudes.size() != frequencies.rows || x.size() != xp.size() ||
      x.size() != frequencies.cols)
    throw SpecError("fourier_composed_kernel: shape mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < amplitudes.size(); ++k) {
    double phase = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) phase += frequencies(k, c) * (x[c] - xp[c]);
    acc += amplitudes[k] * amplitudes[k] * std::cos(kTwoPi * phase);
  }
  return acc;
}

SurjectivityEstimate surjectivity_estimate(double sigma, long n_samples, std::uint64_t seed) {
  if (!(sigma > 0.0)) throw SpecError("surjectivity_estimate: sigma must be > 0");
  if (n_samples < 1000) throw SpecError("surjectivity_estimate: need n_samples >= 1000");
  std::mt19937_64 rng = make_rng(seed, "surjectivity");
  std::normal_distribution<double> g(0.0, sigma);
  long hits = 0;
  for (long i = 0; i < n_samples; ++i) {
    // sin(2 pi B x) on x in [0, 1] sweeps the argument over [0, 2 pi B];
    // strict monotonicity of sin from 0 requires |B| <= 1/4.
    if (std::abs(g(rng)) <= 0.25) ++hits;
  }
  SurjectivityEstimate e;
  e.mc_probability = static_cast<double>(hits) / static_cast<double>(n_samples);
  e.analytic_bound = 0.5 * std::erf(1.0 / (std::numbers::sqrt2 * sigma));
  return e;
}

}  // namespace featpinn
