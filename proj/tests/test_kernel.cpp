#include <doctest.h>

#include <cmath>
#include <numbers>

#include "featpinn/kernel.hpp"
#include "test_util.hpp"

using namespace featpinn;

namespace {

constexpr double kPi = std::numbers::pi;

Box box01(int d) {
  Box b;
  b.lo.assign(static_cast<std::size_t>(d), 0.0);
  b.hi.assign(static_cast<std::size_t>(d), 1.0);
  return b;
}

Matrix random_inputs(std::uint64_t seed, std::size_t n, std::size_t d) {
  Matrix m(n, d);
  m.data = testutil::random_vector(seed, n * d, 0.0, 1.0);
  return m;
}

// Series evaluation of erf, independent of std::erf.
double erf_series(double x) {
  const double z = x;
  double term = z;
  double sum = z;
  for (int n = 1; n < 60; ++n) {
    term *= -z * z / static_cast<double>(n);
    sum += term / (2.0 * n + 1.0);
  }
  return sum * 2.0 / std::sqrt(kPi);
}

}  // namespace

TEST_SUITE_BEGIN("kernel");

TEST_CASE("sym_eig on identity and diagonal matrices") {
  const EigResult id = sym_eig(Matrix::identity(5));
  for (double v : id.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));

  Matrix d(3, 3);
  d(0, 0) = 3.0;
  d(1, 1) = 1.0;
  d(2, 2) = 2.0;
  const EigResult e = sym_eig(d);
  CHECK(e.values[0] == doctest::Approx(3.0));
  CHECK(e.values[1] == doctest::Approx(2.0));
  CHECK(e.values[2] == doctest::Approx(1.0));
}

TEST_CASE("sym_eig reconstructs a random symmetric matrix") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix a(20, 20);
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = i; j < 20; ++j) {
      a(i, j) = g(rng);
      a(j, i) = a(i, j);
    }
  const EigResult e = sym_eig(a);
  Matrix lam(20, 20);
  for (std::size_t i = 0; i < 20; ++i) lam(i, i) = e.values[i];
  const Matrix rec = matmul(matmul(e.vectors, lam), transpose(e.vectors));
  double diff = 0.0;
  for (std::size_t i = 0; i < rec.data.size(); ++i)
    diff += (rec.data[i] - a.data[i]) * (rec.data[i] - a.data[i]);
  CHECK(std::sqrt(diff) / frobenius_norm(a) < 1e-9);
  for (std::size_t i = 1; i < e.values.size(); ++i) CHECK(e.values[i - 1] >= e.values[i]);
}

TEST_CASE("sym_eig rejects asymmetric input") {
  Matrix a(2, 2);
  a(0, 1) = 1.0;
  a(1, 0) = 0.5;
  CHECK_THROWS_AS(sym_eig(a), Error);
}

TEST_CASE("gauss_hermite integrates gaussian moments") {
  std::vector<double> t, w;
  gauss_hermite(32, t, w);
  auto moment = [&](int p) {
    double acc = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i)
      acc += w[i] * std::pow(std::numbers::sqrt2 * t[i], p);
    return acc / std::sqrt(kPi);
  };
  CHECK(moment(0) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(std::abs(moment(1)) < 1e-13);
  CHECK(moment(2) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(moment(4) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(moment(6) == doctest::Approx(15.0).epsilon(1e-11));
}

TEST_CASE("gauss-hermite and monte carlo agree on deep-layer tanh kernels") {
  const Matrix inputs = random_inputs(8, 4, 2);
  FeatureMapSpec s;
  s.family = Family::RandomFourier;
  s.m = 16;
  s.sigma = 0.5;
  s.seed = 2;
  FeatureMap map(s, box01(2));

  GaussianExpectationRule gh;
  gh.order = 32;
  GaussianExpectationRule mc;
  mc.method = GaussianExpectationRule::Method::MonteCarlo;
  mc.mc_samples = 1000000;
  mc.seed = 77;

  const CkResult a = ck_propagate(inputs, map, 2, gh);
  const CkResult b = ck_propagate(inputs, map, 2, mc);
  CHECK(max_abs_diff(a.sigma[2].entries, b.sigma[2].entries) < 1e-3);
}

TEST_CASE("sigma0 examples") {
  Matrix inputs(2, 2);
  inputs(1, 0) = 1.0;
  FeatureMapSpec s;
  s.family = Family::Identity;
  s.m = 1;
  FeatureMap map(s, box01(2));
  GaussianExpectationRule rule;
  const CkResult r = ck_propagate(inputs, map, 1, rule);
  CHECK(r.sigma[0].entries(0, 0) == 1.0);
  CHECK(r.sigma[0].entries(1, 1) == 2.0);
}

TEST_CASE("random fourier sigma1 diagonal matches the composed-kernel closed form") {
  const Matrix inputs = random_inputs(4, 5, 2);
  FeatureMapSpec s;
  s.family = Family::RandomFourier;
  s.m = 8;
  s.sigma = 1.3;
  s.seed = 6;
  FeatureMap map(s, box01(2));
  GaussianExpectationRule rule;
  const CkResult r = ck_propagate(inputs, map, 1, rule);
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(r.sigma[1].entries(i, i) == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("random fourier sigma1 equals a fresh-draw monte carlo average") {
  const Matrix inputs = random_inputs(14, 4, 2);
  FeatureMapSpec s;
  s.family = Family::RandomFourier;
  s.m = 32;
  s.sigma = 0.8;
  FeatureMap map(s, box01(2));
  GaussianExpectationRule rule;
  Matrix s1, s1dot;
  feature_layer_kernels(inputs, map, rule, s1, s1dot);
  const long draws = 4000;
  Matrix acc(4, 4);
  for (long r = 0; r < draws; ++r) {
    FeatureMapSpec sr = s;
    sr.seed = 1000 + static_cast<std::uint64_t>(r);
    FeatureMap fm(sr, box01(2));
    std::vector<std::vector<double>> feats;
    for (std::size_t i = 0; i < 4; ++i) {
      const std::vector<double> x = {inputs(i, 0), inputs(i, 1)};
      feats.push_back(fm.eval_initial(x));
    }
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        double dot = 0.0;
        for (std::size_t k = 0; k < feats[i].size(); ++k) dot += feats[i][k] * feats[j][k];
        acc(i, j) += dot / static_cast<double>(feats[i].size());
      }
  }
  for (double& v : acc.data) v /= static_cast<double>(draws);
  CHECK(max_abs_diff(acc, s1) < 5e-3);
}

TEST_CASE("identity-activation telescoping") {
  const Matrix inputs = random_inputs(10, 5, 2);
  FeatureMapSpec s;
  s.family = Family::Identity;
  s.m = 1;
  FeatureMap map(s, box01(2));
  GaussianExpectationRule rule;
  const NtkResult r = ntk_propagate(inputs, map, 4, rule, Activation::Identity);
  Matrix expect = r.sigma[0].entries;
  for (int l = 1; l <= 4; ++l)
    for (std::size_t i = 0; i < expect.data.size(); ++i)
      expect.data[i] += r.sigma[static_cast<std::size_t>(l)].entries.data[i];
  CHECK(max_abs_diff(expect, r.theta[4].entries) < 1e-10);
}

TEST_CASE("depth-1 recursion matches its pieces") {
  const Matrix inputs = random_inputs(11, 4, 2);
  FeatureMapSpec s;
  s.family = Family::RandomFourier;
  s.m = 8;
  s.sigma = 0.7;
  s.seed = 3;
  FeatureMap map(s, box01(2));
  GaussianExpectationRule rule;
  const NtkResult r = ntk_propagate(inputs, map, 1, rule);
  Matrix expect(4, 4);
  for (std::size_t i = 0; i < expect.data.size(); ++i)
    expect.data[i] = r.theta[0].entries.data[i] * r.sigma_dot[1].entries.data[i] +
                     r.sigma[1].entries.data[i];
  CHECK(max_abs_diff(expect, r.theta[1].entries) == 0.0);
  CHECK(r.theta[1].kind == KernelKind::NTK);
}

TEST_CASE("empirical ntk gram identity with fixed features") {
  // Random Fourier features carry no trainable parameters; with biases off,
  // the output weights are the only parameters and the Jacobian is phi/sqrt(d).
  FeatureMapSpec s;
  s.family = Family::RandomFourier;
  s.m = 2;
  s.sigma = 0.6;
  s.seed = 9;
  FeatureMap map(s, box01(1));
  MlpShape shape;
  shape.widths = {4, 1};
  shape.with_bias = false;
  PinnModel model(std::move(map), shape, 0);
  const std::vector<double> theta = {0.3, -0.8, 0.25, 1.4};
  Matrix inputs(3, 1);
  inputs(0, 0) = 0.1;
  inputs(1, 0) = 0.55;
  inputs(2, 0) = 0.95;
  const KernelMatrix k = empirical_ntk(model, theta, inputs);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      const std::vector<double> xi = {inputs(i, 0)};
      const std::vector<double> xj = {inputs(j, 0)};
      const auto fi = model.map.eval_initial(xi);
      const auto fj = model.map.eval_initial(xj);
      double dot = 0.0;
      for (std::size_t c = 0; c < fi.size(); ++c) dot += fi[c] * fj[c];
      CHECK(k.entries(i, j) == doctest::Approx(dot / 4.0).epsilon(1e-12));
    }
  CHECK(k.kind == KernelKind::Empirical);
}

TEST_CASE("spectral decay prediction basics") {
  const Matrix inputs = random_inputs(21, 8, 1);
  FeatureMapSpec s;
  s.family = Family::RandomFourier;
  s.m = 8;
  s.sigma = 0.4;
  s.seed = 5;
  FeatureMap map(s, box01(1));
  GaussianExpectationRule rule;
  const NtkResult ntk = ntk_propagate(inputs, map, 3, rule);
  const auto targets = testutil::random_vector(31, 8);
  const std::vector<double> times = {0.0, 0.5, 1.0};
  const DecayPrediction p = spectral_decay_predict(ntk.theta.back(), targets, times);

  const EigResult eig = sym_eig(ntk.theta.back().entries);
  for (std::size_t i = 0; i < 8; ++i) {
    double proj = 0.0;
    for (std::size_t r = 0; r < 8; ++r) proj += eig.vectors(r, i) * targets[r];
    CHECK(p.modes(i, 0) == doctest::Approx(proj).epsilon(1e-9));
  }

  Matrix rank1(3, 3);
  const std::vector<double> v = {1.0, -2.0, 0.5};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) rank1(i, j) = v[i] * v[j];
  const KernelMatrix km = KernelMatrix::checked(rank1, 0, KernelKind::NTK);
  const std::vector<double> y = {0.3, 0.7, -0.2};
  const DecayPrediction q = spectral_decay_predict(km, y, times);
  for (std::size_t i = 1; i < 3; ++i)
    CHECK(q.modes(i, 0) == doctest::Approx(q.modes(i, 2)).epsilon(1e-12));

  const std::vector<double> wrong = {1.0};
  CHECK_THROWS_AS(spectral_decay_predict(km, wrong, times), SpecError);
}

TEST_CASE("spectral decay matches an explicit gradient-flow simulation") {
  const Matrix inputs = random_inputs(41, 8, 1);
  FeatureMapSpec s;
  s.family = Family::RandomFourier;
  s.m = 8;
  s.sigma = 0.9;
  s.seed = 8;
  FeatureMap map(s, box01(1));
  GaussianExpectationRule rule;
  NtkResult ntk = ntk_propagate(inputs, map, 3, rule);
  EigResult eig = sym_eig(ntk.theta.back().entries);
  Matrix k = ntk.theta.back().entries;
  for (double& e : k.data) e /= eig.values.front();
  const KernelMatrix km = KernelMatrix::checked(k, 3, KernelKind::NTK);

  const auto y = testutil::random_vector(51, 8);
  const std::vector<double> times = {1.0};
  const DecayPrediction pred = spectral_decay_predict(km, y, times);

  std::vector<double> eps(y.begin(), y.end());
  const double h = 1e-4;
  for (int step = 0; step < 10000; ++step) {
    const std::vector<double> keps = matvec(km.entries, eps);
    for (std::size_t i = 0; i < eps.size(); ++i) eps[i] -= h * keps[i];
  }
  const EigResult eg = sym_eig(km.entries);
  for (std::size_t i = 0; i < 8; ++i) {
    double sim_proj = 0.0;
    for (std::size_t r = 0; r < 8; ++r) sim_proj += eg.vectors(r, i) * eps[r];
    const double rel =
        std::abs(pred.modes(i, 0) - sim_proj) / std::max(std::abs(sim_proj), 1e-8);
    CHECK(rel < 0.01);
  }
}

TEST_CASE("fourier composed kernel") {
  const std::vector<double> amps = {0.5, 1.5, 0.25};
  Matrix freqs(3, 2);
  freqs.data = testutil::random_vector(61, 6);
  const std::vector<double> x = {0.3, 0.4};

  double sum_a2 = 0.0;
  for (double a : amps) sum_a2 += a * a;
  CHECK(fourier_composed_kernel(amps, freqs, x, x) == doctest::Approx(sum_a2).epsilon(1e-13));

  const std::vector<double> a1 = {1.0};
  Matrix f1(1, 1);
  f1(0, 0) = 1.0;
  const std::vector<double> x1 = {0.5};
  const std::vector<double> x2 = {0.25};
  CHECK(std::abs(fourier_composed_kernel(a1, f1, x1, x2)) < 1e-15);

  const std::vector<double> shift = {0.123, -0.456};
  const std::vector<double> xp = {0.9, 0.1};
  std::vector<double> xs = x, xps = xp;
  for (std::size_t c = 0; c < 2; ++c) {
    xs[c] += shift[c];
    xps[c] += shift[c];
  }
  CHECK(fourier_composed_kernel(amps, freqs, x, xp) ==
        doctest::Approx(fourier_composed_kernel(amps, freqs, xs, xps)).epsilon(1e-12));

  auto phi = [&](const std::vector<double>& p) {
    std::vector<double> out;
    for (std::size_t k = 0; k < amps.size(); ++k) {
      double phase = 0.0;
      for (std::size_t c = 0; c < 2; ++c) phase += freqs(k, c) * p[c];
      out.push_back(amps[k] * std::cos(2.0 * kPi * phase));
      out.push_back(amps[k] * std::sin(2.0 * kPi * phase));
    }
    return out;
  };
  const auto fx = phi(x);
  const auto fxp = phi(xp);
  double dot = 0.0;
  for (std::size_t c = 0; c < fx.size(); ++c) dot += fx[c] * fxp[c];
  CHECK(fourier_composed_kernel(amps, freqs, x, xp) == doctest::Approx(dot).epsilon(1e-12));
}

TEST_CASE("surjectivity estimate against the erf bound") {
  CHECK(surjectivity_estimate(1e-9, 1000, 1).analytic_bound ==
        doctest::Approx(0.5).epsilon(1e-12));

  const SurjectivityEstimate e1 = surjectivity_estimate(1.0, 100000, 7);
  CHECK(e1.analytic_bound ==
        doctest::Approx(0.5 * erf_series(1.0 / std::sqrt(2.0))).epsilon(1e-10));
  CHECK(e1.analytic_bound == doctest::Approx(0.3414).epsilon(1e-3));

  for (double sigma : {0.5, 1.0, 2.0}) {
    const SurjectivityEstimate e = surjectivity_estimate(sigma, 100000, 11);
    const double p = e.mc_probability;
    const double se = std::sqrt(p * (1.0 - p) / 100000.0);
    CHECK(e.mc_probability <= e.analytic_bound + 3.0 * se);
  }
  CHECK_THROWS_AS(surjectivity_estimate(0.0, 10000, 1), SpecError);
  CHECK_THROWS_AS(surjectivity_estimate(1.0, 10, 1), SpecError);
}

TEST_CASE("kernel matrices are validated on construction") {
  Matrix bad(2, 2);
  bad(0, 1) = 1.0;
  bad(1, 0) = 0.5;
  CHECK_THROWS_AS(KernelMatrix::checked(bad, 0, KernelKind::CK), NumericError);

  Matrix notpsd(2, 2);
  notpsd(0, 0) = 1.0;
  notpsd(1, 1) = 1.0;
  notpsd(0, 1) = 2.0;
  notpsd(1, 0) = 2.0;
  CHECK_THROWS_AS(KernelMatrix::checked(notpsd, 0, KernelKind::NTK), NumericError);
  CHECK_NOTHROW(KernelMatrix::checked(notpsd, 0, KernelKind::CKDerivative));
}

TEST_SUITE_END();
