#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <optional>

#include "featpinn/train.hpp"
#include "test_util.hpp"

using namespace featpinn;

namespace {

constexpr double kPi = std::numbers::pi;

TrainConfig small_config(const std::string& problem, Family family, int dims, int outs) {
  TrainConfig c;
  c.problem = problem;
  c.feature_map.family = family;
  c.feature_map.m = 4;
  c.feature_map.sigma = 0.8;
  c.feature_map.p_terms = 2;
  c.feature_map.xi = 1.5;
  c.widths = {dims, 8, 8, outs};
  c.n_r = 4;
  c.n_ic = 3;
  c.n_bc = 3;
  c.adam_steps = 0;
  c.lbfgs_steps = 0;
  c.seed = 7;
  return c;
}

TrainState make_state(const TrainConfig& c, const PdeProblem& problem) {
  FeatureMapSpec fs = c.feature_map;
  fs.seed = hash_tag(c.seed, "fm_realize", fs.seed);
  FeatureMap map(fs, problem.domain());
  MlpShape shape;
  shape.widths = c.widths;
  shape.widths.front() = map.output_dim();
  PinnModel model(std::move(map), shape, c.inverse.enabled ? problem.n_coeffs() : 0);
  TrainState st(std::move(model), {});
  st.theta = st.model.init_theta(hash_tag(c.seed, "init"));
  st.adam_m.assign(st.theta.size(), 0.0);
  st.adam_v.assign(st.theta.size(), 0.0);
  return st;
}

}  // namespace

TEST_SUITE_BEGIN("train");

TEST_CASE("l2re examples") {
  const std::vector<double> t = {1.0, 0.0};
  CHECK(l2re(t, t) == 0.0);
  const std::vector<double> zero = {0.0, 0.0};
  const std::vector<double> truth = {0.6, -0.8};
  CHECK(l2re(zero, truth) == doctest::Approx(1.0));
  const std::vector<double> p = {1.0, 1.0};
  const std::vector<double> q = {1.0, 0.0};
  CHECK(l2re(p, q) == doctest::Approx(1.0));
  CHECK_THROWS_AS(l2re(p, zero), NumericError);
  const std::vector<double> shorter = {1.0};
  CHECK_THROWS_AS(l2re(p, shorter), SpecError);
}

TEST_CASE("loss of the analytical wave field vanishes") {
  auto p = make_problem("wave");
  const SampleBatch batch = sample_domain(*p, 16, 8, 8, 3);
  const Weights w{1.0, 100.0, 100.0, 0.0};
  const LossParts parts = loss_of_field(
      [&](std::span<const JetV<double>> xs) { return p->analytical_jets(xs); }, *p, batch, w);
  CHECK(parts.total < 1e-12);
}

TEST_CASE("single collocation point with residual 3 gives total 9") {
  auto p = make_problem("wave");
  SampleBatch batch;
  batch.collocation = Matrix(1, 2);
  batch.collocation(0, 0) = 0.4;
  batch.collocation(0, 1) = 0.6;
  // u = 1.5 t^2 has u_tt = 3 and u_xx = 0, so the wave residual is exactly 3.
  auto u = [](std::span<const JetV<double>> xs) {
    std::vector<JetV<double>> out;
    out.push_back(xs[1] * xs[1] * 1.5);
    return out;
  };
  const Weights w{1.0, 0.0, 0.0, 0.0};
  const LossParts parts = loss_of_field(u, *p, batch, w);
  CHECK(parts.r == doctest::Approx(9.0).epsilon(1e-12));
  CHECK(parts.total == doctest::Approx(9.0).epsilon(1e-12));
}

TEST_CASE("doubling a weight doubles its part and nothing else") {
  auto p = make_problem("diffusion");
  const TrainConfig c = small_config("diffusion", Family::RbfInt, 2, 1);
  const TrainState st = make_state(c, *p);
  const SampleBatch batch = sample_domain(*p, 8, 4, 4, 5);
  const LossParts a = loss(st, *p, batch, Weights{1.0, 10.0, 10.0, 0.0});
  const LossParts b = loss(st, *p, batch, Weights{1.0, 10.0, 20.0, 0.0});
  CHECK(a.r == b.r);
  CHECK(a.ic == b.ic);
  CHECK(a.bc == b.bc);
  CHECK(b.total - a.total == doctest::Approx(10.0 * a.bc).epsilon(1e-12));
  // total is exactly the weighted sum, parts are non-negative
  CHECK(a.total == 1.0 * a.r + 10.0 * a.ic + 10.0 * a.bc);
  CHECK(a.r >= 0.0);
  CHECK(a.ic >= 0.0);
  CHECK(a.bc >= 0.0);
}

TEST_CASE("empty batch with positive weight is a config error") {
  auto p = make_problem("diffusion");
  const TrainConfig c = small_config("diffusion", Family::RbfInt, 2, 1);
  const TrainState st = make_state(c, *p);
  const SampleBatch batch = sample_domain(*p, 8, 0, 4, 5);
  CHECK_THROWS_AS(loss(st, *p, batch, Weights{1.0, 100.0, 100.0, 0.0}), SpecError);
  CHECK_NOTHROW(loss(st, *p, batch, Weights{1.0, 0.0, 100.0, 0.0}));
}

TEST_CASE("loss gradient matches finite differences across problems and families") {
  struct Cell {
    const char* problem;
    int dims;
    int outs;
  };
  const std::vector<Cell> problems = {{"wave", 2, 1},           {"diffusion", 2, 1},
                                      {"heat", 3, 1},           {"poisson2d", 2, 1},
                                      {"burgers", 2, 1},        {"steady_ns", 2, 3},
                                      {"poisson_nd", 2, 1},     {"inverse_burgers", 2, 1},
                                      {"inverse_lorenz", 1, 3}};
  const std::vector<Family> families = {
      Family::Identity,      Family::BasicEncoding,   Family::PositionalEncoding,
      Family::RandomFourier, Family::Sinusoidal,      Family::ComplexTriangle,
      Family::ComplexGaussian, Family::RbfInt,        Family::RbfCompact,
      Family::RbfPoly,       Family::RbfSurjective};
  for (const auto& cell : problems) {
    auto p = make_problem(cell.problem);
    const bool has_ic = p->has_time() && std::string(cell.problem) != "inverse_lorenz";
    const bool has_bc = std::string(cell.problem) != "inverse_lorenz";
    for (Family fam : families) {
      TrainConfig c = small_config(cell.problem, fam, cell.dims, cell.outs);
      c.inverse.enabled = std::string(cell.problem).rfind("inverse", 0) == 0;
      c.inverse.data_points = 3;
      TrainState st = make_state(c, *p);
      const SampleBatch batch = sample_domain(*p, 3, has_ic ? 2 : 0, has_bc ? 2 : 0, 11);
      std::optional<DataSet> data;
      if (c.inverse.enabled) data = make_inverse_data(*p, c.inverse, 13);
      const Weights w{1.0, has_ic ? 5.0 : 0.0, has_bc ? 5.0 : 0.0,
                      c.inverse.enabled ? 5.0 : 0.0};
      std::vector<double> g;
      loss_and_grad(st, *p, batch, w, data ? &*data : nullptr, g);
      // Central differences on 10 random parameter indices.
      std::mt19937_64 rng = make_rng(17, cell.problem, static_cast<std::uint64_t>(fam));
      std::uniform_int_distribution<std::size_t> pick(0, st.theta.size() - 1);
      const double h = 1e-6;
      double worst = 0.0;
      for (int trial = 0; trial < 10; ++trial) {
        const std::size_t i = pick(rng);
        TrainState plus = st;
        plus.theta[i] += h;
        TrainState minus = st;
        minus.theta[i] -= h;
        const double fd = (loss(plus, *p, batch, w, data ? &*data : nullptr).total -
                           loss(minus, *p, batch, w, data ? &*data : nullptr).total) /
                          (2.0 * h);
        worst = std::max(worst, std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1.0}));
      }
      const std::string label = std::string(cell.problem) + " x " + family_name(fam);
      CHECK_MESSAGE(worst < 1e-5, label);
    }
  }
}

TEST_CASE("inverse coefficient gradients are nonzero with an active data term") {
  auto p = make_problem("inverse_lorenz");
  TrainConfig c = small_config("inverse_lorenz", Family::RbfInt, 1, 3);
  c.inverse.enabled = true;
  c.inverse.data_points = 5;
  TrainState st = make_state(c, *p);
  const SampleBatch batch = sample_domain(*p, 6, 0, 0, 2);
  const DataSet data = make_inverse_data(*p, c.inverse, 3);
  std::vector<double> g;
  loss_and_grad(st, *p, batch, Weights{1.0, 0.0, 0.0, 10.0}, &data, g);
  const std::size_t coeff0 = st.model.n_net() + st.model.n_fm();
  double norm = 0.0;
  for (std::size_t i = coeff0; i < st.theta.size(); ++i) norm += g[i] * g[i];
  CHECK(norm > 0.0);
}

TEST_CASE("adam oracle behavior") {
  // zero gradient leaves parameters unchanged
  std::vector<double> theta = {0.4, -0.2};
  std::vector<double> m(2, 0.0), v(2, 0.0);
  const std::vector<double> zero = {0.0, 0.0};
  adam_update(theta, m, v, 1, zero, 0.1);
  CHECK(theta == std::vector<double>{0.4, -0.2});

  // constant gradient: first-step magnitude is about lr
  std::vector<double> t2 = {1.0};
  std::vector<double> m2(1, 0.0), v2(1, 0.0);
  const std::vector<double> g2 = {0.37};
  adam_update(t2, m2, v2, 1, g2, 0.01);
  CHECK(std::abs(1.0 - t2[0]) == doctest::Approx(0.01).epsilon(1e-6));

  // theta^2 from 1 reaches |theta| < 1e-3 in 500 steps at lr = 0.1
  std::vector<double> t3 = {1.0};
  std::vector<double> m3(1, 0.0), v3(1, 0.0);
  for (long t = 1; t <= 500; ++t) {
    const std::vector<double> g = {2.0 * t3[0]};
    adam_update(t3, m3, v3, t, g, 0.1);
  }
  CHECK(std::abs(t3[0]) < 1e-3);
}

TEST_CASE("adam with lr = 0 never changes parameters") {
  auto p = make_problem("diffusion");
  const TrainConfig c = small_config("diffusion", Family::RbfInt, 2, 1);
  TrainState st = make_state(c, *p);
  const auto before = st.theta;
  const SampleBatch batch = sample_domain(*p, 4, 2, 2, 5);
  std::vector<double> g;
  loss_and_grad(st, *p, batch, Weights{1.0, 1.0, 1.0, 0.0}, nullptr, g);
  // lr must be positive in configs; the update itself honors lr = 0 exactly.
  adam_step(st, g, 0.0);
  CHECK(st.theta == before);

  std::vector<double> bad(g.size(), 0.0);
  bad[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(adam_step(st, bad, 0.1), NumericError);
}

TEST_CASE("lbfgs solves a 5-variable convex quadratic") {
  // f(x) = 0.5 x^T A x - b^T x with A symmetric positive definite.
  const Matrix a = [] {
    Matrix m(5, 5);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) m(i, j) = i == j ? 2.0 + static_cast<double>(i) : 0.3;
    return m;
  }();
  const std::vector<double> b = {1.0, -2.0, 0.5, 3.0, -1.0};
  auto vg = [&](std::span<const double> x, std::vector<double>& g) {
    const std::vector<double> ax = matvec(a, x);
    double f = 0.0;
    g.assign(5, 0.0);
    for (std::size_t i = 0; i < 5; ++i) {
      f += 0.5 * x[i] * ax[i] - b[i] * x[i];
      g[i] = ax[i] - b[i];
    }
    return f;
  };
  std::vector<double> x(5, 0.0);
  LbfgsWorkspace ws;
  double gnorm = 1.0;
  int iters = 0;
  for (; iters < 25; ++iters) {
    const LbfgsOutcome out = lbfgs_step(x, ws, vg, 10);
    gnorm = out.grad_norm;
    if (gnorm < 1e-8) break;
  }
  CHECK(gnorm < 1e-8);
  CHECK(iters < 25);
}

TEST_CASE("lbfgs at a stationary point does not move") {
  auto vg = [&](std::span<const double> x, std::vector<double>& g) {
    g.assign(x.size(), 0.0);
    return 5.0;
  };
  std::vector<double> x = {1.0, 2.0};
  LbfgsWorkspace ws;
  const LbfgsOutcome out = lbfgs_step(x, ws, vg, 10);
  CHECK(!out.stalled);
  CHECK(out.grad_norm == 0.0);
  CHECK(x == std::vector<double>{1.0, 2.0});
}

TEST_CASE("lbfgs descent property and stall flag") {
  // Rosenbrock: every accepted step must not increase the loss.
  auto vg = [&](std::span<const double> x, std::vector<double>& g) {
    const double a = 1.0 - x[0];
    const double b = x[1] - x[0] * x[0];
    g.assign(2, 0.0);
    g[0] = -2.0 * a - 400.0 * x[0] * b;
    g[1] = 200.0 * b;
    return a * a + 100.0 * b * b;
  };
  std::vector<double> x = {-1.2, 1.0};
  LbfgsWorkspace ws;
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 50; ++i) {
    const LbfgsOutcome out = lbfgs_step(x, ws, vg, 10);
    CHECK(out.loss <= prev + 1e-15);
    prev = out.loss;
  }

  // Inconsistent closure (flat value, nonzero gradient): the Armijo search
  // cannot succeed and must flag a stall without moving the iterate.
  auto flat = [&](std::span<const double>, std::vector<double>& g) {
    g.assign(1, 1.0);
    return 0.0;
  };
  std::vector<double> y = {0.7};
  LbfgsWorkspace ws2;
  const LbfgsOutcome out = lbfgs_step(y, ws2, flat, 10);
  CHECK(out.stalled);
  CHECK(y[0] == 0.7);
}

TEST_CASE("train with zero steps reports initialization metrics") {
  TrainConfig c = small_config("diffusion", Family::RbfInt, 2, 1);
  c.lambda_ic = 100.0;
  c.lambda_bc = 100.0;
  const TrainResult r = train(c);
  CHECK(r.report.curves.empty());
  CHECK(std::isfinite(r.report.l2re));
  CHECK(r.report.final_loss.total > 0.0);

  // Metrics equal a by-hand evaluation at the initial parameters.
  auto p = make_problem("diffusion");
  const TrainState st = make_state(c, *p);
  CHECK(r.state.theta == st.theta);
}

TEST_CASE("training is deterministic in config and seed") {
  TrainConfig c = small_config("diffusion", Family::RbfPoly, 2, 1);
  c.adam_steps = 12;
  c.lbfgs_steps = 3;
  c.record_every = 4;
  const TrainResult a = train(c);
  const TrainResult b = train(c);
  REQUIRE(a.report.curves.size() == b.report.curves.size());
  for (std::size_t i = 0; i < a.report.curves.size(); ++i) {
    CHECK(a.report.curves[i].step == b.report.curves[i].step);
    CHECK(a.report.curves[i].parts.total == b.report.curves[i].parts.total);
  }
  CHECK(a.report.l2re == b.report.l2re);
  CHECK(a.state.theta == b.state.theta);
}

TEST_CASE("training records curves and writes checkpoints") {
  TrainConfig c = small_config("diffusion", Family::RbfInt, 2, 1);
  c.adam_steps = 10;
  c.record_every = 2;
  c.checkpoint_every = 5;
  c.checkpoint_path =
      (std::filesystem::temp_directory_path() / "fp_train_ckpt.bin").string();
  const TrainResult r = train(c);
  CHECK(r.report.curves.size() == 5);  // steps 0, 2, 4, 6, 8
  const Checkpoint ck = load_checkpoint(c.checkpoint_path);
  CHECK(ck.step == 10);
  std::filesystem::remove(c.checkpoint_path);
}

TEST_CASE("make_inverse_data shapes and noise scaling") {
  auto p = make_problem("inverse_lorenz");
  InverseConfig inv;
  inv.enabled = true;
  inv.data_points = 40;
  const DataSet clean = make_inverse_data(*p, inv, 5);
  CHECK(clean.points.rows == 40);
  CHECK(clean.targets.cols == 3);
  CHECK(clean.points(0, 0) == 0.0);
  CHECK(clean.points(39, 0) == doctest::Approx(3.0));
  CHECK(clean.targets(0, 0) == 0.0);  // x0
  CHECK(clean.targets(0, 1) == 1.0);  // y0

  inv.noise_fraction = 0.005;
  const DataSet noisy = make_inverse_data(*p, inv, 5);
  double max_rel = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    std::vector<double> col(clean.targets.rows);
    for (std::size_t i = 0; i < col.size(); ++i) col[i] = clean.targets(i, c);
    const double sd = std::sqrt(sample_variance(col));
    for (std::size_t i = 0; i < col.size(); ++i)
      max_rel = std::max(max_rel, std::abs(noisy.targets(i, c) - clean.targets(i, c)) / sd);
  }
  CHECK(max_rel > 0.0);
  CHECK(max_rel < 0.005 * 5.0);  // a few noise standard deviations

  auto wave = make_problem("wave");
  CHECK_THROWS_AS(make_inverse_data(*wave, inv, 1), SpecError);
}

TEST_SUITE_END();
