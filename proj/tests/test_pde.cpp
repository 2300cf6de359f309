#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "featpinn/pde.hpp"
#include "test_util.hpp"

using namespace featpinn;

namespace {
constexpr double kPi = std::numbers::pi;

FieldClosure zero_field(int n_out) {
  return [n_out](std::span<const JetV<double>> xs) {
    std::vector<JetV<double>> out(static_cast<std::size_t>(n_out));
    for (auto& o : out) o = 0.0 * xs[0];
    return out;
  };
}
}  // namespace

TEST_SUITE_BEGIN("pde");

TEST_CASE("registry lists and constructs every problem") {
  for (const auto& name : problem_names()) {
    auto p = make_problem(name);
    CHECK(p->name() == name);
  }
  CHECK_THROWS_AS(make_problem("nonexistent"), ConfigError);
}

TEST_CASE("self-consistency gate: analytical residuals vanish") {
  // make_problem already runs the gate; assert the values directly as well.
  for (const auto& name : {"wave", "diffusion"}) {
    auto p = make_problem(name);
    std::mt19937_64 rng = make_rng(5, "gate_test");
    Matrix pts;
    p->sample_interior(30, rng, pts);
    std::vector<double> x(pts.cols);
    for (std::size_t i = 0; i < pts.rows; ++i) {
      for (std::size_t c = 0; c < pts.cols; ++c) x[c] = pts(i, c);
      const auto r = residual(
          *p, [&](std::span<const JetV<double>> xs) { return p->analytical_jets(xs); }, x);
      CHECK(std::abs(r[0]) < 1e-8);
    }
  }
  ProblemOptions opt;
  opt.dim = 2;
  auto nd = make_problem("poisson_nd", opt);
  const std::vector<double> x = {0.3, 0.8};
  const auto r = residual(
      *nd, [&](std::span<const JetV<double>> xs) { return nd->analytical_jets(xs); }, x);
  CHECK(std::abs(r[0]) < 1e-8);
}

TEST_CASE("burgers residual of the zero field vanishes") {
  auto p = make_problem("burgers");
  const std::vector<double> x = {0.2, 0.5};
  const auto r = residual(*p, zero_field(1), x);
  CHECK(r[0] == 0.0);
}

TEST_CASE("heat reference satisfies the heat operator") {
  auto p = make_problem("heat");
  auto closure = [](std::span<const JetV<double>> xs) {
    const double lam =
        (20.0 * kPi) * (20.0 * kPi) / ((500.0 * kPi) * (500.0 * kPi)) + 1.0;
    std::vector<JetV<double>> out;
    out.push_back(sin(xs[0] * (20.0 * kPi)) * sin(xs[1] * kPi) * exp(xs[2] * (-lam)));
    return out;
  };
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto v = testutil::random_vector(s, 3, 0.05, 0.95);
    v[2] *= 5.0;
    const auto r = residual(*p, closure, v);
    CHECK(std::abs(r[0]) < 1e-7);
  }
}

TEST_CASE("residual outside the domain is rejected") {
  auto p = make_problem("wave");
  const std::vector<double> outside = {1.5, 0.5};
  CHECK_THROWS_AS(residual(*p, zero_field(1), outside), DomainError);
  auto holes = make_problem("poisson2d");
  const std::vector<double> in_hole = {0.3, 0.3};
  CHECK_THROWS_AS(residual(*holes, zero_field(1), in_hole), DomainError);
}

TEST_CASE("analytical solution values") {
  auto wave = make_problem("wave");
  const std::vector<double> w = {0.5, 0.0};
  CHECK(wave->analytical(w) == doctest::Approx(1.0).epsilon(1e-12));

  ProblemOptions opt;
  opt.dim = 2;
  auto nd = make_problem("poisson_nd", opt);
  const std::vector<double> ones = {1.0, 1.0};
  CHECK(nd->analytical(ones) == doctest::Approx(2.0).epsilon(1e-12));

  auto diff = make_problem("diffusion");
  const std::vector<double> d0 = {0.0, 0.37};
  CHECK(std::abs(diff->analytical(d0)) < 1e-15);

  auto heat = make_problem("heat");
  const std::vector<double> h = {0.5, 0.5, 1.0};
  CHECK_THROWS_AS(heat->analytical(h), UnsupportedError);
  CHECK_THROWS_AS(make_problem("burgers")->analytical(d0), UnsupportedError);
}

TEST_CASE("poisson2d sampler rejects the holes") {
  auto p = make_problem("poisson2d");
  const SampleBatch b = sample_domain(*p, 1000, 0, 500, 11);
  CHECK(b.collocation.rows == 1000);
  const double centers[4][2] = {{0.3, 0.3}, {-0.3, 0.3}, {0.3, -0.3}, {-0.3, -0.3}};
  for (std::size_t i = 0; i < b.collocation.rows; ++i)
    for (const auto& c : centers) {
      const double dx = b.collocation(i, 0) - c[0];
      const double dy = b.collocation(i, 1) - c[1];
      CHECK(std::sqrt(dx * dx + dy * dy) > 0.1);
    }
}

TEST_CASE("diffusion boundary sampler stays on the walls") {
  auto p = make_problem("diffusion");
  const SampleBatch b = sample_domain(*p, 0, 0, 200, 3);
  for (const auto& cp : b.bc) CHECK((cp.x[0] == -1.0 || cp.x[0] == 1.0));
}

TEST_CASE("sampling is deterministic in the seed and counts match") {
  auto p = make_problem("wave");
  const SampleBatch a = sample_domain(*p, 50, 20, 30, 123);
  const SampleBatch b = sample_domain(*p, 50, 20, 30, 123);
  CHECK(a.collocation.data == b.collocation.data);
  CHECK(a.ic.size() == 20);
  CHECK(a.bc.size() == 30);
  for (std::size_t i = 0; i < a.ic.size(); ++i) CHECK(a.ic[i].x == b.ic[i].x);
  CHECK_THROWS_AS(sample_domain(*p, -1, 0, 0, 1), SpecError);
}

TEST_CASE("wave initial conditions carry the Neumann term") {
  auto p = make_problem("wave");
  const SampleBatch b = sample_domain(*p, 0, 10, 0, 4);
  for (const auto& cp : b.ic) {
    REQUIRE(cp.terms.size() == 2);
    CHECK(cp.terms[0].kind == CondKind::Value);
    CHECK(cp.terms[1].kind == CondKind::TimeDerivative);
    CHECK(cp.terms[1].target == 0.0);
    CHECK(cp.x[1] == 0.0);
  }
}

TEST_CASE("interior sample means sit at the domain midpoints") {
  auto p = make_problem("diffusion");
  std::mt19937_64 rng = make_rng(2, "means");
  Matrix pts;
  p->sample_interior(4000, rng, pts);
  for (std::size_t c = 0; c < pts.cols; ++c) {
    double mean = 0.0;
    for (std::size_t i = 0; i < pts.rows; ++i) mean += pts(i, c);
    mean /= static_cast<double>(pts.rows);
    const double se = p->domain().width(c) / std::sqrt(12.0 * 4000.0);
    CHECK(std::abs(mean - p->domain().mid(c)) < 4.0 * se);
  }
}

TEST_CASE("uneven mode scales collocation counts by 1/D") {
  ProblemOptions opt;
  opt.dim = 8;
  opt.uneven = true;
  auto p = make_problem("poisson_nd", opt);
  const SampleBatch b = sample_domain(*p, 800, 0, 10, 5);
  CHECK(b.collocation.rows == 100);
}

TEST_CASE("inverse burgers operator equals forward burgers at the true coefficients") {
  auto fwd = make_problem("burgers");
  auto inv = make_problem("inverse_burgers");
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    FieldProbe<double> probe;
    probe.n_out = 1;
    probe.dims = 2;
    probe.u = {u(rng)};
    probe.du = {u(rng), u(rng)};
    probe.d2u = {u(rng), u(rng)};
    const std::vector<double> coeffs = {1.0, 0.01 / kPi};
    probe.coeffs = coeffs;
    const std::vector<double> x = {u(rng), 0.5 * (u(rng) + 1.0)};
    std::vector<double> rf, ri;
    fwd->residual_probe(probe, x, rf);
    inv->residual_probe(probe, x, ri);
    CHECK(rf[0] == doctest::Approx(ri[0]).epsilon(1e-15));
  }
}

TEST_CASE("lorenz right-hand side and integration") {
  const std::array<double, 3> coeffs = {10.0, 15.0, 8.0 / 3.0};
  const std::array<double, 3> x0 = {0.0, 1.0, 1.05};
  const auto rhs = lorenz_rhs(coeffs, x0);
  CHECK(rhs[0] == doctest::Approx(10.0));
  CHECK(rhs[1] == doctest::Approx(-1.0));
  CHECK(rhs[2] == doctest::Approx(-2.8));

  const Matrix traj = integrate_lorenz(coeffs, x0, 0.01, 10);
  CHECK(traj(0, 0) == 0.0);
  CHECK(traj(0, 1) == 1.0);
  CHECK(traj(0, 2) == 1.05);
  CHECK(traj.rows == 11);
  CHECK_THROWS_AS(integrate_lorenz(coeffs, x0, 0.0, 4), SpecError);
}

TEST_CASE("rk4 self-convergence is fourth order") {
  const std::array<double, 3> coeffs = {10.0, 15.0, 8.0 / 3.0};
  const std::array<double, 3> x0 = {0.0, 1.0, 1.05};
  const double t_end = 1.0;
  auto endpoint = [&](double dt) {
    const int steps = static_cast<int>(std::round(t_end / dt));
    const Matrix tr = integrate_lorenz(coeffs, x0, dt, steps);
    return std::array<double, 3>{tr(tr.rows - 1, 0), tr(tr.rows - 1, 1), tr(tr.rows - 1, 2)};
  };
  const auto ref = endpoint(1.0 / 1024.0);
  auto err = [&](double dt) {
    const auto e = endpoint(dt);
    double s = 0.0;
    for (int c = 0; c < 3; ++c) s += (e[static_cast<std::size_t>(c)] - ref[static_cast<std::size_t>(c)]) *
                                     (e[static_cast<std::size_t>(c)] - ref[static_cast<std::size_t>(c)]);
    return std::sqrt(s);
  };
  const double e1 = err(1.0 / 64.0);
  const double e2 = err(1.0 / 128.0);
  const double ratio = e1 / e2;
  CHECK(ratio > 12.0);  // ~16 for a 4th-order method
  CHECK(ratio < 20.0);
}

TEST_CASE("burgers reference has the right initial and boundary behavior") {
  const double nu = 0.01 / kPi;
  for (double x : {-0.7, -0.1, 0.4, 0.9})
    CHECK(burgers_reference(x, 0.0, nu) == doctest::Approx(-std::sin(kPi * x)).epsilon(1e-12));
  for (double t : {0.2, 0.5, 0.9}) {
    CHECK(std::abs(burgers_reference(-1.0, t, nu)) < 1e-6);
    CHECK(std::abs(burgers_reference(1.0, t, nu)) < 1e-6);
  }
  // Odd symmetry of the benchmark solution, up to quadrature accuracy.
  CHECK(burgers_reference(0.3, 0.4, nu) ==
        doctest::Approx(-burgers_reference(-0.3, 0.4, nu)).epsilon(1e-6));
}

TEST_CASE("reference grid loads and round trips") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "fp_refgrid.csv").string();
  {
    std::ofstream f(path);
    f << "dim0,dim1,u0\n";
    f << "0.0,0.0,1.5\n";
    f << "0.5,1.0,-2.25\n";
  }
  const ReferenceGrid g = load_reference_grid(path, 2, 1);
  CHECK(g.points.rows == 2);
  CHECK(g.points(1, 1) == 1.0);
  CHECK(g.values(1, 0) == -2.25);
  CHECK_THROWS_AS(load_reference_grid(path, 3, 1), Error);
  std::filesystem::remove(path);

  auto p = make_problem("burgers");
  CHECK_THROWS_AS(p->reference(), UnsupportedError);
}

TEST_CASE("steady ns boundary conditions label the back-step edges") {
  auto p = make_problem("steady_ns");
  const SampleBatch b = sample_domain(*p, 0, 0, 400, 21);
  int inlet = 0, outlet = 0, wall = 0;
  for (const auto& cp : b.bc) {
    if (cp.x[0] == 0.0) {
      ++inlet;
      REQUIRE(cp.terms.size() == 2);
      CHECK(cp.terms[0].target == doctest::Approx(4.0 * cp.x[1] * (1.0 - cp.x[1])));
    } else if (cp.x[0] == 4.0) {
      ++outlet;
      REQUIRE(cp.terms.size() == 1);
      CHECK(cp.terms[0].component == 2);  // pressure pinned at the outlet
    } else {
      ++wall;
      REQUIRE(cp.terms.size() == 2);
      CHECK(cp.terms[0].target == 0.0);
      CHECK(cp.terms[1].target == 0.0);
    }
  }
  CHECK(inlet > 0);
  CHECK(outlet > 0);
  CHECK(wall > 0);
  // The removed block is excluded from the interior.
  const SampleBatch bi = sample_domain(*p, 500, 0, 0, 22);
  for (std::size_t i = 0; i < bi.collocation.rows; ++i)
    CHECK(!(bi.collocation(i, 0) < 2.0 && bi.collocation(i, 1) > 1.0));
}

TEST_CASE("requesting ic points on problems without initial conditions fails") {
  auto p = make_problem("poisson2d");
  CHECK_THROWS_AS(sample_domain(*p, 10, 5, 10, 1), SpecError);
  auto lorenz = make_problem("inverse_lorenz");
  CHECK_THROWS_AS(sample_domain(*lorenz, 10, 0, 5, 1), SpecError);
  const SampleBatch ok = sample_domain(*lorenz, 10, 0, 0, 1);
  CHECK(ok.collocation.rows == 10);
}

TEST_SUITE_END();
