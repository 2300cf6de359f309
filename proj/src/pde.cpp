#include "featpinn/pde.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "featpinn/kernel.hpp"

namespace featpinn {

namespace {
constexpr double kPi = std::numbers::pi;
}

// --- base samplers -----------------------------------------------------------

void PdeProblem::sample_interior(int n, std::mt19937_64& rng, Matrix& out) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  out = Matrix(static_cast<std::size_t>(n), static_cast<std::size_t>(dims_));
  std::vector<double> p(static_cast<std::size_t>(dims_));
  for (int i = 0; i < n; ++i) {
    bool ok = false;
    for (int attempt = 0; attempt < 10000; ++attempt) {
      for (int d = 0; d < dims_; ++d)
        p[static_cast<std::size_t>(d)] =
            domain_.lo[static_cast<std::size_t>(d)] +
            domain_.width(static_cast<std::size_t>(d)) * u(rng);
      if (point_ok(p)) {
        ok = true;
        break;
      }
    }
    if (!ok) throw DomainError("sampler: interior rejection failed (degenerate geometry)");
    for (int d = 0; d < dims_; ++d) out(static_cast<std::size_t>(i), static_cast<std::size_t>(d)) = p[static_cast<std::size_t>(d)];
  }
}

void PdeProblem::sample_ic(int n, std::mt19937_64& rng, std::vector<ConditionPoint>& out) const {
  (void)rng;
  (void)out;
  if (n > 0)
    throw SpecError("problem '" + name_ + "' has no initial conditions; set N_ic = 0");
}

Matrix PdeProblem::evaluation_points(std::uint64_t seed) const {
  auto lattice = [&](const std::vector<int>& counts) {
    std::size_t total = 1;
    for (int c : counts) total *= static_cast<std::size_t>(c);
    std::vector<std::vector<double>> rows;
    rows.reserve(total);
    std::vector<int> idx(counts.size(), 0);
    std::vector<double> p(counts.size());
    for (std::size_t r = 0; r < total; ++r) {
      for (std::size_t d = 0; d < counts.size(); ++d)
        p[d] = domain_.lo[d] +
               domain_.width(d) * (counts[d] == 1 ? 0.5 : static_cast<double>(idx[d]) / (counts[d] - 1));
      if (point_ok(p)) rows.push_back(p);
      for (int d = static_cast<int>(counts.size()) - 1; d >= 0; --d) {
        if (++idx[static_cast<std::size_t>(d)] < counts[static_cast<std::size_t>(d)]) break;
        idx[static_cast<std::size_t>(d)] = 0;
      }
    }
    Matrix m(rows.size(), counts.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t d = 0; d < counts.size(); ++d) m(i, d) = rows[i][d];
    return m;
  };
  if (dims_ == 1) return lattice({201});
  if (dims_ == 2) return lattice({101, 101});
  if (dims_ == 3) return lattice({17, 17, 17});
  // Higher dimensions: fixed uniform sample.
  std::mt19937_64 rng = make_rng(seed, "eval_points");
  Matrix m;
  sample_interior(2048, rng, m);
  return m;
}

// --- CRTP glue ----------------------------------------------------------------

namespace {

template <class Derived>
class ProblemCrtp : public PdeProblem {
 public:
  void residual_probe(const FieldProbe<double>& p, std::span<const double> x,
                      std::vector<double>& out) const override {
    static_cast<const Derived*>(this)->template formula<double>(p, x, out);
  }
  void residual_probe(const FieldProbe<Var>& p, std::span<const double> x,
                      std::vector<Var>& out) const override {
    static_cast<const Derived*>(this)->template formula<Var>(p, x, out);
  }
};

// Problems whose closed-form solution doubles as the truth for the registry
// gate and the error metric.
template <class Derived>
class AnalyticCrtp : public ProblemCrtp<Derived> {
 public:
  double analytical(std::span<const double> x) const override {
    return static_cast<const Derived*>(this)->template solution<double>(x);
  }
  std::vector<JetV<double>> analytical_jets(std::span<const JetV<double>> x) const override {
    return {static_cast<const Derived*>(this)->template solution<JetV<double>>(x)};
  }
};

// ---- Wave: u_tt - 4 u_xx = 0 ------------------------------------------------

class WaveProblem : public AnalyticCrtp<WaveProblem> {
 public:
  WaveProblem() {
    name_ = "wave";
    dims_ = 2;
    has_time_ = true;
    domain_ = {{0.0, 0.0}, {1.0, 1.0}};
    deriv_orders_ = {2, 2};
    has_analytical_ = true;
  }

  template <class S>
  void formula(const FieldProbe<S>& p, std::span<const double> x, std::vector<S>& out) const {
    (void)x;
    out = {p.dd(0, 1) - 4.0 * p.dd(0, 0)};
  }

  template <class J>
  J solution(std::span<const J> x) const {
    return sin(x[0] * kPi) * cos(x[1] * (2.0 * kPi)) +
           sin(x[0] * (4.0 * kPi)) * cos(x[1] * (8.0 * kPi)) * 0.5;
  }

  void sample_ic(int n, std::mt19937_64& rng, std::vector<ConditionPoint>& out) const override {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
      const double x = u(rng);
      ConditionPoint cp;
      cp.x = {x, 0.0};
      cp.terms.push_back({0, CondKind::Value, std::sin(kPi * x) + 0.5 * std::sin(4.0 * kPi * x)});
      cp.terms.push_back({0, CondKind::TimeDerivative, 0.0});
      out.push_back(std::move(cp));
    }
  }

  void sample_bc(int n, std::mt19937_64& rng, std::vector<ConditionPoint>& out) const override {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
      ConditionPoint cp;
      cp.x = {u(rng) < 0.5 ? 0.0 : 1.0, u(rng)};
      cp.terms.push_back({0, CondKind::Value, 0.0});
      out.push_back(std::move(cp));
    }
  }
};

// ---- Diffusion: u_t - u_xx + e^{-t}(sin(pi x) - pi^2 sin(pi x)) = 0 ----------
// The forcing sign is fixed so that u = e^{-t} sin(pi x) satisfies the
// operator exactly (enforced by the registry gate).

class DiffusionProblem : public AnalyticCrtp<DiffusionProblem> {
 public:
  DiffusionProblem() {
    name_ = "diffusion";
    dims_ = 2;
    has_time_ = true;
    domain_ = {{-1.0, 0.0}, {1.0, 1.0}};
    deriv_orders_ = {2, 1};
    has_analytical_ = true;
  }

  template <class S>
  void formula(const FieldProbe<S>& p, std::span<const double> x, std::vector<S>& out) const {
    const double s = std::sin(kPi * x[0]);
    const double forcing = std::exp(-x[1]) * (s - kPi * kPi * s);
    out = {p.d(0, 1) - p.dd(0, 0) + forcing};
  }

  template <class J>
  J solution(std::span<const J> x) const {
    return exp(-x[1]) * sin(x[0] * kPi);
  }

  void sample_ic(int n, std::mt19937_64& rng, std::vector<ConditionPoint>& out) const override {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < n; ++i) {
      const double x = u(rng);
      out.push_back({{x, 0.0}, {{0, CondKind::Value, std::sin(kPi * x)}}});
    }
  }

  void sample_bc(int n, std::mt19937_64& rng, std::vector<ConditionPoint>& out) const override {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < n; ++i)
      out.push_back({{u(rng) < 0.5 ? -1.0 : 1.0, u(rng)}, {{0, CondKind::Value, 0.0}}});
  }
};

// ---- Heat: u_t - u_xx/(500 pi)^2 - u_yy/pi^2 = 0 -----------------------------

class HeatProblem : public ProblemCrtp<HeatProblem> {
 public:
  HeatProblem() {
    name_ = "heat";
    dims_ = 3;
    has_time_ = true;
    domain_ = {{0.0, 0.0, 0.0}, {1.0, 1.0, 5.0}};
    deriv_orders_ = {2, 2, 1};
  }

  template <class S>
  void formula(const FieldProbe<S>& p, std::span<const double> x, std::vector<S>& out) const {
    (void)x;
    const double cx = 1.0 / ((500.0 * kPi) * (500.0 * kPi));
    const double cy = 1.0 / (kPi * kPi);
    out = {p.d(0, 2) - cx * p.dd(0, 0) - cy * p.dd(0, 1)};
  }

  void sample_ic(int n, std::mt19937_64& rng, std::vector<ConditionPoint>& out) const override {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
      const double x = u(rng);
      const double y = u(rng);
      out.push_back(
          {{x, y, 0.0}, {{0, CondKind::Value, std::sin(20.0 * kPi * x) * std::sin(kPi * y)}}});
    }
  }

  void sample_bc(int n, std::mt19937_64& rng, std::vector<ConditionPoint>& out) const override {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
      double x = u(rng);
      double y = u(rng);
      const int face = static_cast<int>(u(rng) * 4.0) % 4;
      if (face == 0) x = 0.0;
      if (face == 1) x = 1.0;
      if (face == 2) y = 0.0;
      if (face == 3) y = 1.0;
      out.push_back({{x, y, 5.0 * u(rng)}, {{0, CondKind::Value, 0.0}}});
    }
  }
};

// ---- Poisson on a square with four circular holes ---------------------------

class Poisson2dProblem : public ProblemCrtp<Poisson2dProblem> {
 public:
  static constexpr double kHoleR = 0.1;

  Poisson2dProblem() {
    name_ = "poisson2d";
    dims_ = 2;
    domain_ = {{-0.5, -0.5}, {0.5, 0.5}};
    deriv_orders_ = {2, 2};
  }

  template <class S>
  void formula(const FieldProbe<S>& p, std::span<const double> x, std::vector<S>& out) const {
    (void)x;
    out = {-(p.dd(0, 0) + p.dd(0, 1))};
  }

  static const std::array<std::array<double, 2>, 4>& holes() {
    static const std::array<std::array<double, 2>, 4> h = {
        {{0.3, 0.3}, {-0.3, 0.3}, {0.3, -0.3}, {-0.3, -0.3}}};
    return h;
  }

  void sample_bc(int n, std::mt19937_64& rng, std::vector<ConditionPoint>& out) const override {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double outer_len = 4.0;
    const double hole_len = 4.0 * 2.0 * kPi * kHoleR;
    for (int i = 0; i < n; ++i) {
      if (u(rng) < outer_len / (outer_len + hole_len)) {
        double a = u(rng) - 0.5;
        const int edge = static_cast<int>(u(rng) * 4.0) % 4;
        double x = a;
        double y = a;
        if (edge == 0) y = -0.5;
        if (edge == 1) y = 0.5;
        if (edge == 2) x = -0.5;
        if (edge == 3) x = 0.5;
        out.push_back({{x, y}, {{0, CondKind::Value, 1.0}}});
      } else {
        const int h = static_cast<int>(u(rng) * 4.0) % 4;
        const double th = 2.0 * kPi * u(rng);
        out.push_back({{holes()[static_cast<std::size_t>(h)][0] + kHoleR * std::cos(th),
                        holes()[static_cast<std::size_t>(h)][1] + kHoleR * std::sin(th)},
                       {{0, CondKind::Value, 0.0}}});
      }
    }
  }

 protected:
  bool point_ok(std::span<const double> p) const override {
    for (const auto& h : holes()) {
      const double dx = p[0] - h[0];
      const double dy = p[1] - h[1];
      if (dx * dx + dy * dy <= kHoleR * kHoleR) return false;
    }
    return true;
  }
};

// ---- Burgers: u_t + u u_x = nu u_xx ------------------------------------------

class BurgersProblem : public ProblemCrtp<BurgersProblem> {
 public:
  static constexpr double kNu = 0.01 / kPi;

  BurgersProblem() {
    name_ = "burgers";
    dims_ = 2;
    has_time_ = true;
    domain_ = {{-1.0, 0.0}, {1.0, 1.0}};
    deriv_orders_ = {2, 1};
  }

  template <class S>
  void formula(const FieldProbe<S>& p, std::span<const double> x, std::vector<S>& out) const {
    (void)x;
    out = {p.d(0, 1) + p.u[0] * p.d(0, 0) - kNu * p.dd(0, 0)};
  }

  void sample_ic(int n, std::mt19937_64& rng, std::vector<ConditionPoint>& out) const override {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < n; ++i) {
      const double x = u(rng);
      out.push_back({{x, 0.0}, {{0, CondKind::Value, -std::sin(kPi * x)}}});
    }
  }

  void sample_bc(int n, std::mt19937_64& rng, std::vector<ConditionPoint>& out) const override {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < n; ++i)
      out.push_back({{u(rng) < 0.5 ? -1.0 : 1.0, u(rng)}, {{0, CondKind::Value, 0.0}}});
  }
};

// ---- Steady Navier-Stokes, back-step geometry --------------------------------

class SteadyNsProblem : public ProblemCrtp<SteadyNsProblem> {
 public:
  static constexpr double kRe = 100.0;

  SteadyNsProblem() {
    name_ = "steady_ns";
    dims_ = 2;
    n_outputs_ = 3;  // u, v, p
    n_residuals_ = 3;
    domain_ = {{0.0, 0.0}, {4.0, 2.0}};
    deriv_orders_ = {2, 2};
  }

  template <class S>
  void formula(const FieldProbe<S>& p, std::span<const double> x, std::vector<S>& out) const {
    (void)x;
    const double inv_re = 1.0 / kRe;
    out.clear();
    out.push_back(p.d(0, 0) + p.d(1, 1));
    out.push_back(p.u[0] * p.d(0, 0) + p.u[1] * p.d(0, 1) + p.d(2, 0) -
                  inv_re * (p.dd(0, 0) + p.dd(0, 1)));
    out.push_back(p.u[0] * p.d(1, 0) + p.u[1] * p.d(1, 1) + p.d(2, 1) -
                  inv_re * (p.dd(1, 0) + p.dd(1, 1)));
  }

  void sample_bc(int n, std::mt19937_64& rng, std::vector<ConditionPoint>& out) const override {
    // Edges of the back-step boundary with lengths; no-slip unless labeled.
    struct Edge {
      double len;
      int kind;  // 0 wall, 1 inlet, 2 outlet
    };
    static const std::vector<Edge> edges = {
        {1.0, 1},  // inlet  x=0, y in [0,1]
        {4.0, 0},  // bottom y=0, x in [0,4]
        {2.0, 2},  // outlet x=4, y in [0,2]
        {2.0, 0},  // top    y=2, x in [2,4]
        {2.0, 0},  // step top  y=1, x in [0,2]
        {1.0, 0},  // step face x=2, y in [1,2]
    };
    double total = 0.0;
    for (const auto& e : edges) total += e.len;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
      double pick = u(rng) * total;
      std::size_t e = 0;
      while (e + 1 < edges.size() && pick > edges[e].len) {
        pick -= edges[e].len;
        ++e;
      }
      const double a = u(rng);
      ConditionPoint cp;
      switch (e) {
        case 0: cp.x = {0.0, a}; break;
        case 1: cp.x = {4.0 * a, 0.0}; break;
        case 2: cp.x = {4.0, 2.0 * a}; break;
        case 3: cp.x = {2.0 + 2.0 * a, 2.0}; break;
        case 4: cp.x = {2.0 * a, 1.0}; break;
        default: cp.x = {2.0, 1.0 + a}; break;
      }
      if (edges[e].kind == 1) {
        const double y = cp.x[1];
        cp.terms.push_back({0, CondKind::Value, 4.0 * y * (1.0 - y)});
        cp.terms.push_back({1, CondKind::Value, 0.0});
      } else if (edges[e].kind == 2) {
        cp.terms.push_back({2, CondKind::Value, 0.0});
      } else {
        cp.terms.push_back({0, CondKind::Value, 0.0});
        cp.terms.push_back({1, CondKind::Value, 0.0});
      }
      out.push_back(std::move(cp));
    }
  }

 protected:
  bool point_ok(std::span<const double> p) const override {
    return !(p[0] < 2.0 && p[1] > 1.0);
  }
};

// ---- nD Poisson: -lap u = (pi^2/4) sum sin(pi x_i / 2) -----------------------
// The Dirichlet data is the trace of the analytical solution (the stated
// homogeneous condition is inconsistent with it).

class PoissonNdProblem : public AnalyticCrtp<PoissonNdProblem> {
 public:
  explicit PoissonNdProblem(int dim, bool uneven) {
    if (dim < 1 || dim > 10) throw SpecError("poisson_nd: dim must be in [1, 10]");
    name_ = "poisson_nd";
    dims_ = dim;
    domain_.lo.assign(static_cast<std::size_t>(dim), 0.0);
    domain_.hi.assign(static_cast<std::size_t>(dim), 1.0);
    deriv_orders_.assign(static_cast<std::size_t>(dim), 2);
    has_analytical_ = true;
    uneven_ = uneven;
  }

  template <class S>
  void formula(const FieldProbe<S>& p, std::span<const double> x, std::vector<S>& out) const {
    double rhs = 0.0;
    for (int d = 0; d < dims_; ++d) rhs += std::sin(0.5 * kPi * x[static_cast<std::size_t>(d)]);
    rhs *= 0.25 * kPi * kPi;
    S lap = p.dd(0, 0);
    for (int d = 1; d < dims_; ++d) lap = lap + p.dd(0, d);
    out = {-lap - rhs};
  }

  template <class J>
  J solution(std::span<const J> x) const {
    J s = sin(x[0] * (0.5 * kPi));
    for (int d = 1; d < dims_; ++d) s = s + sin(x[static_cast<std::size_t>(d)] * (0.5 * kPi));
    return s;
  }

  void sample_bc(int n, std::mt19937_64& rng, std::vector<ConditionPoint>& out) const override {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
      std::vector<double> p(static_cast<std::size_t>(dims_));
      for (int d = 0; d < dims_; ++d) p[static_cast<std::size_t>(d)] = u(rng);
      const int fix = static_cast<int>(u(rng) * dims_) % dims_;
      p[static_cast<std::size_t>(fix)] = u(rng) < 0.5 ? 0.0 : 1.0;
      const double target = solution<double>(p);
      out.push_back({std::move(p), {{0, CondKind::Value, target}}});
    }
  }
};

// ---- Inverse Burgers: u_t + mu1 u u_x = mu2 u_xx -----------------------------

class InverseBurgersProblem : public ProblemCrtp<InverseBurgersProblem> {
 public:
  InverseBurgersProblem() {
    name_ = "inverse_burgers";
    dims_ = 2;
    has_time_ = true;
    domain_ = {{-1.0, 0.0}, {1.0, 1.0}};
    deriv_orders_ = {2, 1};
    true_coeffs_ = {1.0, 0.01 / kPi};
  }

  template <class S>
  void formula(const FieldProbe<S>& p, std::span<const double> x, std::vector<S>& out) const {
    (void)x;
    out = {p.d(0, 1) + p.coeffs[0] * (p.u[0] * p.d(0, 0)) - p.coeffs[1] * p.dd(0, 0)};
  }

  void sample_ic(int n, std::mt19937_64& rng, std::vector<ConditionPoint>& out) const override {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < n; ++i) {
      const double x = u(rng);
      out.push_back({{x, 0.0}, {{0, CondKind::Value, -std::sin(kPi * x)}}});
    }
  }

  void sample_bc(int n, std::mt19937_64& rng, std::vector<ConditionPoint>& out) const override {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < n; ++i)
      out.push_back({{u(rng) < 0.5 ? -1.0 : 1.0, u(rng)}, {{0, CondKind::Value, 0.0}}});
  }
};

// ---- Inverse Lorenz system ----------------------------------------------------

class InverseLorenzProblem : public ProblemCrtp<InverseLorenzProblem> {
 public:
  InverseLorenzProblem() {
    name_ = "inverse_lorenz";
    dims_ = 1;
    has_time_ = true;
    n_outputs_ = 3;
    n_residuals_ = 3;
    domain_ = {{0.0}, {3.0}};
    deriv_orders_ = {1};
    true_coeffs_ = {10.0, 15.0, 8.0 / 3.0};
  }

  template <class S>
  void formula(const FieldProbe<S>& p, std::span<const double> t, std::vector<S>& out) const {
    (void)t;
    const S& x = p.u[0];
    const S& y = p.u[1];
    const S& z = p.u[2];
    out.clear();
    out.push_back(p.d(0, 0) - p.coeffs[0] * (y - x));
    out.push_back(p.d(1, 0) - (x * (p.coeffs[1] - z) - y));
    out.push_back(p.d(2, 0) - (x * y - p.coeffs[2] * z));
  }

  void sample_bc(int n, std::mt19937_64& rng, std::vector<ConditionPoint>& out) const override {
    (void)rng;
    (void)out;
    if (n > 0)
      throw SpecError("inverse_lorenz is data-driven; set N_bc = 0");
  }
};

}  // namespace

// --- registry -----------------------------------------------------------------

std::vector<std::string> problem_names() {
  return {"wave",      "diffusion", "heat",           "poisson2d",     "burgers",
          "steady_ns", "poisson_nd", "inverse_burgers", "inverse_lorenz"};
}

std::unique_ptr<PdeProblem> make_problem(const std::string& name, const ProblemOptions& options) {
  std::unique_ptr<PdeProblem> p;
  if (name == "wave") p = std::make_unique<WaveProblem>();
  else if (name == "diffusion") p = std::make_unique<DiffusionProblem>();
  else if (name == "heat") p = std::make_unique<HeatProblem>();
  else if (name == "poisson2d") p = std::make_unique<Poisson2dProblem>();
  else if (name == "burgers") p = std::make_unique<BurgersProblem>();
  else if (name == "steady_ns") p = std::make_unique<SteadyNsProblem>();
  else if (name == "poisson_nd") p = std::make_unique<PoissonNdProblem>(options.dim, options.uneven);
  else if (name == "inverse_burgers") p = std::make_unique<InverseBurgersProblem>();
  else if (name == "inverse_lorenz") p = std::make_unique<InverseLorenzProblem>();
  else throw ConfigError("unknown problem '" + name + "'");

  if (p->has_analytical()) {
    // Self-consistency gate: the declared solution must satisfy the declared
    // operator.
    std::mt19937_64 rng = make_rng(0xFEA7, "gate");
    Matrix pts;
    p->sample_interior(100, rng, pts);
    std::vector<double> x(pts.cols);
    for (std::size_t i = 0; i < pts.rows; ++i) {
      for (std::size_t c = 0; c < pts.cols; ++c) x[c] = pts(i, c);
      const std::vector<double> r = residual(
          *p, [&](std::span<const JetV<double>> xs) { return p->analytical_jets(xs); }, x);
      for (double v : r)
        if (std::abs(v) > 1e-8)
          throw Error("registry self-consistency gate failed for '" + name +
                      "': |residual| = " + std::to_string(std::abs(v)));
    }
  }
  return p;
}

SampleBatch sample_domain(const PdeProblem& problem, int n_r, int n_ic, int n_bc,
                          std::uint64_t seed) {
  if (n_r < 0 || n_ic < 0 || n_bc < 0) throw SpecError("sample_domain: counts must be >= 0");
  SampleBatch batch;
  int n_r_eff = n_r;
  if (problem.uneven_sampling() && problem.dims() > 0)
    n_r_eff = std::max(1, n_r / problem.dims());
  {
    std::mt19937_64 rng = make_rng(seed, "interior");
    problem.sample_interior(n_r_eff, rng, batch.collocation);
  }
  {
    std::mt19937_64 rng = make_rng(seed, "ic");
    problem.sample_ic(n_ic, rng, batch.ic);
  }
  {
    std::mt19937_64 rng = make_rng(seed, "bc");
    problem.sample_bc(n_bc, rng, batch.bc);
  }
  return batch;
}

std::vector<double> residual(const PdeProblem& problem, const FieldClosure& u,
                             std::span<const double> point) {
  if (!problem.in_domain(point))
    throw DomainError("residual: point outside the domain of '" + problem.name() + "'");
  return residual_with_probe<double>(problem, u, point, point, problem.true_coeffs(), 0.0);
}

// --- classical references -------------------------------------------------------

double burgers_reference(double x, double t, double nu) {
  // Cole-Hopf quadrature for u_t + u u_x = nu u_xx with u(x,0) = -sin(pi x):
  // u = -int sin(pi(x-eta)) f(x-eta) e^{-eta^2/4 nu t} deta /
  //      int f(x-eta) e^{-eta^2/4 nu t} deta,  f(y) = exp(-cos(pi y)/(2 pi nu)).
  if (t <= 0.0) return -std::sin(kPi * x);
  static std::vector<double> nodes;
  static std::vector<double> weights;
  if (nodes.empty()) gauss_hermite(100, nodes, weights);
  const double scale = std::sqrt(4.0 * nu * t);
  const double c = 1.0 / (2.0 * kPi * nu);
  double max_e = -1e300;
  std::vector<double> es(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double y = x - scale * nodes[i];
    es[i] = -std::cos(kPi * y) * c;
    max_e = std::max(max_e, es[i]);
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double y = x - scale * nodes[i];
    const double f = std::exp(es[i] - max_e);
    num += weights[i] * std::sin(kPi * y) * f;
    den += weights[i] * f;
  }
  return -num / den;
}

double heat_reference(double x, double y, double t) {
  // Separable closed form of the anisotropic heat benchmark.
  const double lambda = (20.0 * kPi) * (20.0 * kPi) / ((500.0 * kPi) * (500.0 * kPi)) + 1.0;
  return std::sin(20.0 * kPi * x) * std::sin(kPi * y) * std::exp(-lambda * t);
}

std::array<double, 3> lorenz_rhs(std::span<const double, 3> coeffs,
                                 std::span<const double, 3> s) {
  return {coeffs[0] * (s[1] - s[0]), s[0] * (coeffs[1] - s[2]) - s[1],
          s[0] * s[1] - coeffs[2] * s[2]};
}

Matrix integrate_lorenz(std::span<const double, 3> coeffs, std::span<const double, 3> x0,
                        double dt, int steps) {
  if (!(dt > 0.0)) throw SpecError("integrate_lorenz: dt must be > 0");
  if (steps < 0) throw SpecError("integrate_lorenz: steps must be >= 0");
  Matrix traj(static_cast<std::size_t>(steps) + 1, 3);
  std::array<double, 3> s = {x0[0], x0[1], x0[2]};
  for (int c = 0; c < 3; ++c) traj(0, static_cast<std::size_t>(c)) = s[static_cast<std::size_t>(c)];
  for (int i = 1; i <= steps; ++i) {
    const auto k1 = lorenz_rhs(coeffs, s);
    std::array<double, 3> tmp;
    for (int c = 0; c < 3; ++c) tmp[static_cast<std::size_t>(c)] = s[static_cast<std::size_t>(c)] + 0.5 * dt * k1[static_cast<std::size_t>(c)];
    const auto k2 = lorenz_rhs(coeffs, tmp);
    for (int c = 0; c < 3; ++c) tmp[static_cast<std::size_t>(c)] = s[static_cast<std::size_t>(c)] + 0.5 * dt * k2[static_cast<std::size_t>(c)];
    const auto k3 = lorenz_rhs(coeffs, tmp);
    for (int c = 0; c < 3; ++c) tmp[static_cast<std::size_t>(c)] = s[static_cast<std::size_t>(c)] + dt * k3[static_cast<std::size_t>(c)];
    const auto k4 = lorenz_rhs(coeffs, tmp);
    for (int c = 0; c < 3; ++c) {
      s[static_cast<std::size_t>(c)] +=
          dt / 6.0 *
          (k1[static_cast<std::size_t>(c)] + 2.0 * k2[static_cast<std::size_t>(c)] +
           2.0 * k3[static_cast<std::size_t>(c)] + k4[static_cast<std::size_t>(c)]);
      if (!std::isfinite(s[static_cast<std::size_t>(c)]))
        throw NumericError("lorenz integration blew up at step " + std::to_string(i));
      traj(static_cast<std::size_t>(i), static_cast<std::size_t>(c)) = s[static_cast<std::size_t>(c)];
    }
  }
  return traj;
}

ReferenceGrid load_reference_grid(const std::string& path, int dims, int n_outputs) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open reference grid: " + path);
  std::string line;
  if (!std::getline(f, line)) throw Error("empty reference grid: " + path);
  // Header: dim0,dim1,...,u0[,u1,u2]
  std::vector<std::vector<double>> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (static_cast<int>(row.size()) != dims + n_outputs)
      throw Error("reference grid row has " + std::to_string(row.size()) + " columns, expected " +
                  std::to_string(dims + n_outputs));
    rows.push_back(std::move(row));
  }
  ReferenceGrid g;
  g.points = Matrix(rows.size(), static_cast<std::size_t>(dims));
  g.values = Matrix(rows.size(), static_cast<std::size_t>(n_outputs));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int d = 0; d < dims; ++d) g.points(i, static_cast<std::size_t>(d)) = rows[i][static_cast<std::size_t>(d)];
    for (int c = 0; c < n_outputs; ++c)
      g.values(i, static_cast<std::size_t>(c)) = rows[i][static_cast<std::size_t>(dims + c)];
  }
  return g;
}

}  // namespace featpinn
