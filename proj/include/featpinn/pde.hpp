#ifndef FEATPINN_PDE_HPP
#define FEATPINN_PDE_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "featpinn/jet.hpp"
#include "featpinn/tape.hpp"

namespace featpinn {

enum class CondKind { Value, TimeDerivative };

// One mismatch term at a condition point: which output component, whether the
// value or its time derivative is constrained, and the target.
struct ConditionTerm {
  int component = 0;
  CondKind kind = CondKind::Value;
  double target = 0.0;
};

struct ConditionPoint {
  std::vector<double> x;
  std::vector<ConditionTerm> terms;
};

struct SampleBatch {
  Matrix collocation;  // N_r x dims
  std::vector<ConditionPoint> ic;
  std::vector<ConditionPoint> bc;
};

// Field derivatives available to a residual formula at one point. Second
// derivatives are diagonal only; no benchmark needs mixed terms.
template <class P>
struct FieldProbe {
  int n_out = 0;
  int dims = 0;
  std::vector<P> u;
  std::vector<P> du;   // n_out x dims, row-major
  std::vector<P> d2u;  // n_out x dims, row-major
  std::span<const P> coeffs;

  const P& d(int out, int dim) const { return du[static_cast<std::size_t>(out * dims + dim)]; }
  const P& dd(int out, int dim) const { return d2u[static_cast<std::size_t>(out * dims + dim)]; }
};

// Reference solution on a fixed set of evaluation points (loaded from CSV).
struct ReferenceGrid {
  Matrix points;  // n x dims
  Matrix values;  // n x n_outputs
};
ReferenceGrid load_reference_grid(const std::string& path, int dims, int n_outputs);

class PdeProblem {
 public:
  virtual ~PdeProblem() = default;

  const std::string& name() const { return name_; }
  int dims() const { return dims_; }
  bool has_time() const { return has_time_; }  // time is the last axis
  int n_outputs() const { return n_outputs_; }
  int n_residuals() const { return n_residuals_; }
  int n_coeffs() const { return static_cast<int>(true_coeffs_.size()); }
  std::span<const double> true_coeffs() const { return true_coeffs_; }
  const Box& domain() const { return domain_; }
  const std::vector<int>& deriv_orders() const { return deriv_orders_; }
  bool uneven_sampling() const { return uneven_; }

  bool in_domain(std::span<const double> p) const {
    return domain_.contains(p) && point_ok(p);
  }

  // Residual of the declared operator given a field probe; two instantiations
  // of one formula (plain evaluation and tape-backed training path).
  virtual void residual_probe(const FieldProbe<double>& p, std::span<const double> x,
                              std::vector<double>& out) const = 0;
  virtual void residual_probe(const FieldProbe<Var>& p, std::span<const double> x,
                              std::vector<Var>& out) const = 0;

  bool has_analytical() const { return has_analytical_; }
  virtual double analytical(std::span<const double> x) const {
    (void)x;
    throw UnsupportedError("problem '" + name_ + "' declares no analytical solution");
  }
  virtual std::vector<JetV<double>> analytical_jets(std::span<const JetV<double>> x) const {
    (void)x;
    throw UnsupportedError("problem '" + name_ + "' declares no analytical solution");
  }

  // Samplers. Interior samples are uniform over the domain box subject to
  // point_ok rejection; IC/BC samplers are problem specific.
  virtual void sample_interior(int n, std::mt19937_64& rng, Matrix& out) const;
  virtual void sample_ic(int n, std::mt19937_64& rng, std::vector<ConditionPoint>& out) const;
  virtual void sample_bc(int n, std::mt19937_64& rng, std::vector<ConditionPoint>& out) const = 0;

  // Points a trained field is evaluated on for the error metric; analytical
  // problems pair them with truth values.
  virtual Matrix evaluation_points(std::uint64_t seed) const;

  void set_reference(ReferenceGrid grid) { reference_ = std::move(grid); has_reference_ = true; }
  bool has_reference() const { return has_reference_; }
  const ReferenceGrid& reference() const {
    if (!has_reference_) throw UnsupportedError("problem '" + name_ + "' has no reference grid");
    return reference_;
  }

 protected:
  virtual bool point_ok(std::span<const double> p) const {
    (void)p;
    return true;
  }

  std::string name_;
  int dims_ = 0;
  bool has_time_ = false;
  int n_outputs_ = 1;
  int n_residuals_ = 1;
  Box domain_;
  std::vector<int> deriv_orders_;
  std::vector<double> true_coeffs_;
  bool has_analytical_ = false;
  bool uneven_ = false;
  bool has_reference_ = false;
  ReferenceGrid reference_;
};

struct ProblemOptions {
  int dim = 2;          // poisson_nd dimension
  bool uneven = false;  // scale collocation counts by 1/D (poisson_nd)
};

// Constructs a registry problem. Problems with analytical solutions pass a
// self-consistency gate at load: |residual(analytical)| <= 1e-8 at 100 random
// interior points.
std::unique_ptr<PdeProblem> make_problem(const std::string& name,
                                         const ProblemOptions& options = {});
std::vector<std::string> problem_names();

SampleBatch sample_domain(const PdeProblem& problem, int n_r, int n_ic, int n_bc,
                          std::uint64_t seed);

// Residual of a user field at one interior point. The field is supplied as a
// jet-valued closure so all derivatives come from automatic differentiation.
using FieldClosure =
    std::function<std::vector<JetV<double>>(std::span<const JetV<double>>)>;
std::vector<double> residual(const PdeProblem& problem, const FieldClosure& u,
                             std::span<const double> point);

// Probe engine shared by the public residual() and the training loss: seeds
// one jet direction per input axis (second-order where the operator needs
// it), evaluates the closure once, and hands the assembled probe to the
// problem's formula. S is double or Var.
template <class S, class F>
std::vector<S> residual_with_probe(const PdeProblem& pb, F&& u,
                                   std::span<const double> point, std::span<const S> point_s,
                                   std::span<const S> coeffs, const S& zero) {
  static_assert(std::is_same_v<S, double> || std::is_same_v<S, Var>);
  const int dims = pb.dims();
  const auto& orders = pb.deriv_orders();
  int k2 = 0;
  for (int o : orders) k2 += o >= 2 ? 1 : 0;
  int k = k2;
  std::vector<int> dir(static_cast<std::size_t>(dims), -1);
  int next2 = 0;
  for (int d = 0; d < dims; ++d) {
    if (orders[static_cast<std::size_t>(d)] >= 2)
      dir[static_cast<std::size_t>(d)] = next2++;
    else if (orders[static_cast<std::size_t>(d)] == 1)
      dir[static_cast<std::size_t>(d)] = k++;
  }

  std::vector<JetV<S>> xj(static_cast<std::size_t>(dims));
  for (int d = 0; d < dims; ++d)
    xj[static_cast<std::size_t>(d)] =
        jet_input(point_s[static_cast<std::size_t>(d)], dir[static_cast<std::size_t>(d)], k, k2,
                  zero);
  const std::vector<JetV<S>> out = u(std::span<const JetV<S>>(xj));
  if (static_cast<int>(out.size()) != pb.n_outputs())
    throw SpecError("residual: field closure output count mismatch");

  FieldProbe<S> probe;
  probe.n_out = pb.n_outputs();
  probe.dims = dims;
  probe.coeffs = coeffs;
  probe.u.reserve(out.size());
  probe.du.assign(out.size() * static_cast<std::size_t>(dims), zero);
  probe.d2u.assign(out.size() * static_cast<std::size_t>(dims), zero);
  for (std::size_t o = 0; o < out.size(); ++o) {
    probe.u.push_back(out[o].v);
    for (int d = 0; d < dims; ++d) {
      const int dd = dir[static_cast<std::size_t>(d)];
      if (dd < 0) continue;
      probe.du[o * static_cast<std::size_t>(dims) + static_cast<std::size_t>(d)] = out[o].d1[dd];
      if (dd < k2)
        probe.d2u[o * static_cast<std::size_t>(dims) + static_cast<std::size_t>(d)] =
            out[o].d2[dd];
    }
  }
  std::vector<S> res;
  pb.residual_probe(probe, point, res);
  return res;
}

// Classical reference evaluators used to generate benchmark data.
double burgers_reference(double x, double t, double nu);
double heat_reference(double x, double y, double t);

// Classical 4th-order Runge-Kutta integration of the Lorenz system. Returns
// (steps+1) x 3 states starting from x0.
Matrix integrate_lorenz(std::span<const double, 3> coeffs, std::span<const double, 3> x0,
                        double dt, int steps);
std::array<double, 3> lorenz_rhs(std::span<const double, 3> coeffs,
                                 std::span<const double, 3> state);

}  // namespace featpinn

#endif  // FEATPINN_PDE_HPP
