#ifndef FEATPINN_TRAIN_HPP
#define FEATPINN_TRAIN_HPP

#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "featpinn/network.hpp"
#include "featpinn/pde.hpp"

namespace featpinn {

struct InverseConfig {
  bool enabled = false;
  int data_points = 40;
  double noise_fraction = 0.0;  // additive Gaussian, scaled by per-component std
  double lambda_data = 100.0;
};

struct TrainConfig {
  std::string problem = "diffusion";
  ProblemOptions problem_options;
  FeatureMapSpec feature_map;
  std::vector<int> widths = {2, 50, 50, 50, 1};  // [input, hidden..., output]
  int n_r = 192;
  int n_ic = 96;
  int n_bc = 96;
  double lambda_r = 1.0;
  double lambda_ic = 100.0;
  double lambda_bc = 100.0;
  int adam_steps = 5000;
  double adam_lr = 1e-3;
  int lbfgs_steps = 500;
  int lbfgs_memory = 10;
  int resample_every = 1000;
  std::uint64_t seed = 0;
  InverseConfig inverse;
  std::string checkpoint_path;  // empty: no checkpoints
  int checkpoint_every = 1000;
  int record_every = 100;
  std::string reference_path;  // optional reference-grid CSV

  void validate() const;
};

struct Weights {
  double r = 1.0;
  double ic = 1.0;
  double bc = 1.0;
  double data = 0.0;
};

// Raw per-term mean squared errors; total is their weighted sum.
struct LossParts {
  double total = 0.0;
  double r = 0.0;
  double ic = 0.0;
  double bc = 0.0;
  double data = 0.0;
};

struct DataSet {
  Matrix points;   // n x dims
  Matrix targets;  // n x n_outputs
};

struct LossRecord {
  long step = 0;
  LossParts parts;
};

struct TrainState {
  PinnModel model;
  std::vector<double> theta;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  long adam_t = 0;  // Adam updates taken (bias correction)
  long step = 0;    // monotone global step counter

  TrainState(PinnModel m, std::vector<double> th)
      : model(std::move(m)),
        theta(std::move(th)),
        adam_m(theta.size(), 0.0),
        adam_v(theta.size(), 0.0) {}
};

struct TrainReport {
  double l2re = std::numeric_limits<double>::quiet_NaN();
  LossParts final_loss;
  std::vector<LossRecord> curves;
  double wall_seconds = 0.0;
  long empty_support_events = 0;
  long lbfgs_stalls = 0;
  std::vector<double> recovered_coeffs;
  double coeff_l2re = std::numeric_limits<double>::quiet_NaN();
  long adam_steps = 0;
  long lbfgs_steps = 0;
};

struct TrainResult {
  TrainReport report;
  TrainState state;
};

// Composite PINN loss over a sampled batch. Every term with positive weight
// must have a non-empty batch. Raw parts plus weighted total.
LossParts loss(const TrainState& state, const PdeProblem& problem, const SampleBatch& batch,
               const Weights& weights, const DataSet* data = nullptr);

// Fused loss + gradient, reverse mode per point with a deterministic chunked
// reduction.
LossParts loss_and_grad(const TrainState& state, const PdeProblem& problem,
                        const SampleBatch& batch, const Weights& weights, const DataSet* data,
                        std::vector<double>& grad);

// One Adam update with bias correction. Throws NumericError naming the
// parameter block on non-finite gradients.
void adam_step(TrainState& state, std::span<const double> grad, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

// The raw update rule over flat vectors (t counts updates, starting at 1).
void adam_update(std::span<double> theta, std::span<double> m, std::span<double> v, long t,
                 std::span<const double> grad, double lr, double beta1 = 0.9,
                 double beta2 = 0.999, double eps = 1e-8);

// Limited-memory BFGS with two-loop recursion and Armijo backtracking.
struct LbfgsWorkspace {
  std::deque<std::pair<std::vector<double>, std::vector<double>>> pairs;  // (s, y)
  std::vector<double> last_grad;
  double last_loss = 0.0;
  bool primed = false;
};

struct LbfgsOutcome {
  double loss = 0.0;
  double grad_norm = 0.0;
  bool stalled = false;
};

// value_and_grad(theta, grad_out) -> loss. The closure must be deterministic
// within a step (fixed batch during the L-BFGS phase).
LbfgsOutcome lbfgs_step(std::vector<double>& theta, LbfgsWorkspace& ws,
                        const std::function<double(std::span<const double>, std::vector<double>&)>&
                            value_and_grad,
                        int memory = 10);

// Relative l2 error sqrt(sum (p_i - t_i)^2 / sum t_i^2).
double l2re(std::span<const double> pred, std::span<const double> truth);

// Loss of an arbitrary jet-valued field closure (diagnostics and tests; the
// training loop uses the tape-backed path). Coefficients default to the
// problem's true values.
LossParts loss_of_field(const FieldClosure& u, const PdeProblem& problem,
                        const SampleBatch& batch, const Weights& weights,
                        const DataSet* data = nullptr);

// Full run: Adam phase with periodic resampling, then L-BFGS on a frozen
// batch, then evaluation.
TrainResult train(const TrainConfig& config);

// Supervised data for inverse problems (RK4 Lorenz trajectory or reference
// Burgers field), with optional Gaussian noise.
DataSet make_inverse_data(const PdeProblem& problem, const InverseConfig& inv,
                          std::uint64_t seed);

}  // namespace featpinn

#endif  // FEATPINN_TRAIN_HPP
