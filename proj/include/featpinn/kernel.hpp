#ifndef FEATPINN_KERNEL_HPP
#define FEATPINN_KERNEL_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "featpinn/network.hpp"

namespace featpinn {

enum class KernelKind { CK, NTK, CKDerivative, Empirical };

// Symmetric N x N kernel tagged with its layer and kind. CK/NTK constructions
// are validated: symmetric within 1e-10 and positive semi-definite up to
// min eigenvalue >= -1e-8 * max eigenvalue.
struct KernelMatrix {
  Matrix entries;
  int layer = 0;
  KernelKind kind = KernelKind::CK;

  static KernelMatrix checked(Matrix m, int layer, KernelKind kind);
};

// How bivariate Gaussian expectations E[a(X) a(X')] are evaluated, and how
// many feature-map realizations back the layer-1 average for families without
// a closed form.
struct GaussianExpectationRule {
  enum class Method { GaussHermite, MonteCarlo };
  Method method = Method::GaussHermite;
  int order = 32;                 // Gauss-Hermite order (>= 2)
  long mc_samples = 200000;       // draws when method == MonteCarlo
  long feature_draws = 4000;      // feature-map realizations for layer 1
  std::uint64_t seed = 0;

  void validate() const {
    if (order < 2) throw SpecError("expectation rule: order must be >= 2");
    if (mc_samples < 1) throw SpecError("expectation rule: mc_samples must be >= 1");
    if (feature_draws < 1) throw SpecError("expectation rule: feature_draws must be >= 1");
  }
};

struct KernelDiagnostics {
  long correlation_clips = 0;  // |rho| > 1 by round-off, clipped to +-1
};

// Gauss-Hermite nodes/weights (physicists' convention, weight e^{-t^2}).
void gauss_hermite(int order, std::vector<double>& nodes, std::vector<double>& weights);

// Conjugate-kernel propagation: returns Sigma^0..Sigma^L. Sigma^0 is the
// inner-product kernel plus one, Sigma^1 the per-feature average over the
// map's random draws plus one (closed forms where available, Monte Carlo over
// realizations otherwise), deeper layers the bivariate activation expectation
// plus one.
struct CkResult {
  std::vector<KernelMatrix> sigma;
  KernelDiagnostics diag;
};
CkResult ck_propagate(const Matrix& inputs, const FeatureMap& map, int depth,
                      const GaussianExpectationRule& rule,
                      Activation activation = Activation::Tanh);

// NTK recursion Theta^l = Theta^{l-1} .* SigmaDot^l + Sigma^l with the base
// case Theta^0 = Sigma^0. Also returns the Sigma / SigmaDot ingredients.
struct NtkResult {
  std::vector<KernelMatrix> theta;      // Theta^0..Theta^L
  std::vector<KernelMatrix> sigma;      // Sigma^0..Sigma^L
  std::vector<KernelMatrix> sigma_dot;  // layer 1..L (index 0 unused)
  KernelDiagnostics diag;
};
NtkResult ntk_propagate(const Matrix& inputs, const FeatureMap& map, int depth,
                        const GaussianExpectationRule& rule,
                        Activation activation = Activation::Tanh);

// Gram matrix of parameter Jacobians of a scalar-output model at theta.
KernelMatrix empirical_ntk(const PinnModel& model, std::span<const double> theta,
                           const Matrix& inputs);

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Eigenvalues sorted
// descending; eigenvectors are the columns of `vectors`.
struct EigResult {
  std::vector<double> values;
  Matrix vectors;
};
EigResult sym_eig(const Matrix& a);

// Per-mode training-error prediction from the kernel spectrum: mode i decays
// as e^{-lambda_i t} times the initial projection. `total` holds the full
// predicted error vector -Q^T e^{-Lambda t} Q y per requested time.
struct DecayPrediction {
  std::vector<double> eigenvalues;
  Matrix modes;   // n_modes x n_times, entry = e^{-lambda_i t} (v_i . y)
  Matrix total;   // n x n_times
  std::vector<double> times;
};
DecayPrediction spectral_decay_predict(const KernelMatrix& ntk, std::span<const double> targets,
                                       std::span<const double> times);

// Closed-form composed Fourier kernel sum_k A_k^2 cos(2 pi b_k . (x - x')).
double fourier_composed_kernel(std::span<const double> amplitudes, const Matrix& frequencies,
                               std::span<const double> x, std::span<const double> xp);

// Monte-Carlo probability that x -> sin(2 pi B x) is injective on [0, 1] for
// B ~ N(0, sigma^2), against the analytic bound erf(1/(sqrt(2) sigma)) / 2.
// Injectivity criterion: the argument sweep 2 pi |B| stays inside the strict
// monotonicity range of sin from 0, i.e. |B| <= 1/4.
struct SurjectivityEstimate {
  double mc_probability = 0.0;
  double analytic_bound = 0.0;
};
SurjectivityEstimate surjectivity_estimate(double sigma, long n_samples, std::uint64_t seed);

// Layer-1 kernels of a realized feature map: the per-feature averages
// E[phi(x) phi(x')] and E[grad phi(x) . grad phi(x')] over the map's random
// draws (without the +1 bias term). Exposed for tests and reused by the
// propagation routines.
void feature_layer_kernels(const Matrix& inputs, const FeatureMap& map,
                           const GaussianExpectationRule& rule, Matrix& sigma1,
                           Matrix& sigma1_dot);

}  // namespace featpinn

#endif  // FEATPINN_KERNEL_HPP
