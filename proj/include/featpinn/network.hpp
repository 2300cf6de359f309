#ifndef FEATPINN_NETWORK_HPP
#define FEATPINN_NETWORK_HPP

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "featpinn/featuremap.hpp"

namespace featpinn {

enum class Activation { Tanh, Identity };

// Parameterized layers of the MLP that follows the feature map. widths[0] is
// the feature dimension, widths.back() the output dimension. Parameters are
// stored flat, per layer weights row-major then biases.
struct MlpShape {
  std::vector<int> widths;
  Activation activation = Activation::Tanh;
  bool with_bias = true;

  int n_layers() const { return static_cast<int>(widths.size()) - 1; }
  std::size_t n_params() const {
    std::size_t n = 0;
    for (std::size_t l = 1; l < widths.size(); ++l) {
      n += static_cast<std::size_t>(widths[l]) * static_cast<std::size_t>(widths[l - 1]);
      if (with_bias) n += static_cast<std::size_t>(widths[l]);
    }
    return n;
  }
  void validate() const {
    if (widths.size() < 2) throw SpecError("mlp: widths must describe at least one layer");
    for (int w : widths)
      if (w < 1) throw SpecError("mlp: widths must be positive");
  }
};

// Xavier initialization (uniform variant, Var = 2/(fan_in+fan_out)), zero
// biases. Used by the trainable network.
std::vector<double> init_mlp(const MlpShape& shape, std::uint64_t seed);

// Standard-normal weights and biases: the parameterization the limiting
// kernels are derived under. Must not be conflated with init_mlp.
std::vector<double> init_mlp_theory(const MlpShape& shape, std::uint64_t seed);

// Forward pass: f^l = b^l + (1/sqrt(fan_in)) W^l h^{l-1}, tanh between
// parameterized layers, linear output. J is the evaluation scalar, P the
// parameter scalar.
template <class J, class P>
void mlp_forward(const MlpShape& shape, std::span<const P> theta, std::span<const J> h0,
                 std::vector<J>& out) {
  if (static_cast<int>(h0.size()) != shape.widths[0])
    throw SpecError("mlp_forward: feature dimension mismatch");
  if (theta.size() != shape.n_params()) throw SpecError("mlp_forward: parameter count mismatch");
  std::vector<J> h(h0.begin(), h0.end());
  std::vector<J> f;
  std::size_t off = 0;
  const int L = shape.n_layers();
  for (int l = 1; l <= L; ++l) {
    const int fan_in = shape.widths[static_cast<std::size_t>(l - 1)];
    const int fan_out = shape.widths[static_cast<std::size_t>(l)];
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    const std::size_t bias_off = off + static_cast<std::size_t>(fan_out) * fan_in;
    f.clear();
    f.reserve(static_cast<std::size_t>(fan_out));
    for (int i = 0; i < fan_out; ++i) {
      const std::size_t row = off + static_cast<std::size_t>(i) * fan_in;
      J acc = h[0] * theta[row];
      for (int j = 1; j < fan_in; ++j) acc = madd(h[static_cast<std::size_t>(j)], theta[row + j], acc);
      acc = acc * scale;
      if (shape.with_bias) acc = acc + theta[bias_off + static_cast<std::size_t>(i)];
      if (!std::isfinite(value_of(acc)))
        throw NumericError("non-finite activation in layer " + std::to_string(l));
      f.push_back(acc);
    }
    if (l < L && shape.activation == Activation::Tanh) {
      h.clear();
      for (J& v : f) h.push_back(tanh(v));
    } else {
      h = f;
    }
    off = bias_off + (shape.with_bias ? static_cast<std::size_t>(fan_out) : 0);
  }
  out = h;
}

// Feature map + MLP + optional inverse coefficients, sharing one flat
// parameter vector laid out [mlp | feature trainables | coefficients].
struct PinnModel {
  FeatureMap map;
  MlpShape shape;
  int n_coeffs = 0;

  PinnModel(FeatureMap fm, MlpShape sh, int coeffs = 0)
      : map(std::move(fm)), shape(std::move(sh)), n_coeffs(coeffs) {
    shape.validate();
    if (shape.widths[0] != map.output_dim())
      throw SpecError("model: first width " + std::to_string(shape.widths[0]) +
                      " does not match feature dimension " + std::to_string(map.output_dim()));
  }

  std::size_t n_net() const { return shape.n_params(); }
  std::size_t n_fm() const { return static_cast<std::size_t>(map.n_trainable()); }
  std::size_t n_params() const { return n_net() + n_fm() + static_cast<std::size_t>(n_coeffs); }

  template <class P>
  std::span<const P> net_slice(std::span<const P> theta) const {
    return theta.subspan(0, n_net());
  }
  template <class P>
  std::span<const P> fm_slice(std::span<const P> theta) const {
    return theta.subspan(n_net(), n_fm());
  }
  template <class P>
  std::span<const P> coeff_slice(std::span<const P> theta) const {
    return theta.subspan(n_net() + n_fm(), static_cast<std::size_t>(n_coeffs));
  }

  std::vector<double> init_theta(std::uint64_t seed, double coeff_init = 1.0) const {
    std::vector<double> theta = init_mlp(shape, seed);
    const std::vector<double> fm = map.initial_trainable();
    theta.insert(theta.end(), fm.begin(), fm.end());
    theta.insert(theta.end(), static_cast<std::size_t>(n_coeffs), coeff_init);
    return theta;
  }

  template <class J, class P>
  std::vector<J> forward(std::span<const J> x, std::span<const P> theta) const {
    std::vector<J> h0;
    map.eval(x, fm_slice(theta), h0);
    std::vector<J> out;
    mlp_forward(shape, net_slice(theta), std::span<const J>(h0), out);
    return out;
  }
};

// Sample variance of du/dx over n uniform domain points at the given
// parameters (all input partial derivatives pooled). Scalar-output networks
// only.
double input_gradient_variance(const PinnModel& model, std::span<const double> theta,
                               int n_samples, std::uint64_t seed);

// Flat binary checkpoint with a JSON shape header.
void save_checkpoint(const std::string& path, const PinnModel& model,
                     std::span<const double> theta, std::int64_t step);
struct Checkpoint {
  std::vector<int> widths;
  std::size_t n_fm = 0;
  int n_coeffs = 0;
  std::int64_t step = 0;
  std::vector<double> theta;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace featpinn

#endif  // FEATPINN_NETWORK_HPP
