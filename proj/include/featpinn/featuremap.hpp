#ifndef FEATPINN_FEATUREMAP_HPP
#define FEATPINN_FEATUREMAP_HPP

#include <atomic>
#include <cstdint>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "featpinn/common.hpp"
#include "featpinn/jet.hpp"

namespace featpinn {

enum class Family {
  Identity,
  BasicEncoding,
  PositionalEncoding,
  RandomFourier,
  Sinusoidal,
  ComplexTriangle,
  ComplexGaussian,
  RbfInt,
  RbfCompact,
  RbfPoly,
  RbfSurjective,
};

enum class RbfKind {
  Gaussian,
  Cubic,
  ThinPlateSpline,
  Multiquadric,
  InverseMultiquadric,
};

std::string family_name(Family f);
Family family_from_name(const std::string& s);
std::string rbf_kind_name(RbfKind k);
RbfKind rbf_kind_from_name(const std::string& s);
bool is_rbf_family(Family f);

// Declarative description of a feature-mapping first layer.
struct FeatureMapSpec {
  Family family = Family::RbfInt;
  int m = 128;               // feature count
  double sigma = 1.0;        // Fourier / Gaussian width
  RbfKind rbf_kind = RbfKind::Gaussian;
  double xi = 1.0;           // cut-off distance (RbfCompact)
  double gamma = 1.0;        // modulation period (RbfSurjective)
  int p_terms = 0;           // polynomial term count (RbfPoly)
  std::uint64_t seed = 0;
  int complex_gaussian_cap = 4096;  // m^d guard for the Kronecker construction

  void validate(int input_dim) const;  // throws SpecError
};

// Realized feature map: the spec plus drawn frequencies / centers / sample
// locations. Centers and RBF weights (or the sinusoidal affine parameters)
// are trainable; their live values travel in a flat vector owned by the
// training loop and are passed back into eval().
class FeatureMap {
 public:
  FeatureMap(FeatureMapSpec spec, Box domain);

  const FeatureMapSpec& spec() const { return spec_; }
  const Box& domain() const { return domain_; }
  int input_dim() const { return static_cast<int>(domain_.dim()); }
  int output_dim() const;
  int n_trainable() const;

  // Flat initial trainable parameters: RBF families [centers row-major | w],
  // Sinusoidal [W row-major | b]. Empty for fixed encodings.
  std::vector<double> initial_trainable() const;

  // Raw standard-normal draws behind the initialization (kept for
  // distribution checks).
  const Matrix& raw_frequency_draws() const { return freq_raw_; }
  const Matrix& raw_center_draws() const { return center_raw_; }

  // Fixed per-feature sample locations of the complex families.
  const std::vector<double>& triangle_samples() const { return t_draws_; }
  const std::vector<double>& gaussian_samples() const { return tau_draws_; }

  // Count of evaluations that hit the vanishing-denominator regularization.
  long empty_support_events() const { return diag_->load(); }

  // Evaluates the map at x. J is the evaluation scalar (double, a tape
  // variable, or a jet of either); P is the scalar of the trainable
  // parameters, which must match the scalar inside J.
  template <class J, class P>
  void eval(std::span<const J> x, std::span<const P> trainable, std::vector<J>& out) const;

  template <class J, class P>
  std::vector<J> eval(std::span<const J> x, std::span<const P> trainable) const {
    std::vector<J> out;
    eval(x, trainable, out);
    return out;
  }

  // Convenience: evaluate at doubles with the initial trainable parameters.
  std::vector<double> eval_initial(std::span<const double> x) const;

 private:
  template <class J, class P>
  void eval_fourier(std::span<const J> x, std::span<const P> trainable, std::vector<J>& out) const;
  template <class J, class P>
  void eval_complex(std::span<const J> x, std::vector<J>& out) const;
  template <class J, class P>
  void eval_rbf(std::span<const J> x, std::span<const P> trainable, std::vector<J>& out) const;

  FeatureMapSpec spec_;
  Box domain_;
  Matrix freq_raw_;       // m x d standard normal (RandomFourier B, Sinusoidal W)
  Matrix center_raw_;     // m x d standard normal behind the RBF centers
  std::vector<double> sin_bias_;  // m, standard normal (Sinusoidal b)
  std::vector<double> t_draws_;   // m uniform [0,1] (ComplexTriangle)
  std::vector<double> tau_draws_; // m uniform [0,1] (ComplexGaussian)
  std::shared_ptr<std::atomic<long>> diag_;
};

// Spec-facing entry points with family dispatch checks. All evaluate at the
// initial trainable parameters.
std::vector<double> apply_fourier_family(const FeatureMap& map, std::span<const double> x);
std::vector<double> apply_complex_family(const FeatureMap& map, std::span<const double> x);
std::vector<double> rbf_features(const FeatureMap& map, std::span<const double> x);
std::vector<double> rbf_compact_support(const FeatureMap& map, std::span<const double> x);
std::vector<double> rbf_polynomial_tail(const FeatureMap& map, std::span<const double> x);
std::vector<double> rbf_surjective_modulation(const FeatureMap& map, std::span<const double> x);

namespace detail {

// Zero / one of the evaluation scalar, threaded through an existing value so
// tape-backed scalars stay attached to their tape.
template <class J>
inline J zero_like(const J& ref) {
  return 0.0 * ref;
}
template <class J>
inline J one_like(const J& ref) {
  return 0.0 * ref + 1.0;
}

// cos(beta * sqrt(u)) as a smooth function of u = r^2; series branch keeps
// jets finite at r = 0.
template <class J>
inline J radial_cosine(const J& u, double beta) {
  const double b2 = beta * beta;
  if (value_of(u) * b2 < 1e-4) {
    const J w = u * b2;
    return 1.0 - w * 0.5 + w * w * (1.0 / 24.0) - w * w * w * (1.0 / 720.0);
  }
  return cos(sqrt(u) * beta);
}

}  // namespace detail

// --- templated evaluation ----------------------------------------------------

template <class J, class P>
void FeatureMap::eval(std::span<const J> x, std::span<const P> trainable,
                      std::vector<J>& out) const {
  if (static_cast<int>(x.size()) != input_dim())
    throw SpecError("feature map: input dimension mismatch");
  if (static_cast<int>(trainable.size()) != n_trainable())
    throw SpecError("feature map: trainable parameter count mismatch");
  out.clear();
  switch (spec_.family) {
    case Family::Identity:
      out.assign(x.begin(), x.end());
      return;
    case Family::BasicEncoding:
    case Family::PositionalEncoding:
    case Family::RandomFourier:
    case Family::Sinusoidal:
      eval_fourier<J, P>(x, trainable, out);
      return;
    case Family::ComplexTriangle:
    case Family::ComplexGaussian:
      eval_complex<J, P>(x, out);
      return;
    case Family::RbfInt:
    case Family::RbfCompact:
    case Family::RbfPoly:
    case Family::RbfSurjective:
      eval_rbf<J, P>(x, trainable, out);
      return;
  }
  throw SpecError("feature map: unknown family");
}

template <class J, class P>
void FeatureMap::eval_fourier(std::span<const J> x, std::span<const P> trainable,
                              std::vector<J>& out) const {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const int d = input_dim();
  const int m = spec_.m;
  switch (spec_.family) {
    case Family::BasicEncoding: {
      out.reserve(2 * static_cast<std::size_t>(m) * d);
      for (int j = 0; j < m; ++j)
        for (int i = 0; i < d; ++i) {
          const J a = x[i] * two_pi;
          out.push_back(cos(a));
          out.push_back(sin(a));
        }
      return;
    }
    case Family::PositionalEncoding: {
      out.reserve(2 * static_cast<std::size_t>(m) * d);
      for (int j = 0; j < m; ++j) {
        const double freq = two_pi * std::pow(spec_.sigma, static_cast<double>(j) / m);
        for (int i = 0; i < d; ++i) {
          const J a = x[i] * freq;
          out.push_back(cos(a));
          out.push_back(sin(a));
        }
      }
      return;
    }
    case Family::RandomFourier: {
      out.reserve(2 * static_cast<std::size_t>(m));
      for (int k = 0; k < m; ++k) {
        J a = x[0] * (two_pi * spec_.sigma * freq_raw_(k, 0));
        for (int i = 1; i < d; ++i) a = a + x[i] * (two_pi * spec_.sigma * freq_raw_(k, i));
        out.push_back(cos(a));
        out.push_back(sin(a));
      }
      return;
    }
    case Family::Sinusoidal: {
      // trainable = [W row-major | b]
      out.reserve(static_cast<std::size_t>(m));
      for (int k = 0; k < m; ++k) {
        J a = x[0] * trainable[static_cast<std::size_t>(k) * d];
        for (int i = 1; i < d; ++i) a = a + x[i] * trainable[static_cast<std::size_t>(k) * d + i];
        a = a * two_pi + trainable[static_cast<std::size_t>(m) * d + k];
        out.push_back(sin(a));
      }
      return;
    }
    default:
      throw SpecError("apply_fourier_family: family is not Fourier");
  }
}

template <class J, class P>
void FeatureMap::eval_complex(std::span<const J> x, std::vector<J>& out) const {
  const int d = input_dim();
  const int m = spec_.m;
  if (spec_.family == Family::ComplexTriangle) {
    const double half_d = 0.5 * d;
    out.reserve(static_cast<std::size_t>(m) * d);
    for (int k = 0; k < m; ++k)
      for (int i = 0; i < d; ++i)
        out.push_back(max(1.0 - abs(x[i] - t_draws_[static_cast<std::size_t>(k)]) * (1.0 / half_d),
                          0.0));
    return;
  }
  // ComplexGaussian: Kronecker product across coordinates. Output size m^d is
  // capped at construction.
  const double inv_two_s2 = 0.5 / (spec_.sigma * spec_.sigma);
  std::vector<std::vector<J>> per_coord(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    per_coord[static_cast<std::size_t>(i)].reserve(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) {
      const J diff = x[i] - tau_draws_[static_cast<std::size_t>(k)] / d;
      per_coord[static_cast<std::size_t>(i)].push_back(exp(-(diff * diff * inv_two_s2)));
    }
  }
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  const std::size_t total = static_cast<std::size_t>(output_dim());
  out.reserve(total);
  for (std::size_t n = 0; n < total; ++n) {
    J prod = per_coord[0][static_cast<std::size_t>(idx[0])];
    for (int i = 1; i < d; ++i) prod = prod * per_coord[static_cast<std::size_t>(i)][static_cast<std::size_t>(idx[i])];
    out.push_back(prod);
    for (int i = d - 1; i >= 0; --i) {
      if (++idx[static_cast<std::size_t>(i)] < m) break;
      idx[static_cast<std::size_t>(i)] = 0;
    }
  }
}

template <class J, class P>
void FeatureMap::eval_rbf(std::span<const J> x, std::span<const P> trainable,
                          std::vector<J>& out) const {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const int d = input_dim();
  const int m = spec_.m;
  const double inv_s2 = 1.0 / (spec_.sigma * spec_.sigma);
  const double xi_sq = spec_.xi * spec_.xi;
  const bool compact = spec_.family == Family::RbfCompact;

  const J zero = detail::zero_like(x[0]);

  // Unnormalized basis values, expressed in r^2 so jets stay finite at r = 0.
  std::vector<J> terms;
  std::vector<J> rsqs;
  terms.reserve(static_cast<std::size_t>(m));
  rsqs.reserve(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) {
    J diff = x[0] - trainable[static_cast<std::size_t>(k) * d];
    J rsq = diff * diff;
    for (int i = 1; i < d; ++i) {
      diff = x[i] - trainable[static_cast<std::size_t>(k) * d + i];
      rsq = rsq + diff * diff;
    }
    rsqs.push_back(rsq);
    if (compact && value_of(rsq) > xi_sq) {
      terms.push_back(zero);
      continue;
    }
    J phi = zero;
    switch (spec_.rbf_kind) {
      case RbfKind::Gaussian:
        phi = exp(-(rsq * inv_s2));
        break;
      case RbfKind::Cubic:
        phi = pow(rsq, 1.5);
        break;
      case RbfKind::ThinPlateSpline:
        // r^2 log r = 0.5 u log u with u = r^2; defined as 0 at r = 0.
        phi = value_of(rsq) < 1e-300 ? zero : rsq * log(rsq) * 0.5;
        break;
      case RbfKind::Multiquadric:
        phi = sqrt(rsq + 1.0);
        break;
      case RbfKind::InverseMultiquadric:
        phi = 1.0 / sqrt(rsq + 1.0);
        break;
    }
    terms.push_back(phi * trainable[static_cast<std::size_t>(m) * d + k]);
  }

  J denom = terms[0];
  for (int k = 1; k < m; ++k) denom = denom + terms[k];
  if (std::abs(value_of(denom)) < 1e-12) {
    // Vanishing normalization (e.g. every compact support empty): floor the
    // denominator and record the event instead of emitting NaN.
    denom = denom + 1e-12;
    diag_->fetch_add(1, std::memory_order_relaxed);
  }

  out.reserve(static_cast<std::size_t>(output_dim()));
  for (int k = 0; k < m; ++k) {
    J f = terms[k] / denom;
    if (spec_.family == Family::RbfSurjective)
      f = f * detail::radial_cosine(rsqs[static_cast<std::size_t>(k)], two_pi / spec_.gamma);
    out.push_back(f);
  }

  if (spec_.family == Family::RbfPoly) {
    // Graded per-coordinate monomials 1, x_1..x_d, x_1^2..x_d^2, ... truncated
    // at p_terms entries.
    int emitted = 0;
    int degree = 0;
    while (emitted < spec_.p_terms) {
      if (degree == 0) {
        out.push_back(detail::one_like(x[0]));
        ++emitted;
      } else {
        for (int i = 0; i < d && emitted < spec_.p_terms; ++i) {
          J mono = x[i];
          for (int p = 1; p < degree; ++p) mono = mono * x[i];
          out.push_back(mono);
          ++emitted;
        }
      }
      ++degree;
    }
  }
}

}  // namespace featpinn

#endif  // FEATPINN_FEATUREMAP_HPP
