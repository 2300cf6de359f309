#include "featpinn/featuremap.hpp"

#include <cmath>
#include <random>

namespace featpinn {

std::string family_name(Family f) {
  switch (f) {
    case Family::Identity: return "identity";
    case Family::BasicEncoding: return "basic_encoding";
    case Family::PositionalEncoding: return "positional_encoding";
    case Family::RandomFourier: return "random_fourier";
    case Family::Sinusoidal: return "sinusoidal";
    case Family::ComplexTriangle: return "complex_triangle";
    case Family::ComplexGaussian: return "complex_gaussian";
    case Family::RbfInt: return "rbf_int";
    case Family::RbfCompact: return "rbf_compact";
    case Family::RbfPoly: return "rbf_poly";
    case Family::RbfSurjective: return "rbf_surjective";
  }
  throw SpecError("unknown feature family");
}

Family family_from_name(const std::string& s) {
  for (Family f : {Family::Identity, Family::BasicEncoding, Family::PositionalEncoding,
                   Family::RandomFourier, Family::Sinusoidal, Family::ComplexTriangle,
                   Family::ComplexGaussian, Family::RbfInt, Family::RbfCompact, Family::RbfPoly,
                   Family::RbfSurjective}) {
    if (family_name(f) == s) return f;
  }
  throw ConfigError("unknown feature family '" + s + "'");
}

std::string rbf_kind_name(RbfKind k) {
  switch (k) {
    case RbfKind::Gaussian: return "gaussian";
    case RbfKind::Cubic: return "cubic";
    case RbfKind::ThinPlateSpline: return "thin_plate_spline";
    case RbfKind::Multiquadric: return "multiquadric";
    case RbfKind::InverseMultiquadric: return "inverse_multiquadric";
  }
  throw SpecError("unknown RBF kind");
}

RbfKind rbf_kind_from_name(const std::string& s) {
  for (RbfKind k : {RbfKind::Gaussian, RbfKind::Cubic, RbfKind::ThinPlateSpline,
                    RbfKind::Multiquadric, RbfKind::InverseMultiquadric}) {
    if (rbf_kind_name(k) == s) return k;
  }
  throw ConfigError("unknown RBF kind '" + s + "'");
}

bool is_rbf_family(Family f) {
  return f == Family::RbfInt || f == Family::RbfCompact || f == Family::RbfPoly ||
         f == Family::RbfSurjective;
}

void FeatureMapSpec::validate(int input_dim) const {
  if (input_dim < 1) throw SpecError("feature spec: input dimension must be >= 1");
  if (m < 1) throw SpecError("feature spec: m must be >= 1");
  const bool uses_sigma = family == Family::PositionalEncoding ||
                          family == Family::RandomFourier ||
                          family == Family::ComplexGaussian ||
                          (is_rbf_family(family) && rbf_kind == RbfKind::Gaussian);
  if (uses_sigma && !(sigma > 0.0)) throw SpecError("feature spec: sigma must be > 0");
  if (family == Family::RbfCompact && !(xi > 0.0))
    throw SpecError("feature spec: xi must be > 0");
  if (family == Family::RbfSurjective && !(gamma > 0.0))
    throw SpecError("feature spec: gamma must be > 0");
  if (family == Family::RbfPoly && p_terms < 0)
    throw SpecError("feature spec: p_terms must be >= 0");
  if (family == Family::ComplexGaussian) {
    double size = 1.0;
    for (int i = 0; i < input_dim; ++i) size *= m;
    if (size > complex_gaussian_cap)
      throw SpecError("complex_gaussian feature size m^d = " + std::to_string(size) +
                      " exceeds cap " + std::to_string(complex_gaussian_cap));
  }
}

FeatureMap::FeatureMap(FeatureMapSpec spec, Box domain)
    : spec_(spec), domain_(std::move(domain)), diag_(std::make_shared<std::atomic<long>>(0)) {
  const int d = input_dim();
  spec_.validate(d);
  const int m = spec_.m;
  std::mt19937_64 rng = make_rng(spec_.seed, "featuremap");
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  switch (spec_.family) {
    case Family::RandomFourier:
    case Family::Sinusoidal:
      freq_raw_ = Matrix(static_cast<std::size_t>(m), static_cast<std::size_t>(d));
      for (double& v : freq_raw_.data) v = gauss(rng);
      if (spec_.family == Family::Sinusoidal) {
        sin_bias_.resize(static_cast<std::size_t>(m));
        for (double& v : sin_bias_) v = gauss(rng);
      }
      break;
    case Family::ComplexTriangle:
      t_draws_.resize(static_cast<std::size_t>(m));
      for (double& v : t_draws_) v = unif(rng);
      break;
    case Family::ComplexGaussian:
      tau_draws_.resize(static_cast<std::size_t>(m));
      for (double& v : tau_draws_) v = unif(rng);
      break;
    case Family::RbfInt:
    case Family::RbfCompact:
    case Family::RbfPoly:
    case Family::RbfSurjective:
      center_raw_ = Matrix(static_cast<std::size_t>(m), static_cast<std::size_t>(d));
      for (double& v : center_raw_.data) v = gauss(rng);
      break;
    default:
      break;
  }
}

int FeatureMap::output_dim() const {
  const int d = input_dim();
  const int m = spec_.m;
  switch (spec_.family) {
    case Family::Identity: return d;
    case Family::BasicEncoding:
    case Family::PositionalEncoding: return 2 * m * d;
    case Family::RandomFourier: return 2 * m;
    case Family::Sinusoidal: return m;
    case Family::ComplexTriangle: return m * d;
    case Family::ComplexGaussian: {
      int size = 1;
      for (int i = 0; i < d; ++i) size *= m;
      return size;
    }
    case Family::RbfInt:
    case Family::RbfCompact:
    case Family::RbfSurjective: return m;
    case Family::RbfPoly: return m + spec_.p_terms;
  }
  throw SpecError("unknown feature family");
}

int FeatureMap::n_trainable() const {
  const int d = input_dim();
  const int m = spec_.m;
  if (is_rbf_family(spec_.family)) return m * d + m;       // centers + weights
  if (spec_.family == Family::Sinusoidal) return m * d + m;  // W + b
  return 0;
}

std::vector<double> FeatureMap::initial_trainable() const {
  const int d = input_dim();
  const int m = spec_.m;
  std::vector<double> p;
  if (is_rbf_family(spec_.family)) {
    p.reserve(static_cast<std::size_t>(m * d + m));
    // Standard-normal draws affinely mapped into the domain: half the domain
    // width per unit z keeps ~95% of centers inside the box.
    for (int k = 0; k < m; ++k)
      for (int i = 0; i < d; ++i)
        p.push_back(domain_.mid(static_cast<std::size_t>(i)) +
                    0.25 * domain_.width(static_cast<std::size_t>(i)) *
                        center_raw_(static_cast<std::size_t>(k), static_cast<std::size_t>(i)));
    p.insert(p.end(), static_cast<std::size_t>(m), 1.0);  // uniform partition weights
    return p;
  }
  if (spec_.family == Family::Sinusoidal) {
    p.assign(freq_raw_.data.begin(), freq_raw_.data.end());
    p.insert(p.end(), sin_bias_.begin(), sin_bias_.end());
    return p;
  }
  return p;
}

std::vector<double> FeatureMap::eval_initial(std::span<const double> x) const {
  const std::vector<double> train = initial_trainable();
  return eval<double, double>(x, train);
}

namespace {
void require_family(const FeatureMap& map, std::initializer_list<Family> allowed,
                    const char* op) {
  for (Family f : allowed)
    if (map.spec().family == f) return;
  throw SpecError(std::string(op) + ": wrong family '" + family_name(map.spec().family) + "'");
}
}  // namespace

std::vector<double> apply_fourier_family(const FeatureMap& map, std::span<const double> x) {
  require_family(map, {Family::BasicEncoding, Family::PositionalEncoding, Family::RandomFourier,
                       Family::Sinusoidal},
                 "apply_fourier_family");
  return map.eval_initial(x);
}

std::vector<double> apply_complex_family(const FeatureMap& map, std::span<const double> x) {
  require_family(map, {Family::ComplexTriangle, Family::ComplexGaussian}, "apply_complex_family");
  return map.eval_initial(x);
}

std::vector<double> rbf_features(const FeatureMap& map, std::span<const double> x) {
  require_family(map, {Family::RbfInt, Family::RbfCompact, Family::RbfPoly, Family::RbfSurjective},
                 "rbf_features");
  return map.eval_initial(x);
}

std::vector<double> rbf_compact_support(const FeatureMap& map, std::span<const double> x) {
  require_family(map, {Family::RbfCompact}, "rbf_compact_support");
  return map.eval_initial(x);
}

std::vector<double> rbf_polynomial_tail(const FeatureMap& map, std::span<const double> x) {
  require_family(map, {Family::RbfPoly}, "rbf_polynomial_tail");
  return map.eval_initial(x);
}

std::vector<double> rbf_surjective_modulation(const FeatureMap& map, std::span<const double> x) {
  require_family(map, {Family::RbfSurjective}, "rbf_surjective_modulation");
  return map.eval_initial(x);
}

}  // namespace featpinn
