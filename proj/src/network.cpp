#include "featpinn/network.hpp"

#include <cstring>
#include <fstream>
#include <random>

#include <json.hpp>

#include "featpinn/autodiff.hpp"

namespace featpinn {

std::vector<double> init_mlp(const MlpShape& shape, std::uint64_t seed) {
  shape.validate();
  if (shape.n_layers() < 2)
    throw SpecError("init_mlp: at least 2 parameterized layers required");
  std::vector<double> theta;
  theta.reserve(shape.n_params());
  for (int l = 1; l <= shape.n_layers(); ++l) {
    const int fan_in = shape.widths[static_cast<std::size_t>(l - 1)];
    const int fan_out = shape.widths[static_cast<std::size_t>(l)];
    std::mt19937_64 rng = make_rng(seed, "xavier", static_cast<std::uint64_t>(l));
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-a, a);
    for (int i = 0; i < fan_out * fan_in; ++i) theta.push_back(u(rng));
    if (shape.with_bias) theta.insert(theta.end(), static_cast<std::size_t>(fan_out), 0.0);
  }
  return theta;
}

std::vector<double> init_mlp_theory(const MlpShape& shape, std::uint64_t seed) {
  shape.validate();
  std::vector<double> theta;
  theta.reserve(shape.n_params());
  for (int l = 1; l <= shape.n_layers(); ++l) {
    const int fan_in = shape.widths[static_cast<std::size_t>(l - 1)];
    const int fan_out = shape.widths[static_cast<std::size_t>(l)];
    std::mt19937_64 rng = make_rng(seed, "theory", static_cast<std::uint64_t>(l));
    std::normal_distribution<double> g(0.0, 1.0);
    for (int i = 0; i < fan_out * fan_in; ++i) theta.push_back(g(rng));
    if (shape.with_bias)
      for (int i = 0; i < fan_out; ++i) theta.push_back(g(rng));
  }
  return theta;
}

double input_gradient_variance(const PinnModel& model, std::span<const double> theta,
                               int n_samples, std::uint64_t seed) {
  if (n_samples < 2) throw SpecError("input_gradient_variance: need n_samples >= 2");
  if (model.shape.widths.back() != 1)
    throw SpecError("input_gradient_variance: scalar-output network required");
  const Box& dom = model.map.domain();
  const std::size_t d = dom.dim();
  std::mt19937_64 rng = make_rng(seed, "igv");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> grads;
  grads.reserve(static_cast<std::size_t>(n_samples) * d);
  std::vector<double> x(d);
  for (int s = 0; s < n_samples; ++s) {
    for (std::size_t j = 0; j < d; ++j) x[j] = dom.lo[j] + dom.width(j) * u(rng);
    Matrix jac = input_jacobian(
        [&](const std::vector<Var>& xs) {
          return model.forward(std::span<const Var>(xs),
                               std::span<const double>(theta));
        },
        x);
    for (std::size_t j = 0; j < d; ++j) grads.push_back(jac(0, j));
  }
  return sample_variance(grads);
}

namespace {
constexpr char kMagic[4] = {'F', 'P', 'N', 'N'};
}

void save_checkpoint(const std::string& path, const PinnModel& model,
                     std::span<const double> theta, std::int64_t step) {
  nlohmann::json header;
  header["version"] = 1;
  header["widths"] = model.shape.widths;
  header["n_feature_trainable"] = model.n_fm();
  header["n_coeffs"] = model.n_coeffs;
  header["step"] = step;
  header["n_params"] = theta.size();
  const std::string h = header.dump();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open checkpoint file for writing: " + path);
  f.write(kMagic, 4);
  const std::uint64_t hlen = h.size();
  f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  f.write(h.data(), static_cast<std::streamsize>(h.size()));
  f.write(reinterpret_cast<const char*>(theta.data()),
          static_cast<std::streamsize>(theta.size() * sizeof(double)));
  if (!f) throw Error("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open checkpoint file: " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0)
    throw Error("not a checkpoint file: " + path);
  std::uint64_t hlen = 0;
  f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string h(hlen, '\0');
  f.read(h.data(), static_cast<std::streamsize>(hlen));
  nlohmann::json header = nlohmann::json::parse(h);
  Checkpoint ck;
  ck.widths = header.at("widths").get<std::vector<int>>();
  ck.n_fm = header.at("n_feature_trainable").get<std::size_t>();
  ck.n_coeffs = header.at("n_coeffs").get<int>();
  ck.step = header.at("step").get<std::int64_t>();
  const std::size_t n = header.at("n_params").get<std::size_t>();
  ck.theta.resize(n);
  f.read(reinterpret_cast<char*>(ck.theta.data()),
         static_cast<std::streamsize>(n * sizeof(double)));
  if (!f) throw Error("truncated checkpoint: " + path);
  return ck;
}

}  // namespace featpinn
