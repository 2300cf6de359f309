#include "featpinn/config.hpp"

#include <fstream>
#include <set>

#include "featpinn/pde.hpp"

namespace featpinn {

namespace {

using nlohmann::json;

// Typed view over a JSON object that records which keys were read and rejects
// the rest, so configuration typos fail loudly with the offending key name.
class StrictObject {
 public:
  StrictObject(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config: '" + path_ + "' must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    return convert<T>(j_.at(key), key);
  }

  template <class T>
  T require(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError("config: missing required key '" + at(key) + "'");
    return convert<T>(j_.at(key), key);
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key()))
        throw ConfigError("config: unknown key '" + at(item.key()) + "'");
  }

 private:
  std::string at(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  template <class T>
  T convert(const json& v, const std::string& key) const {
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config: bad value for '" + at(key) + "'");
    }
  }

  const json& j_;
  std::set<std::string> seen_;
  std::string path_;
};

FeatureMapSpec parse_feature_map(const json& j) {
  StrictObject o(j, "feature_map");
  FeatureMapSpec s;
  s.family = family_from_name(o.require<std::string>("family"));
  s.m = o.get<int>("m", s.m);
  s.sigma = o.get<double>("sigma", s.sigma);
  if (o.has("rbf_kind")) s.rbf_kind = rbf_kind_from_name(o.require<std::string>("rbf_kind"));
  s.xi = o.get<double>("xi", s.xi);
  s.gamma = o.get<double>("gamma", s.gamma);
  s.p_terms = o.get<int>("p_terms", s.p_terms);
  s.seed = o.get<std::uint64_t>("seed", s.seed);
  s.complex_gaussian_cap = o.get<int>("complex_gaussian_cap", s.complex_gaussian_cap);
  o.finish();
  return s;
}

InverseConfig parse_inverse(const json& j) {
  StrictObject o(j, "training.inverse");
  InverseConfig inv;
  inv.enabled = o.get<bool>("enabled", inv.enabled);
  inv.data_points = o.get<int>("data_points", inv.data_points);
  inv.noise_fraction = o.get<double>("noise_fraction", inv.noise_fraction);
  inv.lambda_data = o.get<double>("lambda_data", inv.lambda_data);
  o.finish();
  return inv;
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  StrictObject root(doc, "");
  ExperimentConfig cfg;

  {
    const json* j = root.child("problem");
    if (!j) throw ConfigError("config: missing required key 'problem'");
    StrictObject o(*j, "problem");
    cfg.train.problem = o.require<std::string>("name");
    cfg.train.problem_options.dim = o.get<int>("dim", cfg.train.problem_options.dim);
    cfg.train.problem_options.uneven = o.get<bool>("uneven", cfg.train.problem_options.uneven);
    cfg.train.reference_path = o.get<std::string>("reference", "");
    o.finish();
    bool known = false;
    for (const auto& n : problem_names()) known |= n == cfg.train.problem;
    if (!known) throw ConfigError("config: unknown problem '" + cfg.train.problem + "'");
  }

  {
    const json* j = root.child("feature_map");
    if (!j) throw ConfigError("config: missing required key 'feature_map'");
    cfg.train.feature_map = parse_feature_map(*j);
  }

  {
    const json* j = root.child("network");
    if (!j) throw ConfigError("config: missing required key 'network'");
    StrictObject o(*j, "network");
    cfg.train.widths = o.require<std::vector<int>>("widths");
    const std::string act = o.get<std::string>("activation", "tanh");
    if (act != "tanh") throw ConfigError("config: unsupported activation '" + act + "'");
    o.finish();
  }

  if (const json* j = root.child("training")) {
    StrictObject o(*j, "training");
    TrainConfig& t = cfg.train;
    t.n_r = o.get<int>("n_r", t.n_r);
    t.n_ic = o.get<int>("n_ic", t.n_ic);
    t.n_bc = o.get<int>("n_bc", t.n_bc);
    t.lambda_r = o.get<double>("lambda_r", t.lambda_r);
    t.lambda_ic = o.get<double>("lambda_ic", t.lambda_ic);
    t.lambda_bc = o.get<double>("lambda_bc", t.lambda_bc);
    t.adam_steps = o.get<int>("adam_steps", t.adam_steps);
    t.adam_lr = o.get<double>("adam_lr", t.adam_lr);
    t.lbfgs_steps = o.get<int>("lbfgs_steps", t.lbfgs_steps);
    t.lbfgs_memory = o.get<int>("lbfgs_memory", t.lbfgs_memory);
    t.resample_every = o.get<int>("resample_every", t.resample_every);
    t.seed = o.get<std::uint64_t>("seed", t.seed);
    t.record_every = o.get<int>("record_every", t.record_every);
    t.checkpoint_path = o.get<std::string>("checkpoint_path", "");
    t.checkpoint_every = o.get<int>("checkpoint_every", t.checkpoint_every);
    if (const json* ji = o.child("inverse")) t.inverse = parse_inverse(*ji);
    o.finish();
  }

  if (const json* j = root.child("sweep")) {
    StrictObject o(*j, "sweep");
    SweepSpec s;
    s.axis = sweep_axis_from_name(o.require<std::string>("axis"));
    s.values = o.require<std::vector<double>>("values");
    s.seeds = o.require<std::vector<std::uint64_t>>("seeds");
    const bool full_budget = o.get<bool>("full_budget", false);
    o.finish();
    s.base = cfg.train;
    if (!full_budget) s.base.adam_steps = std::min(s.base.adam_steps, 5000);
    cfg.sweep = std::move(s);
  }

  if (const json* j = root.child("output")) {
    StrictObject o(*j, "output");
    cfg.output.dir = o.get<std::string>("dir", cfg.output.dir);
    cfg.output.report = o.get<bool>("report", cfg.output.report);
    cfg.output.curves = o.get<bool>("curves", cfg.output.curves);
    cfg.output.prediction_grid = o.get<bool>("prediction_grid", cfg.output.prediction_grid);
    cfg.output.grid_resolution = o.get<int>("grid_resolution", cfg.output.grid_resolution);
    o.finish();
  }

  root.finish();
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  json doc;
  try {
    doc = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: JSON parse error: ") + e.what());
  }
  return parse_config(doc);
}

void validate_config(const ExperimentConfig& config) {
  config.train.validate();
  auto problem = make_problem(config.train.problem, config.train.problem_options);
  if (config.train.widths.front() != problem->dims())
    throw ConfigError("config: network.widths[0] must equal the problem dimension " +
                      std::to_string(problem->dims()));
  if (config.train.widths.back() != problem->n_outputs())
    throw ConfigError("config: network.widths must end with the problem output count " +
                      std::to_string(problem->n_outputs()));
  config.train.feature_map.validate(problem->dims());
  if (config.sweep) config.sweep->validate();
  if (config.output.grid_resolution < 2)
    throw ConfigError("config: output.grid_resolution must be >= 2");
}

}  // namespace featpinn
