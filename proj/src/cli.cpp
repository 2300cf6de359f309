#include "featpinn/cli.hpp"

#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "featpinn/config.hpp"
#include "featpinn/report.hpp"

namespace featpinn::cli {

namespace {

struct Options {
  std::string config_path;
  double sigma = 1.0;
  long samples = 100000;
  std::uint64_t seed = 0;
};

struct Commands {
  CLI::App* train = nullptr;
  CLI::App* sweep = nullptr;
  CLI::App* kernel = nullptr;
  CLI::App* surjectivity = nullptr;
  CLI::App* list_problems = nullptr;
  CLI::App* validate = nullptr;
};

std::unique_ptr<CLI::App> build_app(Options& o, Commands& c) {
  auto app = std::make_unique<CLI::App>(
      "featpinn: physics-informed networks with feature-mapping first layers");
  app->require_subcommand(1);

  c.train = app->add_subcommand("train", "Train one configuration and emit report files");
  c.train->add_option("config", o.config_path, "experiment config JSON")->required();

  c.sweep = app->add_subcommand("sweep", "Run the sweep section of a configuration");
  c.sweep->add_option("config", o.config_path, "experiment config JSON")->required();

  c.kernel = app->add_subcommand("kernel",
                                 "Limiting-kernel spectra and decay prediction for a config");
  c.kernel->add_option("config", o.config_path, "experiment config JSON")->required();

  c.surjectivity =
      app->add_subcommand("surjectivity", "Monte-Carlo injectivity probability vs the bound");
  c.surjectivity->add_option("--sigma", o.sigma, "frequency scale sigma")->required();
  c.surjectivity->add_option("--samples", o.samples, "Monte-Carlo draws (default 100000)");
  c.surjectivity->add_option("--seed", o.seed, "random seed (default 0)");

  c.list_problems = app->add_subcommand("list-problems", "List registered PDE problems");

  c.validate = app->add_subcommand("validate", "Validate a configuration without running it");
  c.validate->add_option("config", o.config_path, "experiment config JSON")->required();

  return app;
}

int emit_error(const std::string& stage, const std::string& message, int code) {
  nlohmann::json j;
  j["error"] = {{"stage", stage}, {"message", message}, {"exit_code", code}};
  std::cout << j.dump() << std::endl;
  return code;
}

int run_train(const std::string& path) {
  ExperimentConfig cfg = load_config_file(path);
  validate_config(cfg);
  auto problem = make_problem(cfg.train.problem, cfg.train.problem_options);
  TrainResult result = train(cfg.train);
  const auto files = emit_report(cfg, result, *problem);
  nlohmann::json out = report_to_json(cfg.train, result.report);
  out["files"] = files;
  std::cout << out.dump(2) << std::endl;
  return 0;
}

int run_sweep_cmd(const std::string& path) {
  ExperimentConfig cfg = load_config_file(path);
  validate_config(cfg);
  if (!cfg.sweep) throw ConfigError("config has no 'sweep' section");
  SweepResult result = run_sweep(*cfg.sweep);
  const auto files = emit_sweep(cfg, result);
  nlohmann::json out;
  out["cells"] = result.cells.size();
  nlohmann::json aggs = nlohmann::json::array();
  for (const auto& a : result.aggregates)
    aggs.push_back({{"value", a.value},
                    {"mean_l2re", std::isnan(a.mean_l2re) ? nlohmann::json(nullptr)
                                                          : nlohmann::json(a.mean_l2re)},
                    {"std_l2re", a.std_l2re},
                    {"n", a.n}});
  out["aggregates"] = aggs;
  out["files"] = files;
  std::cout << out.dump(2) << std::endl;
  return 0;
}

int run_kernel(const std::string& path) {
  ExperimentConfig cfg = load_config_file(path);
  validate_config(cfg);
  auto problem = make_problem(cfg.train.problem, cfg.train.problem_options);

  FeatureMapSpec fm_spec = cfg.train.feature_map;
  fm_spec.seed = hash_tag(cfg.train.seed, "fm_realize", fm_spec.seed);
  FeatureMap map(fm_spec, problem->domain());

  const int n_points = std::clamp(cfg.train.n_r, 4, 32);
  std::mt19937_64 rng = make_rng(cfg.train.seed, "kernel_points");
  Matrix inputs;
  problem->sample_interior(n_points, rng, inputs);

  GaussianExpectationRule rule;
  rule.seed = cfg.train.seed;
  const int depth = static_cast<int>(cfg.train.widths.size()) - 1;
  const NtkResult ntk = ntk_propagate(inputs, map, depth, rule);
  const EigResult eig = sym_eig(ntk.theta.back().entries);

  std::vector<double> targets(inputs.rows, 1.0);
  if (problem->has_analytical()) {
    std::vector<double> x(inputs.cols);
    for (std::size_t i = 0; i < inputs.rows; ++i) {
      for (std::size_t c = 0; c < inputs.cols; ++c) x[c] = inputs(i, c);
      targets[i] = problem->analytical(x);
    }
  }
  std::vector<double> times;
  for (int i = 0; i <= 10; ++i) times.push_back(0.1 * i);
  const DecayPrediction decay = spectral_decay_predict(ntk.theta.back(), targets, times);

  const auto files = emit_spectra(cfg.output.dir, eig, decay);
  nlohmann::json out;
  out["points"] = inputs.rows;
  out["depth"] = depth;
  out["top_eigenvalue"] = eig.values.front();
  out["correlation_clips"] = ntk.diag.correlation_clips;
  out["files"] = files;
  std::cout << out.dump(2) << std::endl;
  return 0;
}

int run_surjectivity(double sigma, long samples, std::uint64_t seed) {
  const SurjectivityEstimate e = surjectivity_estimate(sigma, samples, seed);
  nlohmann::json out;
  out["sigma"] = sigma;
  out["samples"] = samples;
  out["mc_probability"] = e.mc_probability;
  out["analytic_bound"] = e.analytic_bound;
  std::cout << out.dump(2) << std::endl;
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  Options o;
  Commands c;
  auto app = build_app(o, c);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app->parse(rev);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      std::cout << app->help() << std::endl;
      return 0;
    }
    return emit_error("arguments", e.what(), 2);
  }

  std::string stage = "setup";
  try {
    if (c.list_problems->parsed()) {
      for (const auto& n : problem_names()) std::cout << n << "\n";
      return 0;
    }
    if (c.validate->parsed()) {
      stage = "validate";
      validate_config(load_config_file(o.config_path));
      std::cout << R"({"valid":true})" << std::endl;
      return 0;
    }
    if (c.surjectivity->parsed()) {
      stage = "surjectivity";
      return run_surjectivity(o.sigma, o.samples, o.seed);
    }
    if (c.train->parsed()) {
      stage = "train";
      return run_train(o.config_path);
    }
    if (c.sweep->parsed()) {
      stage = "sweep";
      return run_sweep_cmd(o.config_path);
    }
    if (c.kernel->parsed()) {
      stage = "kernel";
      return run_kernel(o.config_path);
    }
    return emit_error("arguments", "no subcommand", 2);
  } catch (const ConfigError& e) {
    return emit_error(stage, e.what(), 2);
  } catch (const std::exception& e) {
    return emit_error(stage, e.what(), 1);
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

std::vector<std::string> registered_flags() {
  Options o;
  Commands c;
  auto app = build_app(o, c);
  std::vector<std::string> names;
  auto collect = [&](const CLI::App* a) {
    for (const CLI::Option* opt : a->get_options()) names.push_back(opt->get_name());
  };
  collect(app.get());
  for (const CLI::App* sub : app->get_subcommands({})) collect(sub);
  return names;
}

std::string full_help() {
  Options o;
  Commands c;
  auto app = build_app(o, c);
  std::string text = app->help();
  for (CLI::App* sub : app->get_subcommands({})) text += "\n" + sub->help();
  return text;
}

}  // namespace featpinn::cli
