#include "featpinn/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace featpinn {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open output file for writing: " + path);
  return f;
}

nlohmann::json maybe(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

}  // namespace

nlohmann::json report_to_json(const TrainConfig& config, const TrainReport& report) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["problem"] = config.problem;
  j["feature_family"] = family_name(config.feature_map.family);
  j["seed"] = config.seed;
  j["adam_steps"] = report.adam_steps;
  j["lbfgs_steps"] = report.lbfgs_steps;
  j["l2re"] = maybe(report.l2re);
  j["final_loss"] = {{"total", report.final_loss.total}, {"r", report.final_loss.r},
                     {"ic", report.final_loss.ic},       {"bc", report.final_loss.bc},
                     {"data", report.final_loss.data}};
  j["diagnostics"] = {{"empty_support_events", report.empty_support_events},
                      {"lbfgs_stalls", report.lbfgs_stalls}};
  if (!report.recovered_coeffs.empty()) {
    j["recovered_coeffs"] = report.recovered_coeffs;
    j["coeff_l2re"] = maybe(report.coeff_l2re);
  }
  j["wall_seconds"] = report.wall_seconds;
  return j;
}

void write_loss_curve_csv(const std::string& path, const std::vector<LossRecord>& curves,
                          bool with_data_column) {
  std::ofstream f = open_out(path);
  f << "step,loss_total,loss_r,loss_ic,loss_bc";
  if (with_data_column) f << ",loss_data";
  f << "\n";
  for (const auto& rec : curves) {
    f << rec.step << ',' << fmt(rec.parts.total) << ',' << fmt(rec.parts.r) << ','
      << fmt(rec.parts.ic) << ',' << fmt(rec.parts.bc);
    if (with_data_column) f << ',' << fmt(rec.parts.data);
    f << "\n";
  }
}

namespace {

// Lattice over the problem domain in the reference-grid CSV format.
void write_prediction_grid(const std::string& path, const PdeProblem& problem,
                           const TrainState& state, int resolution) {
  std::ofstream f = open_out(path);
  const int dims = problem.dims();
  for (int d = 0; d < dims; ++d) f << "dim" << d << ',';
  for (int c = 0; c < problem.n_outputs(); ++c) f << 'u' << c << (c + 1 < problem.n_outputs() ? "," : "");
  f << "\n";
  std::vector<int> idx(static_cast<std::size_t>(dims), 0);
  std::vector<double> x(static_cast<std::size_t>(dims));
  std::size_t total = 1;
  for (int d = 0; d < dims; ++d) total *= static_cast<std::size_t>(resolution);
  const Box& dom = problem.domain();
  for (std::size_t n = 0; n < total; ++n) {
    for (int d = 0; d < dims; ++d)
      x[static_cast<std::size_t>(d)] =
          dom.lo[static_cast<std::size_t>(d)] +
          dom.width(static_cast<std::size_t>(d)) * idx[static_cast<std::size_t>(d)] /
              (resolution - 1);
    const std::vector<double> u =
        state.model.forward<double, double>(x, std::span<const double>(state.theta));
    for (int d = 0; d < dims; ++d) f << fmt(x[static_cast<std::size_t>(d)]) << ',';
    for (std::size_t c = 0; c < u.size(); ++c) f << fmt(u[c]) << (c + 1 < u.size() ? "," : "");
    f << "\n";
    for (int d = dims - 1; d >= 0; --d) {
      if (++idx[static_cast<std::size_t>(d)] < resolution) break;
      idx[static_cast<std::size_t>(d)] = 0;
    }
  }
}

}  // namespace

std::vector<std::string> emit_report(const ExperimentConfig& config, const TrainResult& result,
                                     const PdeProblem& problem) {
  std::filesystem::create_directories(config.output.dir);
  std::vector<std::string> written;
  if (config.output.report) {
    const std::string path = config.output.dir + "/report.json";
    std::ofstream f = open_out(path);
    f << report_to_json(config.train, result.report).dump(2) << "\n";
    written.push_back(path);
  }
  if (config.output.curves) {
    const std::string path = config.output.dir + "/curves.csv";
    write_loss_curve_csv(path, result.report.curves, config.train.inverse.enabled);
    written.push_back(path);
  }
  if (config.output.prediction_grid) {
    const std::string path = config.output.dir + "/prediction.csv";
    write_prediction_grid(path, problem, result.state, config.output.grid_resolution);
    written.push_back(path);
  }
  return written;
}

std::vector<std::string> emit_sweep(const ExperimentConfig& config, const SweepResult& result) {
  std::filesystem::create_directories(config.output.dir);
  std::vector<std::string> written;
  {
    const std::string path = config.output.dir + "/sweep_cells.csv";
    std::ofstream f = open_out(path);
    f << "axis_value,seed,l2re,loss_r,loss_ic,loss_bc,wall_s\n";
    for (const auto& c : result.cells) {
      f << fmt(c.value) << ',' << c.seed << ',' << fmt(c.l2re) << ',' << fmt(c.final_loss.r)
        << ',' << fmt(c.final_loss.ic) << ',' << fmt(c.final_loss.bc) << ','
        << fmt(c.wall_seconds) << "\n";
    }
    written.push_back(path);
  }
  {
    const std::string path = config.output.dir + "/sweep_aggregate.csv";
    std::ofstream f = open_out(path);
    f << "axis_value,mean_l2re,std_l2re\n";
    for (const auto& a : result.aggregates)
      f << fmt(a.value) << ',' << fmt(a.mean_l2re) << ',' << fmt(a.std_l2re) << "\n";
    written.push_back(path);
  }
  return written;
}

std::vector<std::string> emit_spectra(const std::string& dir, const EigResult& eig,
                                      const DecayPrediction& decay) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> written;
  {
    const std::string path = dir + "/spectrum.csv";
    std::ofstream f = open_out(path);
    f << "index,eigenvalue\n";
    for (std::size_t i = 0; i < eig.values.size(); ++i)
      f << i << ',' << fmt(eig.values[i]) << "\n";
    written.push_back(path);
  }
  {
    const std::string path = dir + "/decay.csv";
    std::ofstream f = open_out(path);
    f << "t,mode_index,predicted_error\n";
    for (std::size_t ti = 0; ti < decay.times.size(); ++ti)
      for (std::size_t i = 0; i < decay.eigenvalues.size(); ++i)
        f << fmt(decay.times[ti]) << ',' << i << ',' << fmt(decay.modes(i, ti)) << "\n";
    written.push_back(path);
  }
  return written;
}

}  // namespace featpinn
