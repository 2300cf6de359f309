#ifndef FEATPINN_REPORT_HPP
#define FEATPINN_REPORT_HPP

#include <string>

#include <json.hpp>

#include "featpinn/config.hpp"
#include "featpinn/kernel.hpp"

namespace featpinn {

// Schema-versioned report document. Wall-time fields are reported but
// excluded from determinism contracts.
nlohmann::json report_to_json(const TrainConfig& config, const TrainReport& report);

// Writes report.json, curves.csv and (optionally) a prediction grid CSV into
// output.dir. Returns the list of files written.
std::vector<std::string> emit_report(const ExperimentConfig& config, const TrainResult& result,
                                     const PdeProblem& problem);

std::vector<std::string> emit_sweep(const ExperimentConfig& config, const SweepResult& result);

// Spectra CSVs: index,eigenvalue and t,mode_index,predicted_error.
std::vector<std::string> emit_spectra(const std::string& dir, const EigResult& eig,
                                      const DecayPrediction& decay);

void write_loss_curve_csv(const std::string& path, const std::vector<LossRecord>& curves,
                          bool with_data_column);

}  // namespace featpinn

#endif  // FEATPINN_REPORT_HPP
