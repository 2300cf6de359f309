#ifndef FEATPINN_CONFIG_HPP
#define FEATPINN_CONFIG_HPP

#include <optional>
#include <string>

#include <json.hpp>

#include "featpinn/analysis.hpp"

namespace featpinn {

struct OutputConfig {
  std::string dir = "out";
  bool report = true;
  bool curves = true;
  bool prediction_grid = false;
  int grid_resolution = 101;
};

// Parsed experiment document: sections problem, feature_map, network,
// training, sweep (optional), output. Unknown keys are rejected anywhere.
struct ExperimentConfig {
  TrainConfig train;
  std::optional<SweepSpec> sweep;
  OutputConfig output;
};

ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config_file(const std::string& path);

// Structural + registry validation without running anything (also executes
// the PDE registry self-consistency gate for the configured problem).
void validate_config(const ExperimentConfig& config);

}  // namespace featpinn

#endif  // FEATPINN_CONFIG_HPP
