#ifndef FEATPINN_ANALYSIS_HPP
#define FEATPINN_ANALYSIS_HPP

#include <string>
#include <vector>

#include "featpinn/train.hpp"

namespace featpinn {

enum class SweepAxis { Dimension, Xi, Gamma, FeatureCount, PolyCount, RbfKind };

std::string sweep_axis_name(SweepAxis a);
SweepAxis sweep_axis_from_name(const std::string& s);

// One experiment axis swept over values x seeds on top of a base
// configuration. Integer-valued axes (Dimension, FeatureCount, PolyCount,
// RbfKind) truncate the value; RbfKind indexes the kind list.
struct SweepSpec {
  TrainConfig base;
  SweepAxis axis = SweepAxis::FeatureCount;
  std::vector<double> values;
  std::vector<std::uint64_t> seeds;

  void validate() const {
    if (values.empty()) throw SpecError("sweep: values must be non-empty");
    if (seeds.empty()) throw SpecError("sweep: seeds must be non-empty");
  }
};

struct SweepCell {
  double value = 0.0;
  std::uint64_t seed = 0;
  double l2re = std::numeric_limits<double>::quiet_NaN();
  LossParts final_loss;
  double wall_seconds = 0.0;
  std::string error;  // non-empty when the cell failed; the sweep continues
};

struct SweepAggregate {
  double value = 0.0;
  double mean_l2re = std::numeric_limits<double>::quiet_NaN();
  double std_l2re = 0.0;
  int n = 0;  // successful cells behind the aggregate
};

struct SweepResult {
  std::vector<SweepCell> cells;  // values-major, seeds-minor order
  std::vector<SweepAggregate> aggregates;
};

// Materializes the cell configuration for one (value, seed) pair.
TrainConfig apply_sweep_axis(const TrainConfig& base, SweepAxis axis, double value,
                             std::uint64_t seed);

SweepResult run_sweep(const SweepSpec& spec);

// Per-value sample mean and (n-1)-denominator standard deviation of l2re over
// successful cells.
std::vector<SweepAggregate> aggregate(const std::vector<SweepCell>& cells);

}  // namespace featpinn

#endif  // FEATPINN_ANALYSIS_HPP
