#include "featpinn/analysis.hpp"

#include <cmath>
#include <map>

namespace featpinn {

std::string sweep_axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::Dimension: return "dimension";
    case SweepAxis::Xi: return "xi";
    case SweepAxis::Gamma: return "gamma";
    case SweepAxis::FeatureCount: return "feature_count";
    case SweepAxis::PolyCount: return "poly_count";
    case SweepAxis::RbfKind: return "rbf_kind";
  }
  throw SpecError("unknown sweep axis");
}

SweepAxis sweep_axis_from_name(const std::string& s) {
  for (SweepAxis a : {SweepAxis::Dimension, SweepAxis::Xi, SweepAxis::Gamma,
                      SweepAxis::FeatureCount, SweepAxis::PolyCount, SweepAxis::RbfKind}) {
    if (sweep_axis_name(a) == s) return a;
  }
  throw ConfigError("unknown sweep axis '" + s + "'");
}

TrainConfig apply_sweep_axis(const TrainConfig& base, SweepAxis axis, double value,
                             std::uint64_t seed) {
  TrainConfig c = base;
  c.seed = seed;
  switch (axis) {
    case SweepAxis::Dimension: {
      const int d = static_cast<int>(value);
      c.problem_options.dim = d;
      if (!c.widths.empty()) c.widths.front() = d;
      break;
    }
    case SweepAxis::Xi:
      c.feature_map.xi = value;
      break;
    case SweepAxis::Gamma:
      c.feature_map.gamma = value;
      break;
    case SweepAxis::FeatureCount:
      c.feature_map.m = static_cast<int>(value);
      break;
    case SweepAxis::PolyCount:
      c.feature_map.p_terms = static_cast<int>(value);
      break;
    case SweepAxis::RbfKind: {
      const int k = static_cast<int>(value);
      if (k < 0 || k > 4) throw SpecError("sweep: rbf_kind index must be in [0, 4]");
      c.feature_map.rbf_kind = static_cast<RbfKind>(k);
      break;
    }
  }
  return c;
}

SweepResult run_sweep(const SweepSpec& spec) {
  spec.validate();
  spec.base.validate();
  SweepResult result;
  const std::size_t n_cells = spec.values.size() * spec.seeds.size();
  result.cells.resize(n_cells);

  parallel_chunks(n_cells, 1, [&](std::size_t ci, std::size_t b, std::size_t e) {
    (void)ci;
    for (std::size_t i = b; i < e; ++i) {
      const double value = spec.values[i / spec.seeds.size()];
      const std::uint64_t seed = spec.seeds[i % spec.seeds.size()];
      SweepCell& cell = result.cells[i];
      cell.value = value;
      cell.seed = seed;
      try {
        const TrainConfig cfg = apply_sweep_axis(spec.base, spec.axis, value, seed);
        const TrainResult tr = train(cfg);
        cell.l2re = tr.report.l2re;
        cell.final_loss = tr.report.final_loss;
        cell.wall_seconds = tr.report.wall_seconds;
      } catch (const std::exception& ex) {
        cell.error = ex.what();
      }
    }
  });

  result.aggregates = aggregate(result.cells);
  return result;
}

std::vector<SweepAggregate> aggregate(const std::vector<SweepCell>& cells) {
  if (cells.empty()) throw SpecError("aggregate: empty cell set");
  // Group by value, preserving first-appearance order.
  std::vector<double> order;
  std::map<double, std::vector<double>> by_value;
  for (const auto& c : cells) {
    if (!by_value.count(c.value)) order.push_back(c.value);
    if (c.error.empty()) by_value[c.value].push_back(c.l2re);
    else by_value[c.value];  // ensure the key exists even if every seed failed
  }
  std::vector<SweepAggregate> out;
  for (double v : order) {
    const auto& xs = by_value[v];
    SweepAggregate a;
    a.value = v;
    a.n = static_cast<int>(xs.size());
    if (!xs.empty()) {
      a.mean_l2re = mean_of(xs);
      a.std_l2re = xs.size() >= 2 ? std::sqrt(sample_variance(xs)) : 0.0;
    }
    out.push_back(a);
  }
  return out;
}

}  // namespace featpinn
