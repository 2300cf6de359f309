#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "featpinn/analysis.hpp"

using namespace featpinn;

namespace {

TrainConfig tiny_base() {
  TrainConfig c;
  c.problem = "diffusion";
  c.feature_map.family = Family::RbfCompact;
  c.feature_map.m = 8;
  c.feature_map.sigma = 0.5;
  c.feature_map.xi = 1.0;
  c.widths = {2, 8, 8, 1};
  c.n_r = 8;
  c.n_ic = 4;
  c.n_bc = 4;
  c.lambda_ic = 100.0;
  c.lambda_bc = 100.0;
  c.adam_steps = 30;
  c.lbfgs_steps = 5;
  c.record_every = 10;
  return c;
}

}  // namespace

TEST_SUITE_BEGIN("analysis");

TEST_CASE("aggregate statistics") {
  std::vector<SweepCell> cells(3);
  cells[0].value = 1.0;
  cells[0].l2re = 1.0;
  cells[1].value = 1.0;
  cells[1].l2re = 3.0;
  cells[2].value = 2.0;
  cells[2].l2re = 0.5;
  const auto aggs = aggregate(cells);
  REQUIRE(aggs.size() == 2);
  CHECK(aggs[0].mean_l2re == doctest::Approx(2.0));
  CHECK(aggs[0].std_l2re == doctest::Approx(std::sqrt(2.0)));
  CHECK(aggs[0].n == 2);
  CHECK(aggs[1].std_l2re == 0.0);  // single cell
  CHECK(aggs[1].n == 1);

  // Permutation invariance.
  std::vector<SweepCell> shuffled = {cells[2], cells[1], cells[0]};
  const auto aggs2 = aggregate(shuffled);
  REQUIRE(aggs2.size() == 2);
  const auto& a1 = aggs[0].value == 1.0 ? aggs[0] : aggs[1];
  const auto& a2 = aggs2[0].value == 1.0 ? aggs2[0] : aggs2[1];
  CHECK(a1.mean_l2re == a2.mean_l2re);
  CHECK(a1.std_l2re == a2.std_l2re);

  CHECK_THROWS_AS(aggregate({}), SpecError);
}

TEST_CASE("one value and one seed equals a single train run") {
  SweepSpec spec;
  spec.base = tiny_base();
  spec.axis = SweepAxis::Xi;
  spec.values = {1.5};
  spec.seeds = {42};
  const SweepResult r = run_sweep(spec);
  REQUIRE(r.cells.size() == 1);
  CHECK(r.cells[0].error.empty());

  TrainConfig single = apply_sweep_axis(spec.base, SweepAxis::Xi, 1.5, 42);
  const TrainResult tr = train(single);
  CHECK(r.cells[0].l2re == tr.report.l2re);
  CHECK(r.cells[0].final_loss.total == tr.report.final_loss.total);
}

TEST_CASE("xi smoke sweep completes with finite errors") {
  SweepSpec spec;
  spec.base = tiny_base();
  spec.axis = SweepAxis::Xi;
  spec.values = {0.5, 4.0};
  spec.seeds = {1};
  const SweepResult r = run_sweep(spec);
  REQUIRE(r.cells.size() == 2);
  for (const auto& c : r.cells) {
    CHECK(c.error.empty());
    CHECK(std::isfinite(c.l2re));
  }
  CHECK(r.aggregates.size() == 2);
}

TEST_CASE("a poisoned cell fails alone and the sweep continues") {
  SweepSpec clean;
  clean.base = tiny_base();
  clean.axis = SweepAxis::Xi;
  clean.values = {0.8, 1.2};
  clean.seeds = {5};
  const SweepResult cr = run_sweep(clean);

  SweepSpec poisoned = clean;
  poisoned.values = {0.8, -1.0, 1.2};  // negative cut-off: spec error at realize
  const SweepResult pr = run_sweep(poisoned);
  REQUIRE(pr.cells.size() == 3);
  CHECK(pr.cells[0].error.empty());
  CHECK(!pr.cells[1].error.empty());
  CHECK(pr.cells[2].error.empty());
  // Untouched cells match the clean sweep exactly.
  CHECK(pr.cells[0].l2re == cr.cells[0].l2re);
  CHECK(pr.cells[2].l2re == cr.cells[1].l2re);
  // The failed value aggregates over zero successes.
  CHECK(pr.aggregates[1].n == 0);
}

TEST_CASE("sweep determinism") {
  SweepSpec spec;
  spec.base = tiny_base();
  spec.axis = SweepAxis::FeatureCount;
  spec.values = {4, 8};
  spec.seeds = {2, 3};
  const SweepResult a = run_sweep(spec);
  const SweepResult b = run_sweep(spec);
  REQUIRE(a.cells.size() == b.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    CHECK(a.cells[i].l2re == b.cells[i].l2re);
    CHECK(a.cells[i].final_loss.total == b.cells[i].final_loss.total);
  }
}

TEST_CASE("sweep axis application") {
  const TrainConfig base = tiny_base();
  TrainConfig c = apply_sweep_axis(base, SweepAxis::Dimension, 6, 9);
  CHECK(c.problem_options.dim == 6);
  CHECK(c.widths.front() == 6);
  CHECK(c.seed == 9);
  c = apply_sweep_axis(base, SweepAxis::Gamma, 0.7, 1);
  CHECK(c.feature_map.gamma == 0.7);
  c = apply_sweep_axis(base, SweepAxis::PolyCount, 10, 1);
  CHECK(c.feature_map.p_terms == 10);
  c = apply_sweep_axis(base, SweepAxis::RbfKind, 2, 1);
  CHECK(c.feature_map.rbf_kind == RbfKind::ThinPlateSpline);
  CHECK_THROWS_AS(apply_sweep_axis(base, SweepAxis::RbfKind, 7, 1), SpecError);

  SweepSpec bad;
  bad.base = base;
  bad.values = {};
  bad.seeds = {1};
  CHECK_THROWS_AS(bad.validate(), SpecError);
}

TEST_SUITE_END();
