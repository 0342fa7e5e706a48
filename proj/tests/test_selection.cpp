#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include <doctest.h>

#include "mechsel/rng.hpp"
#include "mechsel/selection.hpp"

using namespace mechsel;

namespace {

const BaseParams kCoexist{0.5, 0.7, 0.3, 0.3, 0.6};

ParameterState all_active_with(const std::vector<std::pair<int, double>>& overrides,
                               double fill = 0.05) {
  ParameterState s = ParameterState::full_family();
  for (int i = 0; i < kNumParams; ++i) s.set_value(i, fill);
  for (const auto& [i, v] : overrides) s.set_value(i, v);
  return s;
}

}  // namespace

TEST_CASE("all near-zero parameters are eliminated together") {
  const ParameterState fitted = all_active_with({{kBeta1, -0.0}, {kBeta3, 0.0}}, 1e-3);
  const auto [mask, elim] = eliminate_smallest(fitted, no_protection());
  CHECK(elim == std::vector<int>{kBeta1, kBeta3});
  CHECK_FALSE(mask[kBeta1]);
  CHECK_FALSE(mask[kBeta3]);
  CHECK(mask[kAlpha0]);
  int active = 0;
  for (bool m : mask) active += m ? 1 : 0;
  CHECK(active == 13);
}

TEST_CASE("otherwise exactly the smallest magnitude is eliminated") {
  const ParameterState fitted = all_active_with({{kAlpha4, 2.9e-4}}, 0.04);
  const auto [mask, elim] = eliminate_smallest(fitted, no_protection());
  CHECK(elim == std::vector<int>{kAlpha4});
  CHECK_FALSE(mask[kAlpha4]);
}

TEST_CASE("magnitude decides, not the signed value") {
  const ParameterState fitted = all_active_with({{kBeta2, -0.9}, {kAlpha3, 0.02}}, 0.3);
  const auto [mask, elim] = eliminate_smallest(fitted, no_protection());
  CHECK(elim == std::vector<int>{kAlpha3});
  CHECK(mask[kBeta2]);
}

TEST_CASE("exact ties break by canonical order") {
  const ParameterState fitted = all_active_with({{kAlpha1, 0.1}, {kBeta2, 0.1}}, 0.5);
  const auto [mask, elim] = eliminate_smallest(fitted, no_protection());
  CHECK(elim == std::vector<int>{kAlpha1});
  CHECK(mask[kBeta2]);
}

TEST_CASE("protected parameters are never eliminated") {
  ParameterState fitted = all_active_with({{kGrowthR, 1e-9}}, 0.4);
  const auto [mask, elim] = eliminate_smallest(fitted, structural_protection());
  // r is the smallest and even below zero_tol, but protected; the smallest
  // unprotected parameter goes instead.
  CHECK(mask[kGrowthR]);
  REQUIRE(elim.size() == 1);
  CHECK(elim[0] == kAlpha0);  // all augmentation values tie at 0.4 -> canonical order

  ParameterState only_structural = ParameterState::base_only(kCoexist);
  CHECK_THROWS_AS(eliminate_smallest(only_structural, structural_protection()),
                  NothingToEliminateError);
  CHECK_THROWS_AS(eliminate_smallest(ParameterState{}, no_protection()), NothingToEliminateError);
}

TEST_CASE("elimination is invariant under positive rescaling") {
  SplitMix64 rng(55);
  for (int rep = 0; rep < 50; ++rep) {
    ParameterState fitted = ParameterState::full_family();
    for (int i = 0; i < kNumParams; ++i) {
      const bool zeroish = rng.next_double() < 0.2;
      const double mag = zeroish ? rng.uniform(0.0, 1e-9) : rng.uniform(1e-3, 1.0);
      fitted.set_value(i, rng.next_double() < 0.5 ? -mag : mag);
    }
    const double scale = rng.uniform(0.5, 100.0);  // keeps zeros below, others above zero_tol
    ParameterState scaled = fitted;
    for (int i = 0; i < kNumParams; ++i) scaled.set_value(i, fitted.value(i) * scale);

    const auto [m1, e1] = eliminate_smallest(fitted, no_protection());
    const auto [m2, e2] = eliminate_smallest(scaled, no_protection());
    CHECK(e1 == e2);
    CHECK(m1 == m2);
  }
}

TEST_CASE("selection with epsilon at the family size does a single fit") {
  const Dataset data =
      generate_dataset(ParameterState::base_only(kCoexist), State{2.0, 1.0}, 0.0, 20.0, 10);
  const Trajectory truth =
      integrate(ParameterState::base_only(kCoexist), State{2.0, 1.0}, 0.0, 20.0, kDefaultStep);
  HyperParams hyper;
  hyper.epochs = 10;
  const SelectionTrace trace =
      run_selection(ParameterState::full_family(kCoexist), data, 15, hyper, no_protection(), truth);
  REQUIRE(trace.steps.size() == 1);
  CHECK(trace.steps[0].eliminated.empty());
  CHECK(active_parameter_count(trace.final_state) == 15);
  CHECK(std::isfinite(trace.steps[0].trajectory_mse));
}

TEST_CASE("selection eliminates down to the threshold and never resurrects") {
  const Dataset data =
      generate_dataset(ParameterState::base_only(kCoexist), State{2.0, 1.0}, 0.0, 20.0, 12);
  const Trajectory truth =
      integrate(ParameterState::base_only(kCoexist), State{2.0, 1.0}, 0.0, 20.0, kDefaultStep);
  HyperParams hyper;
  hyper.epochs = 12;
  hyper.seed = 21;
  const int epsilon = 11;
  const SelectionTrace trace = run_selection(ParameterState::full_family(kCoexist), data, epsilon,
                                             hyper, no_protection(), truth, "smoke");
  REQUIRE(!trace.steps.empty());
  CHECK(trace.steps.size() <= 15 - epsilon + 1);
  CHECK(active_parameter_count(trace.final_state) <= epsilon);
  CHECK(trace.scenario == "smoke");
  CHECK(trace.seed == 21);

  // Active counts strictly decrease and deleted parameters never reappear.
  std::set<int> deleted;
  int prev_active = kNumParams + 1;
  for (const SelectionStepRecord& rec : trace.steps) {
    const int active = active_parameter_count(rec.fitted);
    CHECK(active < prev_active);
    prev_active = active;
    for (int i : deleted) CHECK_FALSE(rec.fitted.mask[static_cast<std::size_t>(i)]);
    for (int i : rec.eliminated) deleted.insert(i);
    if (&rec != &trace.steps.back()) CHECK(!rec.eliminated.empty());
  }
  for (int i : deleted) CHECK_FALSE(trace.final_state.mask[static_cast<std::size_t>(i)]);
}

TEST_CASE("step mse series of the truth itself is zero") {
  const ParameterState truth = ParameterState::base_only(kCoexist);
  SelectionTrace trace;
  SelectionStepRecord rec;
  rec.step = 1;
  rec.fitted = truth;
  trace.steps.push_back(rec);
  trace.final_state = truth;

  const auto grid = standard_mse_grid();
  const auto series = step_mse_series(trace, truth, State{2.0, 1.0}, grid);
  REQUIRE(series.size() == 1);
  CHECK(series[0].step == 1);
  CHECK(series[0].mse == 0.0);
  CHECK_FALSE(series[0].blow_up);
}

TEST_CASE("step mse series flags blow-ups as infinity") {
  const ParameterState truth = ParameterState::base_only(kCoexist);
  ParameterState runaway = ParameterState::full_family(kCoexist);
  runaway.set_value(kAlpha3, 50.0);  // strong destabilizing feedback

  SelectionTrace trace;
  SelectionStepRecord rec;
  rec.step = 1;
  rec.fitted = runaway;
  trace.steps.push_back(rec);
  rec.step = 2;
  rec.fitted = truth;
  trace.steps.push_back(rec);
  trace.final_state = truth;

  const auto grid = standard_mse_grid();
  const auto series = step_mse_series(trace, truth, State{2.0, 1.0}, grid);
  REQUIRE(series.size() == 2);
  CHECK(series[0].blow_up);
  CHECK(std::isinf(series[0].mse));
  CHECK(series[1].mse == 0.0);
}

TEST_CASE("trace json serialization round-trips losslessly") {
  SelectionTrace trace;
  trace.scenario = "late";
  trace.seed = 0xDEADBEEFull;

  SelectionStepRecord s1;
  s1.step = 1;
  s1.fitted = all_active_with({{kAlpha2, 5.7e-5}, {kBeta1, -0.0}}, 0.123456789012345);
  s1.eliminated = {kBeta1, kBeta3};
  s1.trajectory_mse = 0.012345678901234567;
  trace.steps.push_back(s1);

  SelectionStepRecord s2;
  s2.step = 2;
  s2.fitted = ParameterState::base_only(kCoexist);
  s2.trajectory_mse = std::numeric_limits<double>::infinity();
  s2.mse_blow_up = true;
  trace.steps.push_back(s2);
  trace.final_state = s2.fitted;

  const auto j = trace_to_json(trace);
  const auto text = j.dump(2);
  const SelectionTrace back = trace_from_json(nlohmann::ordered_json::parse(text));

  CHECK(back.scenario == trace.scenario);
  CHECK(back.seed == trace.seed);
  REQUIRE(back.steps.size() == trace.steps.size());
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    const auto& a = trace.steps[k];
    const auto& b = back.steps[k];
    CHECK(a.step == b.step);
    CHECK(a.eliminated == b.eliminated);
    CHECK(a.mse_blow_up == b.mse_blow_up);
    CHECK((a.trajectory_mse == b.trajectory_mse ||
           (std::isinf(a.trajectory_mse) && std::isinf(b.trajectory_mse))));
    CHECK(a.fitted.mask == b.fitted.mask);
    for (int i = 0; i < kNumParams; ++i) {
      if (a.fitted.mask[static_cast<std::size_t>(i)]) CHECK(a.fitted.value(i) == b.fitted.value(i));
    }
  }
  CHECK(back.final_state.mask == trace.final_state.mask);
  for (int i = 0; i < kNumParams; ++i) {
    if (trace.final_state.mask[static_cast<std::size_t>(i)]) {
      CHECK(back.final_state.value(i) == trace.final_state.value(i));
    }
  }
}

TEST_CASE("trace csv has the documented layout") {
  SelectionTrace trace;
  SelectionStepRecord s1;
  s1.step = 1;
  s1.fitted = all_active_with({{kAlpha4, 2.9e-4}}, 0.5);
  s1.eliminated = {kAlpha4};
  s1.trajectory_mse = 0.25;
  trace.steps.push_back(s1);
  trace.final_state = s1.fitted;

  std::ostringstream out;
  write_trace_csv(out, trace);
  std::istringstream lines(out.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "step,name,value,active,eliminated_this_step");
  int rows = 0;
  bool saw_alpha4 = false;
  while (std::getline(lines, line)) {
    ++rows;
    if (line.find(",alpha4,") != std::string::npos) {
      saw_alpha4 = true;
      CHECK(line == "1,alpha4,0.00029,1,1");
    }
  }
  CHECK(rows == kNumParams);
  CHECK(saw_alpha4);
}
