// Copyright 2026 The axrl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <filesystem>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "axrl/errors.hpp"
#include "axrl/evalkit.hpp"

using namespace axrl;
using namespace axrl::evalkit;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  env::Environment e = env::make_env("pointmass2d");
  env::Dataset data = env::generate_dataset(e, "expert", 3000, 11);
  bonus::BonusModel model;

  Fixture() {
    auto c = bonus::BonusConfig::desk();
    c.steps = 1500;
    c.seed = 11;
    model = bonus::train_cvae(data, e, c).model;
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

std::vector<env::OodMode> parse_modes(std::initializer_list<const char*> names) {
  std::vector<env::OodMode> modes;
  for (const char* n : names) modes.push_back(env::OodMode::parse(n));
  return modes;
}

}  // namespace

TEST_CASE("discrimination report rows, histograms and AUC") {
  const auto& f = fixture();
  const auto r = discrimination_report(f.model, f.data, f.e, parse_modes({"uniform", "noise:0", "shuffled"}), 4);
  REQUIRE(r.rows.size() == 4);
  CHECK(r.rows[0].mode == "dataset");
  CHECK(r.rows[1].mode == "uniform");
  CHECK(r.rows[2].mode == "noise:0");
  CHECK(r.model_kind == "cvae");
  CHECK(r.dataset_fingerprint == f.data.metadata.fingerprint);
  CHECK(r.rows[0].auc == 0.5);
  // noise:0 reproduces the dataset actions, so every score ties.
  CHECK(r.row("noise:0").auc == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.row("uniform").auc > 0.9);
  const double low = r.rows[0].histogram.low, high = r.rows[0].histogram.high;
  for (const auto& row : r.rows) {
    CHECK(row.auc >= 0.0);
    CHECK(row.auc <= 1.0);
    CHECK(row.histogram.counts.size() == static_cast<std::size_t>(kHistogramBins));
    CHECK(row.histogram.total() == row.summary.count);
    CHECK(row.summary.count == f.data.size());
    CHECK(row.histogram.low == low);  // pooled range
    CHECK(row.histogram.high == high);
    CHECK(row.summary.min >= low);
    CHECK(row.summary.max <= high);
  }
  CHECK_THROWS_AS((void)r.row("nope"), ParameterError);

  const auto again = discrimination_report(f.model, f.data, f.e, parse_modes({"uniform", "noise:0", "shuffled"}), 4);
  CHECK(nlohmann::json(again).dump() == nlohmann::json(r).dump());
}

TEST_CASE("discrimination report JSON and histogram CSV schema") {
  const auto& f = fixture();
  const auto r = discrimination_report(f.model, f.data, f.e, parse_modes({"uniform", "noise:0.1"}), 0);
  const nlohmann::json j = r;
  for (const char* key : {"model_kind", "dataset_fingerprint", "seed", "rows"}) CHECK(j.contains(key));
  REQUIRE(j.at("rows").size() == 3);
  for (const auto& row : j.at("rows")) {
    for (const char* key : {"mode", "summary", "histogram", "auc"}) CHECK(row.contains(key));
    for (const char* key : {"count", "mean", "std", "min", "q25", "median", "q75", "max"})
      CHECK(row.at("summary").contains(key));
    CHECK(row.at("histogram").at("counts").size() == static_cast<std::size_t>(kHistogramBins));
  }

  std::istringstream csv(histogram_csv(r));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "bin_low,bin_high,dataset,uniform,noise:0.1");
  int rows = 0;
  std::vector<long> sums(3, 0);
  while (std::getline(csv, line)) {
    ++rows;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    REQUIRE(cells.size() == 5);
    CHECK(std::stod(cells[0]) < std::stod(cells[1]));
    for (int k = 0; k < 3; ++k) sums[k] += std::stol(cells[2 + k]);
  }
  CHECK(rows == kHistogramBins);
  for (long s : sums) CHECK(s == static_cast<long>(f.data.size()));
}

TEST_CASE("normalized return is 0 for the random policy and 1 for the expert") {
  for (const char* name : {"pointmass2d", "pendulum1"}) {
    const auto e = env::make_env(name);
    const auto ref = reference_scores(e, 20, 3);
    CHECK(ref.expert > ref.random);
    CHECK(normalized_return(ref.random, ref) == 0.0);
    CHECK(normalized_return(ref.expert, ref) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(normalized_return(0.5 * (ref.random + ref.expert), ref) == doctest::Approx(0.5));
    const auto again = reference_scores(e, 20, 3);
    CHECK(again.random == ref.random);
    CHECK(again.expert == ref.expert);
  }
  CHECK_THROWS_AS((void)normalized_return(1.0, ReferenceScores{2.0, 2.0}), ParameterError);
}

TEST_CASE("select_best picks the first maximal mean") {
  std::vector<SweepCell> cells(4);
  const double means[] = {0.2, 0.7, 0.7, -1.0};
  for (int i = 0; i < 4; ++i) cells[i].mean = means[i];
  CHECK(select_best(cells) == 1);
  CHECK_THROWS_AS((void)select_best({}), ParameterError);
}

TEST_CASE("run_sweep over a one-point grid") {
  const auto& f = fixture();
  std::vector<SweepTask> tasks{{"pm", f.data, f.e, f.model}};
  auto base = agent::TrainConfig::desk();
  base.gradient_steps = 200;
  base.eval_every = 100;
  base.eval_episodes = 2;
  const fs::path dir = fs::temp_directory_path() / "axrl_test_sweep";
  fs::remove_all(dir);
  const auto r = run_sweep(tasks, {0.5}, {1, 2}, base, dir);
  REQUIRE(r.cells.size() == 1);
  CHECK(r.selected == 0);
  CHECK(r.best().beta_actor == 0.5);
  CHECK(r.best().beta_critic == 0.5);
  REQUIRE(r.best().normalized_returns.size() == 2);
  const auto& v = r.best().normalized_returns;
  CHECK(r.best().mean == doctest::Approx((v[0] + v[1]) / 2));
  CHECK(fs::exists(dir / "ba0.5_bc0.5_pm_s1.csv"));
  CHECK(fs::exists(dir / "ba0.5_bc0.5_pm_s2.csv"));
  const nlohmann::json j = r;
  CHECK(j.at("best").at("beta_actor") == 0.5);

  const auto grid = run_sweep(tasks, {0.0, 1.0}, {1}, base);
  REQUIRE(grid.cells.size() == 4);
  double best = -1e300;
  for (const auto& c : grid.cells) best = std::max(best, c.mean);
  CHECK(grid.best().mean == best);

  CHECK_THROWS_AS((void)run_sweep({}, {1.0}, {1}, base), ParameterError);
  CHECK_THROWS_AS((void)run_sweep(tasks, {}, {1}, base), ParameterError);
  CHECK_THROWS_AS((void)run_sweep(tasks, {1.0}, {}, base), ParameterError);
  fs::remove_all(dir);
}

TEST_CASE("verify_dp passes on random MDPs and reports each invariant") {
  VerifyDpConfig c;
  c.n_mdps = 12;
  c.iterations = 60;
  c.seed = 9;
  const auto r = verify_dp(c);
  CHECK(r.all_passed());
  CHECK(r.first_failure() == nullptr);
  std::map<std::string, int> per;
  for (const auto& check : r.checks) {
    ++per[check.invariant];
    CHECK(check.mdp_seed == verify_mdp_seed(9, check.mdp_index));
    CHECK(check.n_states >= 2);
    CHECK(check.n_states <= 6);
    CHECK(check.n_actions >= 2);
    CHECK(check.n_actions <= 4);
  }
  for (const char* name : {"zero_bonus_control", "penalized_equivalence", "rewrite_identity", "tau_limit"})
    CHECK(per[name] == 12);
  CHECK(per["fixed_point"] >= 1);

  std::istringstream csv(verify_table_csv(r));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "invariant,mdp_index,mdp_seed,n_states,n_actions,gamma,passed,detail");
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == r.checks.size());

  const auto again = verify_dp(c);
  CHECK(verify_table_csv(again) == verify_table_csv(r));
}

TEST_CASE("verify_dp reports the first failure") {
  VerifyDpConfig c;
  c.n_mdps = 10;
  c.iterations = 40;
  c.taus = {1.0};  // far from the limit, so some greedy choice differs
  const auto r = verify_dp(c);
  CHECK_FALSE(r.all_passed());
  const auto* f = r.first_failure();
  REQUIRE(f != nullptr);
  CHECK(f->invariant == "tau_limit");
  CHECK_FALSE(f->passed);
  CHECK(f->mdp_seed == verify_mdp_seed(0, f->mdp_index));

  VerifyDpConfig bad;
  bad.min_states = 5;
  bad.max_states = 3;
  CHECK_THROWS_AS((void)verify_dp(bad), ParameterError);
}
