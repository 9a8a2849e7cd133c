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

#pragma once

// Analysis drivers behind the command line: bonus discrimination reports,
// normalized-return references, beta sweeps and the tabular verification suite.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "axrl/agent.hpp"
#include "axrl/bonus.hpp"
#include "axrl/envlab.hpp"
#include "axrl/mdp.hpp"
#include "axrl/metrics.hpp"

namespace axrl::evalkit {

inline constexpr int kHistogramBins = 50;

struct ModeReport {
  std::string mode;  // "dataset" for the in-distribution row
  metrics::Summary summary;
  metrics::Histogram histogram;
  double auc = 0.5;  // dataset vs this mode; 0.5 for the dataset row
};

struct DiscriminationReport {
  std::string model_kind;
  std::string dataset_fingerprint;
  std::uint64_t seed = 0;
  std::vector<ModeReport> rows;  // dataset first, then the requested modes in order

  [[nodiscard]] const ModeReport& row(const std::string& mode) const;
};

/// Scores the dataset pairs and every OOD construction; histograms share 50 bins
/// over the pooled score range.
DiscriminationReport discrimination_report(const bonus::BonusModel& model, const env::Dataset& data,
                                           const env::Environment& env, const std::vector<env::OodMode>& modes,
                                           std::uint64_t seed);

void to_json(nlohmann::json& j, const DiscriminationReport& r);
/// Columns: bin_low, bin_high, then one count column per row.
std::string histogram_csv(const DiscriminationReport& r);

struct ReferenceScores {
  double random = 0.0;
  double expert = 0.0;
};

/// Mean returns of the scripted random and expert policies.
ReferenceScores reference_scores(const env::Environment& env, int episodes = 100, std::uint64_t seed = 12345);
double normalized_return(double raw, const ReferenceScores& ref);

struct SweepCell {
  double beta_actor = 0.0;
  double beta_critic = 0.0;
  std::vector<double> normalized_returns;  // one per (dataset, seed), dataset-major
  double mean = 0.0;
  double std = 0.0;
};

struct SweepResult {
  std::vector<std::string> datasets;
  std::vector<std::uint64_t> seeds;
  std::vector<SweepCell> cells;
  std::size_t selected = 0;  // index of the cell with the largest mean

  [[nodiscard]] const SweepCell& best() const { return cells.at(selected); }
};

/// Picks the first cell attaining the maximum mean.
std::size_t select_best(const std::vector<SweepCell>& cells);
void to_json(nlohmann::json& j, const SweepResult& r);

struct SweepTask {
  std::string name;
  env::Dataset data;
  env::Environment env;
  bonus::BonusModel bonus;
};

/// Trains every (beta_actor, beta_critic) in grid x grid for every task and seed.
/// `cell_dir`, when non-empty, receives one metrics CSV per run.
SweepResult run_sweep(const std::vector<SweepTask>& tasks, const std::vector<double>& grid,
                      const std::vector<std::uint64_t>& seeds, const agent::TrainConfig& base,
                      const std::filesystem::path& cell_dir = {});

struct VerifyDpConfig {
  int n_mdps = 100;
  int min_states = 2;
  int max_states = 6;
  int min_actions = 2;
  int max_actions = 4;
  std::vector<double> gammas{0.5, 0.9, 0.99};
  std::vector<double> taus{1.0, 0.1, 0.01, 0.001, 1e-6};
  int iterations = 200;
  int identity_triples = 10;  // random (pi, Q, b) per MDP for the rewrite identity
  std::uint64_t seed = 0;
};

struct VerifyCheck {
  std::string invariant;
  int mdp_index = 0;
  std::uint64_t mdp_seed = 0;
  int n_states = 0;
  int n_actions = 0;
  double gamma = 0.0;
  bool passed = false;
  std::string detail;
};

struct VerifyDpReport {
  std::vector<VerifyCheck> checks;

  [[nodiscard]] bool all_passed() const;
  /// Null when everything passed.
  [[nodiscard]] const VerifyCheck* first_failure() const;
};

/// Invariants, per random MDP:
///   zero_bonus_control   all four schemes agree with plain VI when b = 0
///   penalized_equivalence naive subtraction from Q0 and penalized bootstrap from Q0 + b
///                         give identical policies and Q' - Q = b within 1e-9
///   fixed_point          converged penalized policy attains the enumerated optimum of r - b
///                         (only when |A|^|S| <= 4096)
///   rewrite_identity     <pi, Q> - tau KL(pi || pi_b) = <pi, Q - delta_b> + tau H(pi) within 1e-8
///   tau_limit            KL-regularized VI disagrees with the limiting scheme on 0 greedy
///                         choices at the smallest tau
VerifyDpReport verify_dp(const VerifyDpConfig& config);
std::string verify_table_csv(const VerifyDpReport& report);

/// Smallest gap between the best and second-best greedy score along a penalized-bootstrap
/// trace started from `q0`; `shift` is the bonus the trace subtracts.
double greedy_margin(const mdp::ViTrace& trace, const mdp::QTable& q0, const mdp::Matrix& shift);

/// The MDP, bonus and draws used for MDP `index` of a verify run.
std::uint64_t verify_mdp_seed(std::uint64_t base_seed, int index);

}  // namespace axrl::evalkit
