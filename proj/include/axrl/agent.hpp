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

// TD3 with an anti-exploration bonus subtracted in both the critic target and
// the actor objective:
//
//   y       = r + gamma (1 - d) (min_j Qbar_j(s', a~') - beta_c b(s', a~'))
//   L_actor = -mean_s [ Q(s, mu(s) + eps) - beta_a b(s, mu(s) + eps) ]
//
// With beta_a = beta_c = 0 (or no bonus model) this is plain TD3.
//
// Random draws per training step, in order: batch indices, then the
// action_dim x B smoothing noise, then (on actor steps) the action_dim x B
// actor noise. All noises are standard normal and scaled inside the losses.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "axrl/bonus.hpp"
#include "axrl/envlab.hpp"
#include "axrl/neural.hpp"

namespace axrl::agent {

using nn::Matrix;
using nn::MlpParams;
using nn::Rng;
using nn::Vector;

enum class NextAction {
  target_smoothed,  // target actor plus clipped smoothing noise (TD3)
  online_noisy,     // online actor plus actor noise
};

struct AgentConfig {
  std::vector<int> hidden{256, 256};  // first hidden layer tanh, the rest elu
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double gamma = 0.99;
  double beta_actor = 1.0;
  double beta_critic = 1.0;
  // Noise scales are fractions of each dimension's half range.
  double sigma_actor_noise = 0.1;
  double sigma_target_noise = 0.2;
  double target_noise_clip = 0.5;
  int policy_delay = 2;
  double polyak = 0.005;
  bool hard_target_copy = false;  // copy online into target every step instead of polyak
  bool actor_uses_target_critic = true;
  NextAction next_action = NextAction::target_smoothed;

  static AgentConfig desk();
  void validate() const;
};

struct TrainConfig {
  int gradient_steps = 500000;
  int batch_size = 256;
  std::uint64_t seed = 0;
  int eval_every = 5000;
  int eval_episodes = 10;
  int probe_size = 1024;  // dataset states used for the logged bonus means
  bool constant_reward_to_half = false;
  AgentConfig agent;

  static TrainConfig desk();
  void validate() const;
};

void to_json(nlohmann::json& j, const AgentConfig& c);
void from_json(const nlohmann::json& j, AgentConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
/// FNV-1a of the config JSON.
std::string fingerprint(const TrainConfig& c);

struct Td3State {
  AgentConfig config;
  Vector action_low;
  Vector action_high;
  MlpParams actor;
  MlpParams critic1;
  MlpParams critic2;
  MlpParams target_actor;
  MlpParams target_critic1;
  MlpParams target_critic2;
  nn::AdamState actor_opt;
  nn::AdamState critic1_opt;
  nn::AdamState critic2_opt;
  std::int64_t step = 0;

  [[nodiscard]] int state_dim() const { return actor.input_dim(); }
  [[nodiscard]] int action_dim() const { return actor.output_dim(); }
  [[nodiscard]] Vector half_range() const { return 0.5 * (action_high - action_low); }
  [[nodiscard]] Vector midpoint() const { return 0.5 * (action_high + action_low); }
};

Td3State make_td3(int state_dim, const Vector& action_low, const Vector& action_high, const AgentConfig& config,
                  Rng& rng);

/// Network layer sizes and activations used for the actor and the critics.
MlpParams make_actor(int state_dim, int action_dim, const std::vector<int>& hidden, Rng& rng);
MlpParams make_critic(int state_dim, int action_dim, const std::vector<int>& hidden, Rng& rng);

/// Deterministic actor output mapped into the action box, action_dim x B.
Matrix act(const MlpParams& actor, const Vector& low, const Vector& high, const Matrix& states);
Matrix act(const Td3State& s, const Matrix& states);
Matrix critic_value(const MlpParams& critic, const Matrix& states, const Matrix& actions);

/// Maps rewards affinely onto [0, 1] using the dataset's own range. The original
/// range stays in metadata.reward_min / reward_max. Throws ParameterError for a
/// constant-reward dataset unless `constant_to_half` is set.
env::Dataset normalize_rewards(const env::Dataset& data, bool constant_to_half = false);

struct Batch {
  Matrix states;
  Matrix actions;
  Vector rewards;
  Matrix next_states;
  Vector dones;
};
Batch gather(const env::Dataset& data, const std::vector<std::size_t>& indices);

struct CriticLoss {
  double loss = 0.0;  // sum of both critics' mean squared errors
  Vector target;      // y per sample
  Vector bonus;       // b(s', a~') per sample, zero without a model
  Matrix next_actions;
  nn::MlpGrads critic1;
  nn::MlpGrads critic2;
};

/// `noise` is standard normal, action_dim x B. `bonus` may be null.
CriticLoss critic_loss(const Td3State& s, const Batch& batch, const bonus::BonusModel* bonus, const Matrix& noise);

struct ActorLoss {
  double loss = 0.0;
  Matrix actions;  // mu(s) + eps
  Vector bonus;    // b(s, mu(s) + eps), zero without a model
  nn::MlpGrads actor;
};

ActorLoss actor_loss(const Td3State& s, const Matrix& states, const bonus::BonusModel* bonus, const Matrix& noise);

/// One critic step, and on every policy_delay-th step an actor step and target update.
void train_step(Td3State& s, const Batch& batch, const bonus::BonusModel* bonus, const Matrix& smoothing_noise,
                const Matrix* actor_noise, double* critic_loss_out = nullptr);

struct MetricRow {
  int step = 0;
  double critic_loss = 0.0;  // mean over the steps since the previous row
  double actor_bonus_mean = 0.0;
  double critic_bonus_mean = 0.0;
  double eval_return_mean = 0.0;
  double eval_return_std = 0.0;
};

struct TrainResult {
  Td3State state;
  std::vector<MetricRow> metrics;
};

/// Rewards are normalized first unless the dataset already is. `bonus` may be
/// null for plain TD3; the bonus columns are then NaN.
TrainResult train_agent(const env::Dataset& data, const bonus::BonusModel* bonus, const env::Environment& env,
                        const TrainConfig& config);

/// Deterministic rollouts of the actor, raw environment returns.
std::vector<double> evaluate_actor(const Td3State& s, const env::Environment& env, int n_episodes,
                                   std::uint64_t seed);
env::Policy actor_policy(const Td3State& s);

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows);
std::string metrics_csv(const std::vector<MetricRow>& rows);

/// Actor, critics and their targets, in that order.
void save_agent(const std::filesystem::path& path, const Td3State& s);
/// Loads networks into a state built from `config` and the action bounds; optimizer moments are reset.
Td3State load_agent(const std::filesystem::path& path, const Vector& action_low, const Vector& action_high,
                    const AgentConfig& config);

}  // namespace axrl::agent
