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

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace axrl::env {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

enum class EnvId { pointmass2d, pendulum1 };

/// pointmass2d: state (x, y, vx, vy), action = acceleration in [-1, 1]^2. Semi-implicit Euler with
///   dt = 0.05, velocity clipped to [-1, 1], position clipped to the arena [-2, 2]^2.
///   reward = -||next position - goal|| with the goal at the origin, in [-2 sqrt(2), 0].
///   Episodes start at rest on the annulus 0.95 <= ||p - goal|| <= 1.
/// pendulum1: state (cos th, sin th, th_dot) with th = 0 upright, torque in [-2, 2]; g = 10,
///   m = l = 1, dt = 0.05, th_dot clipped to [-8, 8].
///   reward = -(th^2 + 0.1 th_dot^2 + 0.001 u^2) on the pre-step state, in [-(pi^2 + 6.4 + 0.004), 0].
///   Episodes start hanging, th in pi +- 0.3 and th_dot in [-0.2, 0.2].
/// Both run for a fixed horizon of 200 steps.
struct Environment {
  EnvId id = EnvId::pointmass2d;
  std::string name;
  int state_dim = 0;
  int action_dim = 0;
  Vector action_low;
  Vector action_high;
  int horizon = 200;
  double dt = 0.05;
  // pointmass2d
  Vector goal;
  double max_speed = 1.0;
  double arena = 2.0;
  // pendulum1
  double gravity = 10.0;
  double mass = 1.0;
  double length = 1.0;
  double max_angular_speed = 8.0;
  // documented reward range
  double reward_min = 0.0;
  double reward_max = 0.0;

  [[nodiscard]] Vector action_range() const { return action_high - action_low; }
  [[nodiscard]] Vector clip_action(const Vector& a) const { return a.cwiseMax(action_low).cwiseMin(action_high); }
};

Environment make_env(EnvId id);
/// Throws ParameterError naming the valid ids.
Environment make_env(std::string_view name);
std::vector<std::string> env_names();

struct StepResult {
  Vector next_state;
  double reward = 0.0;
  bool done = false;
};

/// Deterministic transition. `t` is the time index of `state`; done is set on the last step of the
/// horizon (pass t < 0 to ignore the horizon).
StepResult step(const Environment& env, const Vector& state, const Vector& action, int t = -1);
Vector initial_state(const Environment& env, Rng& rng);
/// Pendulum angle in [-pi, pi] recovered from the observation.
double pendulum_angle(const Vector& state);

using Policy = std::function<Vector(const Vector& state, Rng& rng)>;

enum class Skill { random, medium, expert };
Skill skill_from_string(std::string_view name);
std::string_view to_string(Skill s);

/// random: uniform over the action box. expert: PD controller (pointmass) or energy-pumping
/// swing-up with a PD catch near upright (pendulum). medium: expert plus Gaussian noise of std
/// 0.3 * action range, with 20% of actions replaced by uniform draws.
Policy scripted_policy(const Environment& env, Skill skill);
std::string describe_policy(const Environment& env, Skill skill);

/// Undiscounted return of one episode from `start`.
double rollout_return(const Environment& env, const Policy& policy, const Vector& start, Rng& rng);

/// Raw returns of n_episodes rollouts; start states and policy randomness come from `seed`.
std::vector<double> evaluate_policy(const Environment& env, const Policy& policy, int n_episodes,
                                    std::uint64_t seed);

struct Transition {
  Vector state;
  Vector action;
  double reward = 0.0;
  Vector next_state;
  bool done = false;
};

struct DatasetMetadata {
  std::string env;
  std::string flavor;
  std::string behavior;
  std::uint64_t seed = 0;
  std::size_t size = 0;
  int state_dim = 0;
  int action_dim = 0;
  double reward_min = 0.0;  // original range, before any normalization
  double reward_max = 0.0;
  bool rewards_normalized = false;
  std::vector<double> episode_returns;  // raw returns of completed episodes
  double behavior_return_mean = 0.0;
  double behavior_return_std = 0.0;
  std::string fingerprint;  // FNV-1a of the binary payload
};

void to_json(nlohmann::json& j, const DatasetMetadata& m);
void from_json(const nlohmann::json& j, DatasetMetadata& m);

/// Transitions stored as float32 columns; every value is exactly representable in the file.
class Dataset {
 public:
  DatasetMetadata metadata;
  std::vector<float> states;       // size x state_dim, row per transition
  std::vector<float> actions;      // size x action_dim
  std::vector<float> rewards;
  std::vector<float> next_states;  // size x state_dim
  std::vector<std::uint8_t> dones;

  [[nodiscard]] std::size_t size() const { return rewards.size(); }
  [[nodiscard]] int state_dim() const { return metadata.state_dim; }
  [[nodiscard]] int action_dim() const { return metadata.action_dim; }
  [[nodiscard]] Transition transition(std::size_t i) const;
  void push_back(const Transition& t);

  /// Columns of the given rows, as doubles (dim x indices.size()).
  [[nodiscard]] Matrix state_batch(const std::vector<std::size_t>& indices) const;
  [[nodiscard]] Matrix action_batch(const std::vector<std::size_t>& indices) const;
  [[nodiscard]] Matrix next_state_batch(const std::vector<std::size_t>& indices) const;
  [[nodiscard]] Vector reward_batch(const std::vector<std::size_t>& indices) const;
  [[nodiscard]] Vector done_batch(const std::vector<std::size_t>& indices) const;
  [[nodiscard]] Matrix all_states() const;
  [[nodiscard]] Matrix all_actions() const;

  /// Hash of the binary payload as written to disk.
  [[nodiscard]] std::string compute_fingerprint() const;
  /// Refreshes fingerprint and size in the metadata.
  void seal();
  /// Throws if dimensions are inconsistent, the dataset is empty, or the fingerprint is stale.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

bool operator==(const DatasetMetadata& a, const DatasetMetadata& b);

std::vector<std::string> flavor_names();

/// Seeded offline dataset: "random", "medium", "expert", or "medium-expert" (medium on the first
/// ceil(n/2) transitions with `seed`, expert on the rest with `seed + 1`).
Dataset generate_dataset(const Environment& env, std::string_view flavor, std::size_t n_transitions,
                         std::uint64_t seed);

/// Returns of the completed episodes found by scanning done flags.
std::vector<double> recompute_episode_returns(const Dataset& data);

// File layout: one line of JSON metadata terminated by '\n', then `size` records of
// state | action | reward | next_state as little-endian float32 followed by one done byte.
void write_dataset(std::ostream& out, const Dataset& data);
Dataset read_dataset(std::istream& in);
void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);

struct OodMode {
  enum class Kind { uniform, noise, shuffled } kind = Kind::uniform;
  double noise_fraction = 0.0;  // noise std as a fraction of each dimension's action range

  /// "uniform", "shuffled", or "noise:<fraction>".
  static OodMode parse(std::string_view text);
  [[nodiscard]] std::string label() const;
};

/// OOD actions paired index-by-index with the dataset states (action_dim x size).
/// noise: clip(a + fraction * range * N(0, I)); shuffled: a seeded derangement of the actions.
Matrix make_ood_actions(const Dataset& data, const Environment& env, const OodMode& mode, std::uint64_t seed);

/// Uniformly random cyclic permutation (Sattolo), which never maps an index to itself for n >= 2.
std::vector<std::size_t> derangement(std::size_t n, Rng& rng);

}  // namespace axrl::env
