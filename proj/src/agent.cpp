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

#include "axrl/agent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "axrl/errors.hpp"
#include "axrl/io.hpp"

namespace axrl::agent {

using nn::Activation;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kProbeSalt = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kEvalSalt = 1000;

std::vector<Activation> hidden_activations(std::size_t n_hidden, Activation last) {
  std::vector<Activation> acts;
  for (std::size_t i = 0; i < n_hidden; ++i) acts.push_back(i == 0 ? Activation::tanh : Activation::elu);
  acts.push_back(last);
  return acts;
}

std::vector<int> layer_sizes(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> s{in};
  s.insert(s.end(), hidden.begin(), hidden.end());
  s.push_back(out);
  return s;
}

Matrix stack(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

Matrix clip_to_box(const Matrix& a, const Vector& low, const Vector& high) {
  return a.cwiseMax(low.replicate(1, a.cols())).cwiseMin(high.replicate(1, a.cols()));
}

void check_noise(const Td3State& s, const Matrix& noise, Eigen::Index batch) {
  if (noise.rows() != s.action_dim() || noise.cols() != batch) throw DimensionError("noise must be action_dim x batch");
}

std::string_view to_string(NextAction n) { return n == NextAction::target_smoothed ? "target_smoothed" : "online_noisy"; }

NextAction next_action_from_string(std::string_view s) {
  if (s == "target_smoothed") return NextAction::target_smoothed;
  if (s == "online_noisy") return NextAction::online_noisy;
  throw ParameterError("unknown next_action '" + std::string(s) + "' (valid: target_smoothed, online_noisy)");
}

double mean_bonus(const bonus::BonusModel* bonus, const Matrix& states, const Matrix& actions) {
  if (bonus == nullptr) return kNaN;
  return bonus->score(states, actions).mean();
}

}  // namespace

AgentConfig AgentConfig::desk() {
  AgentConfig c;
  c.hidden = {64, 64};
  c.actor_lr = 1e-3;
  c.critic_lr = 1e-3;
  return c;
}

void AgentConfig::validate() const {
  if (hidden.empty()) throw ParameterError("agent networks need at least one hidden layer");
  for (int h : hidden)
    if (h <= 0) throw ParameterError("hidden sizes must be positive");
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) throw ParameterError("learning rates must be positive");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ParameterError("gamma must lie in [0, 1)");
  if (!(beta_actor >= 0.0) || !(beta_critic >= 0.0)) throw ParameterError("bonus weights must be nonnegative");
  if (!(sigma_actor_noise >= 0.0) || !(sigma_target_noise >= 0.0) || !(target_noise_clip >= 0.0)) {
    throw ParameterError("noise scales must be nonnegative");
  }
  if (policy_delay <= 0) throw ParameterError("policy_delay must be positive");
  if (!(polyak > 0.0 && polyak <= 1.0)) throw ParameterError("polyak must lie in (0, 1]");
}

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.gradient_steps = 50000;
  c.batch_size = 64;
  c.eval_every = 1000;
  c.agent = AgentConfig::desk();
  return c;
}

void TrainConfig::validate() const {
  agent.validate();
  if (gradient_steps < 0) throw ParameterError("gradient_steps must be nonnegative");
  if (batch_size <= 0) throw ParameterError("batch_size must be positive");
  if (eval_every <= 0) throw ParameterError("eval_every must be positive");
  if (eval_episodes <= 0) throw ParameterError("eval_episodes must be positive");
  if (probe_size <= 0) throw ParameterError("probe_size must be positive");
}

void to_json(nlohmann::json& j, const AgentConfig& c) {
  j = {{"hidden", c.hidden},
       {"actor_lr", c.actor_lr},
       {"critic_lr", c.critic_lr},
       {"gamma", c.gamma},
       {"beta_actor", c.beta_actor},
       {"beta_critic", c.beta_critic},
       {"sigma_actor_noise", c.sigma_actor_noise},
       {"sigma_target_noise", c.sigma_target_noise},
       {"target_noise_clip", c.target_noise_clip},
       {"policy_delay", c.policy_delay},
       {"polyak", c.polyak},
       {"hard_target_copy", c.hard_target_copy},
       {"actor_uses_target_critic", c.actor_uses_target_critic},
       {"next_action", to_string(c.next_action)}};
}

void from_json(const nlohmann::json& j, AgentConfig& c) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("hidden", c.hidden);
  get("actor_lr", c.actor_lr);
  get("critic_lr", c.critic_lr);
  get("gamma", c.gamma);
  get("beta_actor", c.beta_actor);
  get("beta_critic", c.beta_critic);
  get("sigma_actor_noise", c.sigma_actor_noise);
  get("sigma_target_noise", c.sigma_target_noise);
  get("target_noise_clip", c.target_noise_clip);
  get("policy_delay", c.policy_delay);
  get("polyak", c.polyak);
  get("hard_target_copy", c.hard_target_copy);
  get("actor_uses_target_critic", c.actor_uses_target_critic);
  if (j.contains("next_action")) c.next_action = next_action_from_string(j.at("next_action").get<std::string>());
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"gradient_steps", c.gradient_steps},
       {"batch_size", c.batch_size},
       {"seed", c.seed},
       {"eval_every", c.eval_every},
       {"eval_episodes", c.eval_episodes},
       {"probe_size", c.probe_size},
       {"constant_reward_to_half", c.constant_reward_to_half},
       {"agent", c.agent}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("gradient_steps", c.gradient_steps);
  get("batch_size", c.batch_size);
  get("seed", c.seed);
  get("eval_every", c.eval_every);
  get("eval_episodes", c.eval_episodes);
  get("probe_size", c.probe_size);
  get("constant_reward_to_half", c.constant_reward_to_half);
  if (j.contains("agent")) from_json(j.at("agent"), c.agent);
}

std::string fingerprint(const TrainConfig& c) { return io::hex64(io::fnv1a(nlohmann::json(c).dump())); }

MlpParams make_actor(int state_dim, int action_dim, const std::vector<int>& hidden, Rng& rng) {
  return nn::make_mlp(layer_sizes(state_dim, hidden, action_dim),
                      hidden_activations(hidden.size(), Activation::tanh), rng);
}

MlpParams make_critic(int state_dim, int action_dim, const std::vector<int>& hidden, Rng& rng) {
  return nn::make_mlp(layer_sizes(state_dim + action_dim, hidden, 1),
                      hidden_activations(hidden.size(), Activation::identity), rng);
}

Td3State make_td3(int state_dim, const Vector& action_low, const Vector& action_high, const AgentConfig& config,
                  Rng& rng) {
  config.validate();
  if (action_low.size() != action_high.size() || action_low.size() == 0) {
    throw DimensionError("action bounds must be nonempty and of equal length");
  }
  if (((action_high - action_low).array() <= 0.0).any()) throw ParameterError("action bounds must satisfy low < high");
  const int action_dim = static_cast<int>(action_low.size());
  Td3State s;
  s.config = config;
  s.action_low = action_low;
  s.action_high = action_high;
  s.actor = make_actor(state_dim, action_dim, config.hidden, rng);
  s.critic1 = make_critic(state_dim, action_dim, config.hidden, rng);
  s.critic2 = make_critic(state_dim, action_dim, config.hidden, rng);
  s.target_actor = s.actor;
  s.target_critic1 = s.critic1;
  s.target_critic2 = s.critic2;
  s.actor_opt = nn::make_adam(s.actor, config.actor_lr);
  s.critic1_opt = nn::make_adam(s.critic1, config.critic_lr);
  s.critic2_opt = nn::make_adam(s.critic2, config.critic_lr);
  return s;
}

Matrix act(const MlpParams& actor, const Vector& low, const Vector& high, const Matrix& states) {
  const Vector half = 0.5 * (high - low), mid = 0.5 * (high + low);
  return (half.asDiagonal() * nn::forward(actor, states)).colwise() + mid;
}

Matrix act(const Td3State& s, const Matrix& states) { return act(s.actor, s.action_low, s.action_high, states); }

Matrix critic_value(const MlpParams& critic, const Matrix& states, const Matrix& actions) {
  return nn::forward(critic, stack(states, actions));
}

env::Dataset normalize_rewards(const env::Dataset& data, bool constant_to_half) {
  if (data.size() == 0) throw ParameterError("cannot normalize the rewards of an empty dataset");
  env::Dataset out = data;
  if (data.metadata.rewards_normalized) return out;
  const auto [lo_it, hi_it] = std::minmax_element(data.rewards.begin(), data.rewards.end());
  const double lo = *lo_it, hi = *hi_it;
  out.metadata.reward_min = lo;
  out.metadata.reward_max = hi;
  if (hi == lo) {
    if (!constant_to_half) {
      throw ParameterError("all rewards equal " + std::to_string(lo) +
                           "; the range is zero so they cannot be normalized (set constant_reward_to_half to map them "
                           "to 0.5)");
    }
    std::fill(out.rewards.begin(), out.rewards.end(), 0.5f);
  } else {
    for (auto& r : out.rewards) r = static_cast<float>((static_cast<double>(r) - lo) / (hi - lo));
  }
  out.metadata.rewards_normalized = true;
  out.seal();
  return out;
}

Batch gather(const env::Dataset& data, const std::vector<std::size_t>& indices) {
  return {data.state_batch(indices), data.action_batch(indices), data.reward_batch(indices),
          data.next_state_batch(indices), data.done_batch(indices)};
}

CriticLoss critic_loss(const Td3State& s, const Batch& batch, const bonus::BonusModel* bonus, const Matrix& noise) {
  const Eigen::Index n = batch.states.cols();
  check_noise(s, noise, n);
  const Vector half = s.half_range();
  const AgentConfig& c = s.config;

  CriticLoss out;
  if (c.next_action == NextAction::target_smoothed) {
    const Vector clip = c.target_noise_clip * half;
    const Matrix eps = ((c.sigma_target_noise * half).asDiagonal() * noise)
                           .cwiseMax((-clip).replicate(1, n))
                           .cwiseMin(clip.replicate(1, n));
    out.next_actions = clip_to_box(act(s.target_actor, s.action_low, s.action_high, batch.next_states) + eps,
                                   s.action_low, s.action_high);
  } else {
    const Matrix eps = (c.sigma_actor_noise * half).asDiagonal() * noise;
    out.next_actions = clip_to_box(act(s, batch.next_states) + eps, s.action_low, s.action_high);
  }

  const Matrix next_in = stack(batch.next_states, out.next_actions);
  Vector bootstrap = nn::forward(s.target_critic1, next_in).row(0).transpose().cwiseMin(
      nn::forward(s.target_critic2, next_in).row(0).transpose());
  if (bonus != nullptr && c.beta_critic != 0.0) {
    out.bonus = bonus->score(batch.next_states, out.next_actions);
    bootstrap -= c.beta_critic * out.bonus;
  } else {
    out.bonus = Vector::Zero(n);
  }
  out.target = batch.rewards + c.gamma * (1.0 - batch.dones.array()).matrix().cwiseProduct(bootstrap);
  if (!out.target.allFinite()) throw NonFiniteError("critic target is not finite");

  const Matrix in = stack(batch.states, batch.actions);
  nn::ForwardCache c1, c2;
  const Matrix e1 = nn::forward(s.critic1, in, &c1) - out.target.transpose();
  const Matrix e2 = nn::forward(s.critic2, in, &c2) - out.target.transpose();
  const double inv_n = 1.0 / static_cast<double>(n);
  out.loss = e1.squaredNorm() * inv_n + e2.squaredNorm() * inv_n;
  if (!std::isfinite(out.loss)) throw NonFiniteError("critic loss is not finite");
  out.critic1 = nn::backward(s.critic1, c1, (2.0 * inv_n) * e1).params;
  out.critic2 = nn::backward(s.critic2, c2, (2.0 * inv_n) * e2).params;
  return out;
}

ActorLoss actor_loss(const Td3State& s, const Matrix& states, const bonus::BonusModel* bonus, const Matrix& noise) {
  const Eigen::Index n = states.cols();
  check_noise(s, noise, n);
  const Vector half = s.half_range();
  const AgentConfig& c = s.config;
  const double inv_n = 1.0 / static_cast<double>(n);

  ActorLoss out;
  nn::ForwardCache actor_cache, critic_cache;
  const Matrix unit = nn::forward(s.actor, states, &actor_cache);
  out.actions = ((half.asDiagonal() * unit).colwise() + s.midpoint()) + (c.sigma_actor_noise * half).asDiagonal() * noise;

  const MlpParams& critic = c.actor_uses_target_critic ? s.target_critic1 : s.critic1;
  const Matrix q = nn::forward(critic, stack(states, out.actions), &critic_cache);
  out.loss = -q.sum() * inv_n;
  Matrix d_action =
      nn::backward(critic, critic_cache, Matrix::Constant(1, n, -inv_n)).input.bottomRows(s.action_dim());
  if (bonus != nullptr && c.beta_actor != 0.0) {
    out.bonus = bonus->score(states, out.actions);
    out.loss += c.beta_actor * out.bonus.sum() * inv_n;
    d_action += (c.beta_actor * inv_n) * bonus->action_gradient(states, out.actions);
  } else {
    out.bonus = Vector::Zero(n);
  }
  if (!std::isfinite(out.loss)) throw NonFiniteError("actor loss is not finite");
  out.actor = nn::backward(s.actor, actor_cache, half.asDiagonal() * d_action).params;
  return out;
}

void train_step(Td3State& s, const Batch& batch, const bonus::BonusModel* bonus, const Matrix& smoothing_noise,
                const Matrix* actor_noise, double* critic_loss_out) {
  const CriticLoss cl = critic_loss(s, batch, bonus, smoothing_noise);
  nn::adam_step(s.critic1, cl.critic1, s.critic1_opt);
  nn::adam_step(s.critic2, cl.critic2, s.critic2_opt);
  if (critic_loss_out != nullptr) *critic_loss_out = cl.loss;
  ++s.step;

  const bool actor_step = s.step % s.config.policy_delay == 0;
  if (actor_step) {
    if (actor_noise == nullptr) throw ParameterError("actor noise required on a policy update step");
    const ActorLoss al = actor_loss(s, batch.states, bonus, *actor_noise);
    nn::adam_step(s.actor, al.actor, s.actor_opt);
  }
  if (s.config.hard_target_copy) {
    s.target_critic1 = s.critic1;
    s.target_critic2 = s.critic2;
    s.target_actor = s.actor;
  } else if (actor_step) {
    nn::polyak_update(s.target_critic1, s.critic1, s.config.polyak);
    nn::polyak_update(s.target_critic2, s.critic2, s.config.polyak);
    nn::polyak_update(s.target_actor, s.actor, s.config.polyak);
  }
}

env::Policy actor_policy(const Td3State& s) {
  return [actor = s.actor, low = s.action_low, high = s.action_high](const Vector& state, Rng&) -> Vector {
    return act(actor, low, high, Matrix(state)).col(0);
  };
}

std::vector<double> evaluate_actor(const Td3State& s, const env::Environment& env, int n_episodes,
                                   std::uint64_t seed) {
  if (env.state_dim != s.state_dim() || env.action_dim != s.action_dim()) {
    throw DimensionError("agent dimensions do not match environment " + env.name);
  }
  return env::evaluate_policy(env, actor_policy(s), n_episodes, seed);
}

TrainResult train_agent(const env::Dataset& data, const bonus::BonusModel* bonus, const env::Environment& env,
                        const TrainConfig& config) {
  config.validate();
  data.validate();
  if (data.state_dim() != env.state_dim || data.action_dim() != env.action_dim) {
    throw DimensionError("dataset dimensions do not match environment " + env.name);
  }
  if (bonus != nullptr && (bonus->state_dim() != env.state_dim || bonus->action_dim() != env.action_dim)) {
    throw DimensionError("bonus model dimensions do not match environment " + env.name);
  }
  if (static_cast<std::size_t>(config.batch_size) > data.size()) {
    throw ParameterError("batch_size " + std::to_string(config.batch_size) + " exceeds dataset size " +
                         std::to_string(data.size()));
  }
  const env::Dataset normalized = normalize_rewards(data, config.constant_reward_to_half);

  Rng rng(config.seed);
  TrainResult result{make_td3(env.state_dim, env.action_low, env.action_high, config.agent, rng), {}};
  Td3State& s = result.state;

  Rng probe_rng(config.seed ^ kProbeSalt);
  std::uniform_int_distribution<std::size_t> pick(0, normalized.size() - 1);
  std::vector<std::size_t> probe(std::min<std::size_t>(static_cast<std::size_t>(config.probe_size), normalized.size()));
  for (auto& i : probe) i = pick(probe_rng);
  const Matrix probe_states = normalized.state_batch(probe);
  const Matrix probe_next = normalized.next_state_batch(probe);

  auto record = [&](int step, double critic_loss_mean) {
    MetricRow row;
    row.step = step;
    row.critic_loss = critic_loss_mean;
    row.actor_bonus_mean = mean_bonus(bonus, probe_states, act(s, probe_states));
    row.critic_bonus_mean =
        mean_bonus(bonus, probe_next, act(s.target_actor, s.action_low, s.action_high, probe_next));
    const auto returns = evaluate_actor(s, env, config.eval_episodes, config.seed + kEvalSalt);
    double m = 0.0;
    for (double r : returns) m += r;
    m /= static_cast<double>(returns.size());
    double v = 0.0;
    for (double r : returns) v += (r - m) * (r - m);
    row.eval_return_mean = m;
    row.eval_return_std = returns.size() > 1 ? std::sqrt(v / static_cast<double>(returns.size() - 1)) : 0.0;
    result.metrics.push_back(row);
  };

  std::vector<std::size_t> every(normalized.size());
  std::iota(every.begin(), every.end(), std::size_t{0});
  const Batch all = gather(normalized, every);

  record(0, kNaN);
  double loss_sum = 0.0;
  int loss_count = 0;
  std::vector<std::size_t> idx(static_cast<std::size_t>(config.batch_size));
  for (int step = 1; step <= config.gradient_steps; ++step) {
    for (auto& i : idx) i = pick(rng);
    const Batch batch{all.states(Eigen::all, idx), all.actions(Eigen::all, idx), all.rewards(idx),
                      all.next_states(Eigen::all, idx), all.dones(idx)};
    const Matrix smoothing = nn::standard_normal(env.action_dim, config.batch_size, rng);
    Matrix actor_noise;
    if (step % config.agent.policy_delay == 0) actor_noise = nn::standard_normal(env.action_dim, config.batch_size, rng);
    double loss = 0.0;
    train_step(s, batch, bonus, smoothing, actor_noise.size() > 0 ? &actor_noise : nullptr, &loss);
    loss_sum += loss;
    ++loss_count;
    if (step % config.eval_every == 0 || step == config.gradient_steps) {
      record(step, loss_sum / loss_count);
      loss_sum = 0.0;
      loss_count = 0;
    }
  }
  return result;
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream out;
  out.precision(17);
  out << "step,critic_loss,actor_bonus_mean,critic_bonus_mean,eval_return_mean,eval_return_std\n";
  for (const auto& r : rows) {
    out << r.step << ',' << r.critic_loss << ',' << r.actor_bonus_mean << ',' << r.critic_bonus_mean << ','
        << r.eval_return_mean << ',' << r.eval_return_std << '\n';
  }
  return out.str();
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows) {
  const std::string text = metrics_csv(rows);
  io::write_atomic(path, [&](std::ostream& out) { out << text; });
}

void save_agent(const std::filesystem::path& path, const Td3State& s) {
  nn::save_checkpoint(path, {s.actor, s.critic1, s.critic2, s.target_actor, s.target_critic1, s.target_critic2});
}

Td3State load_agent(const std::filesystem::path& path, const Vector& action_low, const Vector& action_high,
                    const AgentConfig& config) {
  auto nets = nn::load_checkpoint(path);
  if (nets.size() != 6) throw FormatError("agent checkpoint must hold six networks, found " + std::to_string(nets.size()));
  if (nets[0].output_dim() != action_low.size()) throw FormatError("agent checkpoint action dimension mismatch");
  Rng unused(0);
  Td3State s = make_td3(nets[0].input_dim(), action_low, action_high, config, unused);
  if (nets[0].layer_sizes != s.actor.layer_sizes || nets[1].layer_sizes != s.critic1.layer_sizes) {
    throw FormatError("agent checkpoint does not match the configured network sizes");
  }
  s.actor = std::move(nets[0]);
  s.critic1 = std::move(nets[1]);
  s.critic2 = std::move(nets[2]);
  s.target_actor = std::move(nets[3]);
  s.target_critic1 = std::move(nets[4]);
  s.target_critic2 = std::move(nets[5]);
  s.actor_opt = nn::make_adam(s.actor, config.actor_lr);
  s.critic1_opt = nn::make_adam(s.critic1, config.critic_lr);
  s.critic2_opt = nn::make_adam(s.critic2, config.critic_lr);
  return s;
}

}  // namespace axrl::agent
