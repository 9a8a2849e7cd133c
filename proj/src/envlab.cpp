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

#include "axrl/envlab.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "axrl/errors.hpp"
#include "axrl/io.hpp"

namespace axrl::env {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_angle(double th) {
  th = std::fmod(th + kPi, 2.0 * kPi);
  if (th < 0) th += 2.0 * kPi;
  return th - kPi;
}

Vector to_float_precision(const Vector& v) {
  return v.unaryExpr([](double x) { return static_cast<double>(static_cast<float>(x)); });
}

Vector uniform_action(const Environment& env, Rng& rng) {
  Vector a(env.action_dim);
  for (int i = 0; i < env.action_dim; ++i) {
    std::uniform_real_distribution<double> u(env.action_low(i), env.action_high(i));
    a(i) = u(rng);
  }
  return a;
}

Vector expert_action(const Environment& env, const Vector& s) {
  if (env.id == EnvId::pointmass2d) {
    constexpr double kp = 4.0, kd = 4.0;  // critically damped, natural frequency 2
    const Vector a = -kp * (s.head(2) - env.goal) - kd * s.tail(2);
    return env.clip_action(a);
  }
  const double th = pendulum_angle(s);
  const double thdot = s(2);
  Vector u(1);
  if (std::cos(th) > std::cos(0.45)) {
    u(0) = -(10.0 * th + 2.0 * thdot);
  } else {
    // Pump energy toward the upright level; E = 0 at rest upright.
    const double g_term = 1.5 * env.gravity / env.length;
    const double energy = 0.5 * thdot * thdot + g_term * (std::cos(th) - 1.0);
    u(0) = -0.5 * energy * (thdot >= 0.0 ? 1.0 : -1.0);
  }
  return env.clip_action(u);
}

Matrix gather(const std::vector<float>& buf, int dim, const std::vector<std::size_t>& idx) {
  Matrix out(dim, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t c = 0; c < idx.size(); ++c) {
    const float* row = buf.data() + idx[c] * static_cast<std::size_t>(dim);
    for (int r = 0; r < dim; ++r) out(r, static_cast<Eigen::Index>(c)) = row[r];
  }
  return out;
}

void append(std::vector<float>& buf, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) buf.push_back(static_cast<float>(v(i)));
}

Vector slice(const std::vector<float>& buf, int dim, std::size_t i) {
  Vector v(dim);
  for (int r = 0; r < dim; ++r) v(r) = buf[i * static_cast<std::size_t>(dim) + static_cast<std::size_t>(r)];
  return v;
}

void write_records(std::ostream& out, const Dataset& d) {
  const auto sd = static_cast<std::size_t>(d.state_dim());
  const auto ad = static_cast<std::size_t>(d.action_dim());
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t k = 0; k < sd; ++k) io::put_f32(out, d.states[i * sd + k]);
    for (std::size_t k = 0; k < ad; ++k) io::put_f32(out, d.actions[i * ad + k]);
    io::put_f32(out, d.rewards[i]);
    for (std::size_t k = 0; k < sd; ++k) io::put_f32(out, d.next_states[i * sd + k]);
    out.put(static_cast<char>(d.dones[i]));
  }
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double sq = 0.0;
  for (double x : xs) sq += (x - mean) * (x - mean);
  return {mean, std::sqrt(sq / static_cast<double>(xs.size()))};
}

Dataset collect(const Environment& env, Skill skill, std::size_t n, std::uint64_t seed) {
  Dataset d;
  d.metadata.env = env.name;
  d.metadata.flavor = std::string(to_string(skill));
  d.metadata.behavior = describe_policy(env, skill);
  d.metadata.seed = seed;
  d.metadata.state_dim = env.state_dim;
  d.metadata.action_dim = env.action_dim;
  Rng rng(seed);
  const Policy policy = scripted_policy(env, skill);
  while (d.size() < n) {
    Vector s = to_float_precision(initial_state(env, rng));
    for (int t = 0; t < env.horizon && d.size() < n; ++t) {
      const Vector a = to_float_precision(env.clip_action(policy(s, rng)));
      const StepResult r = step(env, s, a, t);
      const Vector next = to_float_precision(r.next_state);
      d.push_back(Transition{s, a, r.reward, next, r.done});
      s = next;
    }
  }
  return d;
}

void finalize_metadata(Dataset& d) {
  d.metadata.episode_returns = recompute_episode_returns(d);
  if (d.metadata.episode_returns.empty()) {
    // Shorter than one episode: report the partial return.
    double partial = 0.0;
    for (float r : d.rewards) partial += r;
    const auto [m, s] = mean_std({partial});
    d.metadata.behavior_return_mean = m;
    d.metadata.behavior_return_std = s;
  } else {
    const auto [m, s] = mean_std(d.metadata.episode_returns);
    d.metadata.behavior_return_mean = m;
    d.metadata.behavior_return_std = s;
  }
  const auto [lo, hi] = std::minmax_element(d.rewards.begin(), d.rewards.end());
  d.metadata.reward_min = *lo;
  d.metadata.reward_max = *hi;
  d.metadata.rewards_normalized = false;
  d.seal();
}

}  // namespace

Environment make_env(EnvId id) {
  Environment e;
  e.id = id;
  e.horizon = 200;
  e.dt = 0.05;
  if (id == EnvId::pointmass2d) {
    e.name = "pointmass2d";
    e.state_dim = 4;
    e.action_dim = 2;
    e.action_low = Vector::Constant(2, -1.0);
    e.action_high = Vector::Constant(2, 1.0);
    e.goal = Vector::Zero(2);
    e.reward_min = -2.0 * std::sqrt(2.0) * e.arena / 2.0;
    e.reward_max = 0.0;
  } else {
    e.name = "pendulum1";
    e.state_dim = 3;
    e.action_dim = 1;
    e.action_low = Vector::Constant(1, -2.0);
    e.action_high = Vector::Constant(1, 2.0);
    e.goal = Vector::Zero(0);
    e.reward_min = -(kPi * kPi + 0.1 * 64.0 + 0.001 * 4.0);
    e.reward_max = 0.0;
  }
  return e;
}

Environment make_env(std::string_view name) {
  if (name == "pointmass2d") return make_env(EnvId::pointmass2d);
  if (name == "pendulum1") return make_env(EnvId::pendulum1);
  throw ParameterError("unknown environment '" + std::string(name) + "' (valid: pointmass2d, pendulum1)");
}

std::vector<std::string> env_names() { return {"pointmass2d", "pendulum1"}; }

double pendulum_angle(const Vector& state) { return std::atan2(state(1), state(0)); }

StepResult step(const Environment& env, const Vector& state, const Vector& action, int t) {
  if (state.size() != env.state_dim || action.size() != env.action_dim) {
    throw DimensionError("state/action size does not match " + env.name);
  }
  const Vector a = env.clip_action(action);
  StepResult r;
  if (env.id == EnvId::pointmass2d) {
    Vector vel = (state.tail(2) + env.dt * a).cwiseMax(-env.max_speed).cwiseMin(env.max_speed);
    Vector pos = (state.head(2) + env.dt * vel).cwiseMax(-env.arena).cwiseMin(env.arena);
    r.reward = -(pos - env.goal).norm();
    r.next_state.resize(4);
    r.next_state << pos, vel;
  } else {
    const double th = pendulum_angle(state);
    const double thdot = state(2);
    const double u = a(0);
    r.reward = -(th * th + 0.1 * thdot * thdot + 0.001 * u * u);
    // th measured from upright, so gravity pushes away from 0.
    const double acc =
        3.0 * env.gravity / (2.0 * env.length) * std::sin(th) + 3.0 / (env.mass * env.length * env.length) * u;
    const double new_thdot = std::clamp(thdot + acc * env.dt, -env.max_angular_speed, env.max_angular_speed);
    const double new_th = wrap_angle(th + new_thdot * env.dt);
    r.next_state.resize(3);
    r.next_state << std::cos(new_th), std::sin(new_th), new_thdot;
  }
  r.done = t >= 0 && t + 1 >= env.horizon;
  return r;
}

Vector initial_state(const Environment& env, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (env.id == EnvId::pointmass2d) {
    const double angle = 2.0 * kPi * u(rng);
    const double radius = 0.95 + 0.05 * u(rng);
    Vector s = Vector::Zero(4);
    s(0) = env.goal(0) + radius * std::cos(angle);
    s(1) = env.goal(1) + radius * std::sin(angle);
    return s;
  }
  const double th = wrap_angle(kPi + 0.6 * (u(rng) - 0.5));
  const double thdot = 0.4 * (u(rng) - 0.5);
  Vector s(3);
  s << std::cos(th), std::sin(th), thdot;
  return s;
}

Skill skill_from_string(std::string_view name) {
  if (name == "random") return Skill::random;
  if (name == "medium") return Skill::medium;
  if (name == "expert") return Skill::expert;
  throw ParameterError("unknown skill '" + std::string(name) + "' (valid: random, medium, expert)");
}

std::string_view to_string(Skill s) {
  switch (s) {
    case Skill::random:
      return "random";
    case Skill::medium:
      return "medium";
    case Skill::expert:
      return "expert";
  }
  return "?";
}

Policy scripted_policy(const Environment& env, Skill skill) {
  switch (skill) {
    case Skill::random:
      return [env](const Vector&, Rng& rng) { return uniform_action(env, rng); };
    case Skill::expert:
      return [env](const Vector& s, Rng&) { return expert_action(env, s); };
    case Skill::medium:
      return [env](const Vector& s, Rng& rng) {
        std::normal_distribution<double> n(0.0, 1.0);
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        Vector a = expert_action(env, s);
        for (int i = 0; i < env.action_dim; ++i) a(i) += 0.3 * env.action_range()(i) * n(rng);
        if (coin(rng) < 0.2) a = uniform_action(env, rng);
        return env.clip_action(a);
      };
  }
  throw ParameterError("unknown skill");
}

std::string describe_policy(const Environment& env, Skill skill) {
  const std::string expert = env.id == EnvId::pointmass2d ? "PD controller kp=4 kd=4"
                                                          : "energy swing-up with PD catch (kp=10, kd=2)";
  switch (skill) {
    case Skill::random:
      return "uniform over the action box";
    case Skill::expert:
      return expert;
    case Skill::medium:
      return expert + " + N(0, (0.3 range)^2) noise, 20% uniform substitution";
  }
  return "";
}

double rollout_return(const Environment& env, const Policy& policy, const Vector& start, Rng& rng) {
  Vector s = start;
  double ret = 0.0;
  for (int t = 0; t < env.horizon; ++t) {
    const StepResult r = step(env, s, env.clip_action(policy(s, rng)), t);
    ret += r.reward;
    s = r.next_state;
  }
  return ret;
}

std::vector<double> evaluate_policy(const Environment& env, const Policy& policy, int n_episodes,
                                    std::uint64_t seed) {
  if (n_episodes < 1) throw ParameterError("n_episodes must be positive");
  Rng start_rng(seed);
  Rng policy_rng(seed ^ 0x5851f42d4c957f2dULL);
  std::vector<double> returns;
  returns.reserve(static_cast<std::size_t>(n_episodes));
  for (int e = 0; e < n_episodes; ++e) {
    const Vector start = initial_state(env, start_rng);
    returns.push_back(rollout_return(env, policy, start, policy_rng));
  }
  return returns;
}

void to_json(nlohmann::json& j, const DatasetMetadata& m) {
  j = nlohmann::json{{"format", "axrl-dataset"},
                     {"format_version", 1},
                     {"env", m.env},
                     {"flavor", m.flavor},
                     {"behavior", m.behavior},
                     {"seed", m.seed},
                     {"size", m.size},
                     {"state_dim", m.state_dim},
                     {"action_dim", m.action_dim},
                     {"reward_min", m.reward_min},
                     {"reward_max", m.reward_max},
                     {"rewards_normalized", m.rewards_normalized},
                     {"episode_returns", m.episode_returns},
                     {"behavior_return_mean", m.behavior_return_mean},
                     {"behavior_return_std", m.behavior_return_std},
                     {"fingerprint", m.fingerprint}};
}

void from_json(const nlohmann::json& j, DatasetMetadata& m) {
  try {
    if (j.at("format").get<std::string>() != "axrl-dataset" || j.at("format_version").get<int>() != 1) {
      throw FormatError("not an axrl dataset (format/version mismatch)");
    }
    m.env = j.at("env").get<std::string>();
    m.flavor = j.at("flavor").get<std::string>();
    m.behavior = j.at("behavior").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.size = j.at("size").get<std::size_t>();
    m.state_dim = j.at("state_dim").get<int>();
    m.action_dim = j.at("action_dim").get<int>();
    m.reward_min = j.at("reward_min").get<double>();
    m.reward_max = j.at("reward_max").get<double>();
    m.rewards_normalized = j.at("rewards_normalized").get<bool>();
    m.episode_returns = j.at("episode_returns").get<std::vector<double>>();
    m.behavior_return_mean = j.at("behavior_return_mean").get<double>();
    m.behavior_return_std = j.at("behavior_return_std").get<double>();
    m.fingerprint = j.at("fingerprint").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed dataset metadata: ") + e.what());
  }
}

bool operator==(const DatasetMetadata& a, const DatasetMetadata& b) {
  return nlohmann::json(a) == nlohmann::json(b);
}

Transition Dataset::transition(std::size_t i) const {
  if (i >= size()) throw std::out_of_range("transition index out of range");
  return Transition{slice(states, state_dim(), i), slice(actions, action_dim(), i), rewards[i],
                    slice(next_states, state_dim(), i), dones[i] != 0};
}

void Dataset::push_back(const Transition& t) {
  if (t.state.size() != state_dim() || t.next_state.size() != state_dim() || t.action.size() != action_dim()) {
    throw DimensionError("transition dimensions do not match the dataset");
  }
  append(states, t.state);
  append(actions, t.action);
  rewards.push_back(static_cast<float>(t.reward));
  append(next_states, t.next_state);
  dones.push_back(t.done ? 1 : 0);
}

Matrix Dataset::state_batch(const std::vector<std::size_t>& idx) const { return gather(states, state_dim(), idx); }
Matrix Dataset::action_batch(const std::vector<std::size_t>& idx) const { return gather(actions, action_dim(), idx); }
Matrix Dataset::next_state_batch(const std::vector<std::size_t>& idx) const {
  return gather(next_states, state_dim(), idx);
}

Vector Dataset::reward_batch(const std::vector<std::size_t>& idx) const {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t c = 0; c < idx.size(); ++c) out(static_cast<Eigen::Index>(c)) = rewards[idx[c]];
  return out;
}

Vector Dataset::done_batch(const std::vector<std::size_t>& idx) const {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t c = 0; c < idx.size(); ++c) out(static_cast<Eigen::Index>(c)) = dones[idx[c]] ? 1.0 : 0.0;
  return out;
}

Matrix Dataset::all_states() const {
  std::vector<std::size_t> idx(size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return state_batch(idx);
}

Matrix Dataset::all_actions() const {
  std::vector<std::size_t> idx(size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return action_batch(idx);
}

std::string Dataset::compute_fingerprint() const {
  std::ostringstream os;
  write_records(os, *this);
  return io::hex64(io::fnv1a(os.str()));
}

void Dataset::seal() {
  metadata.size = size();
  metadata.fingerprint = compute_fingerprint();
}

void Dataset::validate() const {
  if (size() == 0) throw FormatError("dataset is empty");
  const auto n = size();
  if (states.size() != n * static_cast<std::size_t>(state_dim()) ||
      next_states.size() != n * static_cast<std::size_t>(state_dim()) ||
      actions.size() != n * static_cast<std::size_t>(action_dim()) || dones.size() != n) {
    throw DimensionError("dataset columns have inconsistent lengths");
  }
  if (metadata.size != n) throw FormatError("metadata size does not match the payload");
  if (metadata.fingerprint != compute_fingerprint()) throw FormatError("dataset fingerprint mismatch");
}

std::vector<std::string> flavor_names() { return {"random", "medium", "expert", "medium-expert"}; }

Dataset generate_dataset(const Environment& env, std::string_view flavor, std::size_t n_transitions,
                         std::uint64_t seed) {
  if (n_transitions == 0) throw ParameterError("dataset size must be positive");
  Dataset d;
  if (flavor == "medium-expert") {
    const std::size_t n_medium = (n_transitions + 1) / 2;
    d = collect(env, Skill::medium, n_medium, seed);
    if (n_transitions > n_medium) {
      const Dataset expert = collect(env, Skill::expert, n_transitions - n_medium, seed + 1);
      for (std::size_t i = 0; i < expert.size(); ++i) d.push_back(expert.transition(i));
    }
    d.metadata.flavor = "medium-expert";
    d.metadata.behavior = describe_policy(env, Skill::medium) + " | " + describe_policy(env, Skill::expert);
    d.metadata.seed = seed;
  } else {
    Skill skill;
    try {
      skill = skill_from_string(flavor);
    } catch (const ParameterError&) {
      throw ParameterError("unknown flavor '" + std::string(flavor) +
                           "' (valid: random, medium, expert, medium-expert)");
    }
    d = collect(env, skill, n_transitions, seed);
  }
  finalize_metadata(d);
  return d;
}

std::vector<double> recompute_episode_returns(const Dataset& data) {
  std::vector<double> out;
  double acc = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    acc += data.rewards[i];
    if (data.dones[i]) {
      out.push_back(acc);
      acc = 0.0;
    }
  }
  return out;
}

void write_dataset(std::ostream& out, const Dataset& data) {
  data.validate();
  out << nlohmann::json(data.metadata).dump() << '\n';
  write_records(out, data);
}

Dataset read_dataset(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw FormatError("missing dataset header");
  Dataset d;
  try {
    d.metadata = nlohmann::json::parse(header).get<DatasetMetadata>();
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("dataset header is not JSON: ") + e.what());
  }
  const auto n = d.metadata.size;
  const auto sd = d.metadata.state_dim;
  const auto ad = d.metadata.action_dim;
  if (sd < 1 || ad < 1) throw FormatError("dataset header has non-positive dimensions");
  const std::size_t record = sizeof(float) * static_cast<std::size_t>(2 * sd + ad + 1) + 1;
  const std::string payload(std::istreambuf_iterator<char>(in), {});
  if (payload.size() != n * record) {
    throw FormatError("dataset payload is " + std::to_string(payload.size()) + " bytes, expected " +
                      std::to_string(n * record) + " (truncated or corrupt)");
  }
  std::istringstream body(payload);
  d.states.reserve(n * static_cast<std::size_t>(sd));
  d.next_states.reserve(n * static_cast<std::size_t>(sd));
  d.actions.reserve(n * static_cast<std::size_t>(ad));
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < sd; ++k) d.states.push_back(io::get_f32(body));
    for (int k = 0; k < ad; ++k) d.actions.push_back(io::get_f32(body));
    d.rewards.push_back(io::get_f32(body));
    for (int k = 0; k < sd; ++k) d.next_states.push_back(io::get_f32(body));
    const int done = body.get();
    if (done != 0 && done != 1) throw FormatError("invalid done byte in record " + std::to_string(i));
    d.dones.push_back(static_cast<std::uint8_t>(done));
  }
  d.validate();
  return d;
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  data.validate();
  io::write_atomic(path, [&](std::ostream& out) { write_dataset(out, data); });
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  return read_dataset(in);
}

OodMode OodMode::parse(std::string_view text) {
  if (text == "uniform") return OodMode{Kind::uniform, 0.0};
  if (text == "shuffled") return OodMode{Kind::shuffled, 0.0};
  if (text.rfind("noise:", 0) == 0) {
    const std::string number(text.substr(6));
    std::size_t used = 0;
    double fraction = 0.0;
    try {
      fraction = std::stod(number, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != number.size() || number.empty() || !(fraction >= 0.0)) {
      throw ParameterError("bad noise level in '" + std::string(text) + "'");
    }
    return OodMode{Kind::noise, fraction};
  }
  throw ParameterError("unknown OOD mode '" + std::string(text) + "' (valid: uniform, shuffled, noise:<fraction>)");
}

std::string OodMode::label() const {
  switch (kind) {
    case Kind::uniform:
      return "uniform";
    case Kind::shuffled:
      return "shuffled";
    case Kind::noise: {
      std::ostringstream os;
      os << "noise:" << noise_fraction;
      return os.str();
    }
  }
  return "?";
}

std::vector<std::size_t> derangement(std::size_t n, Rng& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = n; i-- > 1;) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(perm[i], perm[pick(rng)]);
  }
  return perm;
}

Matrix make_ood_actions(const Dataset& data, const Environment& env, const OodMode& mode, std::uint64_t seed) {
  if (data.action_dim() != env.action_dim) throw DimensionError("dataset and environment action sizes differ");
  Rng rng(seed);
  const Matrix actions = data.all_actions();
  const auto n = actions.cols();
  switch (mode.kind) {
    case OodMode::Kind::uniform: {
      Matrix out(env.action_dim, n);
      for (Eigen::Index c = 0; c < n; ++c) out.col(c) = uniform_action(env, rng);
      return out;
    }
    case OodMode::Kind::noise: {
      std::normal_distribution<double> nd(0.0, 1.0);
      Matrix out = actions;
      const Vector scale = mode.noise_fraction * env.action_range();
      for (Eigen::Index c = 0; c < n; ++c) {
        for (int r = 0; r < env.action_dim; ++r) out(r, c) += scale(r) * nd(rng);
        out.col(c) = env.clip_action(out.col(c));
      }
      return out;
    }
    case OodMode::Kind::shuffled: {
      if (n < 2) throw ParameterError("shuffling needs at least two transitions");
      const auto perm = derangement(static_cast<std::size_t>(n), rng);
      Matrix out(env.action_dim, n);
      for (Eigen::Index c = 0; c < n; ++c) out.col(c) = actions.col(static_cast<Eigen::Index>(perm[c]));
      return out;
    }
  }
  throw ParameterError("unknown OOD mode");
}

}  // namespace axrl::env
