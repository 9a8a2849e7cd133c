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
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace axrl::mdp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Finite MDP. Transition row `s * n_actions + a` holds P(. | s, a).
struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  Matrix transition;  // (n_states * n_actions) x n_states
  Matrix reward;      // n_states x n_actions
  double gamma = 0.9;

  [[nodiscard]] Eigen::Index row(int s, int a) const { return static_cast<Eigen::Index>(s) * n_actions + a; }
  /// Throws DimensionError / ParameterError when the model is malformed.
  void validate() const;
};

/// Action values indexed (s, a).
using QTable = Matrix;

struct TabularPolicy {
  Matrix probs;  // n_states x n_actions, rows on the simplex

  [[nodiscard]] int n_states() const { return static_cast<int>(probs.rows()); }
  [[nodiscard]] int n_actions() const { return static_cast<int>(probs.cols()); }
  /// Most probable action of state s, lowest index on ties.
  [[nodiscard]] int mode(int s) const;
  [[nodiscard]] std::vector<int> modes() const;
  void validate() const;
};

struct BonusTable {
  Matrix values;  // nonnegative, n_states x n_actions

  void validate() const;
};

/// Policies pi_1..pi_n and tables Q_1..Q_n produced by n iterations of a scheme.
struct ViTrace {
  std::vector<TabularPolicy> policies;
  std::vector<QTable> q_tables;
  int iterations = 0;
};

/// <pi, Q>(s) = sum_a pi(a|s) Q(s, a).
Vector policy_dot(const TabularPolicy& policy, const Matrix& q);
/// (P v)(s, a) = sum_s' P(s'|s, a) v(s').
Matrix expected_next(const TabularMdp& mdp, const Vector& v);

/// effective_reward + gamma * P <policy, q>.
QTable bellman_evaluate(const TabularMdp& mdp, const TabularPolicy& policy, const QTable& q,
                        const Matrix& effective_reward);

/// Deterministic argmax policy per row, ties go to the lowest action index.
TabularPolicy greedy_policy(const Matrix& scores);

ViTrace vi_plain(const TabularMdp& mdp, const QTable& q0, int n_iter);
/// Bonus added to the reward.
ViTrace vi_exploration(const TabularMdp& mdp, const BonusTable& bonus, const QTable& q0, int n_iter);
/// Bonus subtracted from the reward.
ViTrace vi_naive_antiexplore(const TabularMdp& mdp, const BonusTable& bonus, const QTable& q0, int n_iter);
/// Bonus subtracted from the bootstrapped value: greedy on Q' - b, Q' <- r + gamma P <pi, Q' - b>.
ViTrace vi_penalized_bootstrap(const TabularMdp& mdp, const BonusTable& bonus, const QTable& q0_prime,
                               int n_iter);

/// Row-wise log softmax(-(beta / tau) b(s, .)).
Matrix log_softmax_bonus_policy(const BonusTable& bonus, double beta, double tau);
TabularPolicy softmax_bonus_policy(const BonusTable& bonus, double beta, double tau);

/// beta b(s,a) + tau ln sum_a' exp(-beta b(s,a') / tau), evaluated with a stable log-sum-exp.
Matrix delta_b(const BonusTable& bonus, double beta, double tau);

/// KL-regularized VI toward the softmax bonus policy, written with the KL penalty.
ViTrace vi_kl_regularized(const TabularMdp& mdp, const BonusTable& bonus, double beta, double tau,
                          const QTable& q0, int n_iter);
/// The same scheme rewritten as Q - delta_b plus an entropy bonus.
ViTrace vi_kl_regularized_delta_form(const TabularMdp& mdp, const BonusTable& bonus, double beta, double tau,
                                     const QTable& q0, int n_iter);

/// KL(p1 || p2) per state, computed from log-probabilities so exact zeros in p1 are harmless.
Vector kl_divergence_log(const Matrix& log_p1, const Matrix& log_p2);
Vector kl_divergence(const TabularPolicy& p1, const TabularPolicy& p2);
Vector entropy(const TabularPolicy& p);

enum class Scheme { plain, exploration, naive_antiexplore, penalized_bootstrap };

struct ConvergedRun {
  TabularPolicy policy;  // greedy policy of the last iterate
  QTable q;
  int iterations = 0;
  bool converged = false;
};

/// Iterates until ||Q_{k+1} - Q_k||_inf < tol or max_iter iterations.
ConvergedRun run_to_convergence(const TabularMdp& mdp, Scheme scheme, const BonusTable& bonus,
                                const QTable& q0, double tol = 1e-10, int max_iter = 10000);

struct LimitReport {
  bool precondition_ok = true;
  std::string message;
  std::vector<double> taus;
  /// Per tau: number of (iteration, state) greedy choices where the KL scheme and the
  /// penalized-bootstrap scheme on beta * b disagree.
  std::vector<int> disagreements;
  bool non_increasing = true;
  bool reaches_zero = false;
};

/// Compares KL-regularized VI against penalized-bootstrap VI on beta * b along a temperature
/// schedule. Requires min_a b(s, a) = 0 in every state; violations are reported in the result.
LimitReport verify_limit_claim(const TabularMdp& mdp, const BonusTable& bonus, double beta,
                               const std::vector<double>& tau_schedule, const QTable& q0, int n_iter);

/// Dirichlet(1, ..., 1) transition rows, rewards uniform in [0, 1].
TabularMdp random_mdp(int n_states, int n_actions, double gamma, std::uint64_t seed);
/// Uniform [0, scale) bonus; with `zero_min` every row is shifted so its minimum is 0.
BonusTable random_bonus(int n_states, int n_actions, std::uint64_t seed, double scale = 1.0,
                        bool zero_min = false);

void to_json(nlohmann::json& j, const TabularMdp& mdp);
void from_json(const nlohmann::json& j, TabularMdp& mdp);

/// CSV with columns iteration,state,chosen_action,q_value.
void write_trace_csv(std::ostream& out, const ViTrace& trace);

}  // namespace axrl::mdp
