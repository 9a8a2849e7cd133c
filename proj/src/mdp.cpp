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

#include "axrl/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "axrl/errors.hpp"

namespace axrl::mdp {

namespace {

constexpr double kSimplexTol = 1e-9;

std::string shape_str(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream os;
    os << what << " has shape " << shape_str(m) << ", expected " << rows << "x" << cols;
    throw DimensionError(os.str());
  }
}

void require_same_shape(const TabularMdp& mdp, const Matrix& m, const char* what) {
  require_shape(m, mdp.n_states, mdp.n_actions, what);
}

void require_iterations(int n_iter) {
  if (n_iter < 1) throw ParameterError("n_iter must be at least 1");
}

void require_temperature(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ParameterError("temperature tau must be positive and finite");
}

/// Row-wise log-sum-exp with max subtraction.
Vector row_logsumexp(const Matrix& x) {
  Vector out(x.rows());
  for (Eigen::Index s = 0; s < x.rows(); ++s) {
    const double m = x.row(s).maxCoeff();
    out(s) = m + std::log((x.row(s).array() - m).exp().sum());
  }
  return out;
}

Matrix row_log_softmax(const Matrix& logits) {
  const Vector lse = row_logsumexp(logits);
  return logits.colwise() - lse;
}

/// Shared engine of the four additive schemes: greedy on Q - shift, evaluation
/// effective_reward + gamma P <pi, Q - shift>.
ViTrace shifted_vi(const TabularMdp& mdp, const Matrix& effective_reward, const Matrix* shift, const QTable& q0,
                   int n_iter) {
  mdp.validate();
  require_iterations(n_iter);
  require_same_shape(mdp, q0, "q0");
  ViTrace trace;
  trace.policies.reserve(static_cast<std::size_t>(n_iter));
  trace.q_tables.reserve(static_cast<std::size_t>(n_iter));
  QTable q = q0;
  for (int k = 0; k < n_iter; ++k) {
    const Matrix scores = shift ? Matrix(q - *shift) : q;
    TabularPolicy pi = greedy_policy(scores);
    q = effective_reward + mdp.gamma * expected_next(mdp, policy_dot(pi, scores));
    trace.policies.push_back(std::move(pi));
    trace.q_tables.push_back(q);
  }
  trace.iterations = n_iter;
  return trace;
}

}  // namespace

void TabularMdp::validate() const {
  if (n_states < 1 || n_actions < 1) throw DimensionError("MDP needs at least one state and one action");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ParameterError("gamma must lie strictly inside (0, 1)");
  require_shape(transition, static_cast<Eigen::Index>(n_states) * n_actions, n_states, "transition");
  require_shape(reward, n_states, n_actions, "reward");
  if (!reward.allFinite()) throw ParameterError("reward contains non-finite entries");
  for (Eigen::Index r = 0; r < transition.rows(); ++r) {
    if ((transition.row(r).array() < 0.0).any() || std::abs(transition.row(r).sum() - 1.0) > kSimplexTol) {
      std::ostringstream os;
      os << "transition row (s=" << r / n_actions << ", a=" << r % n_actions << ") is not a distribution";
      throw ParameterError(os.str());
    }
  }
}

int TabularPolicy::mode(int s) const {
  Eigen::Index best = 0;
  for (Eigen::Index a = 1; a < probs.cols(); ++a) {
    if (probs(s, a) > probs(s, best)) best = a;
  }
  return static_cast<int>(best);
}

std::vector<int> TabularPolicy::modes() const {
  std::vector<int> out(static_cast<std::size_t>(n_states()));
  for (int s = 0; s < n_states(); ++s) out[static_cast<std::size_t>(s)] = mode(s);
  return out;
}

void TabularPolicy::validate() const {
  for (Eigen::Index s = 0; s < probs.rows(); ++s) {
    if ((probs.row(s).array() < 0.0).any() || std::abs(probs.row(s).sum() - 1.0) > kSimplexTol) {
      throw ParameterError("policy row " + std::to_string(s) + " is not a distribution");
    }
  }
}

void BonusTable::validate() const {
  if (!values.allFinite() || (values.array() < 0.0).any()) {
    throw ParameterError("bonus entries must be finite and nonnegative");
  }
}

Vector policy_dot(const TabularPolicy& policy, const Matrix& q) {
  if (policy.probs.rows() != q.rows() || policy.probs.cols() != q.cols()) {
    throw DimensionError("policy " + shape_str(policy.probs) + " and table " + shape_str(q) + " differ in shape");
  }
  return policy.probs.cwiseProduct(q).rowwise().sum();
}

Matrix expected_next(const TabularMdp& mdp, const Vector& v) {
  if (v.size() != mdp.n_states) throw DimensionError("state vector length does not match n_states");
  const Vector flat = mdp.transition * v;
  // flat is laid out (s, a) row-major; reshape into n_states x n_actions.
  Matrix out(mdp.n_states, mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) out(s, a) = flat(mdp.row(s, a));
  }
  return out;
}

QTable bellman_evaluate(const TabularMdp& mdp, const TabularPolicy& policy, const QTable& q,
                        const Matrix& effective_reward) {
  mdp.validate();
  require_same_shape(mdp, policy.probs, "policy");
  require_same_shape(mdp, q, "q");
  require_same_shape(mdp, effective_reward, "effective_reward");
  return effective_reward + mdp.gamma * expected_next(mdp, policy_dot(policy, q));
}

TabularPolicy greedy_policy(const Matrix& scores) {
  TabularPolicy pi{Matrix::Zero(scores.rows(), scores.cols())};
  for (Eigen::Index s = 0; s < scores.rows(); ++s) {
    Eigen::Index best = 0;
    for (Eigen::Index a = 1; a < scores.cols(); ++a) {
      if (scores(s, a) > scores(s, best)) best = a;
    }
    pi.probs(s, best) = 1.0;
  }
  return pi;
}

ViTrace vi_plain(const TabularMdp& mdp, const QTable& q0, int n_iter) {
  return shifted_vi(mdp, mdp.reward, nullptr, q0, n_iter);
}

ViTrace vi_exploration(const TabularMdp& mdp, const BonusTable& bonus, const QTable& q0, int n_iter) {
  require_same_shape(mdp, bonus.values, "bonus");
  bonus.validate();
  return shifted_vi(mdp, mdp.reward + bonus.values, nullptr, q0, n_iter);
}

ViTrace vi_naive_antiexplore(const TabularMdp& mdp, const BonusTable& bonus, const QTable& q0, int n_iter) {
  require_same_shape(mdp, bonus.values, "bonus");
  bonus.validate();
  return shifted_vi(mdp, mdp.reward - bonus.values, nullptr, q0, n_iter);
}

ViTrace vi_penalized_bootstrap(const TabularMdp& mdp, const BonusTable& bonus, const QTable& q0_prime,
                               int n_iter) {
  require_same_shape(mdp, bonus.values, "bonus");
  bonus.validate();
  return shifted_vi(mdp, mdp.reward, &bonus.values, q0_prime, n_iter);
}

Matrix log_softmax_bonus_policy(const BonusTable& bonus, double beta, double tau) {
  require_temperature(tau);
  if (beta < 0.0) throw ParameterError("beta must be nonnegative");
  bonus.validate();
  return row_log_softmax(-(beta / tau) * bonus.values);
}

TabularPolicy softmax_bonus_policy(const BonusTable& bonus, double beta, double tau) {
  return TabularPolicy{log_softmax_bonus_policy(bonus, beta, tau).array().exp().matrix()};
}

Matrix delta_b(const BonusTable& bonus, double beta, double tau) {
  require_temperature(tau);
  bonus.validate();
  const Vector lse = row_logsumexp(-(beta / tau) * bonus.values);
  return (beta * bonus.values).colwise() + tau * lse;
}

Vector kl_divergence_log(const Matrix& log_p1, const Matrix& log_p2) {
  if (log_p1.rows() != log_p2.rows() || log_p1.cols() != log_p2.cols()) {
    throw DimensionError("KL arguments differ in shape");
  }
  Vector out = Vector::Zero(log_p1.rows());
  for (Eigen::Index s = 0; s < log_p1.rows(); ++s) {
    for (Eigen::Index a = 0; a < log_p1.cols(); ++a) {
      const double p = std::exp(log_p1(s, a));
      if (p > 0.0) out(s) += p * (log_p1(s, a) - log_p2(s, a));
    }
  }
  return out;
}

Vector kl_divergence(const TabularPolicy& p1, const TabularPolicy& p2) {
  if (p1.probs.rows() != p2.probs.rows() || p1.probs.cols() != p2.probs.cols()) {
    throw DimensionError("KL arguments differ in shape");
  }
  Vector out = Vector::Zero(p1.probs.rows());
  for (Eigen::Index s = 0; s < p1.probs.rows(); ++s) {
    for (Eigen::Index a = 0; a < p1.probs.cols(); ++a) {
      const double p = p1.probs(s, a);
      if (p > 0.0) out(s) += p * (std::log(p) - std::log(p2.probs(s, a)));
    }
  }
  return out;
}

Vector entropy(const TabularPolicy& p) {
  Vector out = Vector::Zero(p.probs.rows());
  for (Eigen::Index s = 0; s < p.probs.rows(); ++s) {
    for (Eigen::Index a = 0; a < p.probs.cols(); ++a) {
      const double v = p.probs(s, a);
      if (v > 0.0) out(s) -= v * std::log(v);
    }
  }
  return out;
}

ViTrace vi_kl_regularized(const TabularMdp& mdp, const BonusTable& bonus, double beta, double tau,
                          const QTable& q0, int n_iter) {
  mdp.validate();
  require_iterations(n_iter);
  require_same_shape(mdp, q0, "q0");
  require_same_shape(mdp, bonus.values, "bonus");
  const Matrix log_prior = log_softmax_bonus_policy(bonus, beta, tau);
  for (Eigen::Index s = 0; s < log_prior.rows(); ++s) {
    if (!log_prior.row(s).array().isFinite().any()) {
      throw ParameterError("reference policy row " + std::to_string(s) + " is entirely zero");
    }
  }
  ViTrace trace;
  QTable q = q0;
  for (int k = 0; k < n_iter; ++k) {
    // argmax_pi <pi, Q> - tau KL(pi || pi_b) = softmax((Q + tau ln pi_b) / tau)
    const Matrix log_pi = row_log_softmax(q / tau + log_prior);
    TabularPolicy pi{log_pi.array().exp().matrix()};
    const Vector v = policy_dot(pi, q) - tau * kl_divergence_log(log_pi, log_prior);
    q = mdp.reward + mdp.gamma * expected_next(mdp, v);
    trace.policies.push_back(std::move(pi));
    trace.q_tables.push_back(q);
  }
  trace.iterations = n_iter;
  return trace;
}

ViTrace vi_kl_regularized_delta_form(const TabularMdp& mdp, const BonusTable& bonus, double beta, double tau,
                                     const QTable& q0, int n_iter) {
  mdp.validate();
  require_iterations(n_iter);
  require_same_shape(mdp, q0, "q0");
  require_same_shape(mdp, bonus.values, "bonus");
  const Matrix delta = delta_b(bonus, beta, tau);
  ViTrace trace;
  QTable q = q0;
  for (int k = 0; k < n_iter; ++k) {
    const Matrix shifted = q - delta;
    const Matrix log_pi = row_log_softmax(shifted / tau);
    TabularPolicy pi{log_pi.array().exp().matrix()};
    // tau H(pi) = -tau <pi, ln pi>
    const Vector v = policy_dot(pi, shifted) - tau * policy_dot(pi, log_pi);
    q = mdp.reward + mdp.gamma * expected_next(mdp, v);
    trace.policies.push_back(std::move(pi));
    trace.q_tables.push_back(q);
  }
  trace.iterations = n_iter;
  return trace;
}

ConvergedRun run_to_convergence(const TabularMdp& mdp, Scheme scheme, const BonusTable& bonus, const QTable& q0,
                                double tol, int max_iter) {
  mdp.validate();
  require_iterations(max_iter);
  require_same_shape(mdp, q0, "q0");
  Matrix effective = mdp.reward;
  const Matrix* shift = nullptr;
  if (scheme != Scheme::plain) {
    require_same_shape(mdp, bonus.values, "bonus");
    bonus.validate();
  }
  switch (scheme) {
    case Scheme::plain:
      break;
    case Scheme::exploration:
      effective += bonus.values;
      break;
    case Scheme::naive_antiexplore:
      effective -= bonus.values;
      break;
    case Scheme::penalized_bootstrap:
      shift = &bonus.values;
      break;
  }
  ConvergedRun run;
  QTable q = q0;
  for (int k = 0; k < max_iter; ++k) {
    const Matrix scores = shift ? Matrix(q - *shift) : q;
    const TabularPolicy pi = greedy_policy(scores);
    QTable next = effective + mdp.gamma * expected_next(mdp, policy_dot(pi, scores));
    const double change = (next - q).cwiseAbs().maxCoeff();
    q = std::move(next);
    run.iterations = k + 1;
    if (change < tol) {
      run.converged = true;
      break;
    }
  }
  run.policy = greedy_policy(shift ? Matrix(q - *shift) : q);
  run.q = std::move(q);
  return run;
}

LimitReport verify_limit_claim(const TabularMdp& mdp, const BonusTable& bonus, double beta,
                               const std::vector<double>& tau_schedule, const QTable& q0, int n_iter) {
  LimitReport report;
  report.taus = tau_schedule;
  require_same_shape(mdp, bonus.values, "bonus");
  bonus.validate();
  if (tau_schedule.empty()) throw ParameterError("empty temperature schedule");
  for (Eigen::Index s = 0; s < bonus.values.rows(); ++s) {
    if (bonus.values.row(s).minCoeff() != 0.0) {
      report.precondition_ok = false;
      report.message = "min_a b(s, a) = 0 violated in state " + std::to_string(s);
      break;
    }
  }
  const BonusTable scaled{beta * bonus.values};
  const ViTrace reference = vi_penalized_bootstrap(mdp, scaled, q0, n_iter);
  for (double tau : tau_schedule) {
    const ViTrace kl = vi_kl_regularized(mdp, bonus, beta, tau, q0, n_iter);
    int count = 0;
    for (int k = 0; k < n_iter; ++k) {
      const auto& a = kl.policies[static_cast<std::size_t>(k)];
      const auto& b = reference.policies[static_cast<std::size_t>(k)];
      for (int s = 0; s < mdp.n_states; ++s) count += a.mode(s) != b.mode(s) ? 1 : 0;
    }
    if (!report.disagreements.empty() && count > report.disagreements.back()) report.non_increasing = false;
    report.disagreements.push_back(count);
  }
  report.reaches_zero = report.disagreements.back() == 0;
  return report;
}

TabularMdp random_mdp(int n_states, int n_actions, double gamma, std::uint64_t seed) {
  if (n_states < 1 || n_actions < 1) throw DimensionError("MDP needs at least one state and one action");
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  TabularMdp mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.gamma = gamma;
  mdp.transition.resize(static_cast<Eigen::Index>(n_states) * n_actions, n_states);
  for (Eigen::Index r = 0; r < mdp.transition.rows(); ++r) {
    // Normalized unit exponentials are Dirichlet(1, ..., 1).
    for (int sp = 0; sp < n_states; ++sp) mdp.transition(r, sp) = expo(rng);
    mdp.transition.row(r) /= mdp.transition.row(r).sum();
  }
  mdp.reward.resize(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) mdp.reward(s, a) = unif(rng);
  }
  mdp.validate();
  return mdp;
}

BonusTable random_bonus(int n_states, int n_actions, std::uint64_t seed, double scale, bool zero_min) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, scale);
  BonusTable b{Matrix(n_states, n_actions)};
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) b.values(s, a) = unif(rng);
    if (zero_min) b.values.row(s).array() -= b.values.row(s).minCoeff();
  }
  return b;
}

void to_json(nlohmann::json& j, const TabularMdp& mdp) {
  nlohmann::json transition = nlohmann::json::array();
  nlohmann::json reward = nlohmann::json::array();
  for (int s = 0; s < mdp.n_states; ++s) {
    nlohmann::json per_action = nlohmann::json::array();
    nlohmann::json rewards = nlohmann::json::array();
    for (int a = 0; a < mdp.n_actions; ++a) {
      std::vector<double> row(mdp.transition.cols());
      for (Eigen::Index sp = 0; sp < mdp.transition.cols(); ++sp) row[sp] = mdp.transition(mdp.row(s, a), sp);
      per_action.push_back(row);
      rewards.push_back(mdp.reward(s, a));
    }
    transition.push_back(std::move(per_action));
    reward.push_back(std::move(rewards));
  }
  j = nlohmann::json{{"n_states", mdp.n_states},
                     {"n_actions", mdp.n_actions},
                     {"gamma", mdp.gamma},
                     {"transition", std::move(transition)},
                     {"reward", std::move(reward)}};
}

void from_json(const nlohmann::json& j, TabularMdp& mdp) {
  TabularMdp out;
  try {
    out.n_states = j.at("n_states").get<int>();
    out.n_actions = j.at("n_actions").get<int>();
    out.gamma = j.at("gamma").get<double>();
    if (out.n_states < 1 || out.n_actions < 1) throw DimensionError("MDP needs at least one state and one action");
    const auto& transition = j.at("transition");
    const auto& reward = j.at("reward");
    if (transition.size() != static_cast<std::size_t>(out.n_states) ||
        reward.size() != static_cast<std::size_t>(out.n_states)) {
      throw DimensionError("transition/reward outer length does not match n_states");
    }
    out.transition.resize(static_cast<Eigen::Index>(out.n_states) * out.n_actions, out.n_states);
    out.reward.resize(out.n_states, out.n_actions);
    for (int s = 0; s < out.n_states; ++s) {
      if (transition[s].size() != static_cast<std::size_t>(out.n_actions) ||
          reward[s].size() != static_cast<std::size_t>(out.n_actions)) {
        throw DimensionError("transition/reward inner length does not match n_actions");
      }
      for (int a = 0; a < out.n_actions; ++a) {
        const auto row = transition[s][a].get<std::vector<double>>();
        if (row.size() != static_cast<std::size_t>(out.n_states)) {
          throw DimensionError("transition row length does not match n_states");
        }
        for (int sp = 0; sp < out.n_states; ++sp) out.transition(out.row(s, a), sp) = row[sp];
        out.reward(s, a) = reward[s][a].get<double>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed MDP document: ") + e.what());
  }
  out.validate();
  mdp = std::move(out);
}

void write_trace_csv(std::ostream& out, const ViTrace& trace) {
  out << "iteration,state,chosen_action,q_value\n";
  out.precision(17);
  for (int k = 0; k < trace.iterations; ++k) {
    const auto& pi = trace.policies[static_cast<std::size_t>(k)];
    const auto& q = trace.q_tables[static_cast<std::size_t>(k)];
    for (int s = 0; s < pi.n_states(); ++s) {
      const int a = pi.mode(s);
      out << (k + 1) << ',' << s << ',' << a << ',' << q(s, a) << '\n';
    }
  }
}

}  // namespace axrl::mdp
