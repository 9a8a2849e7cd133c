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

// Acceptance run: one PASS/FAIL line per criterion. With arguments, runs only the listed
// criteria (e.g. `axrl_acceptance 1 3`).

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "axrl/agent.hpp"
#include "axrl/cli.hpp"
#include "axrl/evalkit.hpp"
#include "axrl/io.hpp"
#include "axrl/mdp_exact.hpp"
#include "grad_check.hpp"

using namespace axrl;
namespace fs = std::filesystem;
using nn::Matrix;
using nn::Vector;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Matrix uniform(Eigen::Index rows, Eigen::Index cols, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

struct RandomMdp {
  mdp::TabularMdp mdp;
  int n_states = 0;
  int n_actions = 0;
};

RandomMdp draw_mdp(std::mt19937_64& rng) {
  const int ns = std::uniform_int_distribution<int>(2, 6)(rng);
  const int na = std::uniform_int_distribution<int>(2, 4)(rng);
  const double gammas[] = {0.5, 0.9, 0.99};
  const double gamma = gammas[std::uniform_int_distribution<int>(0, 2)(rng)];
  return {mdp::random_mdp(ns, na, gamma, rng()), ns, na};
}

// ---------------------------------------------------------------- 1
Outcome criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  evalkit::VerifyDpConfig c;
  c.n_mdps = 100;
  c.iterations = 200;
  c.seed = 1;
  const auto report = evalkit::verify_dp(c);
  int passed = 0, total = 0;
  std::string first;
  for (const auto& check : report.checks) {
    if (check.invariant != "penalized_equivalence" && check.invariant != "zero_bonus_control") continue;
    ++total;
    if (check.passed) {
      ++passed;
    } else if (first.empty()) {
      first = check.invariant + " mdp seed " + std::to_string(check.mdp_seed) + ": " + check.detail;
    }
  }
  const double secs = seconds_since(t0);
  return {passed == total && total == 200 && secs < 30.0,
          std::to_string(passed) + "/" + std::to_string(total) +
              " equivalence checks over 100 MDPs, 200 iterations, " + fmt(secs, 3) + " s" +
              (first.empty() ? "" : "; " + first)};
}

// ---------------------------------------------------------------- 2
Outcome criterion_2() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2);
  int found = 0, matched = 0;
  double worst = 0.0;
  while (found < 20) {
    const auto r = draw_mdp(rng);
    const mdp::BonusTable b = mdp::random_bonus(r.n_states, r.n_actions, rng(), 1.0);
    const mdp::QTable q0 = uniform(r.n_states, r.n_actions, -1.0, 1.0, rng);
    if (std::pow(r.n_actions, r.n_states) > 4096.0) continue;
    ++found;
    const auto run = mdp::run_to_convergence(r.mdp, mdp::Scheme::penalized_bootstrap, b, q0);
    const Matrix reward = r.mdp.reward - b.values;
    const auto opt = mdp::enumerate_optimum(r.mdp, reward);
    const double gap = (opt.best_values - mdp::exact_policy_values(r.mdp, run.policy.modes(), reward)).cwiseAbs().maxCoeff();
    worst = std::max(worst, gap);
    if (run.converged && gap <= 1e-8) ++matched;
  }
  const double secs = seconds_since(t0);
  return {matched == 20 && secs < 60.0, std::to_string(matched) + "/20 MDPs match the enumerated optimum, worst gap " +
                                            fmt(worst) + ", " + fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------- 3
Outcome criterion_3() {
  // Unique argmax: every greedy choice of the limiting scheme wins by at least this much.
  constexpr double kMargin = 1e-3;
  constexpr int kIterations = 200;
  std::mt19937_64 rng(3);
  int used = 0, skipped = 0, zero = 0;
  std::string first_bad;
  while (used < 50) {
    const auto r = draw_mdp(rng);
    const mdp::BonusTable b0 = mdp::random_bonus(r.n_states, r.n_actions, rng(), 1.0, true);
    const mdp::QTable q0 = uniform(r.n_states, r.n_actions, -1.0, 1.0, rng);
    const auto reference = mdp::vi_penalized_bootstrap(r.mdp, b0, q0, kIterations);
    if (evalkit::greedy_margin(reference, q0, b0.values) < kMargin) {
      ++skipped;
      continue;
    }
    ++used;
    const auto limit = mdp::verify_limit_claim(r.mdp, b0, 1.0, {1e-6}, q0, kIterations);
    if (limit.precondition_ok && limit.disagreements.back() == 0) {
      ++zero;
    } else if (first_bad.empty()) {
      first_bad = "MDP " + std::to_string(used) + ": " + std::to_string(limit.disagreements.back()) + " disagreements";
    }
  }

  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int ns = std::uniform_int_distribution<int>(1, 6)(rng);
    const int na = std::uniform_int_distribution<int>(2, 6)(rng);
    Matrix p = uniform(ns, na, 0.01, 1.0, rng);
    for (int s = 0; s < ns; ++s) p.row(s) /= p.row(s).sum();
    const mdp::TabularPolicy pi{p};
    const Matrix q = uniform(ns, na, -5.0, 5.0, rng);
    const mdp::BonusTable b{uniform(ns, na, 0.0, 2.0, rng)};
    const double beta = std::uniform_real_distribution<double>(0.1, 10.0)(rng);
    const double tau = std::uniform_real_distribution<double>(0.01, 2.0)(rng);
    const Matrix log_prior = mdp::log_softmax_bonus_policy(b, beta, tau);
    const Vector lhs = mdp::policy_dot(pi, q) - tau * mdp::kl_divergence_log(p.array().log().matrix(), log_prior);
    const Vector rhs = mdp::policy_dot(pi, q - mdp::delta_b(b, beta, tau)) + tau * mdp::entropy(pi);
    worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
  }
  return {zero == 50 && worst <= 1e-8,
          std::to_string(zero) + "/50 MDPs with 0 disagreements at tau 1e-6 (" + std::to_string(skipped) +
              " draws skipped for greedy margin < 1e-3); rewrite identity worst gap " + fmt(worst) + " over 1000 triples" +
              (first_bad.empty() ? "" : "; " + first_bad)};
}

// ---------------------------------------------------------------- 4
using testing::near_kink;
using testing::worst_param_error;

bonus::BonusConfig tiny_bonus() {
  bonus::BonusConfig c = bonus::BonusConfig::desk();
  c.hidden = {8, 8};
  c.latent_dim = 3;
  return c;
}

bool cvae_near_kink(const bonus::CvaeModel& m, const Matrix& s, const Matrix& a, const Matrix* noise) {
  Matrix in(s.rows() + a.rows(), s.cols());
  in << s, a;
  if (near_kink(m.encoder, in, 1e-3)) return true;
  const Matrix out = nn::forward(m.encoder, in);
  const Matrix ls = out.bottomRows(m.latent_dim);
  if ((ls.array() - bonus::kLogSigmaMin).abs().minCoeff() < 1e-3 ||
      (ls.array() - bonus::kLogSigmaMax).abs().minCoeff() < 1e-3)
    return true;
  Matrix z = out.topRows(m.latent_dim);
  if (noise != nullptr) z += ls.array().exp().matrix().cwiseProduct(*noise);
  Matrix dec_in(s.rows() + m.latent_dim, s.cols());
  dec_in << s, z;
  return near_kink(m.decoder, dec_in, 1e-3);
}

agent::AgentConfig small_agent() {
  agent::AgentConfig c = agent::AgentConfig::desk();
  c.hidden = {6, 5};
  return c;
}

Outcome criterion_4() {
  const auto t0 = std::chrono::steady_clock::now();
  constexpr int kConfigs = 100;
  constexpr double kTol = 1e-4;
  std::mt19937_64 rng(4);
  std::ostringstream detail;
  bool pass = true;
  const std::vector<std::string> env_names{"pointmass2d", "pendulum1"};

  auto report = [&](const char* name, int checked, int skipped, double worst) {
    pass = pass && checked == kConfigs && worst < kTol;
    detail << name << " " << fmt(worst, 2) << " (" << checked << " configs, " << skipped << " skipped); ";
  };

  {  // MLP forward/backward, parameter and input gradients
    const std::vector<nn::Activation> acts{nn::Activation::relu, nn::Activation::tanh, nn::Activation::elu,
                                           nn::Activation::identity};
    int checked = 0, skipped = 0;
    double worst = 0.0;
    while (checked < kConfigs) {
      const int depth = std::uniform_int_distribution<int>(1, 3)(rng);
      std::vector<int> sizes{std::uniform_int_distribution<int>(1, 6)(rng)};
      std::vector<nn::Activation> layer_acts;
      for (int l = 0; l < depth; ++l) {
        sizes.push_back(std::uniform_int_distribution<int>(1, 8)(rng));
        layer_acts.push_back(acts[std::uniform_int_distribution<std::size_t>(0, acts.size() - 1)(rng)]);
      }
      auto p = nn::make_mlp(sizes, layer_acts, rng);
      Matrix x = nn::standard_normal(sizes.front(), 3, rng);
      const Matrix g = nn::standard_normal(sizes.back(), 3, rng);
      if (near_kink(p, x, 1e-4)) {
        ++skipped;
        continue;
      }
      ++checked;
      nn::ForwardCache cache;
      nn::forward(p, x, &cache);
      const auto grads = nn::backward(p, cache, g);
      auto loss = [&]() { return nn::forward(p, x).cwiseProduct(g).sum(); };
      worst = std::max(worst, worst_param_error(p, grads.params, loss));
      worst = std::max(worst, testing::worst_input_error(x, grads.input, loss));
    }
    report("mlp", checked, skipped, worst);
  }

  {  // CVAE ELBO
    int checked = 0, skipped = 0;
    double worst = 0.0;
    while (checked < kConfigs) {
      const auto e = env::make_env(env_names[static_cast<std::size_t>(checked % 2)]);
      auto m = bonus::make_cvae(e.state_dim, e.action_low, e.action_high, tiny_bonus(), rng);
      const Matrix s = uniform(e.state_dim, 4, -1.5, 1.5, rng);
      const Matrix a = e.action_high.asDiagonal() * uniform(e.action_dim, 4, -0.9, 0.9, rng);
      const Matrix noise = nn::standard_normal(m.latent_dim, 4, rng);
      if (cvae_near_kink(m, s, a, &noise)) {
        ++skipped;
        continue;
      }
      ++checked;
      const auto l = bonus::cvae_elbo_loss(m, s, a, noise);
      auto loss = [&]() { return bonus::cvae_elbo_loss(m, s, a, noise).loss; };
      worst = std::max(worst, worst_param_error(m.encoder, l.encoder, loss));
      worst = std::max(worst, worst_param_error(m.decoder, l.decoder, loss));
    }
    report("cvae_elbo", checked, skipped, worst);
  }

  {  // actor loss, with a CVAE bonus term
    int checked = 0, skipped = 0;
    double worst = 0.0;
    while (checked < kConfigs) {
      const auto e = env::make_env(env_names[static_cast<std::size_t>(checked % 2)]);
      auto c = small_agent();
      c.beta_actor = std::uniform_real_distribution<double>(0.1, 10.0)(rng);
      c.actor_uses_target_critic = checked % 3 != 0;
      auto s = agent::make_td3(e.state_dim, e.action_low, e.action_high, c, rng);
      const bonus::BonusModel model(bonus::make_cvae(e.state_dim, e.action_low, e.action_high, tiny_bonus(), rng), true);
      const Matrix states = uniform(e.state_dim, 4, -1.5, 1.5, rng);
      const Matrix noise = nn::standard_normal(e.action_dim, 4, rng);
      const auto l = agent::actor_loss(s, states, &model, noise);
      if (cvae_near_kink(model.cvae(), states, l.actions, nullptr)) {
        ++skipped;
        continue;
      }
      ++checked;
      worst = std::max(worst, worst_param_error(s.actor, l.actor,
                                                [&]() { return agent::actor_loss(s, states, &model, noise).loss; }));
    }
    report("actor_loss", checked, skipped, worst);
  }

  {  // critic loss, with a CVAE bonus in the target
    double worst = 0.0;
    for (int checked = 0; checked < kConfigs; ++checked) {
      const auto e = env::make_env(env_names[static_cast<std::size_t>(checked % 2)]);
      auto c = small_agent();
      c.beta_critic = std::uniform_real_distribution<double>(0.1, 10.0)(rng);
      if (checked % 4 == 0) c.next_action = agent::NextAction::online_noisy;
      auto s = agent::make_td3(e.state_dim, e.action_low, e.action_high, c, rng);
      const bonus::BonusModel model(bonus::make_cvae(e.state_dim, e.action_low, e.action_high, tiny_bonus(), rng), true);
      agent::Batch b;
      b.states = uniform(e.state_dim, 5, -1.5, 1.5, rng);
      b.actions = e.action_high.asDiagonal() * uniform(e.action_dim, 5, -0.9, 0.9, rng);
      b.next_states = uniform(e.state_dim, 5, -1.5, 1.5, rng);
      b.rewards = uniform(5, 1, 0.0, 1.0, rng);
      b.dones = (uniform(5, 1, 0.0, 1.0, rng).array() < 0.2).cast<double>().matrix();
      const Matrix noise = nn::standard_normal(e.action_dim, 5, rng);
      const auto l = agent::critic_loss(s, b, &model, noise);
      auto loss = [&]() { return agent::critic_loss(s, b, &model, noise).loss; };
      worst = std::max(worst, worst_param_error(s.critic1, l.critic1, loss));
      worst = std::max(worst, worst_param_error(s.critic2, l.critic2, loss));
    }
    report("critic_loss", kConfigs, 0, worst);
  }
  const double secs = seconds_since(t0);
  pass = pass && secs < 120.0;
  detail << fmt(secs, 3) << " s";
  return {pass, "worst relative errors: " + detail.str()};
}

// ---------------------------------------------------------------- 5
Outcome criterion_5() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto e = env::make_env("pointmass2d");
  const auto d = env::generate_dataset(e, "expert", 20000, 7);
  std::vector<env::OodMode> modes;
  for (const char* m : {"uniform", "noise:0.5", "noise:0.1"}) modes.push_back(env::OodMode::parse(m));
  std::map<std::string, evalkit::DiscriminationReport> reports;
  for (auto kind : {bonus::Kind::cvae, bonus::Kind::rnd}) {
    auto c = bonus::BonusConfig::desk(kind);
    c.seed = 1;
    const auto trained = bonus::train_bonus(d, e, c);
    reports[std::string(bonus::to_string(kind))] = evalkit::discrimination_report(trained.model, d, e, modes, 3);
  }
  const auto& cvae = reports.at("cvae");
  const auto& rnd = reports.at("rnd");
  const double u = cvae.row("uniform").auc, n5 = cvae.row("noise:0.5").auc, n1 = cvae.row("noise:0.1").auc;
  bool pass = u >= 0.9 && u >= n5 && n5 > n1 && n1 > 0.5;
  std::ostringstream detail;
  detail << "cvae auc uniform " << fmt(u, 6) << ", noise:0.5 " << fmt(n5, 6) << ", noise:0.1 " << fmt(n1, 6)
         << "; rnd";
  for (const auto& m : {"uniform", "noise:0.5", "noise:0.1"}) {
    pass = pass && cvae.row(m).auc > rnd.row(m).auc;
    detail << " " << m << " " << fmt(rnd.row(m).auc, 6);
  }
  const double secs = seconds_since(t0);
  pass = pass && secs < 600.0;
  detail << "; " << fmt(secs, 3) << " s";
  return {pass, detail.str()};
}

// ---------------------------------------------------------------- 6
// Final evaluation returns from the direct runs (seed 0, 1, 2), frozen.
constexpr double kGoldenBonus[] = {-28.132100380038747, -29.18515403616944, -25.406926860576643};
constexpr double kGoldenPlain[] = {-50.870109749150153, -66.451477669249201, -40.500305245647823};

Outcome criterion_6() {
  const auto e = env::make_env("pointmass2d");
  const auto d = env::generate_dataset(e, "medium", 20000, 7);
  auto bc = bonus::BonusConfig::desk();
  bc.seed = 1;
  const auto bonus_model = bonus::train_cvae(d, e, bc).model;
  const double behavior = d.metadata.behavior_return_mean;

  bool pass = true, degraded = false, golden = true;
  std::ostringstream detail;
  detail << "behavior " << fmt(behavior, 5) << ";";
  for (int seed = 0; seed < 3; ++seed) {
    auto tc = agent::TrainConfig::desk();
    tc.gradient_steps = 50000;
    tc.eval_every = 1000;
    tc.seed = static_cast<std::uint64_t>(seed);
    const auto with = agent::train_agent(d, &bonus_model, e, tc);
    tc.agent.beta_actor = tc.agent.beta_critic = 0.0;
    const auto without = agent::train_agent(d, &bonus_model, e, tc);

    const auto& rows = with.metrics;
    const std::size_t decile = rows.size() / 10;
    double first = 0.0, last = 0.0;
    for (std::size_t i = 0; i < decile; ++i) {
      first += rows[i].actor_bonus_mean / static_cast<double>(decile);
      last += rows[rows.size() - 1 - i].actor_bonus_mean / static_cast<double>(decile);
    }
    const double r_with = rows.back().eval_return_mean, r_without = without.metrics.back().eval_return_mean;
    pass = pass && last < first && r_with >= behavior;
    degraded = degraded || r_without < r_with;
    const auto k = static_cast<std::size_t>(seed);
    golden = golden && std::abs(r_with - kGoldenBonus[k]) <= 1e-9 * std::abs(kGoldenBonus[k]) &&
             std::abs(r_without - kGoldenPlain[k]) <= 1e-9 * std::abs(kGoldenPlain[k]);
    detail << " seed " << seed << ": bonus " << fmt(first, 3) << " -> " << fmt(last, 3) << ", return " << fmt(r_with, 5)
           << " (beta 0: " << fmt(r_without, 5) << ");";
  }
  detail << (golden ? " golden values reproduced" : " golden values differ");
  return {pass && degraded && golden, detail.str()};
}

// ---------------------------------------------------------------- 7
Outcome criterion_7() {
  int datasets = 0, exact = 0;
  double worst_recovery = 0.0;
  for (const char* name : {"pointmass2d", "pendulum1"}) {
    const auto e = env::make_env(name);
    for (const char* flavor : {"random", "medium", "expert", "medium-expert"}) {
      for (std::uint64_t seed : {0, 1, 2}) {
        const auto raw = env::generate_dataset(e, flavor, 2000 + 500 * seed, seed);
        const auto norm = agent::normalize_rewards(raw);
        ++datasets;
        float lo = norm.rewards[0], hi = lo;
        for (float r : norm.rewards) {
          lo = std::min(lo, r);
          hi = std::max(hi, r);
        }
        if (lo == 0.0f && hi == 1.0f && norm.metadata.rewards_normalized) ++exact;
        const double rmin = norm.metadata.reward_min, rmax = norm.metadata.reward_max;
        for (std::size_t i = 0; i < raw.size(); ++i) {
          const double back = rmin + static_cast<double>(norm.rewards[i]) * (rmax - rmin);
          worst_recovery = std::max(worst_recovery, std::abs(back - raw.rewards[i]) / std::max(1.0, std::abs(rmax - rmin)));
        }
      }
    }
  }
  return {exact == datasets && worst_recovery < 1e-6,
          std::to_string(exact) + "/" + std::to_string(datasets) +
              " datasets normalized to exactly [0, 1]; worst relative range-recovery error " + fmt(worst_recovery, 3)};
}

// ---------------------------------------------------------------- 8
Outcome criterion_8() {
  const fs::path root = fs::temp_directory_path() / "axrl_acceptance_8";
  fs::remove_all(root);
  fs::create_directories(root);
  std::ostringstream out, err;
  auto run = [&](std::vector<std::string> args) { return cli::run(args, out, err); };
  const std::string d = (root / "d.bin").string(), b = (root / "b.ckpt").string();
  bool ok = run({"--seed", "8", "gen-data", "--env", "pendulum1", "--flavor", "medium-expert", "--size", "4000",
                 "--out", d}) == 0 &&
            run({"--seed", "8", "train-bonus", "--dataset", d, "--steps", "1000", "--out", b}) == 0;
  int replays = 0, identical = 0;
  for (const char* seed : {"0", "8"}) {
    const fs::path run_dir = root / (std::string("run") + seed);
    ok = ok && run({"--seed", seed, "train", "--dataset", d, "--bonus", b, "--steps", "3000", "--eval-every", "500",
                    "--out", run_dir.string()}) == 0;
    for (int k = 0; k < 2 && ok; ++k) {
      const fs::path replay = root / ("replay" + std::string(seed) + "_" + std::to_string(k));
      const int code = run({"train", "--manifest", (run_dir / "manifest.json").string(), "--check", "--out",
                            replay.string()});
      ++replays;
      if (code == 0 && io::read_text(run_dir / "metrics.csv") == io::read_text(replay / "metrics.csv")) ++identical;
    }
  }
  fs::remove_all(root);
  return {ok && replays == 4 && identical == 4,
          std::to_string(identical) + "/" + std::to_string(replays) + " manifest replays bit-identical" +
              (err.str().empty() ? "" : "; stderr: " + err.str())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"penalized-bootstrap equivalence", criterion_1},
      {"regularized-MDP fixed point", criterion_2},
      {"zero-temperature limit and rewrite identity", criterion_3},
      {"gradient correctness", criterion_4},
      {"bonus discrimination", criterion_5},
      {"anti-exploration training effect", criterion_6},
      {"reward normalization", criterion_7},
      {"manifest reproducibility", criterion_8}};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && selected.count(id) == 0) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first << "): " << o.detail
              << std::endl;
  }
  return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
