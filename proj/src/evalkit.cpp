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

#include "axrl/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "axrl/errors.hpp"
#include "axrl/mdp.hpp"
#include "axrl/mdp_exact.hpp"

namespace axrl::evalkit {

using nn::Matrix;
using nn::Vector;

namespace {

std::vector<double> to_vector(const Vector& v) { return {v.data(), v.data() + v.size()}; }

double vector_mean(const std::vector<double>& v) { return metrics::mean(v); }

double vector_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = vector_mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

mdp::Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  mdp::Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

}  // namespace

const ModeReport& DiscriminationReport::row(const std::string& mode) const {
  for (const auto& r : rows)
    if (r.mode == mode) return r;
  throw ParameterError("no report row for mode '" + mode + "'");
}

DiscriminationReport discrimination_report(const bonus::BonusModel& model, const env::Dataset& data,
                                           const env::Environment& env, const std::vector<env::OodMode>& modes,
                                           std::uint64_t seed) {
  data.validate();
  const Matrix states = data.all_states();
  std::vector<std::pair<std::string, std::vector<double>>> scores;
  scores.emplace_back("dataset", to_vector(model.score(states, data.all_actions())));
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const Matrix ood = env::make_ood_actions(data, env, modes[i], seed + i);
    scores.emplace_back(modes[i].label(), to_vector(model.score(states, ood)));
  }
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& [_, v] : scores) {
    lo = std::min(lo, *std::min_element(v.begin(), v.end()));
    hi = std::max(hi, *std::max_element(v.begin(), v.end()));
  }

  DiscriminationReport report;
  report.model_kind = std::string(bonus::to_string(model.kind()));
  report.dataset_fingerprint = data.metadata.fingerprint;
  report.seed = seed;
  for (const auto& [mode, v] : scores) {
    ModeReport row;
    row.mode = mode;
    row.summary = metrics::summarize(v);
    row.histogram = metrics::histogram(v, lo, hi, kHistogramBins);
    row.auc = mode == "dataset" ? 0.5 : metrics::auc(scores.front().second, v);
    report.rows.push_back(std::move(row));
  }
  return report;
}

void to_json(nlohmann::json& j, const DiscriminationReport& r) {
  j = {{"model_kind", r.model_kind}, {"dataset_fingerprint", r.dataset_fingerprint}, {"seed", r.seed}};
  j["rows"] = nlohmann::json::array();
  for (const auto& row : r.rows) {
    j["rows"].push_back({{"mode", row.mode}, {"summary", row.summary}, {"histogram", row.histogram}, {"auc", row.auc}});
  }
}

std::string histogram_csv(const DiscriminationReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "bin_low,bin_high";
  for (const auto& row : r.rows) out << ',' << row.mode;
  out << '\n';
  if (r.rows.empty()) return out.str();
  const auto& h = r.rows.front().histogram;
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    out << h.low + static_cast<double>(b) * h.bin_width() << ',' << h.low + static_cast<double>(b + 1) * h.bin_width();
    for (const auto& row : r.rows) out << ',' << row.histogram.counts[b];
    out << '\n';
  }
  return out.str();
}

ReferenceScores reference_scores(const env::Environment& env, int episodes, std::uint64_t seed) {
  ReferenceScores ref;
  ref.random = vector_mean(env::evaluate_policy(env, env::scripted_policy(env, env::Skill::random), episodes, seed));
  ref.expert = vector_mean(env::evaluate_policy(env, env::scripted_policy(env, env::Skill::expert), episodes, seed));
  return ref;
}

double normalized_return(double raw, const ReferenceScores& ref) {
  if (ref.expert == ref.random) throw ParameterError("reference scores coincide; normalized return undefined");
  return (raw - ref.random) / (ref.expert - ref.random);
}

std::size_t select_best(const std::vector<SweepCell>& cells) {
  if (cells.empty()) throw ParameterError("sweep has no cells");
  std::size_t best = 0;
  for (std::size_t i = 1; i < cells.size(); ++i)
    if (cells[i].mean > cells[best].mean) best = i;
  return best;
}

void to_json(nlohmann::json& j, const SweepResult& r) {
  j = {{"datasets", r.datasets}, {"seeds", r.seeds}, {"selected", r.selected}};
  j["cells"] = nlohmann::json::array();
  for (const auto& c : r.cells) {
    j["cells"].push_back({{"beta_actor", c.beta_actor},
                          {"beta_critic", c.beta_critic},
                          {"normalized_returns", c.normalized_returns},
                          {"mean", c.mean},
                          {"std", c.std}});
  }
  if (!r.cells.empty()) j["best"] = {{"beta_actor", r.best().beta_actor}, {"beta_critic", r.best().beta_critic}};
}

SweepResult run_sweep(const std::vector<SweepTask>& tasks, const std::vector<double>& grid,
                      const std::vector<std::uint64_t>& seeds, const agent::TrainConfig& base,
                      const std::filesystem::path& cell_dir) {
  if (tasks.empty()) throw ParameterError("sweep needs at least one dataset");
  if (grid.empty()) throw ParameterError("sweep needs a nonempty beta grid");
  if (seeds.empty()) throw ParameterError("sweep needs at least one seed");
  SweepResult result;
  result.seeds = seeds;
  std::vector<ReferenceScores> refs;
  for (const auto& t : tasks) {
    result.datasets.push_back(t.name);
    refs.push_back(reference_scores(t.env));
  }
  if (!cell_dir.empty()) std::filesystem::create_directories(cell_dir);
  for (double beta_actor : grid) {
    for (double beta_critic : grid) {
      SweepCell cell;
      cell.beta_actor = beta_actor;
      cell.beta_critic = beta_critic;
      for (std::size_t t = 0; t < tasks.size(); ++t) {
        for (std::uint64_t seed : seeds) {
          agent::TrainConfig config = base;
          config.seed = seed;
          config.agent.beta_actor = beta_actor;
          config.agent.beta_critic = beta_critic;
          const auto run = agent::train_agent(tasks[t].data, &tasks[t].bonus, tasks[t].env, config);
          cell.normalized_returns.push_back(normalized_return(run.metrics.back().eval_return_mean, refs[t]));
          if (!cell_dir.empty()) {
            const std::string name = "ba" + format_double(beta_actor) + "_bc" + format_double(beta_critic) + "_" +
                                     tasks[t].name + "_s" + std::to_string(seed) + ".csv";
            agent::write_metrics_csv(cell_dir / name, run.metrics);
          }
        }
      }
      cell.mean = vector_mean(cell.normalized_returns);
      cell.std = vector_std(cell.normalized_returns);
      result.cells.push_back(std::move(cell));
    }
  }
  result.selected = select_best(result.cells);
  return result;
}

bool VerifyDpReport::all_passed() const { return first_failure() == nullptr; }

const VerifyCheck* VerifyDpReport::first_failure() const {
  for (const auto& c : checks)
    if (!c.passed) return &c;
  return nullptr;
}

std::uint64_t verify_mdp_seed(std::uint64_t base_seed, int index) {
  return base_seed * 1000003ULL + static_cast<std::uint64_t>(index);
}

double greedy_margin(const mdp::ViTrace& trace, const mdp::QTable& q0, const mdp::Matrix& shift) {
  double margin = INFINITY;
  const mdp::QTable* prev = &q0;
  for (const auto& q : trace.q_tables) {
    const mdp::Matrix scores = *prev - shift;
    if (scores.cols() < 2) return INFINITY;
    for (Eigen::Index s = 0; s < scores.rows(); ++s) {
      std::vector<double> row(static_cast<std::size_t>(scores.cols()));
      for (Eigen::Index a = 0; a < scores.cols(); ++a) row[static_cast<std::size_t>(a)] = scores(s, a);
      std::partial_sort(row.begin(), row.begin() + 2, row.end(), std::greater<>());
      margin = std::min(margin, row[0] - row[1]);
    }
    prev = &q;
  }
  return margin;
}

VerifyDpReport verify_dp(const VerifyDpConfig& config) {
  if (config.n_mdps <= 0) throw ParameterError("n_mdps must be positive");
  if (config.min_states < 1 || config.max_states < config.min_states) throw ParameterError("bad state range");
  if (config.min_actions < 1 || config.max_actions < config.min_actions) throw ParameterError("bad action range");
  if (config.gammas.empty() || config.taus.empty()) throw ParameterError("gammas and taus must be nonempty");
  if (config.iterations <= 0) throw ParameterError("iterations must be positive");

  VerifyDpReport report;
  for (int i = 0; i < config.n_mdps; ++i) {
    const std::uint64_t mdp_seed = verify_mdp_seed(config.seed, i);
    std::mt19937_64 rng(mdp_seed);
    const int n_states = std::uniform_int_distribution<int>(config.min_states, config.max_states)(rng);
    const int n_actions = std::uniform_int_distribution<int>(config.min_actions, config.max_actions)(rng);
    const double gamma = config.gammas[std::uniform_int_distribution<std::size_t>(0, config.gammas.size() - 1)(rng)];
    const mdp::TabularMdp m = mdp::random_mdp(n_states, n_actions, gamma, rng());
    const mdp::BonusTable b = mdp::random_bonus(n_states, n_actions, rng(), 1.0);
    const mdp::BonusTable b0 = mdp::random_bonus(n_states, n_actions, rng(), 1.0, true);
    const mdp::QTable q0 = random_matrix(n_states, n_actions, rng, -1.0, 1.0);
    const int n = config.iterations;

    auto add = [&](const std::string& name, bool ok, std::string detail) {
      report.checks.push_back({name, i, mdp_seed, n_states, n_actions, gamma, ok, std::move(detail)});
    };

    {
      const mdp::BonusTable zero{mdp::Matrix::Zero(n_states, n_actions)};
      const auto plain = mdp::vi_plain(m, q0, n);
      int mismatched = 0;
      for (const auto& t : {mdp::vi_exploration(m, zero, q0, n), mdp::vi_naive_antiexplore(m, zero, q0, n),
                            mdp::vi_penalized_bootstrap(m, zero, q0, n)}) {
        for (int k = 0; k < n; ++k) {
          if (t.policies[static_cast<std::size_t>(k)].modes() != plain.policies[static_cast<std::size_t>(k)].modes() ||
              t.q_tables[static_cast<std::size_t>(k)] != plain.q_tables[static_cast<std::size_t>(k)]) {
            ++mismatched;
          }
        }
      }
      add("zero_bonus_control", mismatched == 0, std::to_string(mismatched) + " mismatched iterations");
    }
    {
      const auto naive = mdp::vi_naive_antiexplore(m, b, q0, n);
      const auto pen = mdp::vi_penalized_bootstrap(m, b, q0 + b.values, n);
      int policy_mismatch = 0;
      double worst = 0.0;
      for (int k = 0; k < n; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        if (naive.policies[kk].modes() != pen.policies[kk].modes()) ++policy_mismatch;
        worst = std::max(worst, (pen.q_tables[kk] - naive.q_tables[kk] - b.values).cwiseAbs().maxCoeff());
      }
      add("penalized_equivalence", policy_mismatch == 0 && worst <= 1e-9,
          std::to_string(policy_mismatch) + " policy mismatches, max |Q' - Q - b| = " + format_double(worst));
    }
    {
      const double count = std::pow(static_cast<double>(n_actions), n_states);
      if (count <= 4096.0) {
        const auto run = mdp::run_to_convergence(m, mdp::Scheme::penalized_bootstrap, b, q0);
        const auto opt = mdp::enumerate_optimum(m, m.reward - b.values);
        const auto values = mdp::exact_policy_values(m, run.policy.modes(), m.reward - b.values);
        const double gap = (opt.best_values - values).cwiseAbs().maxCoeff();
        add("fixed_point", run.converged && gap <= 1e-8, "value gap " + format_double(gap));
      }
    }
    {
      double worst = 0.0;
      for (int t = 0; t < config.identity_triples; ++t) {
        mdp::Matrix p = random_matrix(n_states, n_actions, rng, 0.01, 1.0);
        for (int s = 0; s < n_states; ++s) p.row(s) /= p.row(s).sum();
        const mdp::TabularPolicy pi{p};
        const mdp::Matrix q = random_matrix(n_states, n_actions, rng, -5.0, 5.0);
        const double beta = std::uniform_real_distribution<double>(0.1, 10.0)(rng);
        const double tau = std::uniform_real_distribution<double>(0.01, 2.0)(rng);
        const mdp::Matrix log_prior = mdp::log_softmax_bonus_policy(b, beta, tau);
        const Vector lhs = mdp::policy_dot(pi, q) - tau * mdp::kl_divergence_log(p.array().log().matrix(), log_prior);
        const Vector rhs = mdp::policy_dot(pi, q - mdp::delta_b(b, beta, tau)) + tau * mdp::entropy(pi);
        worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
      }
      add("rewrite_identity", worst <= 1e-8, "max gap " + format_double(worst));
    }
    {
      const double beta = 1.0;
      const auto limit = mdp::verify_limit_claim(m, b0, beta, config.taus, q0, n);
      std::string detail = "disagreements";
      for (int d : limit.disagreements) detail += " " + std::to_string(d);
      const auto reference = mdp::vi_penalized_bootstrap(m, mdp::BonusTable{beta * b0.values}, q0, n);
      detail += ", min greedy margin " + format_double(greedy_margin(reference, q0, beta * b0.values));
      if (!limit.non_increasing) detail += ", counts not monotone in tau";
      if (!limit.precondition_ok) detail = limit.message;
      add("tau_limit", limit.precondition_ok && limit.reaches_zero, detail);
    }
  }
  return report;
}

std::string verify_table_csv(const VerifyDpReport& report) {
  std::ostringstream out;
  out << "invariant,mdp_index,mdp_seed,n_states,n_actions,gamma,passed,detail\n";
  for (const auto& c : report.checks) {
    out << c.invariant << ',' << c.mdp_index << ',' << c.mdp_seed << ',' << c.n_states << ',' << c.n_actions << ','
        << c.gamma << ',' << (c.passed ? "pass" : "FAIL") << ",\"" << c.detail << "\"\n";
  }
  return out.str();
}

}  // namespace axrl::evalkit
