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

#include "axrl/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "axrl/agent.hpp"
#include "axrl/bonus.hpp"
#include "axrl/envlab.hpp"
#include "axrl/errors.hpp"
#include "axrl/evalkit.hpp"
#include "axrl/io.hpp"

namespace axrl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifestFormat = "axrl-run-manifest";
constexpr int kManifestVersion = 1;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 0;
  CLI::Option* seed_option = nullptr;
  std::string config_path;
  std::string out;

  [[nodiscard]] bool seed_given() const { return seed_option->count() > 0; }
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

std::vector<double> parse_doubles(const std::string& text, const std::string& flag) {
  std::vector<double> values;
  for (const auto& item : split_list(text)) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw UsageError(flag + ": '" + item + "' is not a number");
    values.push_back(v);
  }
  return values;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& item : split_list(text)) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw UsageError("--seeds: '" + item + "' is not a nonnegative integer");
    seeds.push_back(v);
  }
  return seeds;
}

json config_section(const Globals& g, const char* section) {
  if (g.config_path.empty()) return json::object();
  json j;
  try {
    j = json::parse(io::read_text(g.config_path));
  } catch (const json::exception& e) {
    throw UsageError("--config " + g.config_path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw UsageError("--config must hold a JSON object");
  return j.contains(section) ? j.at(section) : json::object();
}

fs::path resolve_input(const std::string& path) {
  const fs::path p(path);
  if (fs::exists(p) || p.is_absolute()) return p;
  const fs::path under_root = data_root() / p;
  return fs::exists(under_root) ? under_root : p;
}

fs::path resolve_output(const std::string& flag, const std::string& default_name) {
  return flag.empty() ? data_root() / default_name : fs::path(flag);
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::string json_fingerprint(const json& j) { return io::hex64(io::fnv1a(j.dump())); }

void write_json(const fs::path& path, const json& j) {
  ensure_parent(path);
  io::write_atomic(path, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
}

void write_text(const fs::path& path, const std::string& text) {
  ensure_parent(path);
  io::write_atomic(path, [&](std::ostream& out) { out << text; });
}

env::Dataset load_dataset_arg(const std::string& path) {
  const fs::path p = resolve_input(path);
  if (!fs::exists(p)) throw UsageError("dataset '" + path + "' not found");
  return env::load_dataset(p);
}

// ---------------------------------------------------------------- bonus flags

struct BonusFlags {
  std::string kind = "cvae";
  int steps = -1;
  int batch_size = -1;
  double learning_rate = -1.0;
  int latent_dim = -1;
  std::string hidden;
  bool full_scale = false;
  int log_every = -1;

  void add(CLI::App* cmd) {
    cmd->add_option("--kind", kind, "Bonus model: cvae or rnd")->capture_default_str();
    cmd->add_option("--steps", steps, "Gradient steps");
    cmd->add_option("--batch-size", batch_size, "Minibatch size");
    cmd->add_option("--lr", learning_rate, "Adam learning rate");
    cmd->add_option("--latent-dim", latent_dim, "CVAE latent size");
    cmd->add_option("--hidden", hidden, "Hidden layer sizes, comma separated");
    cmd->add_option("--log-every", log_every, "Loss logging window");
    cmd->add_flag("--full-scale", full_scale, "750-750 networks, latent 12, lr 1e-4, 50k steps");
  }

  [[nodiscard]] bonus::BonusConfig resolve(const Globals& g) const {
    const bonus::Kind k = bonus::kind_from_string(kind);
    bonus::BonusConfig c = full_scale ? bonus::BonusConfig{} : bonus::BonusConfig::desk(k);
    c.kind = k;
    const json section = config_section(g, "bonus");
    if (!section.empty()) {
      bonus::from_json(section, c);
      c.kind = k;
    }
    if (steps >= 0) c.steps = steps;
    if (batch_size >= 0) c.batch_size = batch_size;
    if (learning_rate >= 0.0) c.learning_rate = learning_rate;
    if (latent_dim >= 0) c.latent_dim = latent_dim;
    if (log_every >= 0) c.log_every = log_every;
    if (!hidden.empty()) {
      c.hidden.clear();
      for (double h : parse_doubles(hidden, "--hidden")) c.hidden.push_back(static_cast<int>(h));
    }
    if (g.seed_given() || !section.contains("seed")) c.seed = g.seed;
    c.validate();
    return c;
  }
};

// ---------------------------------------------------------------- train flags

struct TrainFlags {
  std::string dataset;
  std::string bonus_path;
  double beta_actor = -1.0;
  double beta_critic = -1.0;
  int steps = -1;
  int batch_size = -1;
  int eval_every = -1;
  int eval_episodes = -1;
  std::string hidden;
  bool full_scale = false;

  void add(CLI::App* cmd, bool with_dataset) {
    if (with_dataset) {
      cmd->add_option("--dataset", dataset, "Dataset file");
      cmd->add_option("--bonus", bonus_path, "Bonus checkpoint from train-bonus");
      cmd->add_option("--beta-actor", beta_actor, "Bonus weight in the actor loss");
      cmd->add_option("--beta-critic", beta_critic, "Bonus weight in the critic target");
    }
    cmd->add_option("--steps", steps, "Gradient steps");
    cmd->add_option("--batch-size", batch_size, "Minibatch size");
    cmd->add_option("--eval-every", eval_every, "Steps between metric rows");
    cmd->add_option("--eval-episodes", eval_episodes, "Evaluation rollouts per row");
    cmd->add_option("--hidden", hidden, "Hidden layer sizes, comma separated");
    cmd->add_flag("--full-scale", full_scale, "256-256 networks, batch 256, 500k steps");
  }

  [[nodiscard]] agent::TrainConfig resolve(const Globals& g) const {
    agent::TrainConfig c = full_scale ? agent::TrainConfig{} : agent::TrainConfig::desk();
    const json section = config_section(g, "train");
    if (!section.empty()) agent::from_json(section, c);
    if (beta_actor >= 0.0) c.agent.beta_actor = beta_actor;
    if (beta_critic >= 0.0) c.agent.beta_critic = beta_critic;
    if (steps >= 0) c.gradient_steps = steps;
    if (batch_size >= 0) c.batch_size = batch_size;
    if (eval_every >= 0) c.eval_every = eval_every;
    if (eval_episodes >= 0) c.eval_episodes = eval_episodes;
    if (!hidden.empty()) {
      c.agent.hidden.clear();
      for (double h : parse_doubles(hidden, "--hidden")) c.agent.hidden.push_back(static_cast<int>(h));
    }
    if (g.seed_given() || !section.contains("seed")) c.seed = g.seed;
    c.validate();
    return c;
  }
};

// ---------------------------------------------------------------- commands

int cmd_gen_data(const Globals& g, const std::string& env_name, const std::string& flavor, std::size_t size,
                 std::ostream& out) {
  const env::Environment e = env::make_env(env_name);
  const env::Dataset d = env::generate_dataset(e, flavor, size, g.seed);
  const fs::path path =
      resolve_output(g.out, env_name + "-" + flavor + "-" + std::to_string(size) + "-s" + std::to_string(g.seed) + ".bin");
  ensure_parent(path);
  env::save_dataset(path, d);
  json meta = d.metadata;
  meta["path"] = path.string();
  out << meta.dump(2) << '\n';
  return kExitOk;
}

bonus::TrainedBonus train_bonus_for(const env::Dataset& d, const bonus::BonusConfig& c) {
  return bonus::train_bonus(d, env::make_env(d.metadata.env), c);
}

int cmd_train_bonus(const Globals& g, const std::string& dataset, const BonusFlags& flags, std::ostream& out) {
  const env::Dataset d = load_dataset_arg(dataset);
  const bonus::BonusConfig c = flags.resolve(g);
  const auto trained = train_bonus_for(d, c);
  const fs::path path = resolve_output(g.out, "bonus-" + std::string(bonus::to_string(c.kind)) + ".ckpt");
  ensure_parent(path);
  bonus::save_bonus(path, trained.model);
  fs::path loss_path = path;
  loss_path += ".loss.csv";
  bonus::write_loss_csv(loss_path, trained.history);
  json summary{{"path", path.string()},
               {"loss_csv", loss_path.string()},
               {"kind", bonus::to_string(c.kind)},
               {"seed", c.seed},
               {"config", c},
               {"config_fingerprint", bonus::fingerprint(c)},
               {"dataset_fingerprint", d.metadata.fingerprint},
               {"final_loss", trained.history.empty() ? json(nullptr) : json(trained.history.back().loss)}};
  out << summary.dump(2) << '\n';
  return kExitOk;
}

int cmd_eval_bonus(const Globals& g, const std::string& dataset, const std::string& bonus_path,
                   const BonusFlags& flags, const std::string& modes_text, std::ostream& out) {
  const env::Dataset d = load_dataset_arg(dataset);
  const env::Environment e = env::make_env(d.metadata.env);
  std::vector<env::OodMode> modes;
  for (const auto& m : split_list(modes_text)) modes.push_back(env::OodMode::parse(m));
  if (modes.empty()) throw UsageError("--modes must list at least one OOD construction");

  json provenance;
  bonus::BonusModel model;
  if (!bonus_path.empty()) {
    const fs::path p = resolve_input(bonus_path);
    if (!fs::exists(p)) throw UsageError("bonus checkpoint '" + bonus_path + "' not found");
    model = bonus::load_bonus(p);
    provenance = {{"bonus_path", p.string()}, {"bonus_config_fingerprint", model.config_fingerprint}};
  } else {
    const bonus::BonusConfig c = flags.resolve(g);
    model = train_bonus_for(d, c).model;
    provenance = {{"bonus_config", c}, {"bonus_config_fingerprint", bonus::fingerprint(c)}};
  }
  const auto report = evalkit::discrimination_report(model, d, e, modes, g.seed);
  json j = report;
  j["modes"] = split_list(modes_text);
  j["provenance"] = provenance;
  j["config_fingerprint"] = json_fingerprint({{"modes", j["modes"]}, {"provenance", provenance}, {"seed", g.seed}});

  const fs::path path = resolve_output(g.out, "bonus-report.json");
  write_json(path, j);
  fs::path hist = path;
  hist.replace_extension(".hist.csv");
  write_text(hist, evalkit::histogram_csv(report));

  json summary{{"report", path.string()}, {"histograms", hist.string()}, {"model_kind", report.model_kind}};
  for (const auto& row : report.rows) {
    if (row.mode != "dataset") summary["auc"][row.mode] = row.auc;
    summary["mean_bonus"][row.mode] = row.summary.mean;
  }
  out << summary.dump(2) << '\n';
  return kExitOk;
}

struct TrainInputs {
  fs::path dataset;
  fs::path bonus;  // empty for plain TD3
  agent::TrainConfig config;
};

json make_manifest(const TrainInputs& in, const env::Dataset& d, const std::string& metrics_csv) {
  return {{"format", kManifestFormat},
          {"format_version", kManifestVersion},
          {"command", "train"},
          {"seed", in.config.seed},
          {"env", d.metadata.env},
          {"dataset", {{"path", fs::absolute(in.dataset).string()}, {"fingerprint", d.metadata.fingerprint}}},
          {"bonus", in.bonus.empty() ? json(nullptr) : json{{"path", fs::absolute(in.bonus).string()}}},
          {"train_config", in.config},
          {"config_fingerprint", agent::fingerprint(in.config)},
          {"outputs", {{"metrics", "metrics.csv"}, {"checkpoint", "agent.ckpt"}}},
          {"metrics_fingerprint", io::hex64(io::fnv1a(metrics_csv))}};
}

TrainInputs inputs_from_manifest(const std::string& manifest_path) {
  const fs::path p = resolve_input(manifest_path);
  if (!fs::exists(p)) throw UsageError("manifest '" + manifest_path + "' not found");
  json m;
  try {
    m = json::parse(io::read_text(p));
  } catch (const json::exception& e) {
    throw FormatError("manifest " + p.string() + " is not valid JSON: " + e.what());
  }
  if (m.value("format", "") != kManifestFormat) throw FormatError(p.string() + " is not a run manifest");
  TrainInputs in;
  in.dataset = m.at("dataset").at("path").get<std::string>();
  if (!m.at("bonus").is_null()) in.bonus = m.at("bonus").at("path").get<std::string>();
  in.config = m.at("train_config").get<agent::TrainConfig>();
  return in;
}

int cmd_train(const Globals& g, const TrainFlags& flags, const std::string& manifest, bool check,
              std::ostream& out, std::ostream& err) {
  TrainInputs in;
  std::string expected_metrics;
  if (!manifest.empty()) {
    in = inputs_from_manifest(manifest);
    const json m = json::parse(io::read_text(resolve_input(manifest)));
    expected_metrics = m.value("metrics_fingerprint", "");
  } else {
    if (flags.dataset.empty()) throw UsageError("train needs --dataset (or --manifest)");
    in.dataset = resolve_input(flags.dataset);
    if (!flags.bonus_path.empty()) in.bonus = resolve_input(flags.bonus_path);
    in.config = flags.resolve(g);
  }
  if (check && manifest.empty()) throw UsageError("--check only applies with --manifest");
  if (in.bonus.empty() && (in.config.agent.beta_actor > 0.0 || in.config.agent.beta_critic > 0.0)) {
    throw UsageError("nonzero bonus weights need --bonus (or set --beta-actor 0 --beta-critic 0)");
  }

  if (!fs::exists(in.dataset)) throw UsageError("dataset '" + in.dataset.string() + "' not found");
  const env::Dataset d = env::load_dataset(in.dataset);
  const env::Environment e = env::make_env(d.metadata.env);
  std::optional<bonus::BonusModel> model;
  if (!in.bonus.empty()) {
    if (!fs::exists(in.bonus)) throw UsageError("bonus checkpoint '" + in.bonus.string() + "' not found");
    model = bonus::load_bonus(in.bonus);
    if (model->dataset_fingerprint != d.metadata.fingerprint) {
      err << "warning: bonus model was trained on dataset " << model->dataset_fingerprint << ", not "
          << d.metadata.fingerprint << '\n';
    }
  }

  const auto result = agent::train_agent(d, model ? &*model : nullptr, e, in.config);
  const std::string csv = agent::metrics_csv(result.metrics);
  const fs::path dir = resolve_output(g.out, "run-s" + std::to_string(in.config.seed));
  fs::create_directories(dir);
  write_text(dir / "metrics.csv", csv);
  agent::save_agent(dir / "agent.ckpt", result.state);
  const json manifest_json = make_manifest(in, d, csv);
  write_json(dir / "manifest.json", manifest_json);

  const auto& last = result.metrics.back();
  json summary{{"out", dir.string()},
               {"steps", last.step},
               {"eval_return_mean", last.eval_return_mean},
               {"actor_bonus_mean", std::isnan(last.actor_bonus_mean) ? json(nullptr) : json(last.actor_bonus_mean)},
               {"metrics_fingerprint", manifest_json.at("metrics_fingerprint").get<std::string>()}};
  if (check) {
    const bool same = manifest_json.at("metrics_fingerprint") == expected_metrics;
    summary["replay_matches"] = same;
    out << summary.dump(2) << '\n';
    if (!same) {
      err << "replay metrics differ from the manifest (" << manifest_json.at("metrics_fingerprint").get<std::string>()
          << " vs " << expected_metrics << ")\n";
      return kExitFailure;
    }
    return kExitOk;
  }
  out << summary.dump(2) << '\n';
  return kExitOk;
}

int cmd_sweep(const Globals& g, const std::string& datasets, const std::string& grid_text,
              const std::string& seeds_text, const TrainFlags& flags, const BonusFlags& bonus_flags,
              std::ostream& out) {
  const auto paths = split_list(datasets);
  if (paths.empty()) throw UsageError("--datasets must list at least one dataset");
  const auto grid = parse_doubles(grid_text, "--grid");
  if (grid.empty()) throw UsageError("--grid must list at least one value");
  for (double b : grid)
    if (b < 0.0) throw UsageError("--grid values must be nonnegative");
  const auto seeds = seeds_text.empty() ? std::vector<std::uint64_t>{g.seed} : parse_seeds(seeds_text);
  if (seeds.empty()) throw UsageError("--seeds must list at least one seed");

  const agent::TrainConfig base = flags.resolve(g);
  const bonus::BonusConfig bonus_config = bonus_flags.resolve(g);
  std::vector<evalkit::SweepTask> tasks;
  for (const auto& p : paths) {
    env::Dataset d = load_dataset_arg(p);
    env::Environment e = env::make_env(d.metadata.env);
    bonus::BonusModel b = bonus::train_bonus(d, e, bonus_config).model;
    tasks.push_back({fs::path(p).stem().string(), std::move(d), std::move(e), std::move(b)});
  }
  const fs::path dir = resolve_output(g.out, "sweep");
  fs::create_directories(dir);
  const auto result = evalkit::run_sweep(tasks, grid, seeds, base, dir / "cells");
  json j = result;
  j["seed"] = g.seed;
  j["train_config"] = base;
  j["bonus_config"] = bonus_config;
  j["grid"] = grid;
  j["config_fingerprint"] = json_fingerprint({{"train", base}, {"bonus", bonus_config}, {"grid", grid}, {"seeds", seeds}});
  write_json(dir / "sweep.json", j);
  out << json{{"out", (dir / "sweep.json").string()}, {"best", j["best"]}}.dump(2) << '\n';
  return kExitOk;
}

int cmd_verify_dp(const Globals& g, evalkit::VerifyDpConfig c, const CLI::App* cmd, std::ostream& out,
                  std::ostream& err) {
  const json section = config_section(g, "verify");
  auto take = [&](const char* key, const char* flag, auto& field) {
    if (cmd->count(flag) == 0 && section.contains(key)) section.at(key).get_to(field);
  };
  take("n_mdps", "--n-mdps", c.n_mdps);
  take("min_states", "--min-states", c.min_states);
  take("max_states", "--max-states", c.max_states);
  take("min_actions", "--min-actions", c.min_actions);
  take("max_actions", "--max-actions", c.max_actions);
  take("iterations", "--iterations", c.iterations);
  if (section.contains("gammas")) section.at("gammas").get_to(c.gammas);
  if (section.contains("taus")) section.at("taus").get_to(c.taus);
  c.seed = g.seed;

  const auto report = evalkit::verify_dp(c);
  const fs::path path = resolve_output(g.out, "verify-dp.csv");
  write_text(path, evalkit::verify_table_csv(report));

  std::map<std::string, std::pair<int, int>> tally;  // invariant -> (passed, total)
  for (const auto& check : report.checks) {
    auto& [passed, total] = tally[check.invariant];
    passed += check.passed ? 1 : 0;
    ++total;
  }
  json summary{{"table", path.string()}, {"seed", c.seed}, {"n_mdps", c.n_mdps}, {"all_passed", report.all_passed()}};
  for (const auto& [name, counts] : tally) summary["invariants"][name] = {{"passed", counts.first}, {"total", counts.second}};
  summary["config"] = {{"n_mdps", c.n_mdps},         {"min_states", c.min_states}, {"max_states", c.max_states},
                       {"min_actions", c.min_actions}, {"max_actions", c.max_actions}, {"gammas", c.gammas},
                       {"taus", c.taus},             {"iterations", c.iterations}, {"identity_triples", c.identity_triples}};
  summary["config_fingerprint"] = json_fingerprint(summary["config"]);
  fs::path sidecar = path;
  sidecar += ".json";
  write_json(sidecar, summary);
  out << summary.dump(2) << '\n';
  if (const auto* f = report.first_failure()) {
    err << "first violated invariant: " << f->invariant << " on MDP " << f->mdp_index << " (seed " << f->mdp_seed
        << ", |S|=" << f->n_states << ", |A|=" << f->n_actions << ", gamma=" << f->gamma << "): " << f->detail << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_eval_policy(const Globals& g, const std::string& run_dir, const std::string& scripted,
                    const std::string& env_name, int episodes, std::ostream& out) {
  if (run_dir.empty() == scripted.empty()) throw UsageError("eval-policy needs exactly one of --run or --scripted");
  env::Environment e;
  std::vector<double> returns;
  json source;
  if (!run_dir.empty()) {
    const fs::path dir = resolve_input(run_dir);
    if (!fs::exists(dir / "manifest.json")) throw UsageError("no manifest.json in '" + run_dir + "'");
    const TrainInputs in = inputs_from_manifest((dir / "manifest.json").string());
    const json m = json::parse(io::read_text(dir / "manifest.json"));
    e = env::make_env(m.at("env").get<std::string>());
    const agent::Td3State s = agent::load_agent(dir / "agent.ckpt", e.action_low, e.action_high, in.config.agent);
    returns = agent::evaluate_actor(s, e, episodes, g.seed);
    source = {{"run", dir.string()}};
  } else {
    if (env_name.empty()) throw UsageError("--scripted needs --env");
    e = env::make_env(env_name);
    returns = env::evaluate_policy(e, env::scripted_policy(e, env::skill_from_string(scripted)), episodes, g.seed);
    source = {{"scripted", scripted}};
  }
  const auto s = metrics::summarize(returns);
  const auto ref = evalkit::reference_scores(e);
  json j{{"env", e.name},     {"seed", g.seed},     {"episodes", episodes},
         {"source", source},  {"returns", returns}, {"mean", s.mean},
         {"std", s.std},      {"normalized_return", evalkit::normalized_return(s.mean, ref)},
         {"reference", {{"random", ref.random}, {"expert", ref.expert}}}};
  if (!g.out.empty()) write_json(g.out, j);
  out << j.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

fs::path data_root() {
  const char* root = std::getenv("AXRL_DATA_DIR");
  return (root != nullptr && *root != '\0') ? fs::path(root) : fs::path(".");
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"axrl: anti-exploration offline RL toolkit", "axrl"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  Globals g;
  g.seed_option = app.add_option("--seed", g.seed, "Random seed (default 0)");
  app.add_option("--config", g.config_path, "JSON file with bonus/train/verify sections; flags win");
  app.add_option("--out", g.out, "Output path (file or directory, per command)");

  auto* gen = app.add_subcommand("gen-data", "Generate an offline dataset");
  std::string env_name, flavor;
  std::size_t size = 10000;
  gen->add_option("--env", env_name, "Environment: pointmass2d or pendulum1")->required();
  gen->add_option("--flavor", flavor, "random, medium, expert or medium-expert")->required();
  gen->add_option("--size", size, "Number of transitions")->capture_default_str()->check(CLI::PositiveNumber);

  auto* tb = app.add_subcommand("train-bonus", "Train a CVAE or RND bonus model");
  std::string dataset;
  BonusFlags bonus_flags;
  tb->add_option("--dataset", dataset, "Dataset file")->required();
  bonus_flags.add(tb);

  auto* eb = app.add_subcommand("eval-bonus", "Score dataset and OOD actions, write a discrimination report");
  std::string bonus_path, modes = "uniform,noise:0.1,noise:0.5,shuffled";
  eb->add_option("--dataset", dataset, "Dataset file")->required();
  eb->add_option("--bonus", bonus_path, "Bonus checkpoint; trains one when omitted");
  eb->add_option("--modes", modes, "OOD constructions: uniform, shuffled, noise:<fraction>")->capture_default_str();
  BonusFlags eval_bonus_flags;
  eval_bonus_flags.add(eb);

  auto* tr = app.add_subcommand("train", "Train the TD3 agent with an anti-exploration bonus");
  TrainFlags train_flags;
  std::string manifest;
  bool check = false;
  train_flags.add(tr, true);
  tr->add_option("--manifest", manifest, "Replay the run described by a manifest.json");
  tr->add_flag("--check", check, "With --manifest: fail unless the metrics match bit for bit");

  auto* sw = app.add_subcommand("sweep", "Grid search over (beta_actor, beta_critic)");
  std::string datasets, grid = "0.1,0.5,1,5,10", seeds;
  TrainFlags sweep_flags;
  BonusFlags sweep_bonus_flags;
  sw->add_option("--datasets", datasets, "Comma-separated dataset files")->required();
  sw->add_option("--grid", grid, "Beta values, used for both weights")->capture_default_str();
  sw->add_option("--seeds", seeds, "Comma-separated training seeds (default: --seed)");
  sweep_flags.add(sw, false);
  sw->add_option("--bonus-steps", sweep_bonus_flags.steps, "Bonus model training steps");

  auto* vd = app.add_subcommand("verify-dp", "Check the tabular anti-exploration invariants on random MDPs");
  evalkit::VerifyDpConfig verify;
  vd->add_option("--n-mdps", verify.n_mdps, "Number of random MDPs")->capture_default_str();
  vd->add_option("--min-states", verify.min_states)->capture_default_str();
  vd->add_option("--max-states", verify.max_states)->capture_default_str();
  vd->add_option("--min-actions", verify.min_actions)->capture_default_str();
  vd->add_option("--max-actions", verify.max_actions)->capture_default_str();
  vd->add_option("--iterations", verify.iterations, "VI iterations per scheme")->capture_default_str();

  auto* ep = app.add_subcommand("eval-policy", "Roll out a trained actor or a scripted policy");
  std::string run_dir, scripted, eval_env;
  int episodes = 10;
  ep->add_option("--run", run_dir, "Run directory written by train");
  ep->add_option("--scripted", scripted, "random, medium or expert");
  ep->add_option("--env", eval_env, "Environment for --scripted");
  ep->add_option("--episodes", episodes)->capture_default_str()->check(CLI::PositiveNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  CLI::App* active = &app;
  try {
    app.parse(reversed);
    active = app.get_subcommands().front();
    if (active == gen) return cmd_gen_data(g, env_name, flavor, size, out);
    if (active == tb) return cmd_train_bonus(g, dataset, bonus_flags, out);
    if (active == eb) return cmd_eval_bonus(g, dataset, bonus_path, eval_bonus_flags, modes, out);
    if (active == tr) return cmd_train(g, train_flags, manifest, check, out, err);
    if (active == sw) return cmd_sweep(g, datasets, grid, seeds, sweep_flags, sweep_bonus_flags, out);
    if (active == vd) return cmd_verify_dp(g, verify, vd, out, err);
    if (active == ep) return cmd_eval_policy(g, run_dir, scripted, eval_env, episodes, out);
    return kExitUsage;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    for (auto* sub : app.get_subcommands()) active = sub;
    err << "error: " << e.what() << "\n\n" << active->help();
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << active->help();
    return kExitUsage;
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << "\n\n" << active->help();
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace axrl::cli
