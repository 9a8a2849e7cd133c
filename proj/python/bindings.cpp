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

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "axrl/agent.hpp"
#include "axrl/bonus.hpp"
#include "axrl/cli.hpp"
#include "axrl/envlab.hpp"
#include "axrl/errors.hpp"
#include "axrl/evalkit.hpp"
#include "axrl/mdp.hpp"
#include "axrl/metrics.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace axrl;
using nlohmann::json;
using nn::Matrix;
using nn::Vector;

namespace {

// Python side uses one row per sample; the library uses one column per sample.
using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

py::array_t<float> float_rows(const std::vector<float>& values, std::size_t rows, int cols) {
  py::array_t<float> out({rows, static_cast<std::size_t>(cols)});
  std::copy(values.begin(), values.end(), out.mutable_data());
  return out;
}

py::dict trace_dict(const mdp::ViTrace& t) {
  std::vector<std::vector<int>> policies;
  for (const auto& p : t.policies) policies.push_back(p.modes());
  return py::dict("policies"_a = policies, "q_tables"_a = t.q_tables, "iterations"_a = t.iterations);
}

bonus::BonusConfig bonus_config(const std::string& kind, const std::string& overrides) {
  bonus::BonusConfig c = bonus::BonusConfig::desk(bonus::kind_from_string(kind));
  const json j = json::parse(overrides);
  if (!j.empty()) bonus::from_json(j, c);
  c.validate();
  return c;
}

agent::TrainConfig train_config(const std::string& overrides) {
  agent::TrainConfig c = agent::TrainConfig::desk();
  const json j = json::parse(overrides);
  if (!j.empty()) agent::from_json(j, c);
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Anti-exploration offline RL toolkit (C++ core)";

  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
  py::register_exception<NonFiniteError>(m, "NonFiniteError", PyExc_ArithmeticError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);
  py::register_exception<UntrainedModelError>(m, "UntrainedModelError", PyExc_RuntimeError);

  // ------------------------------------------------------------- mdp
  py::class_<mdp::TabularMdp>(m, "TabularMdp")
      .def_readonly("n_states", &mdp::TabularMdp::n_states)
      .def_readonly("n_actions", &mdp::TabularMdp::n_actions)
      .def_readonly("transition", &mdp::TabularMdp::transition)
      .def_readonly("reward", &mdp::TabularMdp::reward)
      .def_readonly("gamma", &mdp::TabularMdp::gamma);
  m.def("random_mdp", &mdp::random_mdp, "n_states"_a, "n_actions"_a, "gamma"_a, "seed"_a);
  m.def(
      "random_bonus",
      [](int ns, int na, std::uint64_t seed, double scale, bool zero_min) {
        return mdp::random_bonus(ns, na, seed, scale, zero_min).values;
      },
      "n_states"_a, "n_actions"_a, "seed"_a, "scale"_a = 1.0, "zero_min"_a = false);
  m.def(
      "vi_plain", [](const mdp::TabularMdp& mdp, const Matrix& q0, int n) { return trace_dict(mdp::vi_plain(mdp, q0, n)); },
      "mdp"_a, "q0"_a, "n_iter"_a);
  m.def(
      "vi_naive_antiexplore",
      [](const mdp::TabularMdp& mdp, const Matrix& b, const Matrix& q0, int n) {
        return trace_dict(mdp::vi_naive_antiexplore(mdp, mdp::BonusTable{b}, q0, n));
      },
      "mdp"_a, "bonus"_a, "q0"_a, "n_iter"_a);
  m.def(
      "vi_penalized_bootstrap",
      [](const mdp::TabularMdp& mdp, const Matrix& b, const Matrix& q0, int n) {
        return trace_dict(mdp::vi_penalized_bootstrap(mdp, mdp::BonusTable{b}, q0, n));
      },
      "mdp"_a, "bonus"_a, "q0_prime"_a, "n_iter"_a);
  m.def(
      "vi_kl_regularized",
      [](const mdp::TabularMdp& mdp, const Matrix& b, double beta, double tau, const Matrix& q0, int n) {
        return trace_dict(mdp::vi_kl_regularized(mdp, mdp::BonusTable{b}, beta, tau, q0, n));
      },
      "mdp"_a, "bonus"_a, "beta"_a, "tau"_a, "q0"_a, "n_iter"_a);
  m.def(
      "delta_b", [](const Matrix& b, double beta, double tau) { return mdp::delta_b(mdp::BonusTable{b}, beta, tau); },
      "bonus"_a, "beta"_a, "tau"_a);

  // ------------------------------------------------------------- envlab
  py::class_<env::Environment>(m, "Environment")
      .def(py::init([](const std::string& name) { return env::make_env(name); }), "name"_a)
      .def_readonly("name", &env::Environment::name)
      .def_readonly("state_dim", &env::Environment::state_dim)
      .def_readonly("action_dim", &env::Environment::action_dim)
      .def_readonly("action_low", &env::Environment::action_low)
      .def_readonly("action_high", &env::Environment::action_high)
      .def_readonly("horizon", &env::Environment::horizon)
      .def(
          "step",
          [](const env::Environment& e, const Vector& s, const Vector& a) {
            const auto r = env::step(e, s, a);
            return py::make_tuple(r.next_state, r.reward, r.done);
          },
          "state"_a, "action"_a)
      .def("__repr__", [](const env::Environment& e) { return "<Environment " + e.name + ">"; });

  py::class_<env::Dataset>(m, "Dataset")
      .def("__len__", &env::Dataset::size)
      .def_property_readonly("metadata", [](const env::Dataset& d) { return json(d.metadata).dump(); })
      .def_property_readonly("states",
                             [](const env::Dataset& d) { return float_rows(d.states, d.size(), d.state_dim()); })
      .def_property_readonly("actions",
                             [](const env::Dataset& d) { return float_rows(d.actions, d.size(), d.action_dim()); })
      .def_property_readonly("next_states",
                             [](const env::Dataset& d) { return float_rows(d.next_states, d.size(), d.state_dim()); })
      .def_property_readonly("rewards", [](const env::Dataset& d) { return float_rows(d.rewards, d.size(), 1); })
      .def_property_readonly("dones", [](const env::Dataset& d) {
        return py::array_t<bool>(static_cast<py::ssize_t>(d.size()), reinterpret_cast<const bool*>(d.dones.data()));
      });
  m.def(
      "generate_dataset",
      [](const std::string& env_name, const std::string& flavor, std::size_t size, std::uint64_t seed) {
        return env::generate_dataset(env::make_env(env_name), flavor, size, seed);
      },
      "env"_a, "flavor"_a, "size"_a, "seed"_a = 0);
  m.def("save_dataset", [](const std::string& path, const env::Dataset& d) { env::save_dataset(path, d); }, "path"_a,
        "dataset"_a);
  m.def("load_dataset", [](const std::string& path) { return env::load_dataset(path); }, "path"_a);
  m.def("normalize_rewards", &agent::normalize_rewards, "dataset"_a, "constant_to_half"_a = false);
  m.def(
      "ood_actions",
      [](const env::Dataset& d, const std::string& mode, std::uint64_t seed) {
        const Matrix a = env::make_ood_actions(d, env::make_env(d.metadata.env), env::OodMode::parse(mode), seed);
        return RowMajor(a.transpose());
      },
      "dataset"_a, "mode"_a, "seed"_a = 0);
  m.def(
      "evaluate_scripted",
      [](const std::string& env_name, const std::string& skill, int episodes, std::uint64_t seed) {
        const auto e = env::make_env(env_name);
        return env::evaluate_policy(e, env::scripted_policy(e, env::skill_from_string(skill)), episodes, seed);
      },
      "env"_a, "skill"_a, "episodes"_a = 10, "seed"_a = 0);

  // ------------------------------------------------------------- bonus
  py::class_<bonus::BonusModel>(m, "BonusModel")
      .def_property_readonly("kind", [](const bonus::BonusModel& b) { return std::string(bonus::to_string(b.kind())); })
      .def_property_readonly("trained", &bonus::BonusModel::trained)
      .def_readonly("dataset_fingerprint", &bonus::BonusModel::dataset_fingerprint)
      .def_readonly("config_fingerprint", &bonus::BonusModel::config_fingerprint)
      .def(
          "score",
          [](const bonus::BonusModel& b, const Matrix& states, const Matrix& actions) {
            return Vector(b.score(states.transpose(), actions.transpose()));
          },
          "states"_a, "actions"_a, "One score per row of (states, actions).")
      .def("save", [](const bonus::BonusModel& b, const std::string& path) { bonus::save_bonus(path, b); }, "path"_a);
  m.def("load_bonus", [](const std::string& path) { return bonus::load_bonus(path); }, "path"_a);
  m.def(
      "train_bonus",
      [](const env::Dataset& d, const std::string& kind, const std::string& overrides) {
        const auto c = bonus_config(kind, overrides);
        py::gil_scoped_release release;
        auto trained = bonus::train_bonus(d, env::make_env(d.metadata.env), c);
        std::vector<double> losses;
        for (const auto& r : trained.history) losses.push_back(r.loss);
        py::gil_scoped_acquire acquire;
        return py::make_tuple(std::move(trained.model), losses);
      },
      "dataset"_a, "kind"_a = "cvae", "config_json"_a = "{}");
  m.def(
      "auc",
      [](const std::vector<double>& in, const std::vector<double>& out) { return metrics::auc(in, out); },
      "in_distribution"_a, "out_of_distribution"_a);
  m.def(
      "discrimination_report",
      [](const bonus::BonusModel& b, const env::Dataset& d, const std::vector<std::string>& modes, std::uint64_t seed) {
        std::vector<env::OodMode> parsed;
        for (const auto& s : modes) parsed.push_back(env::OodMode::parse(s));
        return json(evalkit::discrimination_report(b, d, env::make_env(d.metadata.env), parsed, seed)).dump();
      },
      "bonus"_a, "dataset"_a, "modes"_a, "seed"_a = 0);

  // ------------------------------------------------------------- agent
  py::class_<agent::Td3State>(m, "Agent")
      .def_readonly("step", &agent::Td3State::step)
      .def(
          "act", [](const agent::Td3State& s, const Matrix& states) { return RowMajor(agent::act(s, states.transpose()).transpose()); },
          "states"_a)
      .def(
          "evaluate",
          [](const agent::Td3State& s, const std::string& env_name, int episodes, std::uint64_t seed) {
            return agent::evaluate_actor(s, env::make_env(env_name), episodes, seed);
          },
          "env"_a, "episodes"_a = 10, "seed"_a = 0)
      .def("save", [](const agent::Td3State& s, const std::string& path) { agent::save_agent(path, s); }, "path"_a);
  m.def(
      "train_agent",
      [](const env::Dataset& d, const bonus::BonusModel* b, const std::string& overrides) {
        const auto c = train_config(overrides);
        py::gil_scoped_release release;
        auto r = agent::train_agent(d, b, env::make_env(d.metadata.env), c);
        const std::string csv = agent::metrics_csv(r.metrics);
        py::gil_scoped_acquire acquire;
        return py::make_tuple(std::move(r.state), csv);
      },
      "dataset"_a, "bonus"_a, "config_json"_a = "{}");

  // ------------------------------------------------------------- evalkit / cli
  m.def(
      "verify_dp",
      [](int n_mdps, std::uint64_t seed, int iterations) {
        evalkit::VerifyDpConfig c;
        c.n_mdps = n_mdps;
        c.seed = seed;
        c.iterations = iterations;
        const auto report = evalkit::verify_dp(c);
        py::list checks;
        for (const auto& k : report.checks) {
          checks.append(py::dict("invariant"_a = k.invariant, "mdp_index"_a = k.mdp_index, "mdp_seed"_a = k.mdp_seed,
                                 "passed"_a = k.passed, "detail"_a = k.detail));
        }
        return checks;
      },
      "n_mdps"_a = 100, "seed"_a = 0, "iterations"_a = 200);
  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      "args"_a);
}
