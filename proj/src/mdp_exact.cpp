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

#include "axrl/mdp_exact.hpp"

#include <cmath>
#include <string>

#include "axrl/errors.hpp"

namespace axrl::mdp {

Vector exact_policy_values(const TabularMdp& mdp, const std::vector<int>& actions, const Matrix& reward) {
  mdp.validate();
  if (actions.size() != static_cast<std::size_t>(mdp.n_states)) throw DimensionError("policy length != n_states");
  if (reward.rows() != mdp.n_states || reward.cols() != mdp.n_actions) throw DimensionError("reward shape");
  const int n = mdp.n_states;
  Matrix system = Matrix::Identity(n, n);
  Vector rhs(n);
  for (int s = 0; s < n; ++s) {
    const int a = actions[static_cast<std::size_t>(s)];
    if (a < 0 || a >= mdp.n_actions) throw DimensionError("action index out of range");
    system.row(s) -= mdp.gamma * mdp.transition.row(mdp.row(s, a));
    rhs(s) = reward(s, a);
  }
  return system.partialPivLu().solve(rhs);
}

EnumerationResult enumerate_optimum(const TabularMdp& mdp, const Matrix& reward, std::size_t max_policies) {
  mdp.validate();
  std::size_t count = 1;
  for (int s = 0; s < mdp.n_states; ++s) {
    count *= static_cast<std::size_t>(mdp.n_actions);
    if (count > max_policies) {
      throw ParameterError("enumeration of " + std::to_string(mdp.n_actions) + "^" + std::to_string(mdp.n_states) +
                           " policies exceeds the limit");
    }
  }
  EnumerationResult result;
  result.n_policies = count;
  std::vector<int> actions(static_cast<std::size_t>(mdp.n_states), 0);
  double best_total = -INFINITY;
  for (std::size_t code = 0; code < count; ++code) {
    std::size_t rest = code;
    for (auto& a : actions) {
      a = static_cast<int>(rest % static_cast<std::size_t>(mdp.n_actions));
      rest /= static_cast<std::size_t>(mdp.n_actions);
    }
    const Vector v = exact_policy_values(mdp, actions, reward);
    if (result.best_values.size() == 0) {
      result.best_values = v;
    } else {
      result.best_values = result.best_values.cwiseMax(v);
    }
    if (v.sum() > best_total) {
      best_total = v.sum();
      result.best_policy = actions;
    }
  }
  return result;
}

}  // namespace axrl::mdp
