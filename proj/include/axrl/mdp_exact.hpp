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

#include <cstddef>
#include <vector>

#include "axrl/mdp.hpp"

namespace axrl::mdp {

/// V^pi for a deterministic policy under `reward`, from (I - gamma P_pi) V = r_pi.
Vector exact_policy_values(const TabularMdp& mdp, const std::vector<int>& actions, const Matrix& reward);

struct EnumerationResult {
  std::vector<int> best_policy;  // first policy (in enumeration order) attaining the optimum
  Vector best_values;            // per-state optimum over all deterministic policies
  std::size_t n_policies = 0;
};

/// Exhaustive search over all |A|^|S| deterministic policies; refuses more than `max_policies`.
EnumerationResult enumerate_optimum(const TabularMdp& mdp, const Matrix& reward, std::size_t max_policies = 4096);

}  // namespace axrl::mdp
