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

// Straight-line reference computations used only by the tests. Nothing in here calls
// into the library's numerical paths, so agreement is an independent check.
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

namespace axrl::testing {

using Grid = std::vector<std::vector<double>>;

/// Dense n x n solve by Gaussian elimination with partial pivoting.
inline std::vector<double> gauss_solve(Grid a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double acc = b[i];
    for (std::size_t c = i + 1; c < n; ++c) acc -= a[i][c] * x[c];
    x[i] = acc / a[i][i];
  }
  return x;
}

/// Plain-array view of a finite MDP: p[s][a][s'], r[s][a].
struct LoopMdp {
  std::vector<Grid> p;
  Grid r;
  double gamma = 0.9;
  [[nodiscard]] std::size_t n_states() const { return r.size(); }
  [[nodiscard]] std::size_t n_actions() const { return r.empty() ? 0 : r[0].size(); }
};

/// r_eff(s,a) + gamma sum_s' P(s'|s,a) sum_a' pi(a'|s') q(s',a').
inline Grid loop_bellman(const LoopMdp& m, const Grid& pi, const Grid& q, const Grid& r_eff) {
  const std::size_t ns = m.n_states(), na = m.n_actions();
  Grid out(ns, std::vector<double>(na, 0.0));
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      double acc = 0.0;
      for (std::size_t sp = 0; sp < ns; ++sp) {
        double v = 0.0;
        for (std::size_t ap = 0; ap < na; ++ap) v += pi[sp][ap] * q[sp][ap];
        acc += m.p[s][a][sp] * v;
      }
      out[s][a] = r_eff[s][a] + m.gamma * acc;
    }
  }
  return out;
}

/// Exact discounted values of a deterministic policy under reward `r`.
inline std::vector<double> loop_policy_values(const LoopMdp& m, const std::vector<int>& policy, const Grid& r) {
  const std::size_t n = m.n_states();
  Grid a(n, std::vector<double>(n, 0.0));
  std::vector<double> b(n);
  for (std::size_t s = 0; s < n; ++s) {
    const auto act = static_cast<std::size_t>(policy[s]);
    for (std::size_t sp = 0; sp < n; ++sp) a[s][sp] = (s == sp ? 1.0 : 0.0) - m.gamma * m.p[s][act][sp];
    b[s] = r[s][act];
  }
  return gauss_solve(std::move(a), std::move(b));
}

struct LoopOptimum {
  std::vector<double> values;      // per-state maximum over deterministic policies
  std::vector<int> argmax_policy;  // policy attaining all per-state maxima (exists for finite MDPs)
};

inline LoopOptimum loop_enumerate(const LoopMdp& m, const Grid& r) {
  const std::size_t ns = m.n_states(), na = m.n_actions();
  std::size_t total = 1;
  for (std::size_t s = 0; s < ns; ++s) total *= na;
  LoopOptimum best;
  double best_sum = -INFINITY;
  std::vector<int> pol(ns, 0);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t s = 0; s < ns; ++s) {
      pol[s] = static_cast<int>(c % na);
      c /= na;
    }
    const auto v = loop_policy_values(m, pol, r);
    if (best.values.empty()) best.values = v;
    double sum = 0.0;
    for (std::size_t s = 0; s < ns; ++s) {
      best.values[s] = std::max(best.values[s], v[s]);
      sum += v[s];
    }
    if (sum > best_sum) {
      best_sum = sum;
      best.argmax_policy = pol;
    }
  }
  return best;
}

/// Central finite-difference derivative of f along one coordinate.
inline double central_difference(const std::function<double()>& f, double& coord, double h = 1e-5) {
  const double saved = coord;
  coord = saved + h;
  const double up = f();
  coord = saved - h;
  const double down = f();
  coord = saved;
  return (up - down) / (2.0 * h);
}

/// Relative error with an absolute floor so tiny gradients are not over-penalized.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

}  // namespace axrl::testing
