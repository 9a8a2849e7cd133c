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

#include <doctest.h>

#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "axrl/errors.hpp"
#include "axrl/metrics.hpp"

using namespace axrl::metrics;

namespace {

/// Quadratic pairwise definition of the AUC.
double pairwise_auc(const std::vector<double>& in, const std::vector<double>& out) {
  double wins = 0.0;
  for (double o : out)
    for (double i : in) wins += o > i ? 1.0 : (o == i ? 0.5 : 0.0);
  return wins / (static_cast<double>(in.size()) * static_cast<double>(out.size()));
}

}  // namespace

TEST_CASE("auc") {
  CHECK(auc(std::vector<double>{1, 2}, std::vector<double>{3, 4}) == 1.0);
  CHECK(auc(std::vector<double>{3, 4}, std::vector<double>{1, 2}) == 0.0);
  CHECK(auc(std::vector<double>{1, 1, 1}, std::vector<double>{1, 1}) == 0.5);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> coarse(0, 9);  // plenty of ties
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> in(1 + trial), out(3 + 2 * trial);
    for (auto& v : in) v = coarse(rng);
    for (auto& v : out) v = coarse(rng) + 0.5 * (trial % 3);
    CHECK(auc(in, out) == doctest::Approx(pairwise_auc(in, out)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(auc(std::vector<double>{}, std::vector<double>{1}), axrl::ParameterError);
}

TEST_CASE("histogram") {
  const std::vector<double> v{0.0, 0.1, 0.5, 0.99, 1.0, -3.0, 7.0};
  const auto h = histogram(v, 0.0, 1.0, 2);
  CHECK(h.counts == std::vector<std::uint64_t>{3, 4});
  CHECK(h.total() == v.size());
  CHECK(h.bin_width() == 0.5);
  CHECK(histogram(std::vector<double>{2.0, 2.0}, 2.0, 2.0, 50).counts[0] == 2);
  CHECK_THROWS_AS(histogram(v, 0.0, 1.0, 0), axrl::ParameterError);
  nlohmann::json j = h;
  CHECK(j.at("counts").size() == 2);
}

TEST_CASE("summarize") {
  const std::vector<double> v{4, 1, 3, 2};
  const auto s = summarize(v);
  CHECK(s.count == 4);
  CHECK(s.mean == 2.5);
  CHECK(s.std == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(s.min == 1);
  CHECK(s.max == 4);
  CHECK(s.median == 2.5);
  CHECK(s.q25 == 1.75);
  CHECK(s.q75 == 3.25);
  CHECK(summarize(std::vector<double>{7}).std == 0.0);
  CHECK_THROWS_AS(quantile({}, 0.5), axrl::ParameterError);
  CHECK_THROWS_AS(quantile({1.0}, 1.5), axrl::ParameterError);
}
