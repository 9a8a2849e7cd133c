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

// Summary statistics used by the reports.

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace axrl::metrics {

/// P(score_negative > score_positive) + 0.5 P(tie), i.e. the probability that a
/// random out-of-distribution sample outscores a random in-distribution one.
/// Computed from average ranks (Mann-Whitney U).
double auc(std::span<const double> in_distribution, std::span<const double> out_of_distribution);

struct Histogram {
  double low = 0.0;
  double high = 0.0;
  std::vector<std::uint64_t> counts;

  [[nodiscard]] double bin_width() const;
  [[nodiscard]] std::uint64_t total() const;
};

/// Fixed-width bins over [low, high]; the top edge belongs to the last bin.
/// Values outside the range are clamped into the end bins.
Histogram histogram(std::span<const double> values, double low, double high, int bins);

struct Summary {
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for fewer than two values
  double min = 0.0;
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
  double max = 0.0;
};

/// Quantiles use linear interpolation between order statistics.
Summary summarize(std::span<const double> values);
double quantile(std::vector<double> values, double q);
double mean(std::span<const double> values);

void to_json(nlohmann::json& j, const Histogram& h);
void to_json(nlohmann::json& j, const Summary& s);

}  // namespace axrl::metrics
