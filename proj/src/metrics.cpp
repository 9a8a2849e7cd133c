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

#include "axrl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "axrl/errors.hpp"

namespace axrl::metrics {

double auc(std::span<const double> in_distribution, std::span<const double> out_of_distribution) {
  const std::size_t n_in = in_distribution.size(), n_out = out_of_distribution.size();
  if (n_in == 0 || n_out == 0) throw ParameterError("AUC needs samples on both sides");
  std::vector<std::pair<double, bool>> all;
  all.reserve(n_in + n_out);
  for (double v : in_distribution) all.emplace_back(v, false);
  for (double v : out_of_distribution) all.emplace_back(v, true);
  for (const auto& [v, _] : all)
    if (std::isnan(v)) throw NonFiniteError("NaN score in AUC");
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  double rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k)
      if (all[k].second) rank_sum += avg_rank;
    i = j;
  }
  const double u = rank_sum - 0.5 * static_cast<double>(n_out) * static_cast<double>(n_out + 1);
  return u / (static_cast<double>(n_in) * static_cast<double>(n_out));
}

double Histogram::bin_width() const { return counts.empty() ? 0.0 : (high - low) / static_cast<double>(counts.size()); }

std::uint64_t Histogram::total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }

Histogram histogram(std::span<const double> values, double low, double high, int bins) {
  if (bins <= 0) throw ParameterError("histogram needs a positive bin count");
  if (!(high >= low)) throw ParameterError("histogram range is empty");
  Histogram h{low, high, std::vector<std::uint64_t>(static_cast<std::size_t>(bins), 0)};
  const double width = h.bin_width();
  for (double v : values) {
    if (!std::isfinite(v)) throw NonFiniteError("non-finite value in histogram");
    long b = width > 0.0 ? static_cast<long>(std::floor((v - low) / width)) : 0;
    b = std::clamp(b, 0L, static_cast<long>(bins) - 1);
    ++h.counts[static_cast<std::size_t>(b)];
  }
  return h;
}

double mean(std::span<const double> values) {
  if (values.empty()) throw ParameterError("mean of an empty sample");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ParameterError("quantile of an empty sample");
  if (q < 0.0 || q > 1.0) throw ParameterError("quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Summary summarize(std::span<const double> values) {
  Summary s;
  s.count = values.size();
  s.mean = mean(values);
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  const std::vector<double> v(values.begin(), values.end());
  s.min = *std::min_element(v.begin(), v.end());
  s.max = *std::max_element(v.begin(), v.end());
  s.q25 = quantile(v, 0.25);
  s.median = quantile(v, 0.5);
  s.q75 = quantile(v, 0.75);
  return s;
}

void to_json(nlohmann::json& j, const Histogram& h) {
  j = {{"low", h.low}, {"high", h.high}, {"counts", h.counts}};
}

void to_json(nlohmann::json& j, const Summary& s) {
  j = {{"count", s.count}, {"mean", s.mean}, {"std", s.std},   {"min", s.min},
       {"q25", s.q25},     {"median", s.median}, {"q75", s.q75}, {"max", s.max}};
}

}  // namespace axrl::metrics
