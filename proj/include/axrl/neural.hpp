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

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace axrl::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

enum class Activation : std::uint8_t { identity = 0, tanh = 1, relu = 2, elu = 3 };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

/// Fully connected network. Layer l maps layer_sizes[l] -> layer_sizes[l + 1] and applies
/// activations[l]; samples are matrix columns throughout.
struct MlpParams {
  std::vector<int> layer_sizes;
  std::vector<Matrix> weights;  // layer_sizes[l + 1] x layer_sizes[l]
  std::vector<Vector> biases;
  std::vector<Activation> activations;

  [[nodiscard]] std::size_t n_layers() const { return weights.size(); }
  [[nodiscard]] int input_dim() const { return layer_sizes.front(); }
  [[nodiscard]] int output_dim() const { return layer_sizes.back(); }
  [[nodiscard]] std::size_t parameter_count() const;
  [[nodiscard]] bool all_finite() const;
  /// Throws DimensionError on inconsistent shapes.
  void validate() const;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

/// Weights and biases uniform in +-1/sqrt(fan_in).
MlpParams make_mlp(const std::vector<int>& layer_sizes, const std::vector<Activation>& activations, Rng& rng);

struct ForwardCache {
  std::vector<Matrix> inputs;           // input of each layer
  std::vector<Matrix> pre_activations;  // W x + b of each layer
};

Matrix forward(const MlpParams& params, const Matrix& input, ForwardCache* cache = nullptr);
/// Single-sample convenience wrapper.
Vector forward_one(const MlpParams& params, const Vector& input);

/// Same layout as MlpParams, used for gradients and Adam moments.
struct MlpGrads {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static MlpGrads zeros_like(const MlpParams& params);
  MlpGrads& operator+=(const MlpGrads& other);
  MlpGrads& operator*=(double s);
  [[nodiscard]] bool all_finite() const;
};

struct BackwardResult {
  MlpGrads params;
  Matrix input;  // d loss / d input, one column per sample
};

/// Reverse-mode pass. `output_gradient` is d loss / d output with one column per sample;
/// parameter gradients are summed over columns (losses carry their own 1/N).
BackwardResult backward(const MlpParams& params, const ForwardCache& cache, const Matrix& output_gradient);

double activate(Activation a, double z);
/// elu uses alpha = 1; relu'(0) = 0.
double activate_derivative(Activation a, double z);

struct AdamState {
  MlpGrads first_moment;
  MlpGrads second_moment;
  std::int64_t step_count = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

AdamState make_adam(const MlpParams& params, double learning_rate);

/// Bias-corrected Adam update. Throws NonFiniteError if the result is not finite.
void adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state);

/// target <- (1 - rate) target + rate online.
void polyak_update(MlpParams& target, const MlpParams& online, double rate);
/// Euclidean distance between two parameter sets of identical shape.
double parameter_distance(const MlpParams& a, const MlpParams& b);
/// FNV-1a over the raw parameter bytes.
std::uint64_t checksum(const MlpParams& params);

/// Throws NonFiniteError naming `context` if any parameter is NaN or infinite.
void require_finite(const MlpParams& params, std::string_view context);

/// Reparameterized diagonal Gaussian draw: sample = mean + std * noise.
struct GaussianSample {
  Matrix mean;
  Matrix std;
  Matrix noise;

  [[nodiscard]] Matrix sample() const { return mean + std.cwiseProduct(noise); }
};

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng);

// Checkpoint format, one block per network, blocks back to back:
//   "AXRL" | u32 version | u32 n_sizes | u32 layer_sizes[n_sizes] | u8 activations[n_sizes - 1]
//   | f64 parameters: per layer, weights row-major then biases
// All integers and floats little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const std::vector<MlpParams>& nets);
std::vector<MlpParams> read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const std::vector<MlpParams>& nets);
std::vector<MlpParams> load_checkpoint(const std::filesystem::path& path);

}  // namespace axrl::nn
