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

#include "axrl/neural.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "axrl/errors.hpp"
#include "axrl/io.hpp"

namespace axrl::nn {

namespace {

constexpr char kMagic[4] = {'A', 'X', 'R', 'L'};

Matrix apply_activation(Activation a, const Matrix& z) {
  switch (a) {
    case Activation::identity:
      return z;
    case Activation::tanh:
      return z.array().tanh().matrix();
    case Activation::relu:
      return z.cwiseMax(0.0);
    case Activation::elu:
      return z.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
  }
  return z;
}

Matrix apply_derivative(Activation a, const Matrix& z) {
  switch (a) {
    case Activation::identity:
      return Matrix::Ones(z.rows(), z.cols());
    case Activation::tanh:
      return (1.0 - z.array().tanh().square()).matrix();
    case Activation::relu:
      return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
    case Activation::elu:
      return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : std::exp(v); });
  }
  return z;
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::identity:
      return "identity";
    case Activation::tanh:
      return "tanh";
    case Activation::relu:
      return "relu";
    case Activation::elu:
      return "elu";
  }
  return "?";
}

Activation activation_from_string(std::string_view name) {
  for (auto a : {Activation::identity, Activation::tanh, Activation::relu, Activation::elu}) {
    if (to_string(a) == name) return a;
  }
  throw ParameterError("unknown activation '" + std::string(name) + "'");
}

double activate(Activation a, double z) { return apply_activation(a, Matrix::Constant(1, 1, z))(0, 0); }

double activate_derivative(Activation a, double z) { return apply_derivative(a, Matrix::Constant(1, 1, z))(0, 0); }

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  return n;
}

bool MlpParams::all_finite() const {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  }
  return true;
}

void MlpParams::validate() const {
  if (layer_sizes.size() < 2) throw DimensionError("network needs at least an input and an output size");
  const std::size_t n = layer_sizes.size() - 1;
  if (weights.size() != n || biases.size() != n || activations.size() != n) {
    throw DimensionError("layer count mismatch between sizes, weights, biases and activations");
  }
  for (std::size_t l = 0; l < n; ++l) {
    if (layer_sizes[l] < 1 || layer_sizes[l + 1] < 1) throw DimensionError("layer sizes must be positive");
    if (weights[l].rows() != layer_sizes[l + 1] || weights[l].cols() != layer_sizes[l] ||
        biases[l].size() != layer_sizes[l + 1]) {
      throw DimensionError("layer " + std::to_string(l) + " parameter shapes disagree with layer_sizes");
    }
  }
}

MlpParams make_mlp(const std::vector<int>& layer_sizes, const std::vector<Activation>& activations, Rng& rng) {
  MlpParams p;
  p.layer_sizes = layer_sizes;
  p.activations = activations;
  if (layer_sizes.size() < 2 || activations.size() != layer_sizes.size() - 1) {
    throw DimensionError("need one activation per layer");
  }
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    if (layer_sizes[l] < 1 || layer_sizes[l + 1] < 1) throw DimensionError("layer sizes must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer_sizes[l]));
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix w(layer_sizes[l + 1], layer_sizes[l]);
    Vector b(layer_sizes[l + 1]);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = u(rng);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = u(rng);
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  return p;
}

Matrix forward(const MlpParams& params, const Matrix& input, ForwardCache* cache) {
  if (input.rows() != params.input_dim()) {
    throw DimensionError("network expects input of size " + std::to_string(params.input_dim()) + ", got " +
                         std::to_string(input.rows()));
  }
  if (cache) {
    cache->inputs.clear();
    cache->pre_activations.clear();
  }
  Matrix x = input;
  for (std::size_t l = 0; l < params.n_layers(); ++l) {
    Matrix z = params.weights[l] * x;
    z.colwise() += params.biases[l];
    Matrix y = apply_activation(params.activations[l], z);
    if (cache) {
      cache->inputs.push_back(std::move(x));
      cache->pre_activations.push_back(std::move(z));
    }
    x = std::move(y);
  }
  return x;
}

Vector forward_one(const MlpParams& params, const Vector& input) {
  return forward(params, Matrix(input), nullptr).col(0);
}

MlpGrads MlpGrads::zeros_like(const MlpParams& params) {
  MlpGrads g;
  for (std::size_t l = 0; l < params.n_layers(); ++l) {
    g.weights.push_back(Matrix::Zero(params.weights[l].rows(), params.weights[l].cols()));
    g.biases.push_back(Vector::Zero(params.biases[l].size()));
  }
  return g;
}

MlpGrads& MlpGrads::operator+=(const MlpGrads& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += other.weights[l];
    biases[l] += other.biases[l];
  }
  return *this;
}

MlpGrads& MlpGrads::operator*=(double s) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] *= s;
    biases[l] *= s;
  }
  return *this;
}

bool MlpGrads::all_finite() const {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  }
  return true;
}

BackwardResult backward(const MlpParams& params, const ForwardCache& cache, const Matrix& output_gradient) {
  const std::size_t n = params.n_layers();
  if (cache.inputs.size() != n || cache.pre_activations.size() != n) {
    throw DimensionError("forward cache does not belong to this network");
  }
  if (output_gradient.rows() != params.output_dim() || output_gradient.cols() != cache.inputs.front().cols()) {
    throw DimensionError("output gradient shape does not match the cached forward pass");
  }
  BackwardResult out;
  out.params.weights.resize(n);
  out.params.biases.resize(n);
  Matrix upstream = output_gradient;
  for (std::size_t l = n; l-- > 0;) {
    const Matrix dz = upstream.cwiseProduct(apply_derivative(params.activations[l], cache.pre_activations[l]));
    out.params.weights[l] = dz * cache.inputs[l].transpose();
    out.params.biases[l] = dz.rowwise().sum();
    upstream = params.weights[l].transpose() * dz;
  }
  out.input = std::move(upstream);
  return out;
}

AdamState make_adam(const MlpParams& params, double learning_rate) {
  AdamState s;
  s.first_moment = MlpGrads::zeros_like(params);
  s.second_moment = MlpGrads::zeros_like(params);
  s.learning_rate = learning_rate;
  return s;
}

void adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state) {
  if (grads.weights.size() != params.n_layers() || state.first_moment.weights.size() != params.n_layers()) {
    throw DimensionError("gradient/optimizer layout does not match the network");
  }
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    p.array() -= state.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + state.epsilon);
  };
  for (std::size_t l = 0; l < params.n_layers(); ++l) {
    update(params.weights[l], grads.weights[l], state.first_moment.weights[l], state.second_moment.weights[l]);
    update(params.biases[l], grads.biases[l], state.first_moment.biases[l], state.second_moment.biases[l]);
  }
  require_finite(params, "adam_step");
}

void polyak_update(MlpParams& target, const MlpParams& online, double rate) {
  if (target.layer_sizes != online.layer_sizes) throw DimensionError("polyak update between different shapes");
  for (std::size_t l = 0; l < target.n_layers(); ++l) {
    target.weights[l] = (1.0 - rate) * target.weights[l] + rate * online.weights[l];
    target.biases[l] = (1.0 - rate) * target.biases[l] + rate * online.biases[l];
  }
}

double parameter_distance(const MlpParams& a, const MlpParams& b) {
  if (a.layer_sizes != b.layer_sizes) throw DimensionError("distance between different shapes");
  double sq = 0.0;
  for (std::size_t l = 0; l < a.n_layers(); ++l) {
    sq += (a.weights[l] - b.weights[l]).squaredNorm() + (a.biases[l] - b.biases[l]).squaredNorm();
  }
  return std::sqrt(sq);
}

std::uint64_t checksum(const MlpParams& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const double* data, Eigen::Index n) {
    h = io::fnv1a(std::span(reinterpret_cast<const unsigned char*>(data), static_cast<std::size_t>(n) * sizeof(double)),
                  h);
  };
  for (std::size_t l = 0; l < params.n_layers(); ++l) {
    feed(params.weights[l].data(), params.weights[l].size());
    feed(params.biases[l].data(), params.biases[l].size());
  }
  return h;
}

void require_finite(const MlpParams& params, std::string_view context) {
  if (!params.all_finite()) throw NonFiniteError(std::string(context) + ": non-finite network parameters");
}

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  // Column-major fill order keeps draws aligned with sample columns.
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

void write_checkpoint(std::ostream& out, const std::vector<MlpParams>& nets) {
  for (const auto& net : nets) {
    net.validate();
    out.write(kMagic, 4);
    io::put_u32(out, kCheckpointVersion);
    io::put_u32(out, static_cast<std::uint32_t>(net.layer_sizes.size()));
    for (int s : net.layer_sizes) io::put_u32(out, static_cast<std::uint32_t>(s));
    for (auto a : net.activations) out.put(static_cast<char>(a));
    for (std::size_t l = 0; l < net.n_layers(); ++l) {
      const auto& w = net.weights[l];
      for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j) io::put_f64(out, w(i, j));
      for (Eigen::Index i = 0; i < net.biases[l].size(); ++i) io::put_f64(out, net.biases[l](i));
    }
  }
}

std::vector<MlpParams> read_checkpoint(std::istream& in) {
  std::vector<MlpParams> nets;
  while (true) {
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() == 0) break;
    if (in.gcount() != 4 || std::string_view(magic, 4) != std::string_view(kMagic, 4)) {
      throw FormatError("bad checkpoint magic");
    }
    const auto version = io::get_u32(in);
    if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
    const auto n_sizes = io::get_u32(in);
    if (n_sizes < 2 || n_sizes > 1024) throw FormatError("implausible layer count in checkpoint");
    MlpParams net;
    for (std::uint32_t i = 0; i < n_sizes; ++i) {
      const auto s = io::get_u32(in);
      if (s == 0 || s > (1u << 20)) throw FormatError("implausible layer size in checkpoint");
      net.layer_sizes.push_back(static_cast<int>(s));
    }
    for (std::uint32_t i = 0; i + 1 < n_sizes; ++i) {
      const int tag = in.get();
      if (tag < 0 || tag > static_cast<int>(Activation::elu)) throw FormatError("bad activation tag in checkpoint");
      net.activations.push_back(static_cast<Activation>(tag));
    }
    for (std::uint32_t l = 0; l + 1 < n_sizes; ++l) {
      Matrix w(net.layer_sizes[l + 1], net.layer_sizes[l]);
      for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = io::get_f64(in);
      Vector b(net.layer_sizes[l + 1]);
      for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = io::get_f64(in);
      net.weights.push_back(std::move(w));
      net.biases.push_back(std::move(b));
    }
    nets.push_back(std::move(net));
  }
  if (nets.empty()) throw FormatError("empty checkpoint");
  return nets;
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<MlpParams>& nets) {
  io::write_atomic(path, [&](std::ostream& out) { write_checkpoint(out, nets); });
}

std::vector<MlpParams> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace axrl::nn
