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

// Learned anti-exploration bonuses: a state-conditioned CVAE over actions and
// random network distillation. Both score (s, a) pairs; the scale beta is
// applied by whoever consumes the score.
//
// Naming: the encoder is Phi (s, a) -> (mu_z, log sigma_z) and the decoder is
// Psi (s, z) -> a_hat. The bonus is ||a - Psi(s, mu_z(s, a))||^2.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "axrl/envlab.hpp"
#include "axrl/neural.hpp"

namespace axrl::bonus {

using nn::Matrix;
using nn::MlpParams;
using nn::Rng;
using nn::Vector;

enum class Kind { cvae, rnd };
std::string_view to_string(Kind k);
Kind kind_from_string(std::string_view name);

struct CvaeModel {
  MlpParams encoder;  // (s || a) -> (mu_z || log sigma_z)
  MlpParams decoder;  // (s || z) -> pre-scaling action in [-1, 1]
  int state_dim = 0;
  int action_dim = 0;
  int latent_dim = 0;
  double eta = 0.5;
  Vector action_low;
  Vector action_high;

  /// Throws DimensionError if encoder/decoder shapes disagree with the dims.
  void validate() const;
};

struct RndModel {
  MlpParams target;  // frozen
  MlpParams predictor;
  int state_dim = 0;
  int action_dim = 0;
  int embed_dim = 0;

  void validate() const;
};

struct BonusConfig {
  Kind kind = Kind::cvae;
  std::vector<int> hidden{750, 750};
  int latent_dim = 12;
  double eta = 0.5;
  int embed_dim = 32;
  double learning_rate = 1e-4;
  int batch_size = 100;
  int steps = 50000;
  std::uint64_t seed = 0;
  int log_every = 100;

  /// Two hidden layers of 64 and latent 4, for tests and single-core runs.
  static BonusConfig desk(Kind kind = Kind::cvae);
  void validate() const;
};

void to_json(nlohmann::json& j, const BonusConfig& c);
void from_json(const nlohmann::json& j, BonusConfig& c);
std::string fingerprint(const BonusConfig& c);

// log_sigma is clamped to this range inside the encoder head.
inline constexpr double kLogSigmaMin = -10.0;
inline constexpr double kLogSigmaMax = 4.0;

CvaeModel make_cvae(int state_dim, const Vector& action_low, const Vector& action_high,
                    const BonusConfig& config, Rng& rng);
RndModel make_rnd(int state_dim, int action_dim, const BonusConfig& config, Rng& rng);

struct CvaeLoss {
  double loss = 0.0;            // batch mean of recon + eta * kl
  double reconstruction = 0.0;  // batch mean
  double kl = 0.0;              // batch mean
  nn::MlpGrads encoder;
  nn::MlpGrads decoder;
};

/// Negative ELBO on a batch (columns are samples). `noise` is the latent_dim x B
/// reparameterization noise; it is held fixed so the loss is deterministic.
CvaeLoss cvae_elbo_loss(const CvaeModel& model, const Matrix& states, const Matrix& actions,
                        const Matrix& noise);

/// 0.5 * sum(sigma^2 + mu^2 - 1 - ln sigma^2), per column.
Vector gaussian_kl(const Matrix& mu, const Matrix& log_sigma);

/// Decoder applied to the encoder mean; action_dim x B.
Matrix cvae_reconstruct(const CvaeModel& model, const Matrix& states, const Matrix& actions);

Vector cvae_scores(const CvaeModel& model, const Matrix& states, const Matrix& actions);
Vector rnd_scores(const RndModel& model, const Matrix& states, const Matrix& actions);

/// d b(s_i, a_i) / d a_i, one column per sample.
Matrix cvae_action_gradient(const CvaeModel& model, const Matrix& states, const Matrix& actions);
Matrix rnd_action_gradient(const RndModel& model, const Matrix& states, const Matrix& actions);

struct RndLoss {
  double loss = 0.0;  // batch mean of ||f - f'||^2
  nn::MlpGrads predictor;
};
RndLoss rnd_loss(const RndModel& model, const Matrix& states, const Matrix& actions);

struct LossRecord {
  int step = 0;
  double loss = 0.0;
  double reconstruction = 0.0;
  double kl = 0.0;
};

/// Scoring interface shared by both kinds. Scores are only available once trained.
class BonusModel {
 public:
  BonusModel() = default;
  explicit BonusModel(CvaeModel m, bool trained = false);
  explicit BonusModel(RndModel m, bool trained = false);

  [[nodiscard]] Kind kind() const;
  [[nodiscard]] bool trained() const { return trained_; }
  void mark_trained() { trained_ = true; }
  [[nodiscard]] int state_dim() const;
  [[nodiscard]] int action_dim() const;

  [[nodiscard]] Vector score(const Matrix& states, const Matrix& actions) const;
  [[nodiscard]] double score_one(const Vector& state, const Vector& action) const;
  [[nodiscard]] Matrix action_gradient(const Matrix& states, const Matrix& actions) const;

  [[nodiscard]] const CvaeModel& cvae() const;
  [[nodiscard]] const RndModel& rnd() const;

  // Provenance written to the sidecar.
  std::string dataset_fingerprint;
  int training_steps = 0;
  std::uint64_t seed = 0;
  std::string config_fingerprint;  // FNV-1a of the training config JSON

 private:
  void require_trained() const;
  void check_batch(const Matrix& states, const Matrix& actions) const;

  std::variant<std::monostate, CvaeModel, RndModel> model_;
  bool trained_ = false;
};

struct TrainedBonus {
  BonusModel model;
  std::vector<LossRecord> history;  // one record per log_every steps, window-averaged
};

/// Throws ParameterError on an empty dataset or a batch larger than the data;
/// NonFiniteError if the loss diverges.
TrainedBonus train_cvae(const env::Dataset& data, const env::Environment& env, const BonusConfig& config);
TrainedBonus train_rnd(const env::Dataset& data, const BonusConfig& config);
TrainedBonus train_bonus(const env::Dataset& data, const env::Environment& env, const BonusConfig& config);

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& history);

/// Networks go to `path` in checkpoint format, the JSON sidecar to `path` + ".json".
void save_bonus(const std::filesystem::path& path, const BonusModel& model);
BonusModel load_bonus(const std::filesystem::path& path);
std::filesystem::path sidecar_path(const std::filesystem::path& path);

}  // namespace axrl::bonus
