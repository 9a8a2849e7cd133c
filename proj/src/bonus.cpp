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

#include "axrl/bonus.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "axrl/errors.hpp"
#include "axrl/io.hpp"

namespace axrl::bonus {

using nn::Activation;

namespace {

Matrix stack(const Matrix& top, const Matrix& bottom) {
  if (top.cols() != bottom.cols()) throw DimensionError("batch sizes differ between states and actions");
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

std::vector<Activation> hidden_then(std::size_t n_hidden, Activation hidden, Activation last) {
  std::vector<Activation> acts(n_hidden, hidden);
  acts.push_back(last);
  return acts;
}

std::vector<int> sizes(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> s{in};
  s.insert(s.end(), hidden.begin(), hidden.end());
  s.push_back(out);
  return s;
}

Vector half_range(const CvaeModel& m) { return 0.5 * (m.action_high - m.action_low); }
Vector midpoint(const CvaeModel& m) { return 0.5 * (m.action_high + m.action_low); }

struct EncoderOut {
  Matrix mu;
  Matrix log_sigma;
  Matrix raw_log_sigma;  // before clamping, to mask gradients
};

EncoderOut encode(const CvaeModel& m, const Matrix& states, const Matrix& actions, nn::ForwardCache* cache) {
  const Matrix out = nn::forward(m.encoder, stack(states, actions), cache);
  EncoderOut e;
  e.mu = out.topRows(m.latent_dim);
  e.raw_log_sigma = out.bottomRows(m.latent_dim);
  e.log_sigma = e.raw_log_sigma.cwiseMax(kLogSigmaMin).cwiseMin(kLogSigmaMax);
  return e;
}

Matrix scale_action(const CvaeModel& m, const Matrix& unit) {
  return (half_range(m).asDiagonal() * unit).colwise() + midpoint(m);
}

Matrix clamp_mask(const Matrix& raw) {
  return raw.unaryExpr([](double v) { return (v >= kLogSigmaMin && v <= kLogSigmaMax) ? 1.0 : 0.0; });
}

void check_state_action(int state_dim, int action_dim, const Matrix& states, const Matrix& actions) {
  if (states.rows() != state_dim || actions.rows() != action_dim) {
    throw DimensionError("bonus model expects state dim " + std::to_string(state_dim) + " and action dim " +
                         std::to_string(action_dim) + ", got " + std::to_string(states.rows()) + " and " +
                         std::to_string(actions.rows()));
  }
  if (states.cols() != actions.cols()) throw DimensionError("batch sizes differ between states and actions");
}

std::vector<std::size_t> sample_indices(std::size_t n, int batch, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> idx(static_cast<std::size_t>(batch));
  for (auto& i : idx) i = pick(rng);
  return idx;
}

void check_training_inputs(const env::Dataset& data, const BonusConfig& config) {
  config.validate();
  if (data.size() == 0) throw ParameterError("cannot train a bonus model on an empty dataset");
}

struct WindowLog {
  explicit WindowLog(int every_steps) : every(every_steps) {}
  int every;
  LossRecord sum;
  int count = 0;
  std::vector<LossRecord> out;

  void add(int step, double loss, double recon, double kl) {
    sum.loss += loss;
    sum.reconstruction += recon;
    sum.kl += kl;
    if (++count == every) {
      out.push_back({step, sum.loss / count, sum.reconstruction / count, sum.kl / count});
      sum = {};
      count = 0;
    }
  }
};

}  // namespace

std::string_view to_string(Kind k) { return k == Kind::cvae ? "cvae" : "rnd"; }

Kind kind_from_string(std::string_view name) {
  if (name == "cvae") return Kind::cvae;
  if (name == "rnd") return Kind::rnd;
  throw ParameterError("unknown bonus model '" + std::string(name) + "' (valid: cvae, rnd)");
}

void CvaeModel::validate() const {
  encoder.validate();
  decoder.validate();
  if (latent_dim <= 0) throw DimensionError("latent_dim must be positive");
  if (encoder.input_dim() != state_dim + action_dim || encoder.output_dim() != 2 * latent_dim) {
    throw DimensionError("encoder must map state+action to 2 * latent_dim");
  }
  if (decoder.input_dim() != state_dim + latent_dim || decoder.output_dim() != action_dim) {
    throw DimensionError("decoder must map state+latent to action_dim");
  }
  if (action_low.size() != action_dim || action_high.size() != action_dim) {
    throw DimensionError("action bounds do not match action_dim");
  }
  if (!(eta > 0.0)) throw ParameterError("eta must be positive");
}

void RndModel::validate() const {
  target.validate();
  predictor.validate();
  if (target.input_dim() != state_dim + action_dim || predictor.input_dim() != state_dim + action_dim) {
    throw DimensionError("RND networks must take state+action");
  }
  if (target.output_dim() != embed_dim || predictor.output_dim() != embed_dim) {
    throw DimensionError("RND networks must output embed_dim");
  }
}

BonusConfig BonusConfig::desk(Kind kind) {
  BonusConfig c;
  c.kind = kind;
  c.hidden = {64, 64};
  c.latent_dim = 4;
  c.learning_rate = 1e-3;
  c.steps = 10000;
  return c;
}

void BonusConfig::validate() const {
  if (hidden.empty()) throw ParameterError("bonus networks need at least one hidden layer");
  for (int h : hidden)
    if (h <= 0) throw ParameterError("hidden sizes must be positive");
  if (latent_dim <= 0) throw ParameterError("latent_dim must be positive");
  if (embed_dim <= 0) throw ParameterError("embed_dim must be positive");
  if (!(eta > 0.0)) throw ParameterError("eta must be positive");
  if (!(learning_rate > 0.0)) throw ParameterError("learning_rate must be positive");
  if (batch_size <= 0) throw ParameterError("batch_size must be positive");
  if (steps < 0) throw ParameterError("steps must be nonnegative");
  if (log_every <= 0) throw ParameterError("log_every must be positive");
}

void to_json(nlohmann::json& j, const BonusConfig& c) {
  j = {{"kind", to_string(c.kind)}, {"hidden", c.hidden},         {"latent_dim", c.latent_dim},
       {"eta", c.eta},              {"embed_dim", c.embed_dim},   {"learning_rate", c.learning_rate},
       {"batch_size", c.batch_size}, {"steps", c.steps},          {"seed", c.seed},
       {"log_every", c.log_every}};
}

void from_json(const nlohmann::json& j, BonusConfig& c) {
  if (j.contains("kind")) c.kind = kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("hidden")) c.hidden = j.at("hidden").get<std::vector<int>>();
  if (j.contains("latent_dim")) c.latent_dim = j.at("latent_dim").get<int>();
  if (j.contains("eta")) c.eta = j.at("eta").get<double>();
  if (j.contains("embed_dim")) c.embed_dim = j.at("embed_dim").get<int>();
  if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
  if (j.contains("steps")) c.steps = j.at("steps").get<int>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("log_every")) c.log_every = j.at("log_every").get<int>();
}

std::string fingerprint(const BonusConfig& c) { return io::hex64(io::fnv1a(nlohmann::json(c).dump())); }

CvaeModel make_cvae(int state_dim, const Vector& action_low, const Vector& action_high, const BonusConfig& config,
                    Rng& rng) {
  config.validate();
  CvaeModel m;
  m.state_dim = state_dim;
  m.action_dim = static_cast<int>(action_low.size());
  m.latent_dim = config.latent_dim;
  m.eta = config.eta;
  m.action_low = action_low;
  m.action_high = action_high;
  m.encoder = nn::make_mlp(sizes(state_dim + m.action_dim, config.hidden, 2 * m.latent_dim),
                           hidden_then(config.hidden.size(), Activation::relu, Activation::identity), rng);
  m.decoder = nn::make_mlp(sizes(state_dim + m.latent_dim, config.hidden, m.action_dim),
                           hidden_then(config.hidden.size(), Activation::relu, Activation::tanh), rng);
  m.validate();
  return m;
}

RndModel make_rnd(int state_dim, int action_dim, const BonusConfig& config, Rng& rng) {
  config.validate();
  RndModel m;
  m.state_dim = state_dim;
  m.action_dim = action_dim;
  m.embed_dim = config.embed_dim;
  const int in = state_dim + action_dim;
  m.target = nn::make_mlp(sizes(in, config.hidden, m.embed_dim),
                          hidden_then(config.hidden.size(), Activation::relu, Activation::identity), rng);
  auto deeper = config.hidden;
  deeper.push_back(config.hidden.back());
  m.predictor = nn::make_mlp(sizes(in, deeper, m.embed_dim),
                             hidden_then(deeper.size(), Activation::relu, Activation::identity), rng);
  m.validate();
  return m;
}

Vector gaussian_kl(const Matrix& mu, const Matrix& log_sigma) {
  const Matrix var = (2.0 * log_sigma).array().exp().matrix();
  return 0.5 * (var.array() + mu.array().square() - 1.0 - 2.0 * log_sigma.array()).colwise().sum().transpose();
}

CvaeLoss cvae_elbo_loss(const CvaeModel& model, const Matrix& states, const Matrix& actions, const Matrix& noise) {
  check_state_action(model.state_dim, model.action_dim, states, actions);
  if (noise.rows() != model.latent_dim || noise.cols() != states.cols()) {
    throw DimensionError("noise must be latent_dim x batch");
  }
  const double batch = static_cast<double>(states.cols());

  nn::ForwardCache enc_cache, dec_cache;
  const EncoderOut e = encode(model, states, actions, &enc_cache);
  const Matrix sigma = e.log_sigma.array().exp().matrix();
  const Matrix z = e.mu + sigma.cwiseProduct(noise);
  const Matrix unit = nn::forward(model.decoder, stack(states, z), &dec_cache);
  const Matrix diff = scale_action(model, unit) - actions;

  const Vector recon = diff.colwise().squaredNorm().transpose();
  const Vector kl = gaussian_kl(e.mu, e.log_sigma);

  CvaeLoss out;
  out.reconstruction = recon.mean();
  out.kl = kl.mean();
  out.loss = out.reconstruction + model.eta * out.kl;
  if (!std::isfinite(out.loss)) throw NonFiniteError("CVAE loss is not finite");

  const Matrix d_unit = half_range(model).asDiagonal() * (2.0 / batch * diff);
  auto dec = nn::backward(model.decoder, dec_cache, d_unit);
  const Matrix dz = dec.input.bottomRows(model.latent_dim);

  Matrix d_mu = dz + (model.eta / batch) * e.mu;
  Matrix d_log_sigma = dz.cwiseProduct(sigma).cwiseProduct(noise) +
                       (model.eta / batch) * (sigma.cwiseProduct(sigma).array() - 1.0).matrix();
  d_log_sigma = d_log_sigma.cwiseProduct(clamp_mask(e.raw_log_sigma));

  auto enc = nn::backward(model.encoder, enc_cache, stack(d_mu, d_log_sigma));
  out.encoder = std::move(enc.params);
  out.decoder = std::move(dec.params);
  return out;
}

Matrix cvae_reconstruct(const CvaeModel& model, const Matrix& states, const Matrix& actions) {
  check_state_action(model.state_dim, model.action_dim, states, actions);
  const EncoderOut e = encode(model, states, actions, nullptr);
  return scale_action(model, nn::forward(model.decoder, stack(states, e.mu)));
}

Vector cvae_scores(const CvaeModel& model, const Matrix& states, const Matrix& actions) {
  return (actions - cvae_reconstruct(model, states, actions)).colwise().squaredNorm().transpose();
}

Matrix cvae_action_gradient(const CvaeModel& model, const Matrix& states, const Matrix& actions) {
  check_state_action(model.state_dim, model.action_dim, states, actions);
  nn::ForwardCache enc_cache, dec_cache;
  const EncoderOut e = encode(model, states, actions, &enc_cache);
  const Matrix unit = nn::forward(model.decoder, stack(states, e.mu), &dec_cache);
  const Matrix residual = actions - scale_action(model, unit);

  // b = ||a - a_hat||^2; a reaches a_hat through the encoder mean.
  const Matrix d_unit = half_range(model).asDiagonal() * (-2.0 * residual);
  const Matrix dz = nn::backward(model.decoder, dec_cache, d_unit).input.bottomRows(model.latent_dim);
  const Matrix enc_grad = stack(dz, Matrix::Zero(model.latent_dim, dz.cols()));
  const Matrix d_in = nn::backward(model.encoder, enc_cache, enc_grad).input;
  return 2.0 * residual + d_in.bottomRows(model.action_dim);
}

Vector rnd_scores(const RndModel& model, const Matrix& states, const Matrix& actions) {
  check_state_action(model.state_dim, model.action_dim, states, actions);
  const Matrix in = stack(states, actions);
  return (nn::forward(model.predictor, in) - nn::forward(model.target, in)).colwise().squaredNorm().transpose();
}

Matrix rnd_action_gradient(const RndModel& model, const Matrix& states, const Matrix& actions) {
  check_state_action(model.state_dim, model.action_dim, states, actions);
  const Matrix in = stack(states, actions);
  nn::ForwardCache pc, tc;
  const Matrix diff = nn::forward(model.predictor, in, &pc) - nn::forward(model.target, in, &tc);
  const Matrix dp = nn::backward(model.predictor, pc, 2.0 * diff).input;
  const Matrix dt = nn::backward(model.target, tc, -2.0 * diff).input;
  return (dp + dt).bottomRows(model.action_dim);
}

RndLoss rnd_loss(const RndModel& model, const Matrix& states, const Matrix& actions) {
  check_state_action(model.state_dim, model.action_dim, states, actions);
  const Matrix in = stack(states, actions);
  nn::ForwardCache pc;
  const Matrix diff = nn::forward(model.predictor, in, &pc) - nn::forward(model.target, in);
  const double batch = static_cast<double>(in.cols());
  RndLoss out;
  out.loss = diff.colwise().squaredNorm().mean();
  if (!std::isfinite(out.loss)) throw NonFiniteError("RND loss is not finite");
  out.predictor = nn::backward(model.predictor, pc, (2.0 / batch) * diff).params;
  return out;
}

BonusModel::BonusModel(CvaeModel m, bool trained) : model_(std::move(m)), trained_(trained) {
  std::get<CvaeModel>(model_).validate();
}

BonusModel::BonusModel(RndModel m, bool trained) : model_(std::move(m)), trained_(trained) {
  std::get<RndModel>(model_).validate();
}

Kind BonusModel::kind() const {
  if (std::holds_alternative<CvaeModel>(model_)) return Kind::cvae;
  if (std::holds_alternative<RndModel>(model_)) return Kind::rnd;
  throw UntrainedModelError("empty bonus model");
}

int BonusModel::state_dim() const { return kind() == Kind::cvae ? cvae().state_dim : rnd().state_dim; }
int BonusModel::action_dim() const { return kind() == Kind::cvae ? cvae().action_dim : rnd().action_dim; }

const CvaeModel& BonusModel::cvae() const {
  if (const auto* m = std::get_if<CvaeModel>(&model_)) return *m;
  throw ParameterError("bonus model is not a CVAE");
}

const RndModel& BonusModel::rnd() const {
  if (const auto* m = std::get_if<RndModel>(&model_)) return *m;
  throw ParameterError("bonus model is not RND");
}

void BonusModel::require_trained() const {
  if (std::holds_alternative<std::monostate>(model_)) throw UntrainedModelError("empty bonus model");
  if (!trained_) throw UntrainedModelError("bonus model has not been trained");
}

void BonusModel::check_batch(const Matrix& states, const Matrix& actions) const {
  require_trained();
  if (!states.allFinite() || !actions.allFinite()) throw NonFiniteError("non-finite input to bonus model");
}

Vector BonusModel::score(const Matrix& states, const Matrix& actions) const {
  check_batch(states, actions);
  return kind() == Kind::cvae ? cvae_scores(cvae(), states, actions) : rnd_scores(rnd(), states, actions);
}

double BonusModel::score_one(const Vector& state, const Vector& action) const {
  return score(Matrix(state), Matrix(action))(0);
}

Matrix BonusModel::action_gradient(const Matrix& states, const Matrix& actions) const {
  check_batch(states, actions);
  return kind() == Kind::cvae ? cvae_action_gradient(cvae(), states, actions)
                              : rnd_action_gradient(rnd(), states, actions);
}

TrainedBonus train_cvae(const env::Dataset& data, const env::Environment& env, const BonusConfig& config) {
  check_training_inputs(data, config);
  if (data.state_dim() != env.state_dim || data.action_dim() != env.action_dim) {
    throw DimensionError("dataset dimensions do not match environment " + env.name);
  }
  Rng rng(config.seed);
  CvaeModel m = make_cvae(env.state_dim, env.action_low, env.action_high, config, rng);
  auto enc_opt = nn::make_adam(m.encoder, config.learning_rate);
  auto dec_opt = nn::make_adam(m.decoder, config.learning_rate);
  const Matrix states = data.all_states();
  const Matrix actions = data.all_actions();

  WindowLog log(config.log_every);
  for (int step = 1; step <= config.steps; ++step) {
    const auto idx = sample_indices(data.size(), config.batch_size, rng);
    const Matrix noise = nn::standard_normal(m.latent_dim, config.batch_size, rng);
    const CvaeLoss l = cvae_elbo_loss(m, states(Eigen::all, idx), actions(Eigen::all, idx), noise);
    nn::adam_step(m.encoder, l.encoder, enc_opt);
    nn::adam_step(m.decoder, l.decoder, dec_opt);
    log.add(step, l.loss, l.reconstruction, l.kl);
  }
  TrainedBonus out{BonusModel(std::move(m), true), std::move(log.out)};
  out.model.dataset_fingerprint = data.metadata.fingerprint;
  out.model.training_steps = config.steps;
  out.model.seed = config.seed;
  out.model.config_fingerprint = fingerprint(config);
  return out;
}

TrainedBonus train_rnd(const env::Dataset& data, const BonusConfig& config) {
  check_training_inputs(data, config);
  Rng rng(config.seed);
  RndModel m = make_rnd(data.state_dim(), data.action_dim(), config, rng);
  auto opt = nn::make_adam(m.predictor, config.learning_rate);
  const Matrix states = data.all_states();
  const Matrix actions = data.all_actions();

  WindowLog log(config.log_every);
  for (int step = 1; step <= config.steps; ++step) {
    const auto idx = sample_indices(data.size(), config.batch_size, rng);
    const RndLoss l = rnd_loss(m, states(Eigen::all, idx), actions(Eigen::all, idx));
    nn::adam_step(m.predictor, l.predictor, opt);
    log.add(step, l.loss, l.loss, 0.0);
  }
  TrainedBonus out{BonusModel(std::move(m), true), std::move(log.out)};
  out.model.dataset_fingerprint = data.metadata.fingerprint;
  out.model.training_steps = config.steps;
  out.model.seed = config.seed;
  out.model.config_fingerprint = fingerprint(config);
  return out;
}

TrainedBonus train_bonus(const env::Dataset& data, const env::Environment& env, const BonusConfig& config) {
  return config.kind == Kind::cvae ? train_cvae(data, env, config) : train_rnd(data, config);
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& history) {
  io::write_atomic(path, [&](std::ostream& out) {
    out.precision(17);
    out << "step,loss,reconstruction,kl\n";
    for (const auto& r : history) out << r.step << ',' << r.loss << ',' << r.reconstruction << ',' << r.kl << '\n';
  });
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".json";
  return p;
}

void save_bonus(const std::filesystem::path& path, const BonusModel& model) {
  nlohmann::json side{{"kind", to_string(model.kind())},
                      {"trained", model.trained()},
                      {"dataset_fingerprint", model.dataset_fingerprint},
                      {"training_steps", model.training_steps},
                      {"seed", model.seed},
                      {"config_fingerprint", model.config_fingerprint},
                      {"state_dim", model.state_dim()},
                      {"action_dim", model.action_dim()}};
  std::vector<MlpParams> nets;
  if (model.kind() == Kind::cvae) {
    const auto& m = model.cvae();
    side["latent_dim"] = m.latent_dim;
    side["eta"] = m.eta;
    side["action_low"] = std::vector<double>(m.action_low.begin(), m.action_low.end());
    side["action_high"] = std::vector<double>(m.action_high.begin(), m.action_high.end());
    nets = {m.encoder, m.decoder};
  } else {
    const auto& m = model.rnd();
    side["embed_dim"] = m.embed_dim;
    nets = {m.target, m.predictor};
  }
  nn::save_checkpoint(path, nets);
  io::write_atomic(sidecar_path(path), [&](std::ostream& out) { out << side.dump(2) << '\n'; });
}

BonusModel load_bonus(const std::filesystem::path& path) {
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(io::read_text(sidecar_path(path)));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad bonus sidecar " + sidecar_path(path).string() + ": " + e.what());
  }
  auto nets = nn::load_checkpoint(path);
  if (nets.size() != 2) throw FormatError("bonus checkpoint must hold two networks");
  try {
    const Kind kind = kind_from_string(side.at("kind").get<std::string>());
    const bool trained = side.at("trained").get<bool>();
    BonusModel model;
    if (kind == Kind::cvae) {
      CvaeModel m;
      m.encoder = std::move(nets[0]);
      m.decoder = std::move(nets[1]);
      m.state_dim = side.at("state_dim").get<int>();
      m.action_dim = side.at("action_dim").get<int>();
      m.latent_dim = side.at("latent_dim").get<int>();
      m.eta = side.at("eta").get<double>();
      const auto lo = side.at("action_low").get<std::vector<double>>();
      const auto hi = side.at("action_high").get<std::vector<double>>();
      m.action_low = Eigen::Map<const Vector>(lo.data(), static_cast<Eigen::Index>(lo.size()));
      m.action_high = Eigen::Map<const Vector>(hi.data(), static_cast<Eigen::Index>(hi.size()));
      model = BonusModel(std::move(m), trained);
    } else {
      RndModel m;
      m.target = std::move(nets[0]);
      m.predictor = std::move(nets[1]);
      m.state_dim = side.at("state_dim").get<int>();
      m.action_dim = side.at("action_dim").get<int>();
      m.embed_dim = side.at("embed_dim").get<int>();
      model = BonusModel(std::move(m), trained);
    }
    model.dataset_fingerprint = side.at("dataset_fingerprint").get<std::string>();
    model.training_steps = side.at("training_steps").get<int>();
    model.seed = side.value("seed", std::uint64_t{0});
    model.config_fingerprint = side.value("config_fingerprint", std::string());
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad bonus sidecar " + sidecar_path(path).string() + ": " + e.what());
  } catch (const DimensionError& e) {
    throw FormatError(std::string("bonus checkpoint does not match its sidecar: ") + e.what());
  }
}

}  // namespace axrl::bonus
