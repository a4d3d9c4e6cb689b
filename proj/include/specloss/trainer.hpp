// Copyright 2026 The specloss Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// AdamW training of the gain network on whole utterances, validation-based
// checkpoint selection and one-dimensional grid search over beta / lambda.

#ifndef SPECLOSS_TRAINER_HPP_
#define SPECLOSS_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "specloss/data.hpp"
#include "specloss/losses.hpp"
#include "specloss/model.hpp"
#include "specloss/spectral.hpp"

namespace specloss {

struct TrainConfig {
  double learning_rate = 1e-4;
  double weight_decay = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int epochs = 100;
  int validate_every = 10;
  int batch_size = 4;
  std::uint64_t seed = 1;
  LossSpec loss;
  std::string selection_metric = "si_sdr";  // or "sdr"
  ModelConfig model = ModelConfig::Tiny();
  int num_threads = 1;

  // Throws ConfigError.
  void Validate() const;
};

struct AdamWState {
  ModelParams first_moment;
  ModelParams second_moment;
  std::int64_t step = 0;

  static AdamWState For(const ModelParams& params);
};

// theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta).
// Throws TrainingError (and leaves everything untouched) if any gradient
// entry is not finite.
void AdamWStep(ModelParams& params, const ModelParams& grads, AdamWState& state,
               const TrainConfig& config);

// Spectrograms and features of one mixture, computed once before training.
struct TrainingExample {
  std::string id;
  ComplexSpectrogram noisy;
  ComplexSpectrogram speech;
  ComplexSpectrogram noise;
  Eigen::MatrixXd features;
};

TrainingExample PrepareExample(const MixtureExample& mixture, const StftConfig& stft = {});

struct UtteranceGradient {
  double loss = 0.0;
  ModelParams grads;
};

// Loss of one utterance and its gradient w.r.t. every parameter.
UtteranceGradient ComputeGradient(const ModelParams& params, const TrainingExample& example,
                                  const LossSpec& loss);

// Loss only (no backward pass).
double ComputeLoss(const ModelParams& params, const TrainingExample& example,
                   const LossSpec& loss);

// Mean SI-SDR or SDR of the enhanced validation set, in dB.
double ValidationMetric(const ModelParams& params, std::span<const MixtureExample> validation,
                        const std::string& metric, const StftConfig& stft = {});

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_metric;
};

struct TrainingLog {
  // Mean loss over the training set with the initial weights.
  double initial_train_loss = 0.0;
  std::vector<EpochRecord> epochs;

  void WriteCsv(std::ostream& out) const;
};

struct TrainResult {
  ModelParams best;
  ModelParams final_params;
  int best_epoch = 0;
  double best_metric = 0.0;
  TrainingLog log;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch AdamW over shuffled utterances. Validation runs every
// `validate_every` epochs and after the last epoch; the best-scoring
// weights are returned. Throws TrainingError when the loss turns non-finite.
TrainResult Train(std::span<const MixtureExample> train,
                  std::span<const MixtureExample> validation, const TrainConfig& config,
                  const StftConfig& stft = {}, const EpochCallback& on_epoch = {});

enum class SweepParameter { kBeta, kLambda };

std::optional<SweepParameter> ParseSweepParameter(const std::string& name);
std::string SweepParameterName(SweepParameter parameter);

struct SweepRow {
  double param_value = 0.0;
  double val_metric = 0.0;  // mean over seeds
  int best_epoch = 0;       // of the best-scoring seed
  std::vector<double> seed_metrics;
};

struct SweepResult {
  SweepParameter parameter = SweepParameter::kBeta;
  std::vector<SweepRow> rows;
  std::size_t best_index = 0;

  void WriteCsv(std::ostream& out) const;
};

// One full training per (value, seed); seeds are config.seed, config.seed+1,
// ... Throws UsageError on an empty value list or out-of-range value.
SweepResult GridSearch(SweepParameter parameter, std::span<const double> values,
                       std::span<const MixtureExample> train,
                       std::span<const MixtureExample> validation, const TrainConfig& config,
                       int num_seeds = 1, const StftConfig& stft = {});

}  // namespace specloss

#endif  // SPECLOSS_TRAINER_HPP_
