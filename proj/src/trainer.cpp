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

#include "specloss/trainer.hpp"

#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <thread>

#include "specloss/errors.hpp"
#include "specloss/eval.hpp"
#include "specloss/features.hpp"

namespace specloss {

namespace {

using Eigen::MatrixXd;

// Gain-domain gradient over all K bins -> gradient over the K-2 network
// outputs. DC and Nyquist reuse the gains of their neighbours.
MatrixXd FoldGainGradient(const MatrixXd& full) {
  const Eigen::Index k = full.rows();
  MatrixXd net = full.middleRows(1, k - 2);
  net.row(0) += full.row(0);
  net.row(k - 3) += full.row(k - 1);
  return net;
}

LossResult Objective(const ModelParams& params, const TrainingExample& ex, const LossSpec& loss,
                     ForwardCache* cache) {
  const MatrixXd net = Forward(params, ex.features, cache);
  const MatrixXd gain = ExpandGain(net);
  const Eigen::MatrixXcd enhanced = ApplyGain(net, ex.noisy).bins;
  LossInputs in;
  in.enhanced = &enhanced;
  in.target = &ex.speech.bins;
  in.noisy = &ex.noisy.bins;
  in.noise = &ex.noise.bins;
  in.gain = &gain;
  return EvaluateGainObjective(loss, in);
}

// Fisher-Yates with an explicit modulo draw so the order does not depend on
// the standard library's distribution implementation.
void Shuffle(std::vector<std::size_t>& order, std::mt19937_64& rng) {
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
}

std::vector<UtteranceGradient> BatchGradients(const ModelParams& params,
                                              const std::vector<TrainingExample>& examples,
                                              std::span<const std::size_t> batch,
                                              const LossSpec& loss, int num_threads) {
  std::vector<UtteranceGradient> out(batch.size());
  const int workers = std::max(1, std::min<int>(num_threads, static_cast<int>(batch.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      out[i] = ComputeGradient(params, examples[batch[i]], loss);
    }
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  for (int t = 0; t < workers; ++t) {
    threads.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < batch.size(); i += workers) {
          out[i] = ComputeGradient(params, examples[batch[i]], loss);
        }
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace

void TrainConfig::Validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be positive");
  }
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (validate_every < 1) throw ConfigError("validate_every must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (num_threads < 1) throw ConfigError("num_threads must be at least 1");
  if (selection_metric != "si_sdr" && selection_metric != "sdr") {
    throw ConfigError("selection_metric must be si_sdr or sdr, got '" + selection_metric + "'");
  }
  model.Validate();
  loss.Validate();
}

AdamWState AdamWState::For(const ModelParams& params) {
  return AdamWState{ModelParams::Zeros(params.config()), ModelParams::Zeros(params.config()), 0};
}

void AdamWStep(ModelParams& params, const ModelParams& grads, AdamWState& state,
               const TrainConfig& config) {
  if (!grads.AllFinite()) throw TrainingError("gradient contains NaN or infinite values");
  auto p = params.Arrays();
  const auto g = grads.Arrays();
  auto m = state.first_moment.Arrays();
  auto v = state.second_moment.Arrays();
  if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size()) {
    throw UsageError("optimiser state does not match the model");
  }
  for (std::size_t a = 0; a < p.size(); ++a) {
    if (p[a].size != g[a].size || p[a].size != m[a].size || p[a].size != v[a].size) {
      throw UsageError("gradient shape mismatch in " + p[a].name);
    }
  }

  ++state.step;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const double lr = config.learning_rate;
  const double wd = config.weight_decay;
  for (std::size_t a = 0; a < p.size(); ++a) {
    for (std::size_t i = 0; i < p[a].size; ++i) {
      const double gi = g[a].data[i];
      double& mi = m[a].data[i];
      double& vi = v[a].data[i];
      mi = b1 * mi + (1.0 - b1) * gi;
      vi = b2 * vi + (1.0 - b2) * gi * gi;
      const double m_hat = mi / c1;
      const double v_hat = vi / c2;
      double& theta = p[a].data[i];
      theta -= lr * (m_hat / (std::sqrt(v_hat) + config.adam_eps) + wd * theta);
    }
  }
  params.Touch();
}

TrainingExample PrepareExample(const MixtureExample& mixture, const StftConfig& stft) {
  TrainingExample ex;
  ex.id = mixture.id;
  ex.noisy = Stft(mixture.noisy, stft);
  ex.speech = Stft(mixture.speech, stft);
  ex.noise = Stft(mixture.noise, stft);
  ex.features = ComputeFeatures(ex.noisy);
  return ex;
}

UtteranceGradient ComputeGradient(const ModelParams& params, const TrainingExample& example,
                                  const LossSpec& loss) {
  ForwardCache cache;
  const LossResult r = Objective(params, example, loss, &cache);
  return UtteranceGradient{r.value, Backward(params, cache, FoldGainGradient(r.gain_grad))};
}

double ComputeLoss(const ModelParams& params, const TrainingExample& example,
                   const LossSpec& loss) {
  return Objective(params, example, loss, nullptr).value;
}

double ValidationMetric(const ModelParams& params, std::span<const MixtureExample> validation,
                        const std::string& metric, const StftConfig& stft) {
  if (validation.empty()) throw UsageError("validation set is empty");
  double sum = 0.0;
  for (const MixtureExample& ex : validation) {
    const AudioBuffer out = Enhance(params, ex.noisy, stft).audio;
    if (metric == "si_sdr") {
      sum += SiSdr(out, ex.speech);
    } else if (metric == "sdr") {
      sum += SdrDb(out, ex.speech);
    } else {
      throw ConfigError("unknown selection metric '" + metric + "'");
    }
  }
  return sum / static_cast<double>(validation.size());
}

void TrainingLog::WriteCsv(std::ostream& out) const {
  out << "epoch,train_loss,val_metric\n";
  out << std::setprecision(10);
  for (const EpochRecord& r : epochs) {
    out << r.epoch << ',' << r.train_loss << ',';
    if (r.val_metric) out << *r.val_metric;
    out << '\n';
  }
}

TrainResult Train(std::span<const MixtureExample> train,
                  std::span<const MixtureExample> validation, const TrainConfig& config,
                  const StftConfig& stft, const EpochCallback& on_epoch) {
  config.Validate();
  if (train.empty()) throw UsageError("training set is empty");
  if (validation.empty()) throw UsageError("validation set is empty");
  if (config.model.input_bins != stft.num_bins() - 2 ||
      config.model.output_bins != stft.num_bins() - 2) {
    throw ConfigError("model expects " + std::to_string(config.model.input_bins) +
                      " bins but the STFT yields " + std::to_string(stft.num_bins() - 2));
  }

  std::vector<TrainingExample> examples;
  examples.reserve(train.size());
  for (const MixtureExample& m : train) examples.push_back(PrepareExample(m, stft));

  ModelConfig model = config.model;
  model.seed = config.seed;
  ModelParams params = ModelParams::Initialize(model);
  AdamWState opt = AdamWState::For(params);
  std::mt19937_64 rng(MixSeed(config.seed, 0x0D0Eull));

  TrainResult result;
  double initial = 0.0;
  for (const TrainingExample& ex : examples) initial += ComputeLoss(params, ex, config.loss);
  result.log.initial_train_loss = initial / static_cast<double>(examples.size());

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  bool have_best = false;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Shuffle(order, rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, end - start);
      const auto grads = BatchGradients(params, examples, batch, config.loss, config.num_threads);

      ModelParams total = ModelParams::Zeros(params.config());
      double batch_loss = 0.0;
      for (const UtteranceGradient& g : grads) {
        batch_loss += g.loss;
        total.AddScaled(g.grads, 1.0 / static_cast<double>(grads.size()));
      }
      if (!std::isfinite(batch_loss)) {
        throw TrainingError("training diverged at epoch " + std::to_string(epoch) +
                            ": loss is not finite");
      }
      loss_sum += batch_loss;
      try {
        AdamWStep(params, total, opt, config);
      } catch (const TrainingError& e) {
        throw TrainingError("training diverged at epoch " + std::to_string(epoch) + ": " +
                            e.what());
      }
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(examples.size());
    if (epoch % config.validate_every == 0 || epoch == config.epochs) {
      const double metric = ValidationMetric(params, validation, config.selection_metric, stft);
      record.val_metric = metric;
      if (!have_best || metric > result.best_metric) {
        result.best = params;
        result.best_metric = metric;
        result.best_epoch = epoch;
        have_best = true;
      }
    }
    result.log.epochs.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  result.final_params = std::move(params);
  return result;
}

std::optional<SweepParameter> ParseSweepParameter(const std::string& name) {
  if (name == "beta") return SweepParameter::kBeta;
  if (name == "lambda") return SweepParameter::kLambda;
  return std::nullopt;
}

std::string SweepParameterName(SweepParameter parameter) {
  return parameter == SweepParameter::kBeta ? "beta" : "lambda";
}

void SweepResult::WriteCsv(std::ostream& out) const {
  out << "param_value,val_metric,best_epoch\n";
  out << std::setprecision(10);
  for (const SweepRow& r : rows) {
    out << r.param_value << ',' << r.val_metric << ',' << r.best_epoch << '\n';
  }
}

SweepResult GridSearch(SweepParameter parameter, std::span<const double> values,
                       std::span<const MixtureExample> train,
                       std::span<const MixtureExample> validation, const TrainConfig& config,
                       int num_seeds, const StftConfig& stft) {
  if (values.empty()) throw UsageError("grid search needs at least one value");
  if (num_seeds < 1) throw UsageError("grid search needs at least one seed");
  if (parameter == SweepParameter::kBeta && !config.loss.partner) {
    throw UsageError("a beta sweep needs a magnitude/complex loss pair");
  }
  std::vector<TrainConfig> configs;
  for (double v : values) {
    TrainConfig c = config;
    (parameter == SweepParameter::kBeta ? c.loss.beta : c.loss.lambda) = v;
    c.loss.Validate();
    configs.push_back(std::move(c));
  }

  SweepResult result;
  result.parameter = parameter;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    SweepRow row;
    row.param_value = values[i];
    double best_seed_metric = 0.0;
    for (int s = 0; s < num_seeds; ++s) {
      TrainConfig c = configs[i];
      c.seed = config.seed + static_cast<std::uint64_t>(s);
      const TrainResult r = Train(train, validation, c, stft);
      row.seed_metrics.push_back(r.best_metric);
      if (s == 0 || r.best_metric > best_seed_metric) {
        best_seed_metric = r.best_metric;
        row.best_epoch = r.best_epoch;
      }
    }
    row.val_metric = std::accumulate(row.seed_metrics.begin(), row.seed_metrics.end(), 0.0) /
                     static_cast<double>(num_seeds);
    if (result.rows.empty() || row.val_metric > result.rows[result.best_index].val_metric) {
      result.best_index = result.rows.size();
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

}  // namespace specloss
