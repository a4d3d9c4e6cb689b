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

// Causal gain-estimation network:
//
//   features -> Dense+ReLU (embedding) -> GRU x L -> Dense+ReLU x M
//            -> Dense+Sigmoid -> per-bin suppression gains in (0,1)
//
// Batch forward/backward for training (full-sequence BPTT) and a frame-by-
// frame engine that runs the whole STFT -> features -> network -> ISTFT
// chain with one frame shift of algorithmic latency.

#ifndef SPECLOSS_MODEL_HPP_
#define SPECLOSS_MODEL_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "specloss/features.hpp"
#include "specloss/spectral.hpp"

namespace specloss {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ModelConfig {
  int input_bins = 255;
  int embed_size = 32;
  int gru_size = 32;
  int gru_layers = 2;
  std::vector<int> hidden_sizes = {48, 48};  // ReLU layers after the GRUs
  int output_bins = 255;
  std::uint64_t seed = 1;

  // Desk-scale preset used by tests and the overfit experiments.
  static ModelConfig Tiny();
  // 400/400x2/600/600/255: 2,779,255 parameters.
  static ModelConfig PaperSize();
  // "tiny" or "paper"; throws ConfigError otherwise.
  static ModelConfig FromPreset(const std::string& name);

  void Validate() const;
  bool operator==(const ModelConfig& other) const;
};

struct DenseLayer {
  RowMatrix weight;  // out x in
  Eigen::VectorXd bias;
};

// Gate blocks are stacked [update; reset; candidate] along the rows.
struct GruLayer {
  RowMatrix input_weight;      // 3H x I
  RowMatrix recurrent_weight;  // 3H x H
  Eigen::VectorXd bias;        // 3H

  int hidden_size() const { return static_cast<int>(bias.size() / 3); }
};

struct ParamArray {
  std::string name;
  std::vector<int> dims;  // row-major
  double* data;
  std::size_t size;
};

struct ConstParamArray {
  std::string name;
  std::vector<int> dims;
  const double* data;
  std::size_t size;
};

class ModelParams {
 public:
  ModelParams() = default;

  // uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every array, seeded.
  static ModelParams Initialize(const ModelConfig& config);
  static ModelParams Zeros(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  std::size_t ParameterCount() const;

  // Fixed order: embed, gru0..gruL-1, hidden0..hiddenM-1, output.
  std::vector<ParamArray> Arrays();
  std::vector<ConstParamArray> Arrays() const;

  // Bumped whenever the weights change through an optimiser; forward caches
  // remember the generation they were computed with.
  std::uint64_t generation() const { return generation_; }
  void Touch() { ++generation_; }

  bool AllFinite() const;
  void SetZero();
  // this += scale * other (shapes must agree).
  void AddScaled(const ModelParams& other, double scale);

  DenseLayer embed;
  std::vector<GruLayer> gru;
  std::vector<DenseLayer> hidden;
  DenseLayer output;

 private:
  explicit ModelParams(const ModelConfig& config);

  ModelConfig config_;
  std::uint64_t generation_ = 0;
};

// h = (1 - z) * h_prev + z * tanh(W_h x + U_h (r * h_prev) + b_h)
Eigen::VectorXd GruCell(const GruLayer& layer, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& h_prev);

struct GruCache {
  Eigen::MatrixXd input;      // I x N
  Eigen::MatrixXd update;     // z
  Eigen::MatrixXd reset;      // r
  Eigen::MatrixXd candidate;  // h~
  Eigen::MatrixXd prev;       // h_{n-1}
  Eigen::MatrixXd output;     // h_n
};

struct ForwardCache {
  const ModelParams* params = nullptr;
  std::uint64_t generation = 0;
  Eigen::MatrixXd features;
  Eigen::MatrixXd embed_pre;
  Eigen::MatrixXd embed_out;
  std::vector<GruCache> gru;
  std::vector<Eigen::MatrixXd> hidden_pre;
  std::vector<Eigen::MatrixXd> hidden_out;
  Eigen::MatrixXd gains;
};

// Gains (output_bins x N) for a feature sequence (input_bins x N), starting
// from zero recurrent state. Throws UsageError on NaN input or shape error.
Eigen::MatrixXd Forward(const ModelParams& params, const Eigen::MatrixXd& features,
                        ForwardCache* cache = nullptr);

// Gradient of a scalar loss w.r.t. every parameter, given dL/dgains.
ModelParams Backward(const ModelParams& params, const ForwardCache& cache,
                     const Eigen::MatrixXd& grad_gains);

// One frame of inference; `state` holds one vector per GRU layer and is
// initialised to zeros when empty.
Eigen::VectorXd ForwardStep(const ModelParams& params, const Eigen::VectorXd& features,
                            std::vector<Eigen::VectorXd>& state);

// Ŝ = G X on bins 1..K-2; DC and Nyquist take the gain of bins 1 and K-2.
ComplexSpectrogram ApplyGain(const Eigen::MatrixXd& net_gains, const ComplexSpectrogram& noisy);

struct Enhancement {
  Eigen::MatrixXd net_gains;  // K_net x N
  ComplexSpectrogram enhanced;
  AudioBuffer audio;
};

// Offline STFT -> features -> network -> gain -> ISTFT.
Enhancement Enhance(const ModelParams& params, const AudioBuffer& noisy,
                    const StftConfig& stft = {});

// Frame-by-frame engine. Output of Step k holds the input samples of
// chunk k-1, enhanced.
class StreamingEnhancer {
 public:
  explicit StreamingEnhancer(const ModelParams& params, const StftConfig& stft = {});

  int chunk_size() const { return stft_config_.frame_shift; }
  void Reset();
  std::vector<double> Step(std::span<const double> chunk);

 private:
  const ModelParams* params_;
  StftConfig stft_config_;
  StreamingStft analysis_;
  OnlineNormalizer normalizer_;
  std::vector<Eigen::VectorXd> state_;
  StreamingIstft synthesis_;
};

// Runs a whole buffer through StreamingEnhancer and removes the one-chunk
// delay, so the result lines up with Enhance(...).audio.
AudioBuffer EnhanceStreaming(const ModelParams& params, const AudioBuffer& noisy,
                             const StftConfig& stft = {});

}  // namespace specloss

#endif  // SPECLOSS_MODEL_HPP_
