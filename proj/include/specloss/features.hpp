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

// Network input features: log power spectrum, DC/Nyquist removal and causal
// per-bin mean/variance normalization.

#ifndef SPECLOSS_FEATURES_HPP_
#define SPECLOSS_FEATURES_HPP_

#include <Eigen/Core>

#include "specloss/spectral.hpp"

namespace specloss {

inline constexpr double kLogPowerEps = 1e-10;

// log10(|X|^2 + eps), element-wise. K_full x N.
Eigen::MatrixXd LogPower(const ComplexSpectrogram& spec, double eps = kLogPowerEps);
Eigen::VectorXd LogPower(const Eigen::VectorXcd& frame, double eps = kLogPowerEps);

// Drops the first (DC) and last (Nyquist) rows. Throws ConfigError for
// fewer than 3 rows.
Eigen::MatrixXd SelectNetBins(const Eigen::MatrixXd& full);

// Inverse of SelectNetBins for gains: the DC and Nyquist rows repeat their
// nearest interior neighbour.
Eigen::MatrixXd ExpandGain(const Eigen::MatrixXd& net);

// Exponential moving mean/variance with a ramped forgetting factor
//   lambda_n = min(decay, 1 - 1/n)      (n = frames seen, including this one)
// so the first frames reproduce the exact running mean and variance. Each
// frame is normalized with the statistics after it has been absorbed; frame n
// only ever sees frames <= n.
class OnlineNormalizer {
 public:
  static constexpr double kDefaultDecay = 0.996;
  static constexpr double kVarianceFloor = 1e-10;

  explicit OnlineNormalizer(int num_bins, double decay = kDefaultDecay);

  void Reset();
  Eigen::VectorXd Step(const Eigen::VectorXd& frame);
  // Column-by-column Step over a K x N matrix.
  Eigen::MatrixXd Process(const Eigen::MatrixXd& frames);

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& variance() const { return var_; }
  long frame_count() const { return frame_count_; }
  double decay() const { return decay_; }

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd var_;
  long frame_count_ = 0;
  double decay_;
};

// Log power -> net bins -> causal normalisation, for a whole utterance.
Eigen::MatrixXd ComputeFeatures(const ComplexSpectrogram& spec,
                                double decay = OnlineNormalizer::kDefaultDecay);

}  // namespace specloss

#endif  // SPECLOSS_FEATURES_HPP_
