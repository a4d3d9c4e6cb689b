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

#include "specloss/features.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "specloss/errors.hpp"

namespace specloss {

Eigen::MatrixXd LogPower(const ComplexSpectrogram& spec, double eps) {
  if (!(eps > 0.0)) throw UsageError("log power eps must be positive");
  Eigen::MatrixXd out(spec.bins.rows(), spec.bins.cols());
  for (Eigen::Index n = 0; n < spec.bins.cols(); ++n) {
    for (Eigen::Index k = 0; k < spec.bins.rows(); ++k) {
      out(k, n) = std::log10(std::norm(spec.bins(k, n)) + eps);
    }
  }
  return out;
}

Eigen::VectorXd LogPower(const Eigen::VectorXcd& frame, double eps) {
  if (!(eps > 0.0)) throw UsageError("log power eps must be positive");
  Eigen::VectorXd out(frame.size());
  for (Eigen::Index k = 0; k < frame.size(); ++k) out[k] = std::log10(std::norm(frame[k]) + eps);
  return out;
}

Eigen::MatrixXd SelectNetBins(const Eigen::MatrixXd& full) {
  if (full.rows() < 3) {
    throw ConfigError("need at least 3 frequency bins to drop DC and Nyquist, got " +
                      std::to_string(full.rows()));
  }
  return full.middleRows(1, full.rows() - 2);
}

Eigen::MatrixXd ExpandGain(const Eigen::MatrixXd& net) {
  if (net.rows() < 1) throw UsageError("cannot expand an empty gain matrix");
  Eigen::MatrixXd full(net.rows() + 2, net.cols());
  full.middleRows(1, net.rows()) = net;
  full.row(0) = net.row(0);
  full.row(net.rows() + 1) = net.row(net.rows() - 1);
  return full;
}

OnlineNormalizer::OnlineNormalizer(int num_bins, double decay) : decay_(decay) {
  if (num_bins < 1) throw UsageError("normalizer needs at least one bin");
  if (!(decay > 0.0 && decay < 1.0)) throw UsageError("normalizer decay must lie in (0,1)");
  mean_ = Eigen::VectorXd::Zero(num_bins);
  var_ = Eigen::VectorXd::Ones(num_bins);
}

void OnlineNormalizer::Reset() {
  mean_.setZero();
  var_.setOnes();
  frame_count_ = 0;
}

Eigen::VectorXd OnlineNormalizer::Step(const Eigen::VectorXd& frame) {
  if (frame.size() != mean_.size()) {
    throw UsageError("normalizer expects " + std::to_string(mean_.size()) + " bins, got " +
                     std::to_string(frame.size()));
  }
  ++frame_count_;
  const double lambda = std::min(decay_, 1.0 - 1.0 / static_cast<double>(frame_count_));
  Eigen::VectorXd out(frame.size());
  for (Eigen::Index k = 0; k < frame.size(); ++k) {
    const double x = frame[k];
    const double old_mean = mean_[k];
    const double new_mean = lambda * old_mean + (1.0 - lambda) * x;
    // Weighted Welford update; with lambda = 1 - 1/n this is the exact
    // population variance of the frames so far.
    double v = lambda * var_[k] + (1.0 - lambda) * (x - old_mean) * (x - new_mean);
    v = std::max(v, kVarianceFloor);
    mean_[k] = new_mean;
    var_[k] = v;
    out[k] = (x - new_mean) / std::sqrt(v);
  }
  return out;
}

Eigen::MatrixXd OnlineNormalizer::Process(const Eigen::MatrixXd& frames) {
  Eigen::MatrixXd out(frames.rows(), frames.cols());
  for (Eigen::Index n = 0; n < frames.cols(); ++n) out.col(n) = Step(frames.col(n));
  return out;
}

Eigen::MatrixXd ComputeFeatures(const ComplexSpectrogram& spec, double decay) {
  const Eigen::MatrixXd net = SelectNetBins(LogPower(spec));
  OnlineNormalizer normalizer(static_cast<int>(net.rows()), decay);
  return normalizer.Process(net);
}

}  // namespace specloss
