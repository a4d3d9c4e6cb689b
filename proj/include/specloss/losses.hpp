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

// Spectral training losses with analytic gradients.
//
// Every loss averages over all K x N bins of one utterance. Gradients of
// spectrum-domain losses are returned as dL/dRe{S_hat} + j dL/dIm{S_hat};
// the speech-distortion-weighted loss differentiates with respect to the
// real gain G instead.
//
// Magnitudes are clamped to `clamp_floor` before logs, divisions and
// fractional powers. Bins whose enhanced magnitude sits below the floor
// contribute to the value but not to the gradient. The phase of an exactly
// zero bin is taken as 0 (std::arg convention).

#ifndef SPECLOSS_LOSSES_HPP_
#define SPECLOSS_LOSSES_HPP_

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace specloss {

enum class LossKind {
  kMagMse,
  kCMse,
  kMagMae,
  kCMae,
  kLsd,
  kPlsd,
  kWLsd,
  kWPlsd,
  kMagComp,
  kCComp,
  kSnr,
  kSdr,
  kMagCorr,
  kCCorr,
  kSdw,
  kWeightedMse,
  kWeightedCMse,
};

std::span<const LossKind> AllLossKinds();
std::string_view LossName(LossKind kind);
// Case-insensitive lookup of the names returned by LossName.
std::optional<LossKind> ParseLossKind(std::string_view name);
// Comma separated list of every loss name, for diagnostics.
std::string LossNameList();

// Bin-additive distances: zero, with zero gradient, at S_hat == S.
bool IsDistanceLoss(LossKind kind);
// True for losses that see the phase of S_hat.
bool IsPhaseAware(LossKind kind);
// The other member of the loss's magnitude/complex pair, if it has one.
std::optional<LossKind> PairedLoss(LossKind kind);

enum class SpectralDomain { kMagnitude, kComplex };
enum class LogVariant { kLsd, kPlsd };
enum class GradientDomain { kSpectrum, kGain };

// Nonnegative, finite per-bin weights.
class WeightMatrix {
 public:
  // Throws UsageError on negative or non-finite entries.
  explicit WeightMatrix(Eigen::MatrixXd weights);
  static WeightMatrix Uniform(Eigen::Index rows, Eigen::Index cols);

  const Eigen::MatrixXd& values() const { return weights_; }
  Eigen::Index rows() const { return weights_.rows(); }
  Eigen::Index cols() const { return weights_.cols(); }

 private:
  Eigen::MatrixXd weights_;
};

struct LossResult {
  double value = 0.0;
  GradientDomain domain = GradientDomain::kSpectrum;
  Eigen::MatrixXcd spectrum_grad;  // set when domain == kSpectrum
  Eigen::MatrixXd gain_grad;       // set when domain == kGain
};

struct LossSpec {
  static constexpr double kDefaultCompression = 0.3;
  static constexpr double kDefaultGamma = 0.1;
  static constexpr double kDefaultClampFloor = 1e-7;

  LossKind kind = LossKind::kMagMse;
  // When set, the objective is (1 - beta) * kind + beta * partner.
  std::optional<LossKind> partner;
  double beta = 0.0;
  double lambda = 0.5;
  double compression = kDefaultCompression;
  double gamma = kDefaultGamma;
  double clamp_floor = kDefaultClampFloor;

  // Throws UsageError for out-of-range parameters.
  void Validate() const;
  std::string Describe() const;
};

// Non-owning views of everything a loss may need. `enhanced` and `target`
// are always required; the rest depend on the kind:
//   noisy   - wLSD/wPLSD weighting
//   noise   - SDW
//   gain    - SDW (full K x N grid)
//   weights - weightedMSE/weightedCMSE (uniform when absent); for wLSD/wPLSD
//             it overrides the computed weight (used to freeze it).
struct LossInputs {
  const Eigen::MatrixXcd* enhanced = nullptr;
  const Eigen::MatrixXcd* target = nullptr;
  const Eigen::MatrixXcd* noisy = nullptr;
  const Eigen::MatrixXcd* noise = nullptr;
  const Eigen::MatrixXd* gain = nullptr;
  const WeightMatrix* weights = nullptr;
};

// magMSE / cMSE (order 2) and magMAE / cMAE (order 1). The complex L1 norm
// is |Re| + |Im|; sign(0) is 0.
LossResult NormLoss(int order, SpectralDomain domain, const Eigen::MatrixXcd& enhanced,
                    const Eigen::MatrixXcd& target);

// LSD, or PLSD = <(log10 A_hat - log10 A)^2 * (2 - cos(phi_hat - phi))>.
LossResult LogLoss(LogVariant variant, const Eigen::MatrixXcd& enhanced,
                   const Eigen::MatrixXcd& target,
                   double clamp_floor = LossSpec::kDefaultClampFloor);

// |S_hat + gamma X|^0.3
WeightMatrix WlsdWeight(const Eigen::MatrixXcd& enhanced, const Eigen::MatrixXcd& noisy,
                        double gamma = LossSpec::kDefaultGamma);

// Bin-weighted variant of a distance loss. The weight is a constant for the
// gradient and the average still divides by K*N.
LossResult WeightedLoss(LossKind base, const WeightMatrix& weights,
                        const Eigen::MatrixXcd& enhanced, const Eigen::MatrixXcd& target,
                        const LossSpec& params = {});

// magComp / cComp with compression exponent c.
LossResult CompressedLoss(SpectralDomain domain, const Eigen::MatrixXcd& enhanced,
                          const Eigen::MatrixXcd& target,
                          double compression = LossSpec::kDefaultCompression,
                          double clamp_floor = LossSpec::kDefaultClampFloor);

// SNR (magnitude) / SDR (complex): -log10(<|S|^2> / <|err|^2>), the error
// power floored at clamp_floor^2. Throws UsageError for an all-zero target.
LossResult RatioLoss(SpectralDomain domain, const Eigen::MatrixXcd& enhanced,
                     const Eigen::MatrixXcd& target,
                     double clamp_floor = LossSpec::kDefaultClampFloor);

// magCorr / cCorr (negated coherence). Throws UsageError for zero energy.
LossResult CorrelationLoss(SpectralDomain domain, const Eigen::MatrixXcd& enhanced,
                           const Eigen::MatrixXcd& target);

// lambda <|S - G S|^2> + (1 - lambda) <|G N|^2>, gradient w.r.t. G.
LossResult SdwLoss(const Eigen::MatrixXd& gain, const Eigen::MatrixXcd& speech,
                   const Eigen::MatrixXcd& noise, double lambda);

// Per-bin minimiser of SdwLoss: lambda|S|^2 / (lambda|S|^2 + (1-lambda)|N|^2).
Eigen::MatrixXd SdwOptimalGain(const Eigen::MatrixXcd& speech, const Eigen::MatrixXcd& noise,
                               double lambda);

// (1 - beta) * mag + beta * complex. Both results must share domain and shape.
LossResult MixLoss(const LossResult& mag, const LossResult& complex, double beta);

// Single kind, using the scalar parameters of `params` (kind/partner ignored).
LossResult EvaluateLoss(LossKind kind, const LossInputs& inputs, const LossSpec& params = {});

// Full objective of a spec, including the beta mix with the partner.
LossResult EvaluateLoss(const LossSpec& spec, const LossInputs& inputs);

// dL/dG for Ŝ = G X, given a spectrum-domain gradient.
Eigen::MatrixXd SpectrumToGainGradient(const Eigen::MatrixXcd& spectrum_grad,
                                       const Eigen::MatrixXcd& noisy);

// Objective value and gradient w.r.t. the full-grid gain, for training.
LossResult EvaluateGainObjective(const LossSpec& spec, const LossInputs& inputs);

// Worst relative disagreement between the analytic gradient and a five-point
// central difference, over every real and imaginary component of S_hat (or
// every gain entry for SDW). The initial step for bin z is
// h * clamp(|z|, clamp_floor, 1) (h for gains) and is halved while the
// estimates at s and s/2 disagree, so kinks do not leak into the stencil. wLSD weights are frozen at the
// evaluation point. The relative error of a component is
//   |analytic - numeric| / max(|analytic|, |numeric|, 1e-6 * max|analytic|).
double CheckGradient(const LossSpec& spec, const LossInputs& inputs, double h);

}  // namespace specloss

#endif  // SPECLOSS_LOSSES_HPP_
