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

#include "specloss/losses.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>

#include "specloss/errors.hpp"
#include "specloss/spectral.hpp"

namespace specloss {

namespace {

using Eigen::Index;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;

constexpr std::array<LossKind, 17> kAllKinds = {
    LossKind::kMagMse,  LossKind::kCMse,    LossKind::kMagMae,      LossKind::kCMae,
    LossKind::kLsd,     LossKind::kPlsd,    LossKind::kWLsd,        LossKind::kWPlsd,
    LossKind::kMagComp, LossKind::kCComp,   LossKind::kSnr,         LossKind::kSdr,
    LossKind::kMagCorr, LossKind::kCCorr,   LossKind::kSdw,         LossKind::kWeightedMse,
    LossKind::kWeightedCMse,
};

const double kLn10 = std::numbers::ln10;

double Sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Unit phasor; 1 for an exactly zero bin.
Complex Phasor(Complex z) {
  const double a = std::abs(z);
  return a > 0.0 ? z / a : Complex(1.0, 0.0);
}

// Magnitude direction used by gradients; 0 for an exactly zero bin.
Complex GradDirection(Complex z) {
  const double a = std::abs(z);
  return a > 0.0 ? z / a : Complex(0.0, 0.0);
}

void RequireSameShape(const MatrixXcd& a, const MatrixXcd& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream os;
    os << what << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x"
       << b.cols();
    throw UsageError(os.str());
  }
  if (a.size() == 0) throw UsageError(std::string(what) + ": empty spectrogram");
}

struct BinTerm {
  double value;
  Complex grad;
};

BinTerm DistanceTerm(LossKind kind, Complex est, Complex ref, const LossSpec& p) {
  const double est_mag = std::abs(est);
  const double ref_mag = std::abs(ref);
  const double floor = p.clamp_floor;
  switch (kind) {
    case LossKind::kMagMse: {
      const double d = est_mag - ref_mag;
      return {d * d, 2.0 * d * GradDirection(est)};
    }
    case LossKind::kCMse: {
      const Complex e = est - ref;
      return {std::norm(e), 2.0 * e};
    }
    case LossKind::kMagMae: {
      const double d = est_mag - ref_mag;
      return {std::abs(d), Sign(d) * GradDirection(est)};
    }
    case LossKind::kCMae: {
      const Complex e = est - ref;
      return {std::abs(e.real()) + std::abs(e.imag()), Complex(Sign(e.real()), Sign(e.imag()))};
    }
    case LossKind::kLsd:
    case LossKind::kPlsd: {
      const double est_c = std::max(est_mag, floor);
      const double ref_c = std::max(ref_mag, floor);
      const double d = std::log10(est_c) - std::log10(ref_c);
      if (kind == LossKind::kLsd) {
        const Complex g = est_mag > floor ? 2.0 * d / (est_mag * kLn10) * (est / est_mag) : 0.0;
        return {d * d, g};
      }
      const Complex ref_dir = Phasor(ref);
      const double cos_diff = (Phasor(est) * std::conj(ref_dir)).real();
      const double phase_factor = 2.0 - cos_diff;
      Complex g = 0.0;
      if (est_mag > floor) {
        const Complex g_log = 2.0 * d / (est_mag * kLn10) * (est / est_mag);
        const double dot = (est * std::conj(ref_dir)).real();
        const Complex g_cos =
            ref_dir / est_mag - dot * est / (est_mag * est_mag * est_mag);
        g = phase_factor * g_log - d * d * g_cos;
      }
      return {d * d * phase_factor, g};
    }
    case LossKind::kMagComp: {
      const double c = p.compression;
      const double est_p = std::pow(std::max(est_mag, floor), c);
      const double ref_p = std::pow(std::max(ref_mag, floor), c);
      const double d = est_p - ref_p;
      Complex g = 0.0;
      if (est_mag > floor) g = 2.0 * d * c * est_p / est_mag * (est / est_mag);
      return {d * d, g};
    }
    case LossKind::kCComp: {
      const double c = p.compression;
      const double est_p = std::pow(std::max(est_mag, floor), c);
      const double ref_p = std::pow(std::max(ref_mag, floor), c);
      const Complex e = est_p * Phasor(est) - ref_p * Phasor(ref);
      Complex g = 0.0;
      if (est_mag > floor) {
        // Wirtinger derivative of |h(|z|) z - t|^2 with h(a) = a^(c-1).
        const double a2 = est_mag * est_mag;
        g = (c - 1.0) * est_p / (a2 * est_mag) * (est * est) * std::conj(e) +
            (1.0 + c) * est_p / est_mag * e;
      }
      return {std::norm(e), g};
    }
    default:
      throw UsageError(std::string(LossName(kind)) + " is not a bin-additive distance");
  }
}

// <W * term> over all bins; W == nullptr means uniform weights.
LossResult DistanceLoss(LossKind kind, const MatrixXcd& est, const MatrixXcd& ref,
                        const WeightMatrix* weights, const LossSpec& p) {
  RequireSameShape(est, ref, LossName(kind).data());
  if (weights && (weights->rows() != est.rows() || weights->cols() != est.cols())) {
    throw UsageError("weight matrix shape does not match the spectrogram");
  }
  const double inv_count = 1.0 / static_cast<double>(est.size());
  LossResult r;
  r.domain = GradientDomain::kSpectrum;
  r.spectrum_grad.resize(est.rows(), est.cols());
  double sum = 0.0;
  for (Index n = 0; n < est.cols(); ++n) {
    for (Index k = 0; k < est.rows(); ++k) {
      const double w = weights ? weights->values()(k, n) : 1.0;
      if (w == 0.0) {
        r.spectrum_grad(k, n) = 0.0;
        continue;
      }
      const BinTerm t = DistanceTerm(kind, est(k, n), ref(k, n), p);
      sum += w * t.value;
      r.spectrum_grad(k, n) = (w * inv_count) * t.grad;
    }
  }
  r.value = sum * inv_count;
  return r;
}

LossKind BaseOfWeighted(LossKind kind) {
  switch (kind) {
    case LossKind::kWLsd: return LossKind::kLsd;
    case LossKind::kWPlsd: return LossKind::kPlsd;
    case LossKind::kWeightedMse: return LossKind::kMagMse;
    case LossKind::kWeightedCMse: return LossKind::kCMse;
    default: return kind;
  }
}

bool IsBinAdditive(LossKind kind) {
  switch (kind) {
    case LossKind::kMagMse:
    case LossKind::kCMse:
    case LossKind::kMagMae:
    case LossKind::kCMae:
    case LossKind::kLsd:
    case LossKind::kPlsd:
    case LossKind::kMagComp:
    case LossKind::kCComp:
      return true;
    default:
      return false;
  }
}

std::string Lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

const MatrixXcd& Require(const MatrixXcd* m, LossKind kind, const char* what) {
  if (!m) throw UsageError(std::string(LossName(kind)) + " needs the " + what + " spectrogram");
  return *m;
}

}  // namespace

std::span<const LossKind> AllLossKinds() { return kAllKinds; }

std::string_view LossName(LossKind kind) {
  switch (kind) {
    case LossKind::kMagMse: return "magMSE";
    case LossKind::kCMse: return "cMSE";
    case LossKind::kMagMae: return "magMAE";
    case LossKind::kCMae: return "cMAE";
    case LossKind::kLsd: return "LSD";
    case LossKind::kPlsd: return "PLSD";
    case LossKind::kWLsd: return "wLSD";
    case LossKind::kWPlsd: return "wPLSD";
    case LossKind::kMagComp: return "magComp";
    case LossKind::kCComp: return "cComp";
    case LossKind::kSnr: return "SNR";
    case LossKind::kSdr: return "SDR";
    case LossKind::kMagCorr: return "magCorr";
    case LossKind::kCCorr: return "cCorr";
    case LossKind::kSdw: return "SDW";
    case LossKind::kWeightedMse: return "weightedMSE";
    case LossKind::kWeightedCMse: return "weightedCMSE";
  }
  return "unknown";
}

std::optional<LossKind> ParseLossKind(std::string_view name) {
  const std::string key = Lower(name);
  for (LossKind kind : kAllKinds) {
    if (Lower(LossName(kind)) == key) return kind;
  }
  return std::nullopt;
}

std::string LossNameList() {
  std::string out;
  for (LossKind kind : kAllKinds) {
    if (!out.empty()) out += ", ";
    out += LossName(kind);
  }
  return out;
}

bool IsDistanceLoss(LossKind kind) {
  switch (kind) {
    case LossKind::kSnr:
    case LossKind::kSdr:
    case LossKind::kMagCorr:
    case LossKind::kCCorr:
    case LossKind::kSdw:
      return false;
    default:
      return true;
  }
}

bool IsPhaseAware(LossKind kind) {
  switch (kind) {
    case LossKind::kCMse:
    case LossKind::kCMae:
    case LossKind::kPlsd:
    case LossKind::kWPlsd:
    case LossKind::kCComp:
    case LossKind::kSdr:
    case LossKind::kCCorr:
    case LossKind::kWeightedCMse:
      return true;
    default:
      return false;
  }
}

std::optional<LossKind> PairedLoss(LossKind kind) {
  switch (kind) {
    case LossKind::kMagMse: return LossKind::kCMse;
    case LossKind::kCMse: return LossKind::kMagMse;
    case LossKind::kMagMae: return LossKind::kCMae;
    case LossKind::kCMae: return LossKind::kMagMae;
    case LossKind::kLsd: return LossKind::kPlsd;
    case LossKind::kPlsd: return LossKind::kLsd;
    case LossKind::kWLsd: return LossKind::kWPlsd;
    case LossKind::kWPlsd: return LossKind::kWLsd;
    case LossKind::kMagComp: return LossKind::kCComp;
    case LossKind::kCComp: return LossKind::kMagComp;
    case LossKind::kSnr: return LossKind::kSdr;
    case LossKind::kSdr: return LossKind::kSnr;
    case LossKind::kMagCorr: return LossKind::kCCorr;
    case LossKind::kCCorr: return LossKind::kMagCorr;
    case LossKind::kWeightedMse: return LossKind::kWeightedCMse;
    case LossKind::kWeightedCMse: return LossKind::kWeightedMse;
    case LossKind::kSdw: return std::nullopt;
  }
  return std::nullopt;
}

WeightMatrix::WeightMatrix(Eigen::MatrixXd weights) : weights_(std::move(weights)) {
  for (Index i = 0; i < weights_.size(); ++i) {
    const double w = weights_.data()[i];
    if (!std::isfinite(w) || w < 0.0) {
      throw UsageError("weight matrix entries must be finite and nonnegative");
    }
  }
}

WeightMatrix WeightMatrix::Uniform(Index rows, Index cols) {
  return WeightMatrix(MatrixXd::Ones(rows, cols));
}

void LossSpec::Validate() const {
  if (!(beta >= 0.0 && beta <= 1.0)) throw UsageError("beta must lie in [0,1]");
  if (!(lambda > 0.0 && lambda < 1.0)) throw UsageError("lambda must lie in (0,1)");
  if (!(compression > 0.0 && compression < 1.0)) {
    throw UsageError("compression exponent must lie in (0,1)");
  }
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw UsageError("gamma must be nonnegative");
  if (!(clamp_floor > 0.0)) throw UsageError("clamp floor must be positive");
  const bool kind_gain = kind == LossKind::kSdw;
  if (partner && kind_gain != (*partner == LossKind::kSdw)) {
    throw UsageError("SDW can only be mixed with itself");
  }
}

std::string LossSpec::Describe() const {
  std::ostringstream os;
  os << LossName(kind);
  if (partner) os << "+" << LossName(*partner) << "(beta=" << beta << ")";
  if (kind == LossKind::kSdw) os << "(lambda=" << lambda << ")";
  return os.str();
}

LossResult NormLoss(int order, SpectralDomain domain, const MatrixXcd& enhanced,
                    const MatrixXcd& target) {
  LossKind kind;
  if (order == 2) {
    kind = domain == SpectralDomain::kMagnitude ? LossKind::kMagMse : LossKind::kCMse;
  } else if (order == 1) {
    kind = domain == SpectralDomain::kMagnitude ? LossKind::kMagMae : LossKind::kCMae;
  } else {
    throw UsageError("norm loss order must be 1 or 2");
  }
  return DistanceLoss(kind, enhanced, target, nullptr, LossSpec{});
}

LossResult LogLoss(LogVariant variant, const MatrixXcd& enhanced, const MatrixXcd& target,
                   double clamp_floor) {
  LossSpec p;
  p.clamp_floor = clamp_floor;
  if (!(clamp_floor > 0.0)) throw UsageError("clamp floor must be positive");
  const LossKind kind = variant == LogVariant::kLsd ? LossKind::kLsd : LossKind::kPlsd;
  return DistanceLoss(kind, enhanced, target, nullptr, p);
}

WeightMatrix WlsdWeight(const MatrixXcd& enhanced, const MatrixXcd& noisy, double gamma) {
  RequireSameShape(enhanced, noisy, "wLSD weight");
  MatrixXd w(enhanced.rows(), enhanced.cols());
  for (Index n = 0; n < enhanced.cols(); ++n) {
    for (Index k = 0; k < enhanced.rows(); ++k) {
      w(k, n) = std::pow(std::abs(enhanced(k, n) + gamma * noisy(k, n)), 0.3);
    }
  }
  return WeightMatrix(std::move(w));
}

LossResult WeightedLoss(LossKind base, const WeightMatrix& weights, const MatrixXcd& enhanced,
                        const MatrixXcd& target, const LossSpec& params) {
  const LossKind kind = BaseOfWeighted(base);
  if (!IsBinAdditive(kind)) {
    throw UsageError(std::string(LossName(base)) + " cannot be bin-weighted");
  }
  return DistanceLoss(kind, enhanced, target, &weights, params);
}

LossResult CompressedLoss(SpectralDomain domain, const MatrixXcd& enhanced,
                          const MatrixXcd& target, double compression, double clamp_floor) {
  LossSpec p;
  p.compression = compression;
  p.clamp_floor = clamp_floor;
  if (!(compression > 0.0 && compression < 1.0)) {
    throw UsageError("compression exponent must lie in (0,1)");
  }
  if (!(clamp_floor > 0.0)) throw UsageError("clamp floor must be positive");
  const LossKind kind =
      domain == SpectralDomain::kMagnitude ? LossKind::kMagComp : LossKind::kCComp;
  return DistanceLoss(kind, enhanced, target, nullptr, p);
}

LossResult RatioLoss(SpectralDomain domain, const MatrixXcd& enhanced, const MatrixXcd& target,
                     double clamp_floor) {
  RequireSameShape(enhanced, target, domain == SpectralDomain::kMagnitude ? "SNR" : "SDR");
  const double inv_count = 1.0 / static_cast<double>(enhanced.size());
  double signal = 0.0;
  double error = 0.0;
  for (Index i = 0; i < enhanced.size(); ++i) {
    const Complex est = enhanced.data()[i];
    const Complex ref = target.data()[i];
    signal += std::norm(ref);
    if (domain == SpectralDomain::kMagnitude) {
      const double d = std::abs(est) - std::abs(ref);
      error += d * d;
    } else {
      error += std::norm(est - ref);
    }
  }
  signal *= inv_count;
  error *= inv_count;
  if (!(signal > 0.0)) throw UsageError("ratio loss is undefined for an all-zero target");

  const double floor2 = clamp_floor * clamp_floor;
  LossResult r;
  r.domain = GradientDomain::kSpectrum;
  r.value = std::log10(std::max(error, floor2)) - std::log10(signal);
  r.spectrum_grad = MatrixXcd::Zero(enhanced.rows(), enhanced.cols());
  if (error > floor2) {
    const double scale = 2.0 * inv_count / (kLn10 * error);
    for (Index i = 0; i < enhanced.size(); ++i) {
      const Complex est = enhanced.data()[i];
      const Complex ref = target.data()[i];
      if (domain == SpectralDomain::kMagnitude) {
        r.spectrum_grad.data()[i] = scale * (std::abs(est) - std::abs(ref)) * GradDirection(est);
      } else {
        r.spectrum_grad.data()[i] = scale * (est - ref);
      }
    }
  }
  return r;
}

LossResult CorrelationLoss(SpectralDomain domain, const MatrixXcd& enhanced,
                           const MatrixXcd& target) {
  RequireSameShape(enhanced, target, domain == SpectralDomain::kMagnitude ? "magCorr" : "cCorr");
  // The 1/(KN) of each average cancels in the normalised ratio.
  double cross = 0.0;
  double est_energy = 0.0;
  double ref_energy = 0.0;
  for (Index i = 0; i < enhanced.size(); ++i) {
    const Complex est = enhanced.data()[i];
    const Complex ref = target.data()[i];
    est_energy += std::norm(est);
    ref_energy += std::norm(ref);
    cross += domain == SpectralDomain::kMagnitude ? std::abs(est) * std::abs(ref)
                                                  : (est * std::conj(ref)).real();
  }
  if (!(est_energy > 0.0) || !(ref_energy > 0.0)) {
    throw UsageError("correlation loss needs nonzero energy in both spectrograms");
  }
  LossResult r;
  r.domain = GradientDomain::kSpectrum;
  r.spectrum_grad.resize(enhanced.rows(), enhanced.cols());
  if (domain == SpectralDomain::kMagnitude) {
    const double denom = est_energy * ref_energy;
    r.value = -cross * cross / denom;
    const double a = -2.0 * cross / denom;
    const double b = 2.0 * cross * cross / (denom * est_energy);
    for (Index i = 0; i < enhanced.size(); ++i) {
      const Complex est = enhanced.data()[i];
      const double dv = a * std::abs(target.data()[i]) + b * std::abs(est);
      r.spectrum_grad.data()[i] = dv * GradDirection(est);
    }
  } else {
    const double norm = std::sqrt(est_energy * ref_energy);
    r.value = -cross / norm;
    for (Index i = 0; i < enhanced.size(); ++i) {
      r.spectrum_grad.data()[i] =
          -target.data()[i] / norm + cross / (est_energy * norm) * enhanced.data()[i];
    }
  }
  return r;
}

LossResult SdwLoss(const MatrixXd& gain, const MatrixXcd& speech, const MatrixXcd& noise,
                   double lambda) {
  RequireSameShape(speech, noise, "SDW");
  if (gain.rows() != speech.rows() || gain.cols() != speech.cols()) {
    throw UsageError("SDW: gain shape does not match the spectrogram");
  }
  if (!(lambda > 0.0 && lambda < 1.0)) throw UsageError("SDW lambda must lie in (0,1)");
  const double inv_count = 1.0 / static_cast<double>(gain.size());
  LossResult r;
  r.domain = GradientDomain::kGain;
  r.gain_grad.resize(gain.rows(), gain.cols());
  double sum = 0.0;
  for (Index i = 0; i < gain.size(); ++i) {
    const double g = gain.data()[i];
    const double s2 = std::norm(speech.data()[i]);
    const double n2 = std::norm(noise.data()[i]);
    sum += lambda * (1.0 - g) * (1.0 - g) * s2 + (1.0 - lambda) * g * g * n2;
    r.gain_grad.data()[i] =
        2.0 * inv_count * (lambda * (g - 1.0) * s2 + (1.0 - lambda) * g * n2);
  }
  r.value = sum * inv_count;
  return r;
}

MatrixXd SdwOptimalGain(const MatrixXcd& speech, const MatrixXcd& noise, double lambda) {
  RequireSameShape(speech, noise, "SDW");
  MatrixXd g(speech.rows(), speech.cols());
  for (Index i = 0; i < g.size(); ++i) {
    const double s = lambda * std::norm(speech.data()[i]);
    const double n = (1.0 - lambda) * std::norm(noise.data()[i]);
    g.data()[i] = s + n > 0.0 ? s / (s + n) : 0.0;
  }
  return g;
}

LossResult MixLoss(const LossResult& mag, const LossResult& complex, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw UsageError("beta must lie in [0,1]");
  if (mag.domain != complex.domain) {
    throw UsageError("cannot mix losses with different gradient domains");
  }
  LossResult r;
  r.domain = mag.domain;
  r.value = (1.0 - beta) * mag.value + beta * complex.value;
  if (mag.domain == GradientDomain::kSpectrum) {
    if (mag.spectrum_grad.rows() != complex.spectrum_grad.rows() ||
        mag.spectrum_grad.cols() != complex.spectrum_grad.cols()) {
      throw UsageError("cannot mix losses of different shapes");
    }
    r.spectrum_grad = (1.0 - beta) * mag.spectrum_grad + beta * complex.spectrum_grad;
  } else {
    if (mag.gain_grad.rows() != complex.gain_grad.rows() ||
        mag.gain_grad.cols() != complex.gain_grad.cols()) {
      throw UsageError("cannot mix losses of different shapes");
    }
    r.gain_grad = (1.0 - beta) * mag.gain_grad + beta * complex.gain_grad;
  }
  return r;
}

LossResult EvaluateLoss(LossKind kind, const LossInputs& in, const LossSpec& p) {
  if (kind == LossKind::kSdw) {
    if (!in.gain) throw UsageError("SDW needs the gain matrix");
    return SdwLoss(*in.gain, Require(in.target, kind, "target"), Require(in.noise, kind, "noise"),
                   p.lambda);
  }
  const MatrixXcd& est = Require(in.enhanced, kind, "enhanced");
  const MatrixXcd& ref = Require(in.target, kind, "target");
  switch (kind) {
    case LossKind::kMagMse:
    case LossKind::kCMse:
    case LossKind::kMagMae:
    case LossKind::kCMae:
    case LossKind::kLsd:
    case LossKind::kPlsd:
    case LossKind::kMagComp:
    case LossKind::kCComp:
      return DistanceLoss(kind, est, ref, nullptr, p);
    case LossKind::kWLsd:
    case LossKind::kWPlsd: {
      if (in.weights) return WeightedLoss(kind, *in.weights, est, ref, p);
      const WeightMatrix w = WlsdWeight(est, Require(in.noisy, kind, "noisy"), p.gamma);
      return WeightedLoss(kind, w, est, ref, p);
    }
    case LossKind::kWeightedMse:
    case LossKind::kWeightedCMse:
      if (in.weights) return WeightedLoss(kind, *in.weights, est, ref, p);
      return WeightedLoss(kind, WeightMatrix::Uniform(est.rows(), est.cols()), est, ref, p);
    case LossKind::kSnr:
      return RatioLoss(SpectralDomain::kMagnitude, est, ref, p.clamp_floor);
    case LossKind::kSdr:
      return RatioLoss(SpectralDomain::kComplex, est, ref, p.clamp_floor);
    case LossKind::kMagCorr:
      return CorrelationLoss(SpectralDomain::kMagnitude, est, ref);
    case LossKind::kCCorr:
      return CorrelationLoss(SpectralDomain::kComplex, est, ref);
    case LossKind::kSdw:
      break;
  }
  throw UsageError("unhandled loss kind");
}

LossResult EvaluateLoss(const LossSpec& spec, const LossInputs& inputs) {
  spec.Validate();
  LossResult primary = EvaluateLoss(spec.kind, inputs, spec);
  if (!spec.partner) return primary;
  return MixLoss(primary, EvaluateLoss(*spec.partner, inputs, spec), spec.beta);
}

MatrixXd SpectrumToGainGradient(const MatrixXcd& spectrum_grad, const MatrixXcd& noisy) {
  RequireSameShape(spectrum_grad, noisy, "gain gradient");
  // Ŝ = G X: dL/dG = dL/dRe * Re X + dL/dIm * Im X.
  return (spectrum_grad.array() * noisy.array().conjugate()).real().matrix();
}

LossResult EvaluateGainObjective(const LossSpec& spec, const LossInputs& inputs) {
  spec.Validate();
  auto to_gain = [&](LossResult r) {
    if (r.domain == GradientDomain::kSpectrum) {
      if (!inputs.noisy) throw UsageError("gain gradient needs the noisy spectrogram");
      r.gain_grad = SpectrumToGainGradient(r.spectrum_grad, *inputs.noisy);
      r.spectrum_grad.resize(0, 0);
      r.domain = GradientDomain::kGain;
    }
    return r;
  };
  LossResult primary = to_gain(EvaluateLoss(spec.kind, inputs, spec));
  if (!spec.partner) return primary;
  return MixLoss(primary, to_gain(EvaluateLoss(*spec.partner, inputs, spec)), spec.beta);
}

double CheckGradient(const LossSpec& spec, const LossInputs& inputs, double h) {
  if (!(h > 0.0)) throw UsageError("finite-difference step must be positive");
  LossInputs in = inputs;
  std::optional<WeightMatrix> frozen;
  auto uses_wlsd = [](LossKind k) { return k == LossKind::kWLsd || k == LossKind::kWPlsd; };
  if (!in.weights && (uses_wlsd(spec.kind) || (spec.partner && uses_wlsd(*spec.partner)))) {
    if (!in.enhanced || !in.noisy) throw UsageError("wLSD gradient check needs S_hat and X");
    frozen = WlsdWeight(*in.enhanced, *in.noisy, spec.gamma);
    in.weights = &*frozen;
  }

  const LossResult analytic = EvaluateLoss(spec, in);
  double worst = 0.0;

  auto rel_error = [](double a, double n, double scale) {
    const double denom = std::max({std::abs(a), std::abs(n), scale});
    return denom > 0.0 ? std::abs(a - n) / denom : 0.0;
  };

  // Fourth-order central difference, (8(f(+s) - f(-s)) - (f(+2s) - f(-2s))) / 12s.
  // When the estimates at s and s/2 disagree the stencil straddles a kink
  // (|z| = 0, a clamp, or an L1 corner), so the step shrinks until they agree.
  auto derivative = [&](auto&& eval_at, double step, double scale) {
    auto five_point = [&](double s) {
      return (8.0 * (eval_at(s) - eval_at(-s)) - (eval_at(2 * s) - eval_at(-2 * s))) / (12.0 * s);
    };
    double coarse = five_point(step);
    for (int refine = 0; refine < 12; ++refine) {
      const double fine = five_point(step / 2);
      if (std::abs(fine - coarse) <= 1e-6 * std::max({std::abs(fine), std::abs(coarse), scale})) {
        return fine;
      }
      coarse = fine;
      step /= 2;
    }
    return coarse;
  };

  if (analytic.domain == GradientDomain::kGain) {
    MatrixXd gain = *in.gain;
    in.gain = &gain;
    const double scale = 1e-6 * analytic.gain_grad.cwiseAbs().maxCoeff();
    for (Index i = 0; i < gain.size(); ++i) {
      const double saved = gain.data()[i];
      auto eval_at = [&](double d) {
        gain.data()[i] = saved + d;
        const double v = EvaluateLoss(spec, in).value;
        gain.data()[i] = saved;
        return v;
      };
      worst = std::max(worst, rel_error(analytic.gain_grad.data()[i], derivative(eval_at, h, scale), scale));
    }
    return worst;
  }

  MatrixXcd est = *in.enhanced;
  in.enhanced = &est;
  double max_abs = 0.0;
  for (Index i = 0; i < analytic.spectrum_grad.size(); ++i) {
    max_abs = std::max({max_abs, std::abs(analytic.spectrum_grad.data()[i].real()),
                        std::abs(analytic.spectrum_grad.data()[i].imag())});
  }
  const double scale = 1e-6 * max_abs;
  for (Index i = 0; i < est.size(); ++i) {
    const Complex saved = est.data()[i];
    for (int part = 0; part < 2; ++part) {
      // Small bins get a proportionally small step.
      const double step = h * std::clamp(std::abs(saved), spec.clamp_floor, 1.0);
      const Complex unit = part == 0 ? Complex(1.0, 0.0) : Complex(0.0, 1.0);
      auto eval_at = [&](double d) {
        est.data()[i] = saved + d * unit;
        const double v = EvaluateLoss(spec, in).value;
        est.data()[i] = saved;
        return v;
      };
      const Complex g = analytic.spectrum_grad.data()[i];
      const double a = part == 0 ? g.real() : g.imag();
      worst = std::max(worst, rel_error(a, derivative(eval_at, step, scale), scale));
    }
  }
  return worst;
}

}  // namespace specloss
