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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails. Pass criterion numbers as arguments
// to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "specloss/corpus.hpp"
#include "specloss/eval.hpp"
#include "specloss/losses.hpp"
#include "specloss/model.hpp"
#include "specloss/spectral.hpp"
#include "specloss/trainer.hpp"
#include "support/oracles.hpp"

using namespace specloss;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
namespace t = specloss::testing;

namespace {

enum class Verdict { kPass, kWarn, kFail };

struct Outcome {
  Verdict verdict;
  std::string detail;
};

Outcome Check(bool ok, const std::string& detail) {
  return {ok ? Verdict::kPass : Verdict::kFail, detail};
}

std::string Fmt(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

struct Criterion {
  int id;
  std::string title;
  double budget_s;
  std::function<Outcome()> run;
};

struct Spectra {
  MatrixXcd est, ref, noisy, noise;
  MatrixXd gain;

  Spectra(std::mt19937_64& rng, double lo = 0.1, double hi = 2.0) {
    est = t::RandomSpectrogram(rng, 8, 4, lo, hi);
    ref = t::RandomSpectrogram(rng, 8, 4, lo, hi);
    noise = t::RandomSpectrogram(rng, 8, 4, lo, hi);
    noisy = ref + noise;
    std::uniform_real_distribution<double> u(0.05, 0.95);
    gain.resize(8, 4);
    for (Eigen::Index i = 0; i < gain.size(); ++i) gain.data()[i] = u(rng);
  }

  LossInputs Inputs(const MatrixXcd* e = nullptr, const MatrixXcd* r = nullptr) const {
    LossInputs in;
    in.enhanced = e ? e : &est;
    in.target = r ? r : &ref;
    in.noisy = &noisy;
    in.noise = &noise;
    in.gain = &gain;
    return in;
  }
};

AudioBuffer RandomAudio(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 0.3);
  AudioBuffer a;
  a.samples.resize(n);
  for (double& v : a.samples) v = g(rng);
  return a;
}

Outcome StftRoundTrip() {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> len(2000, 24000);
  double recon = 0.0, stream = 0.0;
  for (int clip = 0; clip < 100; ++clip) {
    const AudioBuffer a = RandomAudio(rng, len(rng));
    const ComplexSpectrogram spec = Stft(a);
    const AudioBuffer back = Istft(spec);
    // Interior: skip one frame at each edge.
    for (std::size_t i = 512; i + 512 < a.size(); ++i) {
      recon = std::max(recon, std::abs(back.samples[i] - a.samples[i]));
    }
    StreamingStft s;
    std::vector<double> chunk(256);
    for (int n = 0; n < spec.num_frames(); ++n) {
      for (int i = 0; i < 256; ++i) {
        const std::size_t idx = static_cast<std::size_t>(n) * 256 + i;
        chunk[i] = idx < a.size() ? a.samples[idx] : 0.0;
      }
      stream = std::max(stream, (s.Step(chunk) - spec.bins.col(n)).cwiseAbs().maxCoeff());
    }
  }
  return Check(recon < 1e-6 && stream < 1e-12,
               Fmt("max interior error %.2e, max streaming/batch bin difference %.2e", recon,
                   stream));
}

Outcome LossOracles() {
  std::mt19937_64 rng(2);
  double worst = 0.0;
  std::string worst_kind;
  for (int trial = 0; trial < 200; ++trial) {
    const Spectra s(rng, 0.0, 2.0);
    for (LossKind kind : AllLossKinds()) {
      const double actual = EvaluateLoss(kind, s.Inputs()).value;
      t::ReferenceInputs ri{&s.est, &s.ref, &s.noisy, &s.noise, &s.gain, nullptr};
      const double expected = static_cast<double>(t::ReferenceLoss(kind, ri));
      const double err = t::RelativeError(actual, expected);
      if (err > worst) {
        worst = err;
        worst_kind = std::string(LossName(kind));
      }
    }
  }
  return Check(worst < 1e-10,
               Fmt("worst relative difference %.2e (%s)", worst, worst_kind.c_str()));
}

bool NearClamp(LossKind k) {
  switch (k) {
    case LossKind::kLsd:
    case LossKind::kPlsd:
    case LossKind::kWLsd:
    case LossKind::kWPlsd:
    case LossKind::kMagComp:
    case LossKind::kCComp:
      return true;
    default:
      return false;
  }
}

Outcome Gradients() {
  std::mt19937_64 rng(3);
  double worst_smooth = 0.0, worst_clamped = 0.0;
  std::uniform_real_distribution<double> log_mag(std::log(1e-6), std::log(2.0));
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  for (LossKind kind : AllLossKinds()) {
    LossSpec spec;
    spec.kind = kind;
    for (int point = 0; point < 100; ++point) {
      Spectra s(rng);
      // Log and compressed losses are also probed close to the clamp floor,
      // with magnitudes log-uniform down to 1e-6.
      if (NearClamp(kind) && point % 2) {
        for (Eigen::Index i = 0; i < s.est.size(); ++i) {
          s.est.data()[i] = std::polar(std::exp(log_mag(rng)), ang(rng));
        }
      }
      const double err = CheckGradient(spec, s.Inputs(), 1e-2);
      double& worst = NearClamp(kind) ? worst_clamped : worst_smooth;
      worst = std::max(worst, err);
    }
  }

  // Whole network through the loss, tiny preset.
  CorpusOptions o;
  o.train = 1;
  o.duration_s = 1.0;
  const TrainingExample ex = PrepareExample(GenerateMixtures(o, "train")[0]);
  double worst_net = 0.0, worst_forward = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    ModelConfig mc = ModelConfig::Tiny();
    mc.seed = seed;
    const ModelParams p = ModelParams::Initialize(mc);
    LossSpec loss;
    loss.kind = LossKind::kCMse;
    const UtteranceGradient g = ComputeGradient(p, ex, loss);
    const double ref = static_cast<double>(
        t::ReferenceNetworkCmse(p, ex.features, ex.noisy.bins, ex.speech.bins));
    worst_forward = std::max(worst_forward, t::RelativeError(g.loss, ref));
    ModelParams probe = p;
    auto pa = probe.Arrays();
    const auto ga = g.grads.Arrays();
    double grad_scale = 0.0;
    for (const auto& arr : ga) {
      for (std::size_t i = 0; i < arr.size; ++i) grad_scale = std::max(grad_scale, std::abs(arr.data[i]));
    }
    std::uniform_int_distribution<std::size_t> pick;
    for (std::size_t a = 0; a < pa.size(); ++a) {
      for (int sample = 0; sample < 8; ++sample) {
        const std::size_t i = pick(rng) % pa[a].size;
        double& theta = pa[a].data[i];
        const double saved = theta;
        auto loss_at = [&](double d) {
          theta = saved + d;
          const long double v = t::ReferenceNetworkCmse(probe, ex.features, ex.noisy.bins,
                                                        ex.speech.bins);
          theta = saved;
          return v;
        };
        // Five-point stencil on the long-double objective; steps are the
        // representable offsets actually applied to theta.
        const double h = (saved + 1e-6) - saved, h2 = (saved + 2e-6) - saved;
        const double num = static_cast<double>(
            (8 * (loss_at(h) - loss_at(-h)) - (loss_at(h2) - loss_at(-h2))) / (12.0L * h));
        const double an = ga[a].data[i];
        const double denom = std::max({std::abs(an), std::abs(num), 1e-6 * grad_scale});
        worst_net = std::max(worst_net, std::abs(an - num) / denom);
      }
    }
  }
  return Check(worst_smooth < 1e-4 && worst_clamped < 1e-3 && worst_net < 1e-4 &&
                   worst_forward < 1e-10,
               Fmt("smooth %.2e, log/compressed %.2e, network %.2e (reference forward %.1e)",
                   worst_smooth, worst_clamped, worst_net, worst_forward));
}

Outcome RangesAndInvariances() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  double factor_lo = 3.0, factor_hi = 1.0, ccorr_lo = 1.0, ccorr_hi = -1.0;
  double mcorr_lo = 0.0, mcorr_hi = -1.0, scale_err = 0.0, phase_err = 0.0, mix_err = 0.0;
  const LossKind ratio_kinds[] = {LossKind::kSnr, LossKind::kSdr, LossKind::kMagCorr,
                                  LossKind::kCCorr};
  const LossKind mag_kinds[] = {LossKind::kMagMse, LossKind::kMagMae, LossKind::kLsd,
                                LossKind::kWeightedMse, LossKind::kMagComp, LossKind::kSnr,
                                LossKind::kMagCorr};
  for (int trial = 0; trial < 200; ++trial) {
    const Spectra s(rng);
    // Phase factor per bin, from single-bin PLSD/LSD values.
    for (int k = 0; k < 8; ++k) {
      const MatrixXcd e = s.est.block(k, 0, 1, 1), r = s.ref.block(k, 0, 1, 1);
      const double lsd = LogLoss(LogVariant::kLsd, e, r).value;
      if (lsd < 1e-6) continue;
      const double f = LogLoss(LogVariant::kPlsd, e, r).value / lsd;
      factor_lo = std::min(factor_lo, f);
      factor_hi = std::max(factor_hi, f);
    }
    const double cc = EvaluateLoss(LossKind::kCCorr, s.Inputs()).value;
    const double mc = EvaluateLoss(LossKind::kMagCorr, s.Inputs()).value;
    ccorr_lo = std::min(ccorr_lo, cc);
    ccorr_hi = std::max(ccorr_hi, cc);
    mcorr_lo = std::min(mcorr_lo, mc);
    mcorr_hi = std::max(mcorr_hi, mc);

    const double a = scale(rng);
    const MatrixXcd se = a * s.est, sr = a * s.ref;
    for (LossKind k : ratio_kinds) {
      scale_err = std::max(scale_err, std::abs(EvaluateLoss(k, s.Inputs(&se, &sr)).value -
                                               EvaluateLoss(k, s.Inputs()).value));
    }
    MatrixXcd re = s.est, rr = s.ref;
    for (Eigen::Index i = 0; i < re.size(); ++i) {
      re.data()[i] *= std::polar(1.0, ang(rng));
      rr.data()[i] *= std::polar(1.0, ang(rng));
    }
    for (LossKind k : mag_kinds) {
      phase_err = std::max(phase_err, std::abs(EvaluateLoss(k, s.Inputs(&re, &rr)).value -
                                               EvaluateLoss(k, s.Inputs()).value));
    }
    const double beta = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    LossSpec mix;
    mix.kind = LossKind::kMagComp;
    mix.partner = LossKind::kCComp;
    mix.beta = beta;
    const LossResult lm = EvaluateLoss(LossKind::kMagComp, s.Inputs());
    const LossResult lc = EvaluateLoss(LossKind::kCComp, s.Inputs());
    const LossResult mixed = EvaluateLoss(mix, s.Inputs());
    mix_err = std::max(mix_err, std::abs(mixed.value - ((1 - beta) * lm.value + beta * lc.value)));
    mix_err = std::max(
        mix_err, (mixed.spectrum_grad - ((1 - beta) * lm.spectrum_grad + beta * lc.spectrum_grad))
                     .cwiseAbs()
                     .maxCoeff());
  }
  const bool ok = factor_lo >= 1.0 - 1e-12 && factor_hi <= 3.0 + 1e-12 && ccorr_lo >= -1.0 &&
                  ccorr_hi <= 1.0 && mcorr_lo >= -1.0 && mcorr_hi <= 0.0 && scale_err < 1e-9 &&
                  phase_err < 1e-12 && mix_err == 0.0;
  return Check(ok, Fmt("PLSD factor [%.3f, %.3f], cCorr [%.3f, %.3f], magCorr [%.3f, %.3f], "
                       "scale %.1e, phase %.1e, mix %.1e",
                       factor_lo, factor_hi, ccorr_lo, ccorr_hi, mcorr_lo, mcorr_hi, scale_err,
                       phase_err, mix_err));
}

Outcome SdwClosedForm() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> mag(0.01, 3.0), ang(-3.0, 3.0);
  double worst = 0.0;
  for (double lambda : {0.3, 0.5, 0.6}) {
    for (int bin = 0; bin < 1000; ++bin) {
      MatrixXcd s(1, 1), n(1, 1);
      s << std::polar(mag(rng), ang(rng));
      n << std::polar(mag(rng), ang(rng));
      const double numeric = t::GoldenSectionMinimize(
          [&](double g) {
            MatrixXd gm(1, 1);
            gm << g;
            return SdwLoss(gm, s, n, lambda).value;
          },
          0.0, 1.0);
      worst = std::max(worst, std::abs(SdwOptimalGain(s, n, lambda)(0, 0) - numeric));
    }
  }
  return Check(worst < 1e-6, Fmt("max |G* - numeric minimiser| %.2e", worst));
}

// Desk-scale training settings shared by the overfit and sweep criteria.
constexpr double kDeskLearningRate = 1e-3;
constexpr int kSweepEpochs = 100;

Outcome Overfit() {
  CorpusOptions o;
  o.train = 10;
  const auto train = GenerateMixtures(o, "train");
  double noisy = 0.0;
  for (const auto& m : train) noisy += SiSdr(m.noisy, m.speech);
  noisy /= static_cast<double>(train.size());

  bool ok = true;
  std::ostringstream detail;
  detail << Fmt("noisy SI-SDR %.2f dB;", noisy);
  for (LossKind kind : AllLossKinds()) {
    if (!IsDistanceLoss(kind)) continue;
    TrainConfig c;
    c.epochs = 300;
    c.validate_every = 300;
    c.learning_rate = kDeskLearningRate;
    c.loss.kind = kind;
    const TrainResult r = Train(train, train, c);
    const double ratio = r.log.epochs.back().train_loss / r.log.initial_train_loss;
    const double gain = *r.log.epochs.back().val_metric - noisy;
    const bool pass = ratio < 0.5 && gain >= 3.0;
    ok = ok && pass;
    detail << Fmt(" %s %.3fx/%+.1fdB%s", std::string(LossName(kind)).c_str(), ratio, gain,
                  pass ? "" : "(!)");
    std::fprintf(stderr, "  overfit %-13s loss ratio %.3f, SI-SDR gain %+.2f dB\n",
                 std::string(LossName(kind)).c_str(), ratio, gain);
  }
  return Check(ok, detail.str());
}

Outcome BetaSweep() {
  const CorpusOptions o;
  const auto train = GenerateMixtures(o, "train");
  const auto val = GenerateMixtures(o, "val");
  TrainConfig c;
  c.epochs = kSweepEpochs;
  c.validate_every = 10;
  c.learning_rate = kDeskLearningRate;
  c.loss.kind = LossKind::kMagComp;
  c.loss.partner = LossKind::kCComp;
  const std::vector<double> betas = {0.0, 0.3, 0.7, 1.0};
  const SweepResult r = GridSearch(SweepParameter::kBeta, betas, train, val, c, 3);
  std::ostringstream detail;
  double best_interior = -1e9;
  for (const SweepRow& row : r.rows) {
    detail << Fmt("beta %.1f: %.3f dB; ", row.param_value, row.val_metric);
    if (row.param_value > 0.0 && row.param_value < 1.0) {
      best_interior = std::max(best_interior, row.val_metric);
    }
  }
  const bool ok = best_interior > r.rows.front().val_metric && best_interior > r.rows.back().val_metric;
  return Check(ok, detail.str());
}

Outcome Distributions() {
  CorpusOptions o;
  o.train = 100;  // 100 x 3 s = 5 min
  std::vector<AudioBuffer> clips;
  for (auto& m : GenerateMixtures(o, "train")) clips.push_back(std::move(m.noisy));
  const DistributionReport r = SpectralDistributions(clips);
  const double lin = r.linear.excess_kurtosis, comp = r.compressed.excess_kurtosis;
  const double lg = r.log.excess_kurtosis;
  return Check(lin > comp && std::abs(lg) < lin,
               Fmt("excess kurtosis linear %.2f, compressed %.2f, log %.2f", lin, comp, lg));
}

Outcome RealTime() {
  ModelConfig cfg = ModelConfig::PaperSize();
  const ModelParams p = ModelParams::Initialize(cfg);
  StreamingEnhancer engine(p);
  std::mt19937_64 rng(9);
  const AudioBuffer a = RandomAudio(rng, 256 * 600);
  std::vector<double> chunk(256);
  for (int warm = 0; warm < 20; ++warm) {
    std::copy_n(a.samples.begin() + warm * 256, 256, chunk.begin());
    engine.Step(chunk);
  }
  const int frames = 500;
  const auto start = std::chrono::steady_clock::now();
  for (int n = 0; n < frames; ++n) {
    std::copy_n(a.samples.begin() + (n + 20) * 256 % (a.size() - 256), 256, chunk.begin());
    engine.Step(chunk);
  }
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count() /
      frames;
  const std::string detail = Fmt("%.3f ms per 16 ms frame (%zu parameters)", ms, p.ParameterCount());
  if (ms < 16.0) return {Verdict::kPass, detail};
  return {ms < 32.0 ? Verdict::kWarn : Verdict::kFail, detail + ", over the 16 ms budget"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "STFT round trip and streaming equivalence", 10, StftRoundTrip},
      {2, "loss values match the scalar reference", 30, LossOracles},
      {3, "analytic gradients match finite differences", 300, Gradients},
      {4, "loss ranges and invariances", 60, RangesAndInvariances},
      {5, "SDW closed-form minimiser", 60, SdwClosedForm},
      {6, "overfit experiment for every distance loss", 900, Overfit},
      {7, "interior beta beats both endpoints for the Comp pair", 3600, BetaSweep},
      {8, "kurtosis ordering of spectral distributions", 60, Distributions},
      {9, "real-time streaming with the 2.8M-parameter preset", 60, RealTime},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Verdict::kFail, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.budget_s && o.verdict == Verdict::kPass) {
      o = {Verdict::kFail, o.detail + Fmt("; runtime over the %.0f s budget", c.budget_s)};
    }
    const char* tag = o.verdict == Verdict::kPass ? "PASS" : o.verdict == Verdict::kWarn ? "WARN" : "FAIL";
    std::printf("[%s] criterion %d: %s -- %s (%.1f s)\n", tag, c.id, c.title.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    if (o.verdict == Verdict::kFail) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
