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

#include "specloss/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "specloss/errors.hpp"

namespace specloss {

namespace {

constexpr double kTargetRms = 0.05;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

int NextPowerOfTwo(std::size_t n) {
  int p = 1;
  while (static_cast<std::size_t>(p) < n) p <<= 1;
  return p;
}

void NormalizeRms(std::vector<double>& x, double target) {
  double e = 0.0;
  for (double v : x) e += v * v;
  if (e <= 0.0) return;
  const double scale = target / std::sqrt(e / static_cast<double>(x.size()));
  for (double& v : x) v *= scale;
}

std::vector<double> FftConvolve(const std::vector<double>& x, const std::vector<double>& h) {
  const int size = NextPowerOfTwo(x.size() + h.size());
  const Fft fft(size);
  std::vector<Complex> a(size), b(size);
  for (std::size_t i = 0; i < x.size(); ++i) a[i] = x[i];
  for (std::size_t i = 0; i < h.size(); ++i) b[i] = h[i];
  fft.Forward(a);
  fft.Forward(b);
  for (int i = 0; i < size; ++i) a[i] *= b[i];
  fft.Inverse(a);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i].real();
  return y;
}

// Spectral shapes of a few vowels: F1, F2, F3 in Hz.
constexpr std::array<std::array<double, 3>, 6> kVowels = {{
    {730, 1090, 2440},
    {270, 2290, 3010},
    {530, 1840, 2480},
    {570, 840, 2410},
    {300, 870, 2240},
    {660, 1720, 2410},
}};

struct Resonator {
  double y1 = 0.0;
  double y2 = 0.0;

  double Process(double x, double freq, double bandwidth, double fs) {
    const double r = std::exp(-std::numbers::pi * bandwidth / fs);
    const double a1 = 2.0 * r * std::cos(kTwoPi * freq / fs);
    const double a2 = -r * r;
    const double y = (1.0 - r) * x + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

}  // namespace

double Energy(const AudioBuffer& audio) {
  double e = 0.0;
  for (double v : audio.samples) e += v * v;
  return e;
}

MixtureExample MixAtSnr(const AudioBuffer& speech, const AudioBuffer& noise, double snr_db,
                        std::string id) {
  if (speech.size() != noise.size()) throw UsageError("speech and noise lengths differ");
  if (speech.sample_rate != noise.sample_rate) {
    throw UsageError("speech and noise sample rates differ");
  }
  if (!std::isfinite(snr_db)) throw UsageError("SNR must be finite");
  const double es = Energy(speech);
  const double en = Energy(noise);
  if (!(es > 0.0) || !(en > 0.0)) throw UsageError("cannot mix signals with zero energy");
  const double scale = std::sqrt(es / (en * std::pow(10.0, snr_db / 10.0)));

  MixtureExample m;
  m.id = std::move(id);
  m.snr_db = snr_db;
  m.speech = speech;
  m.noise = noise;
  m.noisy = speech;
  for (std::size_t i = 0; i < speech.size(); ++i) {
    m.noise.samples[i] = scale * noise.samples[i];
    m.noisy.samples[i] = speech.samples[i] + m.noise.samples[i];
  }
  return m;
}

std::uint64_t MixSeed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finaliser over a combined state
  std::uint64_t z = a * 0x9E3779B97F4A7C15ull + b + 0x632BE59BD9B4E019ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

AudioBuffer SynthUtterance(std::uint64_t seed, double duration_s, bool reverberant,
                           double sample_rate) {
  if (!(duration_s >= 1.0 && duration_s <= 10.0)) {
    throw UsageError("utterance duration must lie in [1, 10] s");
  }
  std::mt19937_64 rng(MixSeed(seed, 0x5EECull));
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * uni(rng); };

  const double fs = sample_rate;
  const auto length = static_cast<std::size_t>(std::llround(duration_s * fs));
  const double active_end = duration_s - 0.4;
  const double lead_in = uniform(0.05, 0.2);

  // Syllable plan: boundaries, amplitudes and vowel targets.
  struct Syllable {
    double start, end, amplitude;
    std::array<double, 3> formants;
  };
  std::vector<Syllable> syllables;
  for (double t = lead_in; t < active_end;) {
    const double rate = uniform(2.0, 8.0);
    double end = std::min(active_end, t + 1.0 / rate);
    if (active_end - end < 0.08) end = active_end;
    const bool pause = uni(rng) < 0.12 && end < active_end;
    Syllable s{t, end, pause ? 0.0 : uniform(0.5, 1.0), {}};
    const auto& v = kVowels[static_cast<std::size_t>(uni(rng) * kVowels.size()) % kVowels.size()];
    for (int i = 0; i < 3; ++i) s.formants[i] = v[i] * uniform(0.9, 1.1);
    syllables.push_back(s);
    t = end;
  }
  if (!syllables.empty()) syllables.back().amplitude = 1.0;

  const double f0_base = uniform(90.0, 220.0);
  const double vib_rate1 = uniform(0.3, 1.2), vib_phase1 = uniform(0.0, kTwoPi);
  const double vib_rate2 = uniform(1.5, 3.5), vib_phase2 = uniform(0.0, kTwoPi);
  const double declination = uniform(-0.08, 0.02);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<double> out(length, 0.0);
  std::array<Resonator, 3> resonators;
  constexpr std::array<double, 3> kBandwidths = {90.0, 120.0, 170.0};
  constexpr std::array<double, 3> kFormantGains = {1.0, 0.6, 0.35};
  double phase = 0.0;
  std::size_t syl = 0;
  for (std::size_t i = 0; i < length; ++i) {
    const double t = static_cast<double>(i) / fs;
    while (syl + 1 < syllables.size() && t >= syllables[syl].end) ++syl;

    double envelope = 0.0;
    std::array<double, 3> formants = kVowels[0];
    if (!syllables.empty()) {
      const Syllable& s = syllables[syl];
      if (t >= s.start && t < s.end) {
        const double x = (t - s.start) / (s.end - s.start);
        envelope = s.amplitude * std::pow(std::sin(std::numbers::pi * x), 2.0);
      }
      // Glide from the previous vowel over the first 30% of the syllable.
      const Syllable& prev = syllables[syl > 0 ? syl - 1 : 0];
      const double glide = std::clamp((t - s.start) / (0.3 * (s.end - s.start)), 0.0, 1.0);
      for (int k = 0; k < 3; ++k) {
        formants[k] = prev.formants[k] + glide * (s.formants[k] - prev.formants[k]);
      }
    }

    double f0 = f0_base * (1.0 + 0.12 * std::sin(kTwoPi * vib_rate1 * t + vib_phase1) +
                           0.04 * std::sin(kTwoPi * vib_rate2 * t + vib_phase2) +
                           declination * t / duration_s);
    f0 = std::clamp(f0, 80.0, 300.0);
    phase += kTwoPi * f0 / fs;
    if (phase > kTwoPi) phase -= kTwoPi;

    // Band-limited harmonic source with a -6 dB/octave tilt.
    const int harmonics = static_cast<int>(0.45 * fs / f0);
    const Complex step(std::cos(phase), std::sin(phase));
    Complex rot = step;
    double source = 0.0;
    for (int k = 1; k <= harmonics; ++k) {
      source += rot.imag() / k;
      rot *= step;
    }
    source += 0.05 * gauss(rng);

    double y = 0.0;
    for (int k = 0; k < 3; ++k) {
      y += kFormantGains[k] * resonators[k].Process(source, formants[k], kBandwidths[k], fs);
    }
    out[i] = envelope * y;
  }

  if (reverberant) {
    const double rt60 = uniform(0.2, 0.6);
    const auto ir_len = static_cast<std::size_t>(1.2 * rt60 * fs);
    std::vector<double> ir(ir_len, 0.0);
    ir[0] = 1.0;
    const double gain = 0.25 * std::sqrt(2.0 * 6.9078 / (rt60 * fs));
    for (std::size_t i = static_cast<std::size_t>(0.002 * fs); i < ir_len; ++i) {
      const double t = static_cast<double>(i) / fs;
      ir[i] = gain * gauss(rng) * std::exp(-6.9078 * t / rt60);
    }
    out = FftConvolve(out, ir);
  }

  NormalizeRms(out, kTargetRms);
  return AudioBuffer{std::move(out), fs};
}

std::string NoiseKindName(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kWhite: return "white";
    case NoiseKind::kPink: return "pink";
    case NoiseKind::kBabble: return "babble";
  }
  return "unknown";
}

AudioBuffer SynthNoise(std::uint64_t seed, NoiseKind kind, double duration_s,
                       double sample_rate) {
  if (!(duration_s > 0.0)) throw UsageError("noise duration must be positive");
  const auto length = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  std::mt19937_64 rng(MixSeed(seed, 0xA015Eull + static_cast<std::uint64_t>(kind)));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> out(length, 0.0);

  switch (kind) {
    case NoiseKind::kWhite:
      for (double& v : out) v = gauss(rng);
      break;
    case NoiseKind::kPink: {
      const int size = NextPowerOfTwo(std::max<std::size_t>(length, 2));
      const Fft fft(size);
      std::vector<Complex> spec(size, 0.0);
      for (int k = 1; k <= size / 2; ++k) {
        const double amp = 1.0 / std::sqrt(static_cast<double>(k));
        const Complex v(gauss(rng) * amp, k == size / 2 ? 0.0 : gauss(rng) * amp);
        spec[k] = v;
        if (k != size / 2) spec[size - k] = std::conj(v);
      }
      fft.Inverse(spec);
      for (std::size_t i = 0; i < length; ++i) out[i] = spec[i].real();
      break;
    }
    case NoiseKind::kBabble: {
      const double talker_duration = std::clamp(duration_s, 1.0, 10.0);
      for (int talker = 0; talker < 8; ++talker) {
        const AudioBuffer voice =
            SynthUtterance(MixSeed(seed, 0xBABB1Eull + talker), talker_duration, true,
                           sample_rate);
        // Random circular offset so the talkers do not share onsets.
        const std::size_t offset =
            static_cast<std::size_t>(rng() % std::max<std::size_t>(voice.size(), 1));
        for (std::size_t i = 0; i < length; ++i) {
          out[i] += voice.samples[(i + offset) % voice.size()];
        }
      }
      break;
    }
  }
  NormalizeRms(out, kTargetRms);
  return AudioBuffer{std::move(out), sample_rate};
}

}  // namespace specloss
