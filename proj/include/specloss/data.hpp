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

// Additive mixtures and the synthetic speech/noise generators used for the
// desk-scale corpus.

#ifndef SPECLOSS_DATA_HPP_
#define SPECLOSS_DATA_HPP_

#include <cstdint>
#include <string>

#include "specloss/spectral.hpp"

namespace specloss {

// x = s + n, with n already scaled to the requested SNR.
struct MixtureExample {
  std::string id;
  AudioBuffer noisy;
  AudioBuffer speech;
  AudioBuffer noise;
  double snr_db = 0.0;
};

double Energy(const AudioBuffer& audio);

// Scales `noise` so that 10 log10(E_s / E_n) == snr_db. Throws UsageError on
// length/rate mismatch or zero energy.
MixtureExample MixAtSnr(const AudioBuffer& speech, const AudioBuffer& noise, double snr_db,
                        std::string id = {});

// Stand-in for read speech: a harmonic source following a random pitch
// contour (80-300 Hz), three time-varying formant resonators, a syllabic
// amplitude envelope (2-8 Hz) and, optionally, an exponentially decaying
// noise reverb tail with RT60 drawn from [0.2, 0.6] s. The last 0.4 s hold
// only the reverb tail. RMS is normalised to 0.05. duration_s in [1, 10].
AudioBuffer SynthUtterance(std::uint64_t seed, double duration_s, bool reverberant = true,
                           double sample_rate = 16000.0);

enum class NoiseKind { kWhite, kPink, kBabble };

std::string NoiseKindName(NoiseKind kind);

// white: iid Gaussian; pink: 1/f power via spectral shaping; babble: eight
// independent synthetic talkers. RMS is normalised to 0.05.
AudioBuffer SynthNoise(std::uint64_t seed, NoiseKind kind, double duration_s,
                       double sample_rate = 16000.0);

// Deterministic 64-bit mix used to derive per-utterance seeds.
std::uint64_t MixSeed(std::uint64_t a, std::uint64_t b);

}  // namespace specloss

#endif  // SPECLOSS_DATA_HPP_
