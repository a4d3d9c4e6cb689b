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

#include "specloss/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "specloss/errors.hpp"

namespace specloss {

namespace {

bool IsPowerOfTwo(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Windowed transform of one fft_size frame; the kernel shared by the batch
// and streaming analysers.
Eigen::VectorXcd AnalyzeFrame(std::span<const double> frame,
                              const std::vector<double>& window,
                              const Fft& fft, std::vector<Complex>& scratch) {
  const int n = fft.size();
  scratch.resize(n);
  for (int i = 0; i < n; ++i) scratch[i] = Complex(frame[i] * window[i], 0.0);
  fft.Forward(scratch);
  Eigen::VectorXcd out(n / 2 + 1);
  for (int k = 0; k <= n / 2; ++k) out[k] = scratch[k];
  // Real input: DC and Nyquist are real up to rounding; make it exact.
  out[0] = Complex(out[0].real(), 0.0);
  out[n / 2] = Complex(out[n / 2].real(), 0.0);
  return out;
}

// Inverse transform of one one-sided column, multiplied by the synthesis
// window. Writes fft_size samples into `out`.
void SynthesizeFrame(const Eigen::Ref<const Eigen::VectorXcd>& column,
                     const std::vector<double>& window, const Fft& fft,
                     std::vector<Complex>& scratch, std::vector<double>& out) {
  const int n = fft.size();
  const int half = n / 2;
  scratch.resize(n);
  scratch[0] = Complex(column[0].real(), 0.0);
  scratch[half] = Complex(column[half].real(), 0.0);
  for (int k = 1; k < half; ++k) {
    scratch[k] = column[k];
    scratch[n - k] = std::conj(column[k]);
  }
  fft.Inverse(scratch);
  out.resize(n);
  for (int i = 0; i < n; ++i) out[i] = scratch[i].real() * window[i];
}

}  // namespace

void StftConfig::Validate() const {
  if (!IsPowerOfTwo(fft_size)) {
    throw ConfigError("fft_size must be a power of two, got " + std::to_string(fft_size));
  }
  if (fft_size != 2 * frame_shift) {
    throw ConfigError("fft_size must equal 2 * frame_shift (50% overlap), got fft_size=" +
                      std::to_string(fft_size) + " frame_shift=" + std::to_string(frame_shift));
  }
  if (fft_size < 4) throw ConfigError("fft_size must be at least 4");
  if (!(sample_rate > 0.0)) throw ConfigError("sample_rate must be positive");
}

Fft::Fft(int size) : size_(size) {
  if (!IsPowerOfTwo(size)) {
    throw ConfigError("FFT size must be a power of two, got " + std::to_string(size));
  }
  bit_reverse_.resize(size);
  int bits = 0;
  while ((1 << bits) < size) ++bits;
  for (int i = 0; i < size; ++i) {
    int r = 0;
    for (int b = 0; b < bits; ++b) {
      if (i & (1 << b)) r |= 1 << (bits - 1 - b);
    }
    bit_reverse_[i] = r;
  }
  twiddles_.resize(std::max(1, size / 2));
  for (int k = 0; k < size / 2; ++k) {
    const double angle = -2.0 * std::numbers::pi * k / size;
    twiddles_[k] = Complex(std::cos(angle), std::sin(angle));
  }
}

void Fft::Forward(std::span<Complex> data) const { Transform(data, false); }

void Fft::Inverse(std::span<Complex> data) const {
  Transform(data, true);
  const double scale = 1.0 / size_;
  for (auto& v : data) v *= scale;
}

void Fft::Transform(std::span<Complex> data, bool inverse) const {
  if (static_cast<int>(data.size()) != size_) {
    throw UsageError("FFT input has " + std::to_string(data.size()) + " points, expected " +
                     std::to_string(size_));
  }
  for (int i = 0; i < size_; ++i) {
    if (i < bit_reverse_[i]) std::swap(data[i], data[bit_reverse_[i]]);
  }
  for (int len = 2; len <= size_; len <<= 1) {
    const int half = len / 2;
    const int stride = size_ / len;
    for (int start = 0; start < size_; start += len) {
      for (int j = 0; j < half; ++j) {
        Complex w = twiddles_[j * stride];
        if (inverse) w = std::conj(w);
        const Complex t = w * data[start + j + half];
        data[start + j + half] = data[start + j] - t;
        data[start + j] += t;
      }
    }
  }
}

std::vector<double> SqrtHannWindow(int size) {
  std::vector<double> w(size);
  for (int i = 0; i < size; ++i) w[i] = std::sin(std::numbers::pi * i / size);
  return w;
}

int NumFrames(std::size_t length, const StftConfig& config) {
  const std::size_t shift = config.frame_shift;
  return static_cast<int>((length + shift - 1) / shift) + 1;
}

ComplexSpectrogram Stft(const AudioBuffer& audio, const StftConfig& config) {
  config.Validate();
  if (audio.sample_rate != config.sample_rate) {
    throw ConfigError("audio sample rate " + std::to_string(audio.sample_rate) +
                      " does not match STFT sample rate " + std::to_string(config.sample_rate));
  }
  const int n_fft = config.fft_size;
  const int shift = config.frame_shift;
  const int frames = NumFrames(audio.size(), config);

  std::vector<double> padded(static_cast<std::size_t>(frames + 1) * shift, 0.0);
  std::copy(audio.samples.begin(), audio.samples.end(), padded.begin() + shift);

  const Fft fft(n_fft);
  const auto window = SqrtHannWindow(n_fft);
  std::vector<Complex> scratch;

  ComplexSpectrogram spec;
  spec.config = config;
  spec.signal_length = audio.size();
  spec.bins.resize(config.num_bins(), frames);
  for (int n = 0; n < frames; ++n) {
    std::span<const double> frame(padded.data() + static_cast<std::size_t>(n) * shift, n_fft);
    spec.bins.col(n) = AnalyzeFrame(frame, window, fft, scratch);
  }
  return spec;
}

AudioBuffer Istft(const ComplexSpectrogram& spec) {
  spec.config.Validate();
  if (spec.num_bins() != spec.config.num_bins()) {
    throw UsageError("spectrogram has " + std::to_string(spec.num_bins()) +
                     " bins, config expects " + std::to_string(spec.config.num_bins()));
  }
  if (spec.num_frames() < 1) throw UsageError("spectrogram has no frames");

  const int n_fft = spec.config.fft_size;
  const int shift = spec.config.frame_shift;
  const int frames = spec.num_frames();

  const Fft fft(n_fft);
  const auto window = SqrtHannWindow(n_fft);
  std::vector<Complex> scratch;
  std::vector<double> frame;

  std::vector<double> padded(static_cast<std::size_t>(frames + 1) * shift, 0.0);
  for (int n = 0; n < frames; ++n) {
    SynthesizeFrame(spec.bins.col(n), window, fft, scratch, frame);
    double* dst = padded.data() + static_cast<std::size_t>(n) * shift;
    for (int i = 0; i < n_fft; ++i) dst[i] += frame[i];
  }

  std::size_t length = static_cast<std::size_t>(frames - 1) * shift;
  if (spec.signal_length > 0) length = std::min(length, spec.signal_length);

  AudioBuffer out;
  out.sample_rate = spec.config.sample_rate;
  out.samples.assign(padded.begin() + shift, padded.begin() + shift + length);
  return out;
}

double SpectralEnergy(const ComplexSpectrogram& spec) {
  const int half = spec.num_bins() - 1;
  double energy = 0.0;
  for (int n = 0; n < spec.num_frames(); ++n) {
    for (int k = 0; k <= half; ++k) {
      const double weight = (k == 0 || k == half) ? 1.0 : 2.0;
      energy += weight * std::norm(spec.bins(k, n));
    }
  }
  return energy / spec.config.fft_size;
}

StreamingStft::StreamingStft(const StftConfig& config)
    : config_(config), fft_(config.fft_size), window_(SqrtHannWindow(config.fft_size)) {
  config_.Validate();
  Reset();
}

void StreamingStft::Reset() { buffer_.assign(config_.fft_size, 0.0); }

Eigen::VectorXcd StreamingStft::Step(std::span<const double> chunk) {
  const auto shift = static_cast<std::size_t>(config_.frame_shift);
  if (chunk.size() != shift) {
    throw UsageError("streaming STFT expects " + std::to_string(shift) + " samples per step, got " +
                     std::to_string(chunk.size()));
  }
  std::copy(buffer_.begin() + shift, buffer_.end(), buffer_.begin());
  std::copy(chunk.begin(), chunk.end(), buffer_.begin() + shift);
  thread_local std::vector<Complex> scratch;
  return AnalyzeFrame(buffer_, window_, fft_, scratch);
}

StreamingIstft::StreamingIstft(const StftConfig& config)
    : config_(config), fft_(config.fft_size), window_(SqrtHannWindow(config.fft_size)) {
  config_.Validate();
  Reset();
}

void StreamingIstft::Reset() { overlap_.assign(config_.frame_shift, 0.0); }

std::vector<double> StreamingIstft::Step(const Eigen::VectorXcd& frame) {
  if (frame.size() != config_.num_bins()) {
    throw UsageError("streaming ISTFT expects " + std::to_string(config_.num_bins()) +
                     " bins, got " + std::to_string(frame.size()));
  }
  const int shift = config_.frame_shift;
  thread_local std::vector<Complex> scratch;
  thread_local std::vector<double> synth;
  SynthesizeFrame(frame, window_, fft_, scratch, synth);
  std::vector<double> out(shift);
  for (int i = 0; i < shift; ++i) {
    // Same accumulation order as the batch path: 0 + previous + current.
    out[i] = (0.0 + overlap_[i]) + synth[i];
    overlap_[i] = synth[i + shift];
  }
  return out;
}

}  // namespace specloss
