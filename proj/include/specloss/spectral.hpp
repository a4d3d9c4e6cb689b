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

// Short-time Fourier analysis/synthesis with a square-root Hann window pair
// at 50% overlap. Batch and frame-by-frame variants share one frame kernel,
// so streaming output is bit-identical to the batch transform.
//
// Conventions:
//   * forward DFT is un-normalized, inverse carries 1/fft_size;
//   * frame n covers input samples [(n-1)*shift, (n+1)*shift), i.e. the
//     signal is preceded by `frame_shift` zeros and zero-padded at the end
//     until every input sample is covered by two frames.

#ifndef SPECLOSS_SPECTRAL_HPP_
#define SPECLOSS_SPECTRAL_HPP_

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace specloss {

using Complex = std::complex<double>;

enum class WindowKind { kSqrtHann };

struct StftConfig {
  int fft_size = 512;
  int frame_shift = 256;
  WindowKind window = WindowKind::kSqrtHann;
  double sample_rate = 16000.0;

  int num_bins() const { return fft_size / 2 + 1; }
  // Throws ConfigError if fft_size is not a power of two or != 2*frame_shift.
  void Validate() const;

  bool operator==(const StftConfig&) const = default;
};

struct AudioBuffer {
  std::vector<double> samples;
  double sample_rate = 16000.0;

  std::size_t size() const { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

// K x N grid: rows are frequency bins, columns are frames (column-major, so a
// frame is contiguous).
struct ComplexSpectrogram {
  Eigen::MatrixXcd bins;
  StftConfig config;
  // Number of time-domain samples the spectrogram was computed from; istft
  // trims its output to this length.
  std::size_t signal_length = 0;

  int num_bins() const { return static_cast<int>(bins.rows()); }
  int num_frames() const { return static_cast<int>(bins.cols()); }
};

// In-place iterative radix-2 FFT of a fixed power-of-two size.
class Fft {
 public:
  explicit Fft(int size);

  int size() const { return size_; }
  void Forward(std::span<Complex> data) const;
  // Includes the 1/size scaling.
  void Inverse(std::span<Complex> data) const;

 private:
  void Transform(std::span<Complex> data, bool inverse) const;

  int size_;
  std::vector<int> bit_reverse_;
  std::vector<Complex> twiddles_;  // exp(-2*pi*i*k/size), k < size/2
};

// sqrt of the periodic Hann window; w[n]^2 + w[n + N/2]^2 == 1.
std::vector<double> SqrtHannWindow(int size);

// Number of frames stft() produces for `length` samples.
int NumFrames(std::size_t length, const StftConfig& config);

ComplexSpectrogram Stft(const AudioBuffer& audio, const StftConfig& config = {});
AudioBuffer Istft(const ComplexSpectrogram& spec);

// Parseval energy of a one-sided spectrogram: equals the time-domain energy
// of the analysed signal for a COLA-normalized window pair.
double SpectralEnergy(const ComplexSpectrogram& spec);

// Frame-by-frame analysis. Each Step consumes frame_shift new samples and
// returns the next spectrogram column.
class StreamingStft {
 public:
  explicit StreamingStft(const StftConfig& config = {});

  const StftConfig& config() const { return config_; }
  void Reset();
  Eigen::VectorXcd Step(std::span<const double> chunk);

 private:
  StftConfig config_;
  Fft fft_;
  std::vector<double> window_;
  std::vector<double> buffer_;  // last fft_size samples, oldest first
};

// Frame-by-frame overlap-add synthesis. Each Step consumes one spectrogram
// column and emits the frame_shift samples that are now complete.
class StreamingIstft {
 public:
  explicit StreamingIstft(const StftConfig& config = {});

  void Reset();
  std::vector<double> Step(const Eigen::VectorXcd& frame);

 private:
  StftConfig config_;
  Fft fft_;
  std::vector<double> window_;
  std::vector<double> overlap_;
};

}  // namespace specloss

#endif  // SPECLOSS_SPECTRAL_HPP_
