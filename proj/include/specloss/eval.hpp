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

// Objective metrics and spectral value distributions.

#ifndef SPECLOSS_EVAL_HPP_
#define SPECLOSS_EVAL_HPP_

#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "specloss/data.hpp"
#include "specloss/model.hpp"
#include "specloss/spectral.hpp"

namespace specloss {

// Upper clamp for degenerate (error-free) cases, in dB.
inline constexpr double kMetricCeilingDb = 100.0;

// Scale-invariant SDR: alpha = <est, ref>/|ref|^2,
// 10 log10(|alpha ref|^2 / |alpha ref - est|^2). Throws UsageError for a
// zero reference or a length mismatch.
double SiSdr(const AudioBuffer& estimate, const AudioBuffer& reference);

// Scale-variant SDR: 10 log10(|ref|^2 / |ref - est|^2).
double SdrDb(const AudioBuffer& estimate, const AudioBuffer& reference);

class MetricReport {
 public:
  struct Row {
    std::string id;
    std::string metric;
    double value;
  };

  void Add(const std::string& id, const std::string& metric, double value);
  const std::vector<Row>& rows() const { return rows_; }
  std::vector<std::string> Metrics() const;
  std::vector<double> Values(const std::string& metric) const;
  double Mean(const std::string& metric) const;

  // utterance_id,metric,value; corpus means follow as id "mean".
  void WriteCsv(std::ostream& out) const;

 private:
  std::vector<Row> rows_;
};

// SI-SDR / SDR of the enhanced signal and of the unprocessed mixture
// ("*_noisy" rows), each against the clean speech.
MetricReport EvaluateModel(const ModelParams& params, std::span<const MixtureExample> corpus,
                           const StftConfig& stft = {});

// Population excess kurtosis m4/m2^2 - 3 from one pass of running central
// moments.
double ExcessKurtosis(std::span<const double> values);

struct Histogram {
  double lo = -6.0;
  double hi = 6.0;
  std::vector<double> centers;
  std::vector<std::size_t> counts;  // values outside [lo, hi) go to the end bins
};

Histogram BuildHistogram(std::span<const double> values, int bins, double lo, double hi);

struct DomainDistribution {
  std::string domain;
  std::size_t sample_count = 0;
  double excess_kurtosis = 0.0;
  Histogram histogram;  // of the standardised values
};

struct DistributionReport {
  DomainDistribution linear;      // Re{X}
  DomainDistribution compressed;  // Re{|X|^0.3 e^{j phi}}
  DomainDistribution log;         // log10 |X|

  // domain,bin_center,count
  void WriteCsv(std::ostream& out) const;
};

inline constexpr double kMinDistributionSeconds = 60.0;

// Pools every STFT bin of the clips. Throws UsageError for less than 60 s of
// audio in total.
DistributionReport SpectralDistributions(std::span<const AudioBuffer> clips,
                                         const StftConfig& stft = {}, int bins = 121,
                                         double compression = 0.3);

}  // namespace specloss

#endif  // SPECLOSS_EVAL_HPP_
