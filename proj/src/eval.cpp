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

#include "specloss/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

#include "specloss/errors.hpp"

namespace specloss {

namespace {

void RequireComparable(const AudioBuffer& est, const AudioBuffer& ref) {
  if (est.size() != ref.size()) {
    throw UsageError("estimate has " + std::to_string(est.size()) + " samples, reference " +
                     std::to_string(ref.size()));
  }
}

double RatioDb(double signal, double error) {
  if (!(error > 0.0) || signal / error > std::pow(10.0, kMetricCeilingDb / 10.0)) {
    return kMetricCeilingDb;
  }
  return 10.0 * std::log10(signal / error);
}

// Running central moments (Terriberry's update).
struct Moments {
  double n = 0.0, mean = 0.0, m2 = 0.0, m3 = 0.0, m4 = 0.0;

  void Push(double x) {
    const double n1 = n;
    n += 1.0;
    const double delta = x - mean;
    const double delta_n = delta / n;
    const double delta_n2 = delta_n * delta_n;
    const double term1 = delta * delta_n * n1;
    mean += delta_n;
    m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * m2 - 4.0 * delta_n * m3;
    m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * m2;
    m2 += term1;
  }
  double Variance() const { return n > 0.0 ? m2 / n : 0.0; }
  double ExcessKurtosis() const { return m2 > 0.0 ? n * m4 / (m2 * m2) - 3.0 : 0.0; }
};

DomainDistribution Summarize(std::string name, const std::vector<double>& values, int bins) {
  Moments m;
  for (double v : values) m.Push(v);
  DomainDistribution d;
  d.domain = std::move(name);
  d.sample_count = values.size();
  d.excess_kurtosis = m.ExcessKurtosis();
  const double sd = std::sqrt(m.Variance());
  std::vector<double> standardized(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    standardized[i] = sd > 0.0 ? (values[i] - m.mean) / sd : 0.0;
  }
  d.histogram = BuildHistogram(standardized, bins, -6.0, 6.0);
  return d;
}

}  // namespace

double SiSdr(const AudioBuffer& estimate, const AudioBuffer& reference) {
  RequireComparable(estimate, reference);
  double dot = 0.0, ref_energy = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    dot += estimate.samples[i] * reference.samples[i];
    ref_energy += reference.samples[i] * reference.samples[i];
  }
  if (!(ref_energy > 0.0)) throw UsageError("SI-SDR reference has zero energy");
  const double alpha = dot / ref_energy;
  double target = 0.0, error = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double t = alpha * reference.samples[i];
    const double e = t - estimate.samples[i];
    target += t * t;
    error += e * e;
  }
  if (!(target > 0.0)) return -kMetricCeilingDb;
  return RatioDb(target, error);
}

double SdrDb(const AudioBuffer& estimate, const AudioBuffer& reference) {
  RequireComparable(estimate, reference);
  double signal = 0.0, error = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double e = reference.samples[i] - estimate.samples[i];
    signal += reference.samples[i] * reference.samples[i];
    error += e * e;
  }
  if (!(signal > 0.0)) throw UsageError("SDR reference has zero energy");
  return RatioDb(signal, error);
}

void MetricReport::Add(const std::string& id, const std::string& metric, double value) {
  rows_.push_back({id, metric, value});
}

std::vector<std::string> MetricReport::Metrics() const {
  std::vector<std::string> out;
  for (const Row& r : rows_) {
    if (std::find(out.begin(), out.end(), r.metric) == out.end()) out.push_back(r.metric);
  }
  return out;
}

std::vector<double> MetricReport::Values(const std::string& metric) const {
  std::vector<double> out;
  for (const Row& r : rows_) {
    if (r.metric == metric) out.push_back(r.value);
  }
  return out;
}

double MetricReport::Mean(const std::string& metric) const {
  const auto v = Values(metric);
  if (v.empty()) throw UsageError("no values recorded for metric '" + metric + "'");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

void MetricReport::WriteCsv(std::ostream& out) const {
  out << "utterance_id,metric,value\n";
  out << std::setprecision(10);
  for (const Row& r : rows_) out << r.id << ',' << r.metric << ',' << r.value << '\n';
  for (const auto& m : Metrics()) out << "mean," << m << ',' << Mean(m) << '\n';
}

MetricReport EvaluateModel(const ModelParams& params, std::span<const MixtureExample> corpus,
                           const StftConfig& stft) {
  if (corpus.empty()) throw UsageError("cannot evaluate an empty corpus");
  MetricReport report;
  for (const MixtureExample& ex : corpus) {
    const Enhancement e = Enhance(params, ex.noisy, stft);
    report.Add(ex.id, "si_sdr_noisy", SiSdr(ex.noisy, ex.speech));
    report.Add(ex.id, "si_sdr", SiSdr(e.audio, ex.speech));
    report.Add(ex.id, "sdr_noisy", SdrDb(ex.noisy, ex.speech));
    report.Add(ex.id, "sdr", SdrDb(e.audio, ex.speech));
  }
  return report;
}

double ExcessKurtosis(std::span<const double> values) {
  if (values.size() < 2) throw UsageError("kurtosis needs at least two values");
  Moments m;
  for (double v : values) m.Push(v);
  return m.ExcessKurtosis();
}

Histogram BuildHistogram(std::span<const double> values, int bins, double lo, double hi) {
  if (bins < 1 || !(hi > lo)) throw UsageError("histogram needs bins >= 1 and hi > lo");
  Histogram h;
  h.lo = lo;
  h.hi = hi;
  const double width = (hi - lo) / bins;
  h.centers.resize(bins);
  for (int i = 0; i < bins; ++i) h.centers[i] = lo + (i + 0.5) * width;
  h.counts.assign(bins, 0);
  for (double v : values) {
    const double pos = std::floor((v - lo) / width);
    const int idx = static_cast<int>(std::clamp(pos, 0.0, static_cast<double>(bins - 1)));
    ++h.counts[idx];
  }
  return h;
}

void DistributionReport::WriteCsv(std::ostream& out) const {
  out << "domain,bin_center,count\n";
  out << std::setprecision(8);
  for (const DomainDistribution* d : {&linear, &compressed, &log}) {
    for (std::size_t i = 0; i < d->histogram.counts.size(); ++i) {
      out << d->domain << ',' << d->histogram.centers[i] << ',' << d->histogram.counts[i] << '\n';
    }
  }
}

DistributionReport SpectralDistributions(std::span<const AudioBuffer> clips,
                                         const StftConfig& stft, int bins, double compression) {
  double seconds = 0.0;
  for (const auto& c : clips) seconds += c.duration();
  if (seconds < kMinDistributionSeconds) {
    throw UsageError("distribution analysis needs at least 60 s of audio, got " +
                     std::to_string(seconds) + " s");
  }
  std::vector<double> linear, compressed, log_mag;
  for (const auto& clip : clips) {
    const ComplexSpectrogram spec = Stft(clip, stft);
    for (Eigen::Index i = 0; i < spec.bins.size(); ++i) {
      const Complex x = spec.bins.data()[i];
      const double mag = std::abs(x);
      linear.push_back(x.real());
      compressed.push_back(mag > 0.0 ? x.real() * std::pow(mag, compression - 1.0) : 0.0);
      log_mag.push_back(std::log10(std::max(mag, 1e-10)));
    }
  }
  DistributionReport r;
  r.linear = Summarize("linear", linear, bins);
  r.compressed = Summarize("compressed", compressed, bins);
  r.log = Summarize("log", log_mag, bins);
  return r;
}

}  // namespace specloss
