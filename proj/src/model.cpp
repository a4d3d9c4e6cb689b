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

#include "specloss/model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "specloss/errors.hpp"

namespace specloss {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd Relu(const MatrixXd& x) { return x.cwiseMax(0.0); }

template <typename Derived>
MatrixXd Sigmoid(const Eigen::MatrixBase<Derived>& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

template <typename Derived>
VectorXd SigmoidVec(const Eigen::MatrixBase<Derived>& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

MatrixXd Affine(const DenseLayer& layer, const MatrixXd& in) {
  MatrixXd out = layer.weight * in;
  out.colwise() += layer.bias;
  return out;
}

void FillUniform(double* data, std::size_t size, int fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (std::size_t i = 0; i < size; ++i) data[i] = dist(rng);
}

DenseLayer MakeDense(int in, int out) {
  return {RowMatrix::Zero(out, in), VectorXd::Zero(out)};
}

GruLayer MakeGru(int in, int hidden) {
  return {RowMatrix::Zero(3 * hidden, in), RowMatrix::Zero(3 * hidden, hidden),
          VectorXd::Zero(3 * hidden)};
}

void RequireShape(const MatrixXd& m, Eigen::Index rows, const char* what) {
  if (m.rows() != rows) {
    throw UsageError(std::string(what) + ": expected " + std::to_string(rows) + " rows, got " +
                     std::to_string(m.rows()));
  }
}

}  // namespace

ModelConfig ModelConfig::Tiny() { return ModelConfig{}; }

ModelConfig ModelConfig::PaperSize() {
  ModelConfig c;
  c.embed_size = 400;
  c.gru_size = 400;
  c.gru_layers = 2;
  c.hidden_sizes = {600, 600};
  return c;
}

ModelConfig ModelConfig::FromPreset(const std::string& name) {
  if (name == "tiny") return Tiny();
  if (name == "paper") return PaperSize();
  throw ConfigError("unknown model preset '" + name + "' (expected tiny or paper)");
}

void ModelConfig::Validate() const {
  if (input_bins < 1 || output_bins < 1 || embed_size < 1 || gru_size < 1 || gru_layers < 1) {
    throw ConfigError("model dimensions must be positive");
  }
  for (int s : hidden_sizes) {
    if (s < 1) throw ConfigError("hidden layer sizes must be positive");
  }
}

bool ModelConfig::operator==(const ModelConfig& o) const {
  return input_bins == o.input_bins && embed_size == o.embed_size && gru_size == o.gru_size &&
         gru_layers == o.gru_layers && hidden_sizes == o.hidden_sizes &&
         output_bins == o.output_bins;
}

ModelParams::ModelParams(const ModelConfig& config) : config_(config) {
  config.Validate();
  embed = MakeDense(config.input_bins, config.embed_size);
  int in = config.embed_size;
  for (int l = 0; l < config.gru_layers; ++l) {
    gru.push_back(MakeGru(in, config.gru_size));
    in = config.gru_size;
  }
  for (int s : config.hidden_sizes) {
    hidden.push_back(MakeDense(in, s));
    in = s;
  }
  output = MakeDense(in, config.output_bins);
}

ModelParams ModelParams::Zeros(const ModelConfig& config) { return ModelParams(config); }

ModelParams ModelParams::Initialize(const ModelConfig& config) {
  ModelParams p(config);
  std::mt19937_64 rng(config.seed);
  auto dense = [&](DenseLayer& layer) {
    const int fan_in = static_cast<int>(layer.weight.cols());
    FillUniform(layer.weight.data(), layer.weight.size(), fan_in, rng);
    FillUniform(layer.bias.data(), layer.bias.size(), fan_in, rng);
  };
  dense(p.embed);
  for (GruLayer& g : p.gru) {
    const int hidden = g.hidden_size();
    FillUniform(g.input_weight.data(), g.input_weight.size(),
                static_cast<int>(g.input_weight.cols()), rng);
    FillUniform(g.recurrent_weight.data(), g.recurrent_weight.size(), hidden, rng);
    FillUniform(g.bias.data(), g.bias.size(), hidden, rng);
  }
  for (DenseLayer& h : p.hidden) dense(h);
  dense(p.output);
  return p;
}

std::size_t ModelParams::ParameterCount() const {
  std::size_t n = 0;
  for (const auto& a : Arrays()) n += a.size;
  return n;
}

std::vector<ParamArray> ModelParams::Arrays() {
  std::vector<ParamArray> out;
  auto add_m = [&](std::string name, RowMatrix& m) {
    out.push_back({std::move(name), {static_cast<int>(m.rows()), static_cast<int>(m.cols())},
                   m.data(), static_cast<std::size_t>(m.size())});
  };
  auto add_v = [&](std::string name, VectorXd& v) {
    out.push_back({std::move(name), {static_cast<int>(v.size())}, v.data(),
                   static_cast<std::size_t>(v.size())});
  };
  add_m("embed.weight", embed.weight);
  add_v("embed.bias", embed.bias);
  for (std::size_t l = 0; l < gru.size(); ++l) {
    const std::string p = "gru" + std::to_string(l) + ".";
    add_m(p + "input_weight", gru[l].input_weight);
    add_m(p + "recurrent_weight", gru[l].recurrent_weight);
    add_v(p + "bias", gru[l].bias);
  }
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    const std::string p = "hidden" + std::to_string(l) + ".";
    add_m(p + "weight", hidden[l].weight);
    add_v(p + "bias", hidden[l].bias);
  }
  add_m("output.weight", output.weight);
  add_v("output.bias", output.bias);
  return out;
}

std::vector<ConstParamArray> ModelParams::Arrays() const {
  std::vector<ConstParamArray> out;
  for (const ParamArray& a : const_cast<ModelParams*>(this)->Arrays()) {
    out.push_back({a.name, a.dims, a.data, a.size});
  }
  return out;
}

bool ModelParams::AllFinite() const {
  for (const auto& a : Arrays()) {
    for (std::size_t i = 0; i < a.size; ++i) {
      if (!std::isfinite(a.data[i])) return false;
    }
  }
  return true;
}

void ModelParams::SetZero() {
  for (const auto& a : Arrays()) std::fill(a.data, a.data + a.size, 0.0);
}

void ModelParams::AddScaled(const ModelParams& other, double scale) {
  auto dst = Arrays();
  const auto src = other.Arrays();
  if (dst.size() != src.size()) throw UsageError("parameter sets have different layouts");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].size != src[i].size) throw UsageError("parameter arrays differ in size");
    for (std::size_t j = 0; j < dst[i].size; ++j) dst[i].data[j] += scale * src[i].data[j];
  }
}

VectorXd GruCell(const GruLayer& layer, const VectorXd& x, const VectorXd& h_prev) {
  const int h = layer.hidden_size();
  if (x.size() != layer.input_weight.cols() || h_prev.size() != h) {
    throw UsageError("GRU cell dimension mismatch");
  }
  const VectorXd in = layer.input_weight * x + layer.bias;
  const VectorXd rec_zr = layer.recurrent_weight.topRows(2 * h) * h_prev;
  const VectorXd z = SigmoidVec(in.head(h) + rec_zr.head(h));
  const VectorXd r = SigmoidVec(in.segment(h, h) + rec_zr.tail(h));
  const VectorXd q = r.cwiseProduct(h_prev);
  const VectorXd cand =
      (in.tail(h) + layer.recurrent_weight.bottomRows(h) * q).array().tanh().matrix();
  return (h_prev.array() + z.array() * (cand.array() - h_prev.array())).matrix();
}

MatrixXd Forward(const ModelParams& params, const MatrixXd& features, ForwardCache* cache) {
  const ModelConfig& cfg = params.config();
  RequireShape(features, cfg.input_bins, "model input");
  if (features.cols() < 1) throw UsageError("model input has no frames");
  if (!features.allFinite()) throw UsageError("model input contains NaN or infinite values");

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c = ForwardCache{};
  c.params = &params;
  c.generation = params.generation();
  c.features = features;

  const Eigen::Index frames = features.cols();
  c.embed_pre = Affine(params.embed, features);
  c.embed_out = Relu(c.embed_pre);

  const MatrixXd* layer_in = &c.embed_out;
  for (const GruLayer& g : params.gru) {
    const int h = g.hidden_size();
    GruCache gc;
    gc.input = *layer_in;
    MatrixXd pre = g.input_weight * gc.input;
    pre.colwise() += g.bias;
    gc.update.resize(h, frames);
    gc.reset.resize(h, frames);
    gc.candidate.resize(h, frames);
    gc.prev.resize(h, frames);
    gc.output.resize(h, frames);
    VectorXd state = VectorXd::Zero(h);
    for (Eigen::Index n = 0; n < frames; ++n) {
      const VectorXd rec_zr = g.recurrent_weight.topRows(2 * h) * state;
      const VectorXd z = SigmoidVec(pre.col(n).head(h) + rec_zr.head(h));
      const VectorXd r = SigmoidVec(pre.col(n).segment(h, h) + rec_zr.tail(h));
      const VectorXd q = r.cwiseProduct(state);
      const VectorXd cand =
          (pre.col(n).tail(h) + g.recurrent_weight.bottomRows(h) * q).array().tanh().matrix();
      gc.prev.col(n) = state;
      gc.update.col(n) = z;
      gc.reset.col(n) = r;
      gc.candidate.col(n) = cand;
      state = (state.array() + z.array() * (cand.array() - state.array())).matrix();
      gc.output.col(n) = state;
    }
    c.gru.push_back(std::move(gc));
    layer_in = &c.gru.back().output;
  }

  for (const DenseLayer& d : params.hidden) {
    c.hidden_pre.push_back(Affine(d, *layer_in));
    c.hidden_out.push_back(Relu(c.hidden_pre.back()));
    layer_in = &c.hidden_out.back();
  }
  c.gains = Sigmoid(Affine(params.output, *layer_in));
  return c.gains;
}

ModelParams Backward(const ModelParams& params, const ForwardCache& cache,
                     const MatrixXd& grad_gains) {
  if (cache.params != &params || cache.generation != params.generation()) {
    throw UsageError("forward cache is stale: parameters changed since the forward pass");
  }
  if (grad_gains.rows() != cache.gains.rows() || grad_gains.cols() != cache.gains.cols()) {
    throw UsageError("gain gradient shape does not match the forward pass");
  }
  ModelParams grads = ModelParams::Zeros(params.config());

  // Output sigmoid.
  MatrixXd delta =
      (grad_gains.array() * cache.gains.array() * (1.0 - cache.gains.array())).matrix();
  const MatrixXd& top_in = cache.hidden_out.empty() ? cache.gru.back().output
                                                    : cache.hidden_out.back();
  grads.output.weight = delta * top_in.transpose();
  grads.output.bias = delta.rowwise().sum();
  MatrixXd upstream = params.output.weight.transpose() * delta;

  for (int l = static_cast<int>(params.hidden.size()) - 1; l >= 0; --l) {
    const MatrixXd& in = l > 0 ? cache.hidden_out[l - 1] : cache.gru.back().output;
    delta = (upstream.array() * (cache.hidden_pre[l].array() > 0.0).cast<double>()).matrix();
    grads.hidden[l].weight = delta * in.transpose();
    grads.hidden[l].bias = delta.rowwise().sum();
    upstream = params.hidden[l].weight.transpose() * delta;
  }

  for (int l = static_cast<int>(params.gru.size()) - 1; l >= 0; --l) {
    const GruLayer& g = params.gru[l];
    const GruCache& gc = cache.gru[l];
    const int h = g.hidden_size();
    const Eigen::Index frames = gc.output.cols();
    const auto u_zr = g.recurrent_weight.topRows(2 * h);
    const auto u_h = g.recurrent_weight.bottomRows(h);

    MatrixXd pre_grad(3 * h, frames);  // dL/d(pre-activation) per gate
    MatrixXd reset_prev(h, frames);    // r * h_prev
    VectorXd carry = VectorXd::Zero(h);
    for (Eigen::Index n = frames - 1; n >= 0; --n) {
      const VectorXd dh = upstream.col(n) + carry;
      const auto z = gc.update.col(n).array();
      const auto r = gc.reset.col(n).array();
      const auto cand = gc.candidate.col(n).array();
      const auto prev = gc.prev.col(n).array();

      const VectorXd d_cand_pre = (dh.array() * z * (1.0 - cand * cand)).matrix();
      const VectorXd d_z_pre = (dh.array() * (cand - prev) * z * (1.0 - z)).matrix();
      const VectorXd d_q = u_h.transpose() * d_cand_pre;
      const VectorXd d_r_pre = (d_q.array() * prev * r * (1.0 - r)).matrix();

      pre_grad.col(n).head(h) = d_z_pre;
      pre_grad.col(n).segment(h, h) = d_r_pre;
      pre_grad.col(n).tail(h) = d_cand_pre;
      reset_prev.col(n) = (r * prev).matrix();

      carry = (dh.array() * (1.0 - z) + d_q.array() * r).matrix() +
              u_zr.transpose() * pre_grad.col(n).head(2 * h);
    }
    GruLayer& gg = grads.gru[l];
    gg.input_weight = pre_grad * gc.input.transpose();
    gg.bias = pre_grad.rowwise().sum();
    gg.recurrent_weight.topRows(2 * h) = pre_grad.topRows(2 * h) * gc.prev.transpose();
    gg.recurrent_weight.bottomRows(h) = pre_grad.bottomRows(h) * reset_prev.transpose();
    upstream = g.input_weight.transpose() * pre_grad;
  }

  delta = (upstream.array() * (cache.embed_pre.array() > 0.0).cast<double>()).matrix();
  grads.embed.weight = delta * cache.features.transpose();
  grads.embed.bias = delta.rowwise().sum();
  return grads;
}

VectorXd ForwardStep(const ModelParams& params, const VectorXd& features,
                     std::vector<VectorXd>& state) {
  const ModelConfig& cfg = params.config();
  if (features.size() != cfg.input_bins) throw UsageError("model input has the wrong size");
  if (!features.allFinite()) throw UsageError("model input contains NaN or infinite values");
  if (state.empty()) {
    for (const GruLayer& g : params.gru) state.push_back(VectorXd::Zero(g.hidden_size()));
  }
  if (state.size() != params.gru.size()) throw UsageError("recurrent state has the wrong depth");

  VectorXd x = (params.embed.weight * features + params.embed.bias).cwiseMax(0.0);
  for (std::size_t l = 0; l < params.gru.size(); ++l) {
    state[l] = GruCell(params.gru[l], x, state[l]);
    x = state[l];
  }
  for (const DenseLayer& d : params.hidden) x = (d.weight * x + d.bias).cwiseMax(0.0);
  return SigmoidVec(params.output.weight * x + params.output.bias);
}

ComplexSpectrogram ApplyGain(const MatrixXd& net_gains, const ComplexSpectrogram& noisy) {
  if (net_gains.rows() != noisy.num_bins() - 2 || net_gains.cols() != noisy.num_frames()) {
    throw UsageError("gain matrix is " + std::to_string(net_gains.rows()) + "x" +
                     std::to_string(net_gains.cols()) + ", spectrogram needs " +
                     std::to_string(noisy.num_bins() - 2) + "x" +
                     std::to_string(noisy.num_frames()));
  }
  ComplexSpectrogram out = noisy;
  out.bins = (noisy.bins.array() * ExpandGain(net_gains).array().cast<Complex>()).matrix();
  return out;
}

Enhancement Enhance(const ModelParams& params, const AudioBuffer& noisy, const StftConfig& stft) {
  Enhancement e;
  const ComplexSpectrogram spec = Stft(noisy, stft);
  e.net_gains = Forward(params, ComputeFeatures(spec));
  e.enhanced = ApplyGain(e.net_gains, spec);
  e.audio = Istft(e.enhanced);
  return e;
}

StreamingEnhancer::StreamingEnhancer(const ModelParams& params, const StftConfig& stft)
    : params_(&params),
      stft_config_(stft),
      analysis_(stft),
      normalizer_(stft.num_bins() - 2),
      synthesis_(stft) {
  if (params.config().input_bins != stft.num_bins() - 2 ||
      params.config().output_bins != stft.num_bins() - 2) {
    throw ConfigError("model expects " + std::to_string(params.config().input_bins) +
                      " bins but the STFT provides " + std::to_string(stft.num_bins() - 2));
  }
}

void StreamingEnhancer::Reset() {
  analysis_.Reset();
  normalizer_.Reset();
  state_.clear();
  synthesis_.Reset();
}

std::vector<double> StreamingEnhancer::Step(std::span<const double> chunk) {
  const Eigen::VectorXcd frame = analysis_.Step(chunk);
  const VectorXd log_power = LogPower(frame);
  const VectorXd features = normalizer_.Step(log_power.segment(1, log_power.size() - 2));
  const VectorXd gains = ForwardStep(*params_, features, state_);
  Eigen::VectorXcd enhanced = frame;
  const Eigen::Index last = frame.size() - 1;
  enhanced[0] *= gains[0];
  for (Eigen::Index k = 1; k < last; ++k) enhanced[k] *= gains[k - 1];
  enhanced[last] *= gains[gains.size() - 1];
  return synthesis_.Step(enhanced);
}

AudioBuffer EnhanceStreaming(const ModelParams& params, const AudioBuffer& noisy,
                             const StftConfig& stft) {
  if (noisy.sample_rate != stft.sample_rate) {
    throw ConfigError("audio sample rate does not match the STFT configuration");
  }
  StreamingEnhancer engine(params, stft);
  const std::size_t shift = stft.frame_shift;
  const std::size_t frames = NumFrames(noisy.size(), stft);

  std::vector<double> chunk(shift);
  std::vector<double> out;
  out.reserve(frames * shift);
  for (std::size_t n = 0; n < frames; ++n) {
    std::fill(chunk.begin(), chunk.end(), 0.0);
    const std::size_t begin = n * shift;
    for (std::size_t i = 0; i < shift && begin + i < noisy.size(); ++i) {
      chunk[i] = noisy.samples[begin + i];
    }
    const auto y = engine.Step(chunk);
    out.insert(out.end(), y.begin(), y.end());
  }
  AudioBuffer result;
  result.sample_rate = noisy.sample_rate;
  // Drop the leading chunk (it belongs to the pre-roll) and trim the tail.
  result.samples.assign(out.begin() + shift, out.begin() + shift + noisy.size());
  return result;
}

}  // namespace specloss
