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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "specloss/errors.hpp"
#include "support/oracles.hpp"

using namespace specloss;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ModelConfig SmallConfig() {
  ModelConfig c;
  c.input_bins = 16;
  c.embed_size = 6;
  c.gru_size = 8;
  c.gru_layers = 2;
  c.hidden_sizes = {7, 5};
  c.output_bins = 16;
  c.seed = 4;
  return c;
}

MatrixXd RandomFeatures(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> g;
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

AudioBuffer Noise(std::uint64_t seed, std::size_t n, double scale = 0.1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  AudioBuffer a;
  a.samples.resize(n);
  for (double& v : a.samples) v = g(rng);
  return a;
}

// Weights big enough that the gates leave their linear regime.
ModelParams ScaledSmallModel(double scale) {
  ModelParams p = ModelParams::Initialize(SmallConfig());
  for (auto& a : p.Arrays()) {
    for (std::size_t i = 0; i < a.size; ++i) a.data[i] *= scale;
  }
  p.Touch();
  return p;
}

}  // namespace

TEST_CASE("presets", "[model]") {
  CHECK(ModelParams::Initialize(ModelConfig::PaperSize()).ParameterCount() == 2779255);
  CHECK(ModelConfig::FromPreset("tiny") == ModelConfig::Tiny());
  CHECK(ModelConfig::FromPreset("paper") == ModelConfig::PaperSize());
  CHECK_THROWS_AS(ModelConfig::FromPreset("huge"), ConfigError);
  ModelConfig bad;
  bad.gru_layers = 0;
  CHECK_THROWS_AS(bad.Validate(), ConfigError);
}

TEST_CASE("initialisation is seeded and bounded", "[model]") {
  const ModelParams a = ModelParams::Initialize(SmallConfig());
  const ModelParams b = ModelParams::Initialize(SmallConfig());
  const auto aa = a.Arrays(), ba = b.Arrays();
  REQUIRE(aa.size() == ba.size());
  for (std::size_t i = 0; i < aa.size(); ++i) {
    for (std::size_t j = 0; j < aa[i].size; ++j) CHECK(aa[i].data[j] == ba[i].data[j]);
  }
  const double bound = 1.0 / std::sqrt(16.0);
  CHECK(a.embed.weight.cwiseAbs().maxCoeff() <= bound);
  CHECK(aa.front().name == "embed.weight");
  CHECK(aa.back().name == "output.bias");
}

TEST_CASE("GRU cell special cases", "[model]") {
  GruLayer zero;
  zero.input_weight = RowMatrix::Zero(9, 4);
  zero.recurrent_weight = RowMatrix::Zero(9, 3);
  zero.bias = VectorXd::Zero(9);
  VectorXd h(3);
  h << 1.0, -2.0, 0.5;
  CHECK((GruCell(zero, VectorXd::Ones(4), h) - 0.5 * h).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(GruCell(zero, VectorXd::Ones(5), h), UsageError);

  const ModelParams p = ScaledSmallModel(2.0);
  const GruLayer& g = p.gru[0];
  std::mt19937_64 rng(1);
  const VectorXd x = RandomFeatures(rng, 6, 1).col(0);
  const VectorXd out = GruCell(g, x, VectorXd::Zero(8));
  const VectorXd pre = g.input_weight * x + g.bias;
  for (int i = 0; i < 8; ++i) {
    const double z = 1.0 / (1.0 + std::exp(-pre[i]));
    CHECK(out[i] == Catch::Approx(z * std::tanh(pre[16 + i])));
  }
}

TEST_CASE("GRU cell matches a scalar reference over a sequence", "[model]") {
  const ModelParams p = ScaledSmallModel(3.0);
  const GruLayer& g = p.gru[1];
  std::mt19937_64 rng(2);
  VectorXd h = VectorXd::Zero(8);
  std::vector<double> hs(8, 0.0);
  for (int step = 0; step < 3; ++step) {
    const VectorXd x = RandomFeatures(rng, 8, 1).col(0);
    h = GruCell(g, x, h);
    hs = specloss::testing::ScalarGruStep(g.input_weight, g.recurrent_weight, g.bias,
                                          std::vector<double>(x.data(), x.data() + 8), hs);
    for (int i = 0; i < 8; ++i) CHECK(std::abs(h[i] - hs[i]) < 1e-10);
  }
}

TEST_CASE("forward is causal, bounded and deterministic", "[model]") {
  const ModelParams p = ScaledSmallModel(2.0);
  std::mt19937_64 rng(3);
  MatrixXd x = RandomFeatures(rng, 16, 12);
  const MatrixXd g = Forward(p, x);
  CHECK(g.minCoeff() > 0.0);
  CHECK(g.maxCoeff() < 1.0);
  CHECK(Forward(p, x) == g);
  x(3, 7) += 1.0;
  const MatrixXd g2 = Forward(p, x);
  CHECK(g2.leftCols(7) == g.leftCols(7));
  CHECK(g2.col(7) != g.col(7));

  x(0, 0) = std::nan("");
  CHECK_THROWS_AS(Forward(p, x), UsageError);
  CHECK_THROWS_AS(Forward(p, MatrixXd::Zero(15, 3)), UsageError);
}

TEST_CASE("frame-by-frame inference equals the batch forward", "[model]") {
  const ModelParams p = ScaledSmallModel(2.0);
  std::mt19937_64 rng(4);
  const MatrixXd x = RandomFeatures(rng, 16, 20);
  const MatrixXd batch = Forward(p, x);
  std::vector<VectorXd> state;
  for (int n = 0; n < 20; ++n) {
    const VectorXd out = ForwardStep(p, x.col(n), state);
    CHECK((out - batch.col(n)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("backward matches finite differences for every array", "[model]") {
  const ModelParams p = ScaledSmallModel(2.0);
  std::mt19937_64 rng(5);
  const MatrixXd x = RandomFeatures(rng, 16, 5);
  const MatrixXd weights = RandomFeatures(rng, 16, 5);
  // L = sum(weights .* gains), so dL/dgains = weights.
  ForwardCache cache;
  Forward(p, x, &cache);
  ModelParams grads = Backward(p, cache, weights);

  ModelParams probe = p;
  auto loss = [&]() { return (Forward(probe, x).array() * weights.array()).sum(); };
  auto g_arrays = grads.Arrays();
  auto p_arrays = probe.Arrays();
  const double h = 1e-6;
  for (std::size_t a = 0; a < p_arrays.size(); ++a) {
    double worst = 0.0;
    for (std::size_t i = 0; i < p_arrays[a].size; ++i) {
      double& theta = p_arrays[a].data[i];
      const double saved = theta;
      theta = saved + h;
      const double up = loss();
      theta = saved - h;
      const double down = loss();
      theta = saved;
      const double num = (up - down) / (2.0 * h);
      const double an = g_arrays[a].data[i];
      worst = std::max(worst, std::abs(an - num) / std::max({std::abs(an), std::abs(num), 1e-6}));
    }
    INFO(p_arrays[a].name);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("backward is linear in the upstream gradient", "[model]") {
  const ModelParams p = ScaledSmallModel(1.0);
  std::mt19937_64 rng(6);
  const MatrixXd x = RandomFeatures(rng, 16, 6);
  ForwardCache cache;
  Forward(p, x, &cache);
  const ModelParams zero = Backward(p, cache, MatrixXd::Zero(16, 6));
  for (const auto& a : zero.Arrays()) {
    for (std::size_t i = 0; i < a.size; ++i) CHECK(a.data[i] == 0.0);
  }

  const MatrixXd u = RandomFeatures(rng, 16, 6), v = RandomFeatures(rng, 16, 6);
  const ModelParams gu = Backward(p, cache, u), gv = Backward(p, cache, v);
  const ModelParams guv = Backward(p, cache, u + v);
  ModelParams sum = gu;
  sum.AddScaled(gv, 1.0);
  const auto s = sum.Arrays();
  const auto t = guv.Arrays();
  for (std::size_t a = 0; a < s.size(); ++a) {
    for (std::size_t i = 0; i < s[a].size; ++i) {
      CHECK(std::abs(s[a].data[i] - t[a].data[i]) <= 1e-12 * (1.0 + std::abs(t[a].data[i])));
    }
  }
}

TEST_CASE("stale forward caches are rejected", "[model]") {
  ModelParams p = ScaledSmallModel(1.0);
  std::mt19937_64 rng(7);
  ForwardCache cache;
  Forward(p, RandomFeatures(rng, 16, 3), &cache);
  p.Touch();
  CHECK_THROWS_AS(Backward(p, cache, MatrixXd::Zero(16, 3)), UsageError);
  const ModelParams other = p;
  CHECK_THROWS_AS(Backward(other, cache, MatrixXd::Zero(16, 3)), UsageError);
}

TEST_CASE("gain application", "[model]") {
  const AudioBuffer a = Noise(1, 2000);
  const ComplexSpectrogram x = Stft(a);
  const int frames = x.num_frames();
  CHECK(ApplyGain(MatrixXd::Ones(255, frames), x).bins == x.bins);
  CHECK(ApplyGain(MatrixXd::Zero(255, frames), x).bins.cwiseAbs().maxCoeff() == 0.0);
  MatrixXd g = MatrixXd::Ones(255, frames);
  g.row(4).setConstant(0.5);  // network row 4 is bin 5
  const ComplexSpectrogram y = ApplyGain(g, x);
  for (int n = 0; n < frames; ++n) {
    CHECK(std::abs(y.bins(5, n)) == Catch::Approx(0.5 * std::abs(x.bins(5, n))));
    CHECK(std::abs(y.bins(5, n) - 0.5 * x.bins(5, n)) < 1e-15);
  }
  CHECK_THROWS_AS(ApplyGain(MatrixXd::Ones(254, frames), x), UsageError);
}

TEST_CASE("streaming enhancement equals offline enhancement", "[model]") {
  ModelConfig cfg = ModelConfig::Tiny();
  cfg.seed = 9;
  const ModelParams p = ModelParams::Initialize(cfg);
  const AudioBuffer a = Noise(2, 48000);
  const Enhancement offline = Enhance(p, a);
  const AudioBuffer streamed = EnhanceStreaming(p, a);
  REQUIRE(streamed.size() == a.size());
  REQUIRE(offline.audio.size() == a.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(streamed.samples[i] - offline.audio.samples[i]));
  }
  CHECK(worst < 1e-6);
  for (Eigen::Index i = 0; i < offline.enhanced.bins.size(); ++i) {
    CHECK(std::abs(offline.enhanced.bins.data()[i]) <=
          std::abs(Stft(a).bins.data()[i]) + 1e-15);
  }

  StreamingEnhancer engine(p);
  CHECK_THROWS_AS(engine.Step(std::vector<double>(100, 0.0)), UsageError);
  std::vector<double> silence(256, 0.0);
  for (int i = 0; i < 10; ++i) {
    for (double v : engine.Step(silence)) CHECK(v == 0.0);
  }
}
