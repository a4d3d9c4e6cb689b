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

// Synthetic corpus generation and the on-disk corpus layout:
//
//   DIR/manifest.csv                 id,clean_path,noise_path,snr_db
//   DIR/<split>/clean/<id>.wav
//   DIR/<split>/noise/<id>.wav
//
// Paths in the manifest are relative to DIR (absolute paths are accepted
// too). The split of an entry is the prefix of its id: train_, val_, test_.

#ifndef SPECLOSS_CORPUS_HPP_
#define SPECLOSS_CORPUS_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "specloss/data.hpp"

namespace specloss {

struct CorpusOptions {
  int train = 40;
  int validation = 10;
  int test = 10;
  std::uint64_t seed = 1;
  std::vector<double> snr_list = {-6.0, -3.0, 0.0, 3.0, 6.0, 9.0};
  double duration_s = 3.0;
  double sample_rate = 16000.0;
  bool reverberant = true;

  void Validate() const;
};

struct CorpusUtterance {
  std::string id;
  std::string split;
  AudioBuffer speech;
  AudioBuffer noise;  // unscaled; MixAtSnr applies snr_db
  double snr_db = 0.0;
  NoiseKind noise_kind = NoiseKind::kWhite;

  MixtureExample Mix() const;
};

// "train", "val" or "test"; throws UsageError otherwise.
int SplitSize(const CorpusOptions& options, const std::string& split);

// Deterministic in (options.seed, split, index); splits draw from disjoint
// seed streams.
CorpusUtterance GenerateUtterance(const CorpusOptions& options, const std::string& split,
                                  int index);
std::vector<CorpusUtterance> GenerateSplit(const CorpusOptions& options,
                                           const std::string& split);
std::vector<MixtureExample> GenerateMixtures(const CorpusOptions& options,
                                             const std::string& split);

struct ManifestEntry {
  std::string id;
  std::string clean_path;
  std::string noise_path;
  double snr_db = 0.0;
};

std::vector<ManifestEntry> ReadManifest(const std::filesystem::path& manifest);
void WriteManifest(const std::filesystem::path& manifest, const std::vector<ManifestEntry>& rows);

// Generates every split into DIR. DIR must not exist or be empty; the corpus
// is assembled in a sibling staging directory and renamed on success.
void WriteCorpus(const std::filesystem::path& dir, const CorpusOptions& options);

// Loads and mixes the entries of one split. A noise file shorter than its
// clean file is repeated; longer noise is truncated.
std::vector<MixtureExample> LoadCorpusSplit(const std::filesystem::path& dir,
                                            const std::string& split);

}  // namespace specloss

#endif  // SPECLOSS_CORPUS_HPP_
