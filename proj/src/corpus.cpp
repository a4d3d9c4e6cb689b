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

#include "specloss/corpus.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "specloss/errors.hpp"
#include "specloss/wav.hpp"

namespace specloss {

namespace fs = std::filesystem;

namespace {

std::uint64_t SplitCode(const std::string& split) {
  if (split == "train") return 1;
  if (split == "val") return 2;
  if (split == "test") return 3;
  throw UsageError("unknown split '" + split + "' (expected train, val or test)");
}

std::string FormatId(const std::string& split, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%04d", split.c_str(), index);
  return buf;
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string Trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && s[i] == ' ') ++i;
  return s.substr(i);
}

fs::path Resolve(const fs::path& dir, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : dir / path;
}

}  // namespace

void CorpusOptions::Validate() const {
  if (train < 0 || validation < 0 || test < 0) throw UsageError("split sizes must be >= 0");
  if (snr_list.empty()) throw UsageError("SNR list must not be empty");
  for (double s : snr_list) {
    if (!std::isfinite(s)) throw UsageError("SNR values must be finite");
  }
  if (!(duration_s >= 1.0 && duration_s <= 10.0)) {
    throw UsageError("utterance duration must lie in [1, 10] s");
  }
}

MixtureExample CorpusUtterance::Mix() const { return MixAtSnr(speech, noise, snr_db, id); }

int SplitSize(const CorpusOptions& options, const std::string& split) {
  switch (SplitCode(split)) {
    case 1: return options.train;
    case 2: return options.validation;
    default: return options.test;
  }
}

CorpusUtterance GenerateUtterance(const CorpusOptions& options, const std::string& split,
                                  int index) {
  const std::uint64_t seed =
      MixSeed(MixSeed(options.seed, SplitCode(split)), static_cast<std::uint64_t>(index));
  std::mt19937_64 rng(seed);
  CorpusUtterance u;
  u.id = FormatId(split, index);
  u.split = split;
  u.snr_db = options.snr_list[rng() % options.snr_list.size()];
  u.noise_kind = static_cast<NoiseKind>(rng() % 3);
  u.speech = SynthUtterance(seed, options.duration_s, options.reverberant, options.sample_rate);
  u.noise = SynthNoise(MixSeed(seed, 0x0153ull), u.noise_kind, options.duration_s,
                       options.sample_rate);
  return u;
}

std::vector<CorpusUtterance> GenerateSplit(const CorpusOptions& options,
                                           const std::string& split) {
  options.Validate();
  std::vector<CorpusUtterance> out;
  const int n = SplitSize(options, split);
  for (int i = 0; i < n; ++i) out.push_back(GenerateUtterance(options, split, i));
  return out;
}

std::vector<MixtureExample> GenerateMixtures(const CorpusOptions& options,
                                             const std::string& split) {
  std::vector<MixtureExample> out;
  for (const auto& u : GenerateSplit(options, split)) out.push_back(u.Mix());
  return out;
}

std::vector<ManifestEntry> ReadManifest(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw ParseError("cannot open manifest " + manifest.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("manifest " + manifest.string() + " is empty");
  const auto header = SplitCsvLine(Trim(line));
  if (header != std::vector<std::string>{"id", "clean_path", "noise_path", "snr_db"}) {
    throw ParseError("manifest header must be id,clean_path,noise_path,snr_db");
  }
  std::vector<ManifestEntry> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = Trim(line);
    if (line.empty()) continue;
    const auto f = SplitCsvLine(line);
    if (f.size() != 4) {
      throw ParseError("manifest line " + std::to_string(line_no) + " does not have 4 fields");
    }
    ManifestEntry e{f[0], f[1], f[2], 0.0};
    try {
      std::size_t used = 0;
      e.snr_db = std::stod(f[3], &used);
      if (used != f[3].size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ParseError("manifest line " + std::to_string(line_no) + " has a bad snr_db");
    }
    rows.push_back(std::move(e));
  }
  return rows;
}

void WriteManifest(const fs::path& manifest, const std::vector<ManifestEntry>& rows) {
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest " + manifest.string());
  out << "id,clean_path,noise_path,snr_db\n";
  for (const auto& r : rows) {
    out << r.id << ',' << r.clean_path << ',' << r.noise_path << ',' << r.snr_db << '\n';
  }
  if (!out) throw std::runtime_error("failed writing manifest " + manifest.string());
}

void WriteCorpus(const fs::path& dir, const CorpusOptions& options) {
  options.Validate();
  if (fs::exists(dir) && !(fs::is_directory(dir) && fs::is_empty(dir))) {
    throw UsageError("output directory " + dir.string() + " exists and is not empty");
  }
  fs::path staging = dir;
  staging += ".staging";
  fs::remove_all(staging);
  try {
    std::vector<ManifestEntry> rows;
    for (const std::string split : {"train", "val", "test"}) {
      fs::create_directories(staging / split / "clean");
      fs::create_directories(staging / split / "noise");
      for (const auto& u : GenerateSplit(options, split)) {
        const std::string clean = split + "/clean/" + u.id + ".wav";
        const std::string noise = split + "/noise/" + u.id + ".wav";
        SaveWav(staging / clean, u.speech);
        SaveWav(staging / noise, u.noise);
        rows.push_back({u.id, clean, noise, u.snr_db});
      }
    }
    WriteManifest(staging / "manifest.csv", rows);
    if (fs::exists(dir)) fs::remove(dir);
    fs::rename(staging, dir);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
}

std::vector<MixtureExample> LoadCorpusSplit(const fs::path& dir, const std::string& split) {
  SplitCode(split);
  const std::string prefix = split + "_";
  std::vector<MixtureExample> out;
  for (const ManifestEntry& e : ReadManifest(dir / "manifest.csv")) {
    if (e.id.rfind(prefix, 0) != 0) continue;
    const AudioBuffer clean = LoadWav(Resolve(dir, e.clean_path));
    AudioBuffer noise = LoadWav(Resolve(dir, e.noise_path));
    if (noise.sample_rate != clean.sample_rate) {
      throw ParseError(e.id + ": clean and noise sample rates differ");
    }
    if (noise.size() == 0) throw ParseError(e.id + ": noise file is empty");
    std::vector<double> fitted(clean.size());
    for (std::size_t i = 0; i < fitted.size(); ++i) fitted[i] = noise.samples[i % noise.size()];
    noise.samples = std::move(fitted);
    out.push_back(MixAtSnr(clean, noise, e.snr_db, e.id));
  }
  return out;
}

}  // namespace specloss
