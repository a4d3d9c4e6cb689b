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

#include "specloss/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <string>

#include "specloss/errors.hpp"

namespace specloss {

namespace {

constexpr char kMagic[4] = {'S', 'P', 'N', 'N'};

void PutU16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void PutU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  void Need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw ParseError(std::string("checkpoint truncated while reading ") + what);
    }
  }
  std::uint16_t U16(const char* what) {
    Need(2, what);
    const std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t U32(const char* what) {
    Need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string Bytes(std::size_t n, const char* what) {
    Need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  float F32() {
    const std::uint32_t bits = U32("payload");
    return std::bit_cast<float>(bits);
  }
  bool AtEnd() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

struct RawArray {
  std::vector<int> dims;
  std::vector<float> values;
};

const RawArray& Find(const std::map<std::string, RawArray>& arrays, const std::string& name) {
  const auto it = arrays.find(name);
  if (it == arrays.end()) throw ParseError("checkpoint is missing array '" + name + "'");
  return it->second;
}

int CountPrefixed(const std::map<std::string, RawArray>& arrays, const std::string& prefix,
                  const std::string& suffix) {
  int n = 0;
  while (arrays.count(prefix + std::to_string(n) + suffix)) ++n;
  return n;
}

}  // namespace

std::vector<std::uint8_t> EncodeCheckpoint(const ModelParams& params) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  PutU16(out, kCheckpointVersion);
  const auto arrays = params.Arrays();
  PutU32(out, static_cast<std::uint32_t>(arrays.size()));
  for (const ConstParamArray& a : arrays) {
    PutU32(out, static_cast<std::uint32_t>(a.name.size()));
    out.insert(out.end(), a.name.begin(), a.name.end());
    PutU32(out, static_cast<std::uint32_t>(a.dims.size()));
    for (int d : a.dims) PutU32(out, static_cast<std::uint32_t>(d));
    for (std::size_t i = 0; i < a.size; ++i) {
      PutU32(out, std::bit_cast<std::uint32_t>(static_cast<float>(a.data[i])));
    }
  }
  return out;
}

ModelParams DecodeCheckpoint(const std::vector<std::uint8_t>& bytes) {
  Reader in(bytes);
  if (in.Bytes(4, "magic") != std::string(kMagic, 4)) {
    throw ParseError("not a checkpoint file (bad magic)");
  }
  const std::uint16_t version = in.U16("version");
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = in.U32("array count");
  std::map<std::string, RawArray> arrays;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = in.U32("name length");
    std::string name = in.Bytes(name_len, "name");
    const std::uint32_t rank = in.U32("rank");
    if (rank < 1 || rank > 2) throw ParseError("array '" + name + "' has unsupported rank");
    RawArray raw;
    std::size_t total = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      const std::uint32_t d = in.U32("dims");
      if (d == 0 || d > (1u << 24)) throw ParseError("array '" + name + "' has a bad dimension");
      raw.dims.push_back(static_cast<int>(d));
      total *= d;
    }
    in.Need(total * 4, "payload");
    raw.values.resize(total);
    for (auto& v : raw.values) v = in.F32();
    if (!arrays.emplace(std::move(name), std::move(raw)).second) {
      throw ParseError("checkpoint contains a duplicate array name");
    }
  }
  if (!in.AtEnd()) throw ParseError("trailing bytes after the last checkpoint array");

  ModelConfig cfg;
  const RawArray& embed = Find(arrays, "embed.weight");
  const RawArray& out = Find(arrays, "output.weight");
  if (embed.dims.size() != 2 || out.dims.size() != 2) {
    throw ParseError("weight arrays must be rank 2");
  }
  cfg.embed_size = embed.dims[0];
  cfg.input_bins = embed.dims[1];
  cfg.output_bins = out.dims[0];
  cfg.gru_layers = CountPrefixed(arrays, "gru", ".bias");
  if (cfg.gru_layers < 1) throw ParseError("checkpoint has no recurrent layers");
  cfg.gru_size = static_cast<int>(Find(arrays, "gru0.bias").values.size() / 3);
  cfg.hidden_sizes.clear();
  const int hidden = CountPrefixed(arrays, "hidden", ".bias");
  for (int l = 0; l < hidden; ++l) {
    cfg.hidden_sizes.push_back(
        static_cast<int>(Find(arrays, "hidden" + std::to_string(l) + ".bias").values.size()));
  }
  if (cfg.gru_size < 1) throw ParseError("recurrent layer has no units");

  ModelParams params = ModelParams::Zeros(cfg);
  const auto expected = params.Arrays();
  if (expected.size() != arrays.size()) throw ParseError("checkpoint has unexpected arrays");
  for (const ParamArray& a : expected) {
    const RawArray& raw = Find(arrays, a.name);
    if (raw.dims != a.dims) throw ParseError("array '" + a.name + "' has an unexpected shape");
    for (std::size_t i = 0; i < a.size; ++i) a.data[i] = raw.values[i];
  }
  return params;
}

void SaveCheckpoint(const std::filesystem::path& path, const ModelParams& params) {
  const auto bytes = EncodeCheckpoint(params);
  std::filesystem::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write checkpoint " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) {
      f.close();
      std::filesystem::remove(tmp);
      throw std::runtime_error("failed writing checkpoint " + path.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

ModelParams LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return DecodeCheckpoint(bytes);
}

}  // namespace specloss
