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

#include "specloss/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "specloss/errors.hpp"

namespace specloss {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t U16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

std::uint32_t U32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void Put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void Put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void PutTag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

bool TagIs(const std::uint8_t* p, const char* tag) {
  return std::equal(p, p + 4, reinterpret_cast<const std::uint8_t*>(tag));
}

}  // namespace

AudioBuffer ParseWav(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12) throw ParseError("WAV file too short for a RIFF header");
  if (!TagIs(bytes.data(), "RIFF") || !TagIs(bytes.data() + 8, "WAVE")) {
    throw ParseError("not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
  std::uint32_t sample_rate = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = U32(chunk + 4);
    const std::size_t body = pos + 8;
    if (size > bytes.size() - body) {
      throw ParseError("WAV chunk '" + std::string(chunk, chunk + 4) + "' is truncated");
    }
    if (TagIs(chunk, "fmt ")) {
      if (size < 16) throw ParseError("WAV fmt chunk too short");
      const std::uint8_t* f = bytes.data() + body;
      format = U16(f);
      channels = U16(f + 2);
      sample_rate = U32(f + 4);
      block_align = U16(f + 12);
      bits = U16(f + 14);
      if (format == kFormatExtensible) {
        if (size < 40) throw ParseError("WAV extensible fmt chunk too short");
        format = U16(f + 24);  // first two bytes of the sub-format GUID
      }
      have_fmt = true;
    } else if (TagIs(chunk, "data")) {
      if (!have_fmt) throw ParseError("WAV data chunk precedes the fmt chunk");
      if (channels < 1) throw ParseError("WAV file declares zero channels");
      if (sample_rate == 0) throw ParseError("WAV file declares a zero sample rate");
      const bool pcm16 = format == kFormatPcm && bits == 16;
      const bool float32 = format == kFormatFloat && bits == 32;
      if (!pcm16 && !float32) {
        throw ParseError("unsupported WAV encoding (format " + std::to_string(format) + ", " +
                         std::to_string(bits) + " bits); expected 16-bit PCM or 32-bit float");
      }
      const std::size_t bytes_per_sample = bits / 8;
      if (block_align != bytes_per_sample * channels) {
        throw ParseError("WAV block alignment does not match channels and sample size");
      }
      if (size % block_align != 0) throw ParseError("WAV data ends in a partial frame");
      const std::size_t frames = size / block_align;
      AudioBuffer audio;
      audio.sample_rate = sample_rate;
      audio.samples.resize(frames);
      const std::uint8_t* d = bytes.data() + body;
      for (std::size_t i = 0; i < frames; ++i) {
        const std::uint8_t* s = d + i * block_align;  // left channel comes first
        if (pcm16) {
          audio.samples[i] = static_cast<std::int16_t>(U16(s)) / 32768.0;
        } else {
          audio.samples[i] = std::bit_cast<float>(U32(s));
        }
      }
      return audio;
    }
    pos = body + size + (size & 1);
  }
  throw ParseError("WAV file has no data chunk");
}

AudioBuffer LoadWav(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open WAV file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  try {
    return ParseWav(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> EncodeWav16(const AudioBuffer& audio) {
  if (!(audio.sample_rate > 0.0)) throw UsageError("sample rate must be positive");
  const auto frames = static_cast<std::uint32_t>(audio.size());
  const std::uint32_t rate = static_cast<std::uint32_t>(std::lround(audio.sample_rate));
  std::vector<std::uint8_t> out;
  out.reserve(44 + 2 * audio.size());
  PutTag(out, "RIFF");
  Put32(out, 36 + 2 * frames);
  PutTag(out, "WAVE");
  PutTag(out, "fmt ");
  Put32(out, 16);
  Put16(out, kFormatPcm);
  Put16(out, 1);
  Put32(out, rate);
  Put32(out, rate * 2);
  Put16(out, 2);
  Put16(out, 16);
  PutTag(out, "data");
  Put32(out, 2 * frames);
  for (double x : audio.samples) {
    const double q = std::nearbyint(std::clamp(x, -1.0, 1.0) * 32768.0);
    const auto v = static_cast<std::int16_t>(std::clamp(q, -32768.0, 32767.0));
    Put16(out, static_cast<std::uint16_t>(v));
  }
  return out;
}

void SaveWav(const std::filesystem::path& path, const AudioBuffer& audio) {
  const auto bytes = EncodeWav16(audio);
  std::filesystem::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write WAV file " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) {
      f.close();
      std::filesystem::remove(tmp);
      throw std::runtime_error("failed writing WAV file " + path.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace specloss
