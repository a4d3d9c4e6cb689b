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

// RIFF/WAVE reading (16-bit PCM or 32-bit float, mono or stereo; stereo keeps
// the left channel) and 16-bit PCM mono writing.

#ifndef SPECLOSS_WAV_HPP_
#define SPECLOSS_WAV_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "specloss/spectral.hpp"

namespace specloss {

// Throws ParseError for malformed or unsupported data.
AudioBuffer ParseWav(const std::vector<std::uint8_t>& bytes);
AudioBuffer LoadWav(const std::filesystem::path& path);

// Samples are clipped to [-1, 1) and rounded to the nearest of 65536 levels.
std::vector<std::uint8_t> EncodeWav16(const AudioBuffer& audio);
// Written through a temporary file, so a failed write leaves nothing behind.
void SaveWav(const std::filesystem::path& path, const AudioBuffer& audio);

}  // namespace specloss

#endif  // SPECLOSS_WAV_HPP_
