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

// Checkpoint container, all integers little-endian:
//
//   "SPNN"                       4 bytes magic
//   version                      u16 (= 1)
//   array count                  u32
//   per array:
//     name length                u32
//     name                       UTF-8 bytes
//     rank                       u32
//     dims                       rank x u32
//     payload                    prod(dims) x IEEE-754 float32, row-major
//
// The model layout is recovered from the array names and shapes.

#ifndef SPECLOSS_CHECKPOINT_HPP_
#define SPECLOSS_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "specloss/model.hpp"

namespace specloss {

inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<std::uint8_t> EncodeCheckpoint(const ModelParams& params);
// Throws ParseError on malformed input.
ModelParams DecodeCheckpoint(const std::vector<std::uint8_t>& bytes);

// Written to a temporary file and renamed into place.
void SaveCheckpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams LoadCheckpoint(const std::filesystem::path& path);

}  // namespace specloss

#endif  // SPECLOSS_CHECKPOINT_HPP_
