// Copyright 2026 The MiniRay Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace miniray {

using Bytes = std::vector<uint8_t>;

std::string ToHex(std::span<const uint8_t> data);
std::optional<Bytes> FromHex(std::string_view hex);

// Big-endian fixed-width integer append/read.
void PutU32Be(Bytes &out, uint32_t v);
void PutU64Be(Bytes &out, uint64_t v);
uint32_t GetU32Be(const uint8_t *p);
uint64_t GetU64Be(const uint8_t *p);

inline Bytes ToBytes(std::string_view s) {
  return Bytes(s.begin(), s.end());
}
inline std::string ToString(std::span<const uint8_t> b) {
  return std::string(b.begin(), b.end());
}

}  // namespace miniray
