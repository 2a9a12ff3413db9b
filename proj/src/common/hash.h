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

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

namespace miniray {

// SHA-256 truncated to 20 bytes. All identifiers and content digests in the
// system come from here.
std::array<uint8_t, 20> Sha256Trunc20(std::span<const uint8_t> data);
std::array<uint8_t, 20> Sha256Trunc20(std::string_view data);

}  // namespace miniray
