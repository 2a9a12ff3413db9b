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
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace miniray {

// 20-byte opaque identifier. Equality is byte equality; renders as 40
// lowercase hex characters.
class UniqueId {
 public:
  static constexpr size_t kSize = 20;

  UniqueId() { bytes_.fill(0); }
  explicit UniqueId(const std::array<uint8_t, kSize> &bytes) : bytes_(bytes) {}

  static UniqueId Nil() { return UniqueId(); }
  static std::optional<UniqueId> FromHex(std::string_view hex);
  static UniqueId FromBinary(std::string_view data);  // must be 20 bytes

  bool IsNil() const;
  std::string Hex() const;
  std::string Binary() const { return std::string(bytes_.begin(), bytes_.end()); }
  const std::array<uint8_t, kSize> &bytes() const { return bytes_; }

  // Stable total order (lexicographic on bytes); used for tie-breaking.
  auto operator<=>(const UniqueId &) const = default;

  size_t HashValue() const;

 private:
  std::array<uint8_t, kSize> bytes_;
};

struct UniqueIdHash {
  size_t operator()(const UniqueId &id) const { return id.HashValue(); }
};

// Deterministic derivations. Each kind is domain-separated so ids from
// different derivations never collide for equal inputs.
UniqueId DeriveTaskId(const UniqueId &parent_task_id, uint64_t parent_counter);
UniqueId DeriveObjectId(const UniqueId &task_id, uint64_t output_index);
UniqueId DeriveFunctionId(std::string_view name);
UniqueId DeriveActorId(const UniqueId &creation_task_id);
UniqueId DeriveNamedId(std::string_view name);  // nodes and other components

// The driver's root task: all-zero parent, counter 0.
UniqueId RootTaskId();

}  // namespace miniray

template <>
struct std::hash<miniray::UniqueId> {
  size_t operator()(const miniray::UniqueId &id) const { return id.HashValue(); }
};
