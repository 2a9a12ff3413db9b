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

#include "common/id.h"

#include <cstring>

#include "common/bytes.h"
#include "common/hash.h"

namespace miniray {

namespace {

// Domain-separation tags.
constexpr uint8_t kTagTask = 'T';
constexpr uint8_t kTagObject = 'O';
constexpr uint8_t kTagFunction = 'F';
constexpr uint8_t kTagActor = 'C';
constexpr uint8_t kTagNamed = 'N';

UniqueId DeriveWithCounter(uint8_t tag, const UniqueId &base, uint64_t counter) {
  Bytes buf;
  buf.reserve(1 + UniqueId::kSize + 8);
  buf.push_back(tag);
  buf.insert(buf.end(), base.bytes().begin(), base.bytes().end());
  PutU64Be(buf, counter);
  return UniqueId(Sha256Trunc20(buf));
}

}  // namespace

std::optional<UniqueId> UniqueId::FromHex(std::string_view hex) {
  if (hex.size() != 2 * kSize) return std::nullopt;
  auto bytes = miniray::FromHex(hex);
  if (!bytes) return std::nullopt;
  std::array<uint8_t, kSize> arr;
  std::memcpy(arr.data(), bytes->data(), kSize);
  return UniqueId(arr);
}

UniqueId UniqueId::FromBinary(std::string_view data) {
  std::array<uint8_t, kSize> arr{};
  std::memcpy(arr.data(), data.data(), std::min(data.size(), kSize));
  return UniqueId(arr);
}

bool UniqueId::IsNil() const {
  for (uint8_t b : bytes_) {
    if (b != 0) return false;
  }
  return true;
}

std::string UniqueId::Hex() const { return ToHex(bytes_); }

size_t UniqueId::HashValue() const {
  // Ids are uniform hashes already; the first 8 bytes are a fine hash value.
  size_t h;
  std::memcpy(&h, bytes_.data(), sizeof(h));
  return h;
}

UniqueId DeriveTaskId(const UniqueId &parent_task_id, uint64_t parent_counter) {
  return DeriveWithCounter(kTagTask, parent_task_id, parent_counter);
}

UniqueId DeriveObjectId(const UniqueId &task_id, uint64_t output_index) {
  return DeriveWithCounter(kTagObject, task_id, output_index);
}

UniqueId DeriveFunctionId(std::string_view name) {
  std::string buf;
  buf.push_back(static_cast<char>(kTagFunction));
  buf.append(name);
  return UniqueId(Sha256Trunc20(buf));
}

UniqueId DeriveActorId(const UniqueId &creation_task_id) {
  return DeriveWithCounter(kTagActor, creation_task_id, 0);
}

UniqueId DeriveNamedId(std::string_view name) {
  std::string buf;
  buf.push_back(static_cast<char>(kTagNamed));
  buf.append(name);
  return UniqueId(Sha256Trunc20(buf));
}

UniqueId RootTaskId() { return DeriveTaskId(UniqueId::Nil(), 0); }

}  // namespace miniray
