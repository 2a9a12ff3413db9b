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
#include <string>
#include <vector>

#include "common/bytes.h"
#include "common/id.h"

namespace miniray {

// Table tags are part of the wire format: object=1, task=2, function=3,
// actor=4, client=5.
enum class GcsTable : uint8_t {
  kObject = 1,
  kTask = 2,
  kFunction = 3,
  kActor = 4,
  kClient = 5,
};

inline const char *GcsTableName(GcsTable table) {
  switch (table) {
    case GcsTable::kObject: return "object";
    case GcsTable::kTask: return "task";
    case GcsTable::kFunction: return "function";
    case GcsTable::kActor: return "actor";
    case GcsTable::kClient: return "client";
  }
  return "?";
}

struct GcsRecord {
  GcsTable table = GcsTable::kObject;
  UniqueId key;
  Bytes value;
  uint64_t version = 0;  // per key, gapless from 1
  uint64_t seq = 0;      // per shard apply sequence
};

struct TableKey {
  GcsTable table;
  UniqueId key;
  bool operator==(const TableKey &) const = default;
};

struct TableKeyHash {
  size_t operator()(const TableKey &k) const {
    return k.key.HashValue() ^ (static_cast<size_t>(k.table) << 56);
  }
};

// Deterministic shard routing: first 8 key bytes, big endian, mod count.
inline uint32_t ShardForKey(const UniqueId &key, uint32_t shard_count) {
  uint64_t prefix = GetU64Be(key.bytes().data());
  return static_cast<uint32_t>(prefix % shard_count);
}

struct SubPattern {
  GcsTable table = GcsTable::kObject;
  Bytes prefix;  // empty = whole table; 20 bytes = exact key

  bool Matches(GcsTable t, const UniqueId &key) const {
    if (t != table) return false;
    if (prefix.empty()) return true;
    if (prefix.size() > UniqueId::kSize) return false;
    return std::equal(prefix.begin(), prefix.end(), key.bytes().begin());
  }
  bool IsExact() const { return prefix.size() == UniqueId::kSize; }
  bool operator==(const SubPattern &) const = default;
};

inline SubPattern ExactPattern(GcsTable table, const UniqueId &key) {
  return SubPattern{table, Bytes(key.bytes().begin(), key.bytes().end())};
}
inline SubPattern TablePattern(GcsTable table) { return SubPattern{table, {}}; }

struct FlushPolicy {
  uint64_t memory_cap_bytes = 256ull << 20;
  int64_t flush_interval_ms = 500;
  std::string flush_file_path;  // empty disables flushing
};

}  // namespace miniray
