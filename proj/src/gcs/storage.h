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

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <unordered_map>

#include "common/status.h"
#include "gcs/types.h"

namespace miniray {

// One shard replica's record storage: an in-memory table plus an append-only
// flush file. Entries are evicted to disk oldest-first once the in-memory
// footprint exceeds the cap; reads are transparent to where a record lives.
class ShardStorage {
 public:
  ShardStorage(FlushPolicy policy);
  ~ShardStorage();

  // Rebuilds the disk index from an existing flush file (cluster restart).
  Status LoadFromDisk();

  // Current version of a key (0 if absent), wherever it lives.
  uint64_t CurrentVersion(GcsTable table, const UniqueId &key) const;

  // Unconditional ordered apply; the caller (chain code) assigns version and
  // seq. Replaces any older version of the key.
  void Apply(const GcsRecord &rec);
  // Apply only if rec.version is newer than what we hold; used during state
  // transfer where snapshot pages and live forwards interleave.
  void ApplyIfNewer(const GcsRecord &rec);

  std::optional<GcsRecord> Get(GcsTable table, const UniqueId &key) const;

  // Lexicographic page scan over live records (memory + disk, latest per
  // key). Returns up to `limit` records with key > after, matching prefix.
  std::vector<GcsRecord> ScanPage(GcsTable table, const Bytes &prefix,
                                  const std::optional<UniqueId> &after,
                                  size_t limit) const;

  // Evicts oldest-updated records to disk until footprint <= cap.
  // Returns bytes freed; DiskFull surfaces as a status.
  Result<uint64_t> Flush();
  bool NeedsFlush() const {
    return !policy_.flush_file_path.empty() && footprint_ > policy_.memory_cap_bytes;
  }

  uint64_t MemoryFootprint() const { return footprint_; }
  size_t RecordCount() const { return mem_.size() + disk_index_.size(); }
  uint64_t last_seq() const { return last_seq_; }
  void set_last_seq(uint64_t seq) { last_seq_ = std::max(last_seq_, seq); }

  // Recent applies for subscription catch-up. Returns nothing if `since` has
  // already fallen out of the ring (caller falls back to a full replay).
  std::optional<std::vector<GcsRecord>> RingSince(uint64_t since) const;

  // Iterates every live record (for state transfer), page by page.
  void Snapshot(const std::function<void(const GcsRecord &)> &fn) const;

 private:
  struct MemEntry {
    Bytes value;
    uint64_t version;
    uint64_t seq;
    uint64_t order;  // update order, for oldest-first eviction
  };
  struct DiskEntry {
    uint64_t offset;
    uint32_t length;
    uint64_t version;
    uint64_t seq;
  };

  static uint64_t EntryFootprint(const UniqueId &key, const Bytes &value) {
    (void)key;
    return UniqueId::kSize + 1 + value.size() + 48;
  }
  std::optional<GcsRecord> ReadDisk(const TableKey &key,
                                    const DiskEntry &entry) const;

  FlushPolicy policy_;
  std::unordered_map<TableKey, MemEntry, TableKeyHash> mem_;
  std::map<uint64_t, TableKey> eviction_queue_;  // update order -> key
  std::unordered_map<TableKey, DiskEntry, TableKeyHash> disk_index_;
  uint64_t footprint_ = 0;
  uint64_t next_order_ = 1;
  uint64_t last_seq_ = 0;
  int flush_fd_ = -1;
  uint64_t flush_file_size_ = 0;

  static constexpr size_t kRingCapacity = 16384;
  std::deque<GcsRecord> ring_;
};

// Canonical record <-> JSON text (the same shape used on the wire and in the
// flush file).
std::string RecordToJson(const GcsRecord &rec);
Result<GcsRecord> RecordFromJson(const std::string &text);

}  // namespace miniray
