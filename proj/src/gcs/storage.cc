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

#include "gcs/storage.h"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

#include "common/logging.h"
#include "net/frame.h"
#include "net/msg.h"

namespace miniray {

std::string RecordToJson(const GcsRecord &rec) {
  json j;
  j["table"] = static_cast<int>(rec.table);
  j["key"] = rec.key.Hex();
  j["value"] = ToHex(rec.value);
  j["version"] = rec.version;
  j["seq"] = rec.seq;
  return j.dump();
}

Result<GcsRecord> RecordFromJson(const std::string &text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    return Status::Error(ErrorCode::kInvalidArgument, "malformed record");
  }
  GcsRecord rec;
  int table = j.value("table", 0);
  if (table < 1 || table > 5) {
    return Status::Error(ErrorCode::kInvalidArgument, "bad table tag");
  }
  rec.table = static_cast<GcsTable>(table);
  auto key = UniqueId::FromHex(j.value("key", ""));
  auto value = FromHex(j.value("value", ""));
  if (!key || !value) {
    return Status::Error(ErrorCode::kInvalidArgument, "bad record fields");
  }
  rec.key = *key;
  rec.value = std::move(*value);
  rec.version = j.value("version", 0ull);
  rec.seq = j.value("seq", 0ull);
  return rec;
}

ShardStorage::ShardStorage(FlushPolicy policy) : policy_(std::move(policy)) {
  if (!policy_.flush_file_path.empty()) {
    flush_fd_ = ::open(policy_.flush_file_path.c_str(),
                       O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (flush_fd_ < 0) {
      MRLOG_ERROR << "cannot open flush file " << policy_.flush_file_path << ": "
                  << strerror(errno);
    } else {
      off_t size = ::lseek(flush_fd_, 0, SEEK_END);
      flush_file_size_ = size < 0 ? 0 : static_cast<uint64_t>(size);
    }
  }
}

ShardStorage::~ShardStorage() {
  if (flush_fd_ >= 0) ::close(flush_fd_);
}

Status ShardStorage::LoadFromDisk() {
  if (flush_fd_ < 0 || flush_file_size_ == 0) return Status::Ok();
  // Replay the append-only file; the latest version per key wins.
  constexpr size_t kBuf = 1 << 20;
  Bytes buf(kBuf);
  FrameDecoder decoder;
  uint64_t offset = 0;
  uint64_t frame_start = 0;
  while (offset < flush_file_size_) {
    ssize_t n = ::pread(flush_fd_, buf.data(),
                        std::min<uint64_t>(kBuf, flush_file_size_ - offset),
                        static_cast<off_t>(offset));
    if (n <= 0) {
      return Status::Error(ErrorCode::kIoError,
                           std::string("flush file read: ") + strerror(errno));
    }
    offset += static_cast<uint64_t>(n);
    if (Status s = decoder.Feed(buf.data(), static_cast<size_t>(n)); !s.ok()) {
      return s;
    }
    while (auto msg = decoder.Next()) {
      uint64_t frame_len = 5 + msg->payload.size();
      auto rec = RecordFromJson(ToString(msg->payload));
      if (rec.ok()) {
        const GcsRecord &r = rec.value();
        TableKey tk{r.table, r.key};
        auto it = disk_index_.find(tk);
        if (it == disk_index_.end() || it->second.version < r.version) {
          disk_index_[tk] = DiskEntry{frame_start,
                                      static_cast<uint32_t>(frame_len),
                                      r.version, r.seq};
        }
        last_seq_ = std::max(last_seq_, r.seq);
      }
      frame_start += frame_len;
    }
  }
  MRLOG_INFO << "flush file reload: " << disk_index_.size() << " records, seq "
             << last_seq_;
  return Status::Ok();
}

uint64_t ShardStorage::CurrentVersion(GcsTable table, const UniqueId &key) const {
  TableKey tk{table, key};
  auto it = mem_.find(tk);
  if (it != mem_.end()) return it->second.version;
  auto dit = disk_index_.find(tk);
  if (dit != disk_index_.end()) return dit->second.version;
  return 0;
}

void ShardStorage::Apply(const GcsRecord &rec) {
  TableKey tk{rec.table, rec.key};
  auto [it, inserted] = mem_.try_emplace(tk);
  MemEntry &entry = it->second;
  if (!inserted) {
    footprint_ -= EntryFootprint(rec.key, entry.value);
    eviction_queue_.erase(entry.order);
  }
  entry.value = rec.value;
  entry.version = rec.version;
  entry.seq = rec.seq;
  entry.order = next_order_++;
  eviction_queue_[entry.order] = tk;
  footprint_ += EntryFootprint(rec.key, entry.value);
  last_seq_ = std::max(last_seq_, rec.seq);

  ring_.push_back(rec);
  if (ring_.size() > kRingCapacity) ring_.pop_front();
}

void ShardStorage::ApplyIfNewer(const GcsRecord &rec) {
  if (CurrentVersion(rec.table, rec.key) >= rec.version) {
    last_seq_ = std::max(last_seq_, rec.seq);
    return;
  }
  Apply(rec);
}

std::optional<GcsRecord> ShardStorage::Get(GcsTable table,
                                           const UniqueId &key) const {
  TableKey tk{table, key};
  auto it = mem_.find(tk);
  if (it != mem_.end()) {
    return GcsRecord{table, key, it->second.value, it->second.version,
                     it->second.seq};
  }
  auto dit = disk_index_.find(tk);
  if (dit != disk_index_.end()) return ReadDisk(tk, dit->second);
  return std::nullopt;
}

std::optional<GcsRecord> ShardStorage::ReadDisk(const TableKey &key,
                                                const DiskEntry &entry) const {
  if (flush_fd_ < 0) return std::nullopt;
  Bytes buf(entry.length);
  ssize_t n = ::pread(flush_fd_, buf.data(), entry.length,
                      static_cast<off_t>(entry.offset));
  if (n != static_cast<ssize_t>(entry.length)) {
    MRLOG_ERROR << "flush file pread failed at " << entry.offset;
    return std::nullopt;
  }
  FrameDecoder decoder;
  if (!decoder.Feed(buf.data(), buf.size()).ok()) return std::nullopt;
  auto msg = decoder.Next();
  if (!msg) return std::nullopt;
  auto rec = RecordFromJson(ToString(msg->payload));
  if (!rec.ok()) return std::nullopt;
  (void)key;
  return rec.take();
}

std::vector<GcsRecord> ShardStorage::ScanPage(
    GcsTable table, const Bytes &prefix, const std::optional<UniqueId> &after,
    size_t limit) const {
  // Collect matching keys from both layers, order them, then materialize.
  std::vector<const TableKey *> keys;
  auto matches = [&](const TableKey &tk) {
    if (tk.table != table) return false;
    if (!prefix.empty() &&
        !std::equal(prefix.begin(), prefix.end(), tk.key.bytes().begin())) {
      return false;
    }
    return !(after && !(tk.key > *after));
  };
  for (const auto &[tk, entry] : mem_) {
    if (matches(tk)) keys.push_back(&tk);
  }
  for (const auto &[tk, entry] : disk_index_) {
    if (matches(tk) && !mem_.contains(tk)) keys.push_back(&tk);
  }
  std::sort(keys.begin(), keys.end(),
            [](const TableKey *a, const TableKey *b) { return a->key < b->key; });
  if (keys.size() > limit) keys.resize(limit);
  std::vector<GcsRecord> out;
  out.reserve(keys.size());
  for (const TableKey *tk : keys) {
    auto rec = Get(tk->table, tk->key);
    if (rec) out.push_back(std::move(*rec));
  }
  return out;
}

Result<uint64_t> ShardStorage::Flush() {
  if (flush_fd_ < 0 || footprint_ <= policy_.memory_cap_bytes) return 0ull;
  uint64_t freed = 0;
  // Evict down to 90% of cap so flushes batch instead of thrashing.
  uint64_t target = policy_.memory_cap_bytes * 9 / 10;
  Bytes pending;
  std::vector<std::pair<TableKey, DiskEntry>> new_entries;
  uint64_t write_offset = flush_file_size_;
  while (footprint_ > target && !eviction_queue_.empty()) {
    auto qit = eviction_queue_.begin();
    TableKey tk = qit->second;
    eviction_queue_.erase(qit);
    auto it = mem_.find(tk);
    if (it == mem_.end()) continue;
    MemEntry &entry = it->second;
    GcsRecord rec{tk.table, tk.key, entry.value, entry.version, entry.seq};
    std::string text = RecordToJson(rec);
    Message msg;
    msg.tag = kMsgEvent;
    msg.payload.assign(text.begin(), text.end());
    size_t before = pending.size();
    EncodeFrame(msg, pending);
    new_entries.emplace_back(
        tk, DiskEntry{write_offset + before,
                      static_cast<uint32_t>(pending.size() - before),
                      entry.version, entry.seq});
    uint64_t fp = EntryFootprint(tk.key, entry.value);
    footprint_ -= fp;
    freed += fp;
    mem_.erase(it);
  }
  size_t written = 0;
  while (written < pending.size()) {
    ssize_t n = ::write(flush_fd_, pending.data() + written,
                        pending.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      return Status::Error(errno == ENOSPC ? ErrorCode::kDiskFull
                                           : ErrorCode::kIoError,
                           std::string("flush write: ") + strerror(errno));
    }
    written += static_cast<size_t>(n);
  }
  flush_file_size_ += pending.size();
  for (auto &[tk, entry] : new_entries) {
    disk_index_[tk] = entry;
  }
  return freed;
}

std::optional<std::vector<GcsRecord>> ShardStorage::RingSince(
    uint64_t since) const {
  if (ring_.empty()) {
    if (since >= last_seq_) return std::vector<GcsRecord>{};
    return std::nullopt;
  }
  if (since + 1 < ring_.front().seq) return std::nullopt;  // fell off the ring
  std::vector<GcsRecord> out;
  for (const GcsRecord &rec : ring_) {
    if (rec.seq > since) out.push_back(rec);
  }
  return out;
}

void ShardStorage::Snapshot(
    const std::function<void(const GcsRecord &)> &fn) const {
  for (const auto &[tk, entry] : mem_) {
    fn(GcsRecord{tk.table, tk.key, entry.value, entry.version, entry.seq});
  }
  for (const auto &[tk, entry] : disk_index_) {
    if (mem_.contains(tk)) continue;
    auto rec = ReadDisk(tk, entry);
    if (rec) fn(*rec);
  }
}

}  // namespace miniray
