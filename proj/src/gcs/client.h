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

#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>
#include <unordered_map>
#include <vector>

#include "gcs/replica.h"
#include "net/client.h"

namespace miniray {

struct GcsShardView {
  uint64_t epoch = 0;
  std::vector<ChainMember> members;  // head first, tail last
};

using GcsViewFetcher = std::function<Result<std::vector<GcsShardView>>()>;

// Client handle for the control store. Thread-safe; operations retry through
// chain reconfigurations until their deadline. Subscriptions re-attach to the
// new tail with a seq cursor, so notifications are at-least-once.
class GcsClient {
 public:
  explicit GcsClient(GcsViewFetcher fetcher);
  ~GcsClient();
  GcsClient(const GcsClient &) = delete;

  static constexpr int kDefaultTimeoutMs = 15000;

  Result<uint64_t> Put(GcsTable table, const UniqueId &key, Bytes value,
                       std::optional<uint64_t> expect_version = std::nullopt,
                       int timeout_ms = kDefaultTimeoutMs);
  void PutAsync(GcsTable table, const UniqueId &key, Bytes value,
                std::optional<uint64_t> expect_version,
                std::function<void(Result<uint64_t>)> cb,
                int timeout_ms = kDefaultTimeoutMs);
  Result<std::optional<GcsRecord>> Get(GcsTable table, const UniqueId &key,
                                       int timeout_ms = kDefaultTimeoutMs);
  void GetAsync(GcsTable table, const UniqueId &key,
                std::function<void(Result<std::optional<GcsRecord>>)> cb,
                int timeout_ms = kDefaultTimeoutMs);
  Result<std::vector<GcsRecord>> ScanAll(GcsTable table, Bytes prefix = {},
                                         int timeout_ms = kDefaultTimeoutMs);

  using RecordFn = std::function<void(const GcsRecord &)>;
  uint64_t Subscribe(std::vector<SubPattern> patterns, RecordFn fn);
  void AddPatterns(uint64_t sub_id, std::vector<SubPattern> patterns);
  void DelPatterns(uint64_t sub_id, std::vector<SubPattern> patterns);
  void Unsubscribe(uint64_t sub_id);

  // Footprint/record status of every replica we can reach (bench sampling).
  Result<json> ShardStatus(int shard);

  int shard_count();

 private:
  struct ShardState {
    uint64_t epoch = 0;
    std::vector<ChainMember> members;
    std::shared_ptr<RpcClient> head;
    std::shared_ptr<RpcClient> tail;
    uint64_t last_seq = 0;
    bool subscribed = false;
  };
  struct Subscription {
    std::vector<SubPattern> patterns;
    RecordFn fn;
  };

  Status RefreshView(bool force);
  std::shared_ptr<RpcClient> HeadFor(int shard, Status *why);
  std::shared_ptr<RpcClient> TailFor(int shard, Status *why);
  void ResubscribeLocked(int shard, ShardState &state);
  void DelPatternsForGone(uint64_t sub_id,
                          const std::vector<SubPattern> &patterns);
  void OnEvent(int shard, const json &ev);
  void ScheduleRetry(int64_t delay_ms, std::function<void()> fn);
  void RetryLoop();
  std::vector<int> ShardsForPattern(const SubPattern &p);

  GcsViewFetcher fetcher_;
  std::mutex mutex_;
  std::vector<ShardState> shards_;
  int64_t last_view_fetch_ms_ = 0;
  uint64_t next_sub_id_ = 1;
  std::unordered_map<uint64_t, Subscription> subs_;
  std::vector<std::shared_ptr<RpcClient>> graveyard_;

  std::mutex retry_mutex_;
  std::condition_variable retry_cv_;
  std::deque<std::pair<int64_t, std::function<void()>>> retry_queue_;
  bool stopping_ = false;
  std::thread retry_thread_;
};

}  // namespace miniray
