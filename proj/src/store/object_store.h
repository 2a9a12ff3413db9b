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

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "common/value.h"
#include "gcs/client.h"
#include "net/event_loop.h"

namespace miniray {

// The GCS object-table record: size, digest, producer, and the set of nodes
// holding a sealed copy.
struct ObjectTableEntry {
  UniqueId object_id;
  uint64_t size_bytes = 0;
  std::string digest_hex;
  UniqueId producing_task;
  uint64_t output_index = 0;
  std::vector<UniqueId> locations;

  std::string ToJson() const;
  static Result<ObjectTableEntry> FromJson(const std::string &text);
};

// Per-node store of immutable sealed byte objects. Runs inside the node
// daemon's event loop; peers pull objects over striped range fetches; cold
// objects spill to eviction files and reload on access.
class ObjectStore {
 public:
  struct Options {
    UniqueId node_id;
    uint64_t capacity_bytes = 1ull << 30;
    std::string eviction_dir;
    uint32_t stripe_count = 8;
    uint64_t stripe_chunk_bytes = 1 << 20;
    uint64_t pace_bytes_per_s = 0;  // per peer connection; 0 disables
  };

  using SealedFn = std::function<void(const UniqueId &)>;
  using DemandFn = std::function<void(const ObjectRef &)>;

  ObjectStore(EventLoop &loop, GcsClient &gcs, Options opts);

  Status Start();
  void set_on_sealed(SealedFn fn) { on_sealed_ = std::move(fn); }
  void set_on_demand(DemandFn fn) { on_demand_ = std::move(fn); }
  // Node liveness + store address lookup, provided by the node daemon's
  // directory.
  void set_resolve_node(std::function<std::optional<NodeAddr>(const UniqueId &)> fn) {
    resolve_node_ = std::move(fn);
  }

  // Loop-thread API (used directly by the colocated scheduler).
  bool IsSealedLocally(const UniqueId &object_id) const;
  void EnsureLocal(const ObjectRef &ref);
  void Pin(const UniqueId &object_id);
  void Unpin(const UniqueId &object_id);
  Status SealLocal(const ObjectRef &ref, Bytes payload,
                   std::function<void(Status)> registered);
  // nullopt when the object is unknown; reloads evicted payloads.
  std::optional<Bytes> ReadLocal(const UniqueId &object_id);

  // Wire entry points, called by the node daemon for store-port traffic.
  void OnMessage(EventLoop::ConnId conn, const Message &msg);
  void OnDisconnect(EventLoop::ConnId conn);

  json Stats() const;
  std::vector<double> DrainBandwidthSamples();
  uint64_t mem_bytes() const { return mem_bytes_; }

 private:
  using ConnId = EventLoop::ConnId;

  enum class ObjState { kSealed, kEvicted };
  struct Entry {
    ObjState state = ObjState::kSealed;
    Bytes payload;  // empty when evicted
    uint64_t size = 0;
    std::string digest_hex;
    UniqueId producing_task;
    uint64_t output_index = 0;
    uint64_t last_access = 0;
    int pin_count = 0;
  };
  struct Upload {
    ObjectRef ref;
    uint64_t declared_size = 0;
    std::string declared_digest;
    Bytes staging;
    uint64_t received = 0;
    uint64_t request_id = 0;
    bool active = false;
  };
  struct Waiter {
    ConnId conn;
    uint64_t request_id;
    uint64_t timer_id;
    bool want_payload;  // wait_get vs wait
  };
  struct Stripe {
    uint64_t offset = 0;
    uint64_t length = 0;
    uint64_t received = 0;
  };
  struct Pull {
    ObjectRef ref;
    ObjectTableEntry entry;
    UniqueId source;
    std::unordered_map<ConnId, Stripe> stripes;
    Bytes buffer;
    uint64_t received = 0;
    int attempts = 0;
    int64_t started_ms = 0;
    std::set<UniqueId> tried;
  };
  struct Serve {
    UniqueId object_id;
    uint64_t offset = 0;  // absolute next byte
    uint64_t end = 0;
    uint64_t request_id = 0;
    uint64_t pace_timer = 0;
    int64_t pace_started_ms = 0;
    uint64_t pace_sent = 0;
  };

  void HandleRequest(ConnId conn, const json &req);
  void HandleChunk(ConnId conn, const Bytes &payload);
  void FinalizeUpload(ConnId conn);
  Status StageSeal(const ObjectRef &ref, Bytes payload,
                   std::function<void(Status)> registered);
  void RegisterLocation(const ObjectRef &ref, uint64_t size,
                        const std::string &digest_hex, int attempt,
                        std::function<void(Status)> done);
  void FinishSeal(const UniqueId &object_id);
  Status EnsureFree(uint64_t bytes_needed);
  Status EvictOne();
  Status EvictToDisk(const UniqueId &object_id, Entry &entry);
  bool ReloadFromDisk(const UniqueId &object_id, Entry &entry);
  void Touch(const UniqueId &object_id, Entry &entry);
  std::string EvictionPath(const UniqueId &object_id) const;

  void StartPull(const ObjectRef &ref, const ObjectTableEntry &entry);
  void RetryPull(const ObjectRef &ref, std::set<UniqueId> tried, int attempts);
  void AbortPull(const UniqueId &object_id, bool vanished);
  void AbortPullBookkeeping(const UniqueId &object_id);
  void FinishPull(const UniqueId &object_id);
  void PruneLocation(const UniqueId &object_id, const UniqueId &node_id,
                     int attempt);
  void OnObjectEvent(const GcsRecord &rec);
  void ResolveWaiters(const UniqueId &object_id);
  void SendPayload(ConnId conn, uint64_t request_id, const UniqueId &object_id,
                   const Entry &entry);
  void PumpServe(ConnId conn);
  void FinishServe(ConnId conn, bool ok);

 public:
  void FailWaiters(const UniqueId &object_id, const Status &why);

 private:

  EventLoop &loop_;
  GcsClient &gcs_;
  Options opts_;
  SealedFn on_sealed_;
  DemandFn on_demand_;
  std::function<std::optional<NodeAddr>(const UniqueId &)> resolve_node_;

  std::unordered_map<UniqueId, Entry> objects_;
  std::map<uint64_t, UniqueId> lru_;  // last_access -> id, sealed+unpinned
  uint64_t mem_bytes_ = 0;
  uint64_t access_counter_ = 0;

  std::unordered_map<ConnId, Upload> uploads_;
  std::unordered_map<UniqueId, std::vector<Waiter>> waiters_;
  std::unordered_map<UniqueId, Pull> pulls_;
  std::unordered_map<ConnId, UniqueId> pull_conns_;
  std::unordered_map<ConnId, Serve> serves_;
  std::unordered_set<UniqueId> subscribed_keys_;
  uint64_t gcs_sub_id_ = 0;

  std::vector<double> bandwidth_samples_;
  uint64_t pulls_completed_ = 0;
  uint64_t evictions_ = 0;
};

}  // namespace miniray
