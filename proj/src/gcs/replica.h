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

#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "gcs/storage.h"
#include "net/event_loop.h"
#include "net/msg.h"

namespace miniray {

struct ChainMember {
  std::string name;
  std::string host;
  uint16_t port = 0;
};

// One chain-replication member of one GCS shard. Writes enter at the head,
// propagate in order, and are acknowledged once the tail applies them; reads
// and subscriptions are served by the tail. The harness supervisor owns the
// chain configuration and pushes epoch updates.
class GcsReplica {
 public:
  struct Options {
    int shard = 0;
    std::string name;
    uint16_t listen_port = 0;
    std::string supervisor_host = "127.0.0.1";
    uint16_t supervisor_port = 0;
    FlushPolicy flush;
    int64_t heartbeat_ms = 100;
  };

  GcsReplica(EventLoop &loop, Options opts);

  Status Start();
  const ShardStorage &storage() const { return storage_; }

  // Test hook: apply a chain configuration directly instead of via the
  // supervisor connection.
  void ApplyConfig(uint64_t epoch, std::vector<ChainMember> members);

 private:
  using ConnId = EventLoop::ConnId;

  struct Pending {
    GcsRecord record;
    ConnId client_conn = 0;
    uint64_t request_id = 0;
    bool has_client = false;
  };
  struct SubscriberEntry {
    uint64_t sub_id;
    std::vector<SubPattern> patterns;
  };
  struct SyncOut {
    std::vector<GcsRecord> records;
    size_t next = 0;
    uint64_t base_seq = 0;
  };

  void OnMessage(ConnId conn, Message msg);
  void OnClose(ConnId conn);
  void HandleRequest(ConnId conn, const json &req);
  void HandleSupervisorEvent(const json &ev);

  bool IsHead() const { return my_index_ == 0 && !members_.empty(); }
  bool IsTail() const {
    return my_index_ >= 0 &&
           my_index_ == static_cast<int>(members_.size()) - 1;
  }

  void HandlePut(ConnId conn, const json &req);
  void HandleApply(ConnId conn, const json &req);
  void HandleAck(const json &req);
  void ApplyAsTail(const GcsRecord &rec);
  void RespondPending(uint64_t seq);
  void ForwardDown(const GcsRecord &rec);
  void RepropagatePending();
  void ConnectSuccessor();
  void NotifySubscribers(const GcsRecord &rec);
  void StartSyncStream(ConnId conn);
  void PumpSync(ConnId conn);
  void ForwardShadow(ConnId conn, const GcsRecord &rec);
  void ReplayPatterns(ConnId conn, uint64_t sub_id,
                      const std::vector<SubPattern> &patterns);
  void SendHeartbeat();
  void MaybeFlush();
  void MaybeFlushInline();
  json RecordToWire(const GcsRecord &rec, uint64_t sub_id) const;

  EventLoop &loop_;
  Options opts_;
  ShardStorage storage_;

  uint64_t epoch_ = 0;
  std::vector<ChainMember> members_;
  int my_index_ = -1;
  ConnId successor_conn_ = 0;
  ConnId upstream_conn_ = 0;
  ConnId supervisor_conn_ = 0;
  uint64_t next_seq_ = 1;

  std::map<uint64_t, Pending> pending_;  // seq -> outstanding chain write
  std::unordered_map<ConnId, std::vector<SubscriberEntry>> subscribers_;
  std::unordered_map<ConnId, SyncOut> sync_out_;
  std::set<ConnId> shadow_successors_;
  uint64_t hb_seq_ = 0;
};

}  // namespace miniray
