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

#include <random>
#include <unordered_map>

#include "gcs/client.h"
#include "net/event_loop.h"
#include "recovery/task_state.h"
#include "sched/load.h"

namespace miniray {

// Global scheduler replica: places forwarded tasks on the feasible node with
// the lowest estimated waiting time. All replicas fold the same client-table
// heartbeat stream, so any of them makes consistent decisions up to
// heartbeat staleness.
class GlobalScheduler {
 public:
  struct Options {
    std::string name;
    UniqueId id;
    uint16_t listen_port = 0;
    std::string supervisor_host = "127.0.0.1";
    uint16_t supervisor_port = 0;
    SchedulerConfig config;
  };

  GlobalScheduler(EventLoop &loop, GcsClient &gcs, Options opts);
  Status Start();

  uint64_t placed_count() const { return placed_; }

 private:
  using ConnId = EventLoop::ConnId;

  void OnMessage(ConnId conn, const Message &msg);
  void OnClose(ConnId conn);
  void HandleForward(ConnId origin, TaskTableEntry entry, uint64_t version,
                     int attempt);
  void Decide(ConnId origin, const TaskTableEntry &entry, uint64_t version,
              const std::unordered_map<UniqueId, uint64_t> &remote_bytes);
  void Place(const UniqueId &node_id, const TaskTableEntry &entry,
             uint64_t version);
  void MarkInfeasible(TaskTableEntry entry, uint64_t version, int attempt);
  void OnClientTableEvent(const GcsRecord &rec);
  void SendHeartbeat();

  EventLoop &loop_;
  GcsClient &gcs_;
  Options opts_;
  EstimateStore estimates_;
  std::unordered_map<UniqueId, NodeAddr> node_addrs_;
  std::unordered_map<UniqueId, ConnId> node_conns_;
  ConnId supervisor_conn_ = 0;
  uint64_t hb_seq_ = 0;
  uint64_t placed_ = 0;
  std::mt19937 rng_{12345};
};

}  // namespace miniray
