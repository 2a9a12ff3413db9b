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
#include <unordered_set>
#include <vector>

#include "gcs/client.h"
#include "net/event_loop.h"
#include "recovery/task_state.h"
#include "sched/load.h"
#include "store/object_store.h"

namespace miniray {

// Per-node scheduler: executes locally when the queue is under the forward
// threshold and the node's resources can ever satisfy the task; forwards to a
// global scheduler otherwise. Dispatch transitions the task record
// (submitted -> dispatched, executions+1) with a version CAS, which makes
// duplicate queueing benign and execution accounting exact.
class LocalScheduler {
 public:
  struct Options {
    UniqueId node_id;
    std::string node_name;
    SchedulerConfig config;
    ResourceMap resources_total;
  };

  using SpawnActorFn = std::function<void(const TaskSpec &)>;
  using RestoreActorFn = std::function<void(const UniqueId &)>;
  using ListGlobalsFn =
      std::function<std::vector<std::pair<UniqueId, NodeAddr>>()>;

  // How to boot an actor process for a creation task: fresh actors start at
  // index 0; restored ones resume after their replay window, optionally from
  // a checkpoint blob.
  struct ActorBootstrap {
    uint64_t next_index = 0;
    uint64_t next_run_index = 0;
    std::optional<ObjectRef> restore_object;
    std::vector<std::pair<TaskTableEntry, uint64_t>> replay;
  };
  using PrepareActorFn =
      std::function<void(const TaskSpec &, std::function<void(ActorBootstrap)>)>;

  LocalScheduler(EventLoop &loop, GcsClient &gcs, ObjectStore &store,
                 Options opts);

  void set_spawn_actor(SpawnActorFn fn) { spawn_actor_ = std::move(fn); }
  void set_restore_actor(RestoreActorFn fn) { restore_actor_ = std::move(fn); }
  void set_prepare_actor(PrepareActorFn fn) { prepare_actor_ = std::move(fn); }
  void set_list_globals(ListGlobalsFn fn) { list_globals_ = std::move(fn); }

  // Wire entry points (scheduler port traffic + worker connections).
  void OnMessage(EventLoop::ConnId conn, const Message &msg);
  void OnDisconnect(EventLoop::ConnId conn);

  // In-process entry points.
  void Submit(const TaskTableEntry &entry, uint64_t version);
  void OnObjectSealed(const UniqueId &object_id);

  uint64_t QueueLen() const;
  NodeRecord BuildHeartbeat(uint64_t seq, std::vector<double> bandwidth);
  json Stats() const;

 private:
  using ConnId = EventLoop::ConnId;

  struct QueuedTask {
    TaskTableEntry entry;
    uint64_t version = 0;
    std::unordered_set<UniqueId> missing;
  };
  struct WorkerSlot {
    ConnId conn = 0;
    UniqueId worker_id;
    bool busy = false;
    UniqueId running_task;
  };
  struct PendingMethod {
    TaskTableEntry entry;   // spec.actor_method_index set
    uint64_t version = 0;   // record version after the index CAS
    std::unordered_set<UniqueId> missing;
    bool replay = false;
  };
  struct ActorHost {
    UniqueId actor_id;
    ConnId conn = 0;
    bool executing = false;
    bool alive = false;  // process up and constructor done
    uint64_t next_index = 0;      // next arrival gets this chain index
    uint64_t next_run_index = 0;  // serial execution cursor
    std::map<uint64_t, PendingMethod> queue;
    std::optional<TaskTableEntry> creation;  // pending construction run
    uint64_t creation_version = 0;
    std::optional<ObjectRef> restore_object;
    ResourceMap held_resources;
    UniqueId current_task;
  };

  void HandleRequest(ConnId conn, const json &req);
  void RouteSubmit(const TaskTableEntry &entry, uint64_t version,
                   ConnId ack_conn, uint64_t ack_id);
  void EnqueueLocal(TaskTableEntry entry, uint64_t version);
  void Forward(const TaskTableEntry &entry, uint64_t version);
  void ReforwardAll(ConnId dead_conn);
  void TryDispatch();
  void DispatchFunction(QueuedTask task);
  void BeginActorCreation(TaskTableEntry entry, uint64_t version);
  void SubmitActorMethod(TaskTableEntry entry, uint64_t version,
                         ConnId ack_conn, uint64_t ack_id);
  void PumpActor(const UniqueId &actor_id);
  // Writes entry with state=dispatched, executions+1 behind a version CAS;
  // reports the version and exact content written.
  using CasDoneFn = std::function<void(Result<uint64_t>, TaskTableEntry)>;
  void CasDispatch(TaskTableEntry entry, uint64_t version, int attempt,
                   CasDoneFn done);
  void RunOnWorker(ConnId worker_conn, const TaskTableEntry &entry,
                   uint64_t version_after_dispatch);
  void OnWorkerDone(ConnId conn, const json &req);
  void FinishTaskRecord(TaskTableEntry entry, uint64_t version_after_dispatch,
                        bool ok, const std::string &error);
  void MarkActorAlive(const UniqueId &actor_id, int attempt);
  std::unordered_set<UniqueId> MissingArgs(const TaskSpec &spec);

  EventLoop &loop_;
  GcsClient &gcs_;
  ObjectStore &store_;
  Options opts_;
  SpawnActorFn spawn_actor_;
  RestoreActorFn restore_actor_;
  PrepareActorFn prepare_actor_;
  ListGlobalsFn list_globals_;

  ResourceMap resources_available_;
  std::deque<UniqueId> ready_;
  std::unordered_map<UniqueId, QueuedTask> tasks_;  // waiting + ready
  std::unordered_map<UniqueId, std::vector<UniqueId>> arg_waiters_;
  std::unordered_map<UniqueId,
                     std::vector<std::pair<UniqueId, uint64_t>>>
      actor_arg_waiters_;  // object -> (actor, index)

  std::vector<WorkerSlot> workers_;
  std::unordered_map<ConnId, size_t> worker_by_conn_;
  std::unordered_map<UniqueId, ActorHost> actors_;
  std::unordered_map<ConnId, UniqueId> actor_by_conn_;

  struct Running {
    TaskTableEntry entry;
    uint64_t version_after_dispatch = 0;
  };
  std::unordered_map<UniqueId, Running> running_;

  // Forwarding state.
  std::unordered_map<UniqueId, std::pair<TaskTableEntry, uint64_t>> forwarded_;
  std::unordered_map<UniqueId, ConnId> global_conns_;
  std::unordered_map<ConnId, UniqueId> global_by_conn_;
  size_t next_global_ = 0;

  // Exec samples since the last heartbeat.
  std::vector<ExecSample> exec_samples_;
  uint64_t forwarded_count_ = 0;
  uint64_t dispatched_count_ = 0;
  uint64_t done_count_ = 0;
  uint64_t placed_count_ = 0;
};

}  // namespace miniray
