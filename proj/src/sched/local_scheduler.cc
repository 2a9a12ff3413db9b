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

#include "sched/local_scheduler.h"

#include <algorithm>

#include "common/clock.h"
#include "common/logging.h"

namespace miniray {

namespace {
constexpr int kMaxCasAttempts = 10;
}

LocalScheduler::LocalScheduler(EventLoop &loop, GcsClient &gcs,
                               ObjectStore &store, Options opts)
    : loop_(loop),
      gcs_(gcs),
      store_(store),
      opts_(std::move(opts)),
      resources_available_(opts_.resources_total) {}

uint64_t LocalScheduler::QueueLen() const {
  uint64_t n = tasks_.size();
  for (const auto &[id, actor] : actors_) n += actor.queue.size();
  return n;
}

std::unordered_set<UniqueId> LocalScheduler::MissingArgs(const TaskSpec &spec) {
  std::unordered_set<UniqueId> missing;
  for (const ObjectRef &ref : spec.RefArgs()) {
    if (!store_.IsSealedLocally(ref.object_id)) {
      missing.insert(ref.object_id);
      store_.EnsureLocal(ref);
    }
  }
  return missing;
}

void LocalScheduler::OnMessage(ConnId conn, const Message &msg) {
  if (msg.tag != kMsgRequest) return;
  auto parsed = ParseJsonPayload(msg.payload);
  if (!parsed.ok()) return;
  HandleRequest(conn, parsed.value());
}

void LocalScheduler::HandleRequest(ConnId conn, const json &req) {
  const std::string op = req.value("op", "");
  uint64_t id = req.value("id", 0ull);

  if (op == "submit" || op == "place") {
    auto entry = TaskTableEntry::FromJson(req.value("entry", json::object()).dump());
    if (!entry.ok()) {
      MRLOG_WARN << "bad submit: " << entry.status().ToString();
      return;
    }
    uint64_t version = req.value("version", 1ull);
    if (op == "place") {
      placed_count_++;
      EnqueueLocal(entry.take(), version);
    } else {
      RouteSubmit(entry.value(), version, conn, id);
    }
  } else if (op == "fwd_ok") {
    auto task_id = UniqueId::FromHex(req.value("task_id", ""));
    if (task_id) forwarded_.erase(*task_id);
  } else if (op == "hello") {
    std::string kind = req.value("kind", "worker");
    auto worker_id = UniqueId::FromHex(req.value("worker_id", ""));
    if (!worker_id) return;
    if (kind == "worker") {
      WorkerSlot slot;
      slot.conn = conn;
      slot.worker_id = *worker_id;
      worker_by_conn_[conn] = workers_.size();
      workers_.push_back(slot);
      TryDispatch();
    } else if (kind == "actor") {
      auto actor_id = UniqueId::FromHex(req.value("actor_id", ""));
      if (!actor_id) return;
      auto it = actors_.find(*actor_id);
      if (it == actors_.end()) {
        MRLOG_WARN << "hello from unknown actor " << actor_id->Hex();
        return;
      }
      it->second.conn = conn;
      actor_by_conn_[conn] = *actor_id;
      // Run the constructor now that the process is up.
      if (it->second.creation.has_value()) {
        it->second.executing = true;
        it->second.current_task = it->second.creation->spec.task_id;
        json run{{"id", 0},
                 {"op", "run"},
                 {"spec", json::parse(it->second.creation->spec.ToJson())},
                 {"version", it->second.creation_version}};
        if (it->second.restore_object) {
          const ObjectRef &r = *it->second.restore_object;
          run["restore_object"] = json{{"object_id", r.object_id.Hex()},
                                       {"producing_task", r.producing_task.Hex()},
                                       {"output_index", r.output_index}};
        }
        loop_.Send(conn, JsonMessage(kMsgRequest, run));
      }
    }
  } else if (op == "done") {
    OnWorkerDone(conn, req);
  } else if (op == "sched_stat") {
    json resp = OkResponse(id);
    resp["stats"] = Stats();
    loop_.Send(conn, JsonMessage(kMsgResponse, resp));
  } else {
    MRLOG_DEBUG << "scheduler ignoring op " << op;
  }
}

void LocalScheduler::Submit(const TaskTableEntry &entry, uint64_t version) {
  RouteSubmit(entry, version, 0, 0);
}

void LocalScheduler::RouteSubmit(const TaskTableEntry &entry, uint64_t version,
                                 ConnId ack_conn, uint64_t ack_id) {
  if (entry.spec.kind == TaskKind::kActorMethod) {
    SubmitActorMethod(entry, version, ack_conn, ack_id);
    return;
  }
  // Bottom-up rule: local iff the queue is short and the node's total
  // resources could ever satisfy the demand.
  bool local = QueueLen() < opts_.config.forward_threshold &&
               ResourcesSatisfy(opts_.resources_total, entry.spec.resources);
  if (local) {
    EnqueueLocal(entry, version);
  } else {
    Forward(entry, version);
  }
}

void LocalScheduler::EnqueueLocal(TaskTableEntry entry, uint64_t version) {
  if (entry.spec.kind == TaskKind::kActorMethod) {
    SubmitActorMethod(std::move(entry), version, 0, 0);
    return;
  }
  UniqueId task_id = entry.spec.task_id;
  if (tasks_.contains(task_id)) return;  // duplicate queueing is benign
  QueuedTask task;
  task.version = version;
  task.missing = MissingArgs(entry.spec);
  task.entry = std::move(entry);
  bool ready = task.missing.empty();
  for (const UniqueId &object_id : task.missing) {
    arg_waiters_[object_id].push_back(task_id);
  }
  tasks_.emplace(task_id, std::move(task));
  if (ready) {
    ready_.push_back(task_id);
    TryDispatch();
  }
}

void LocalScheduler::OnObjectSealed(const UniqueId &object_id) {
  auto it = arg_waiters_.find(object_id);
  if (it != arg_waiters_.end()) {
    std::vector<UniqueId> waiters = std::move(it->second);
    arg_waiters_.erase(it);
    for (const UniqueId &task_id : waiters) {
      auto tit = tasks_.find(task_id);
      if (tit == tasks_.end()) continue;
      tit->second.missing.erase(object_id);
      if (tit->second.missing.empty()) ready_.push_back(task_id);
    }
  }
  auto ait = actor_arg_waiters_.find(object_id);
  if (ait != actor_arg_waiters_.end()) {
    auto waiters = std::move(ait->second);
    actor_arg_waiters_.erase(ait);
    for (const auto &[actor_id, index] : waiters) {
      auto hit = actors_.find(actor_id);
      if (hit == actors_.end()) continue;
      auto mit = hit->second.queue.find(index);
      if (mit == hit->second.queue.end()) continue;
      mit->second.missing.erase(object_id);
      PumpActor(actor_id);
    }
  }
  TryDispatch();
}

void LocalScheduler::TryDispatch() {
  // Strict FIFO over ready function tasks.
  while (!ready_.empty()) {
    UniqueId task_id = ready_.front();
    auto it = tasks_.find(task_id);
    if (it == tasks_.end()) {
      ready_.pop_front();
      continue;
    }
    if (!ResourcesSatisfy(resources_available_, it->second.entry.spec.resources)) {
      break;
    }
    bool creation = it->second.entry.spec.kind == TaskKind::kActorCreation;
    size_t worker_index = workers_.size();
    if (!creation) {
      for (size_t i = 0; i < workers_.size(); i++) {
        if (workers_[i].conn != 0 && !workers_[i].busy) {
          worker_index = i;
          break;
        }
      }
      if (worker_index == workers_.size()) break;  // no idle worker
    }
    ready_.pop_front();
    QueuedTask task = std::move(it->second);
    tasks_.erase(it);
    if (creation) {
      BeginActorCreation(std::move(task.entry), task.version);
      continue;
    }
    workers_[worker_index].busy = true;
    workers_[worker_index].running_task = task_id;
    ResourcesSubtract(resources_available_, task.entry.spec.resources);
    DispatchFunction(std::move(task));
  }
}

void LocalScheduler::DispatchFunction(QueuedTask task) {
  UniqueId task_id = task.entry.spec.task_id;
  CasDispatch(
      std::move(task.entry), task.version, 0,
      [this, task_id](Result<uint64_t> version, TaskTableEntry written) {
        auto release = [&] {
          for (auto &slot : workers_) {
            if (slot.busy && slot.running_task == task_id) {
              slot.busy = false;
              slot.running_task = UniqueId();
            }
          }
          ResourcesAdd(resources_available_, written.spec.resources);
        };
        if (!version.ok()) {
          // Someone else owns this execution; let the worker go.
          release();
          TryDispatch();
          return;
        }
        for (auto &slot : workers_) {
          if (slot.busy && slot.running_task == task_id) {
            if (slot.conn == 0 || !loop_.IsOpen(slot.conn)) {
              release();
              EnqueueLocal(written, version.value());
              return;
            }
            for (const ObjectRef &ref : written.spec.RefArgs()) {
              store_.Pin(ref.object_id);
            }
            dispatched_count_++;
            running_[task_id] = Running{written, version.value()};
            RunOnWorker(slot.conn, written, version.value());
            return;
          }
        }
        // Worker vanished while we were logging the dispatch.
        ResourcesAdd(resources_available_, written.spec.resources);
        EnqueueLocal(written, version.value());
      });
}

void LocalScheduler::CasDispatch(TaskTableEntry entry, uint64_t version,
                                 int attempt, CasDoneFn done) {
  if (attempt >= kMaxCasAttempts) {
    done(Status::Error(ErrorCode::kVersionConflict, "dispatch cas exhausted"),
         std::move(entry));
    return;
  }
  entry.state = TaskState::kDispatched;
  entry.executions++;
  entry.last_node = opts_.node_id;
  entry.updated_at_ms = WallMs();
  UniqueId task_id = entry.spec.task_id;
  Bytes payload = ToBytes(entry.ToJson());
  gcs_.PutAsync(
      GcsTable::kTask, task_id, std::move(payload), version,
      [this, entry = std::move(entry), done = std::move(done), attempt,
       task_id](Result<uint64_t> put) mutable {
        if (put.ok()) {
          uint64_t new_version = put.value();
          loop_.Post([done = std::move(done), new_version,
                      entry = std::move(entry)]() mutable {
            done(new_version, std::move(entry));
          });
          return;
        }
        if (put.status().code() != ErrorCode::kVersionConflict) {
          Status s = put.status();
          loop_.Post([done = std::move(done), s,
                      entry = std::move(entry)]() mutable {
            done(s, std::move(entry));
          });
          return;
        }
        // Re-read: retry only while the record is still submitted/lost.
        gcs_.GetAsync(
            GcsTable::kTask, task_id,
            [this, entry = std::move(entry), done = std::move(done),
             attempt](Result<std::optional<GcsRecord>> rec) mutable {
              loop_.Post([this, entry = std::move(entry),
                          done = std::move(done), attempt,
                          rec = std::move(rec)]() mutable {
                // Undo the local bump; the retry re-applies it.
                entry.state = TaskState::kSubmitted;
                entry.executions--;
                if (!rec.ok() || !rec.value().has_value()) {
                  // Record probably still in flight from the submitter.
                  loop_.After(10, [this, entry = std::move(entry),
                                   done = std::move(done), attempt]() mutable {
                    CasDispatch(std::move(entry), 1, attempt + 1,
                                std::move(done));
                  });
                  return;
                }
                auto current = TaskTableEntry::FromJson(
                    ToString(rec.value()->value));
                if (!current.ok()) {
                  done(current.status(), std::move(entry));
                  return;
                }
                if (current.value().state != TaskState::kSubmitted &&
                    current.value().state != TaskState::kLost) {
                  done(Status::Error(ErrorCode::kVersionConflict,
                                     "task owned elsewhere"),
                       std::move(entry));
                  return;
                }
                TaskTableEntry fresh = current.take();
                uint64_t fresh_version = rec.value()->version;
                fresh.spec = entry.spec;
                CasDispatch(std::move(fresh), fresh_version, attempt + 1,
                            std::move(done));
              });
            });
      });
}

void LocalScheduler::RunOnWorker(ConnId worker_conn, const TaskTableEntry &entry,
                                 uint64_t version_after_dispatch) {
  json run{{"id", 0},
           {"op", "run"},
           {"spec", json::parse(entry.spec.ToJson())},
           {"version", version_after_dispatch}};
  loop_.Send(worker_conn, JsonMessage(kMsgRequest, run));
}

void LocalScheduler::OnWorkerDone(ConnId conn, const json &req) {
  auto task_id = UniqueId::FromHex(req.value("task_id", ""));
  if (!task_id) return;
  bool ok = req.value("ok", false);
  std::string error = req.value("error", "");
  double exec_ms = req.value("exec_ms", 0.0);

  auto rit = running_.find(*task_id);
  if (rit == running_.end()) return;
  Running running = std::move(rit->second);
  running_.erase(rit);

  auto wit = worker_by_conn_.find(conn);
  if (wit != worker_by_conn_.end()) {
    WorkerSlot &slot = workers_[wit->second];
    if (slot.running_task == *task_id) {
      slot.busy = false;
      slot.running_task = UniqueId();
    }
  }
  UniqueId done_actor;
  auto ait = actor_by_conn_.find(conn);
  if (ait != actor_by_conn_.end()) done_actor = ait->second;

  const TaskSpec &spec = running.entry.spec;
  if (spec.kind == TaskKind::kFunction) {
    ResourcesAdd(resources_available_, spec.resources);
  }
  for (const ObjectRef &ref : spec.RefArgs()) {
    store_.Unpin(ref.object_id);
  }
  exec_samples_.push_back(ExecSample{spec.function_id, exec_ms});
  done_count_++;
  FinishTaskRecord(running.entry, running.version_after_dispatch, ok, error);

  if (spec.kind == TaskKind::kActorCreation && !done_actor.IsNil()) {
    auto hit = actors_.find(done_actor);
    if (hit != actors_.end()) {
      hit->second.executing = false;
      hit->second.creation.reset();
      if (ok) {
        hit->second.alive = true;
        MarkActorAlive(done_actor, 0);
        PumpActor(done_actor);
      }
    }
  } else if (spec.kind == TaskKind::kActorMethod && !done_actor.IsNil()) {
    auto hit = actors_.find(done_actor);
    if (hit != actors_.end()) {
      hit->second.executing = false;
      hit->second.next_run_index = std::max(
          hit->second.next_run_index, spec.actor_method_index.value_or(0) + 1);
      PumpActor(done_actor);
    }
  }
  TryDispatch();
}

void LocalScheduler::FinishTaskRecord(TaskTableEntry entry,
                                      uint64_t version_after_dispatch, bool ok,
                                      const std::string &error) {
  entry.state = ok ? TaskState::kDone : TaskState::kError;
  entry.executions = std::max<uint64_t>(entry.executions, 1);
  entry.last_node = opts_.node_id;
  entry.error = ok ? "" : error;
  entry.updated_at_ms = WallMs();
  // The done transition is conditional too: if the monitor marked us lost in
  // the meantime, the lost record wins and re-execution stays idempotent.
  gcs_.PutAsync(GcsTable::kTask, entry.spec.task_id, ToBytes(entry.ToJson()),
                version_after_dispatch, [](Result<uint64_t> put) {
                  if (!put.ok() &&
                      put.status().code() != ErrorCode::kVersionConflict) {
                    MRLOG_WARN << "done write: " << put.status().ToString();
                  }
                });
}

void LocalScheduler::Forward(const TaskTableEntry &entry, uint64_t version) {
  if (forwarded_.emplace(entry.spec.task_id, std::make_pair(entry, version))
          .second) {
    forwarded_count_++;
  }
  auto globals = list_globals_ ? list_globals_()
                               : std::vector<std::pair<UniqueId, NodeAddr>>{};
  if (globals.empty()) {
    // No global scheduler known yet; retry shortly.
    UniqueId task_id = entry.spec.task_id;
    loop_.After(100, [this, task_id] {
      auto it = forwarded_.find(task_id);
      if (it == forwarded_.end()) return;
      auto [e, v] = it->second;
      Forward(e, v);
    });
    return;
  }
  const auto &[global_id, addr] = globals[next_global_++ % globals.size()];
  ConnId conn = 0;
  auto cit = global_conns_.find(global_id);
  if (cit != global_conns_.end() && loop_.IsOpen(cit->second)) {
    conn = cit->second;
  } else {
    auto dialed = loop_.Connect(addr.host, addr.port, 1000);
    if (!dialed.ok()) {
      UniqueId task_id = entry.spec.task_id;
      loop_.After(100, [this, task_id] {
        auto it = forwarded_.find(task_id);
        if (it == forwarded_.end()) return;
        auto [e, v] = it->second;
        Forward(e, v);
      });
      return;
    }
    conn = dialed.value();
    global_conns_[global_id] = conn;
    global_by_conn_[conn] = global_id;
  }
  json req{{"id", 0},
           {"op", "fwd"},
           {"entry", json::parse(entry.ToJson())},
           {"version", version},
           {"origin", opts_.node_id.Hex()}};
  loop_.Send(conn, JsonMessage(kMsgRequest, req));
}

void LocalScheduler::ReforwardAll(ConnId dead_conn) {
  auto git = global_by_conn_.find(dead_conn);
  if (git == global_by_conn_.end()) return;
  global_conns_.erase(git->second);
  global_by_conn_.erase(git);
  // Everything unacked might have died with the replica; re-forward.
  std::vector<std::pair<TaskTableEntry, uint64_t>> pending;
  for (auto &[task_id, p] : forwarded_) pending.push_back(p);
  for (auto &[entry, version] : pending) Forward(entry, version);
}

void LocalScheduler::BeginActorCreation(TaskTableEntry entry, uint64_t version) {
  UniqueId actor_id = entry.spec.actor_id.value_or(UniqueId());
  if (actor_id.IsNil() || actors_.contains(actor_id)) return;
  ResourcesSubtract(resources_available_, entry.spec.resources);
  ActorHost host;
  host.actor_id = actor_id;
  host.held_resources = entry.spec.resources;
  actors_.emplace(actor_id, std::move(host));
  CasDispatch(std::move(entry), version, 0,
              [this, actor_id](Result<uint64_t> ver, TaskTableEntry written) {
                auto it = actors_.find(actor_id);
                if (it == actors_.end()) return;
                if (!ver.ok()) {
                  ResourcesAdd(resources_available_, it->second.held_resources);
                  actors_.erase(it);
                  TryDispatch();
                  return;
                }
                it->second.creation = written;
                it->second.creation_version = ver.value();
                dispatched_count_++;
                running_[written.spec.task_id] = Running{written, ver.value()};
                if (!prepare_actor_) {
                  if (spawn_actor_) spawn_actor_(written.spec);
                  return;
                }
                prepare_actor_(
                    written.spec, [this, actor_id,
                                   spec = written.spec](ActorBootstrap boot) {
                      auto hit = actors_.find(actor_id);
                      if (hit == actors_.end()) return;
                      hit->second.next_index = boot.next_index;
                      hit->second.next_run_index = boot.next_run_index;
                      hit->second.restore_object = boot.restore_object;
                      if (spawn_actor_) spawn_actor_(spec);
                      for (auto &[entry, version] : boot.replay) {
                        SubmitActorMethod(entry, version, 0, 0);
                      }
                    });
              });
}

void LocalScheduler::SubmitActorMethod(TaskTableEntry entry, uint64_t version,
                                       ConnId ack_conn, uint64_t ack_id) {
  UniqueId actor_id = entry.spec.actor_id.value_or(UniqueId());
  auto it = actors_.find(actor_id);
  if (it == actors_.end()) {
    // Not hosted here (yet): wake recovery and let the caller re-resolve.
    if (restore_actor_) restore_actor_(actor_id);
    if (ack_conn != 0 && ack_id != 0) {
      loop_.Send(ack_conn,
                 JsonMessage(kMsgResponse,
                             ErrResponse(ack_id, Status::Error(
                                                     ErrorCode::kActorDead,
                                                     "actor not hosted here"))));
    }
    return;
  }
  ActorHost &host = it->second;
  uint64_t index = entry.spec.actor_method_index.has_value()
                       ? *entry.spec.actor_method_index
                       : host.next_index;
  bool duplicate = index < host.next_run_index || host.queue.contains(index);
  if (!entry.spec.actor_method_index.has_value()) {
    // Arrival order assigns the chain position.
    entry.spec.actor_method_index = index;
    host.next_index = std::max(host.next_index, index + 1);
  }
  if (duplicate) {
    // Re-sent method we already know; ack and drop.
    if (ack_conn != 0 && ack_id != 0) {
      json resp = OkResponse(ack_id);
      resp["index"] = index;
      loop_.Send(ack_conn, JsonMessage(kMsgResponse, resp));
    }
    return;
  }
  CasDispatch(std::move(entry), version, 0,
              [this, actor_id, index, ack_conn, ack_id](
                  Result<uint64_t> ver, TaskTableEntry written) {
                auto it = actors_.find(actor_id);
                if (!ver.ok()) {
                  // Either already executed (resend of a done method) or
                  // owned elsewhere; ack so the caller stops retrying.
                  if (ack_conn != 0 && ack_id != 0 && loop_.IsOpen(ack_conn)) {
                    json resp = OkResponse(ack_id);
                    resp["index"] = index;
                    loop_.Send(ack_conn, JsonMessage(kMsgResponse, resp));
                  }
                  return;
                }
                if (it == actors_.end()) return;
                PendingMethod method;
                method.entry = std::move(written);
                method.version = ver.value();
                for (const ObjectRef &ref : method.entry.spec.RefArgs()) {
                  if (!store_.IsSealedLocally(ref.object_id)) {
                    method.missing.insert(ref.object_id);
                    store_.EnsureLocal(ref);
                    actor_arg_waiters_[ref.object_id].emplace_back(actor_id,
                                                                   index);
                  }
                }
                dispatched_count_++;
                it->second.queue.emplace(index, std::move(method));
                if (ack_conn != 0 && ack_id != 0 && loop_.IsOpen(ack_conn)) {
                  json resp = OkResponse(ack_id);
                  resp["index"] = index;
                  loop_.Send(ack_conn, JsonMessage(kMsgResponse, resp));
                }
                PumpActor(actor_id);
              });
}

void LocalScheduler::PumpActor(const UniqueId &actor_id) {
  auto it = actors_.find(actor_id);
  if (it == actors_.end()) return;
  ActorHost &host = it->second;
  if (!host.alive || host.executing || host.conn == 0) return;
  auto mit = host.queue.find(host.next_run_index);
  if (mit == host.queue.end()) return;
  if (!mit->second.missing.empty()) return;
  PendingMethod method = std::move(mit->second);
  host.queue.erase(mit);
  host.executing = true;
  host.current_task = method.entry.spec.task_id;
  for (const ObjectRef &ref : method.entry.spec.RefArgs()) {
    store_.Pin(ref.object_id);
  }
  running_[method.entry.spec.task_id] = Running{method.entry, method.version};
  RunOnWorker(host.conn, method.entry, method.version);
}

void LocalScheduler::MarkActorAlive(const UniqueId &actor_id, int attempt) {
  if (attempt >= kMaxCasAttempts) return;
  gcs_.GetAsync(
      GcsTable::kActor, actor_id,
      [this, actor_id, attempt](Result<std::optional<GcsRecord>> rec) {
        if (!rec.ok() || !rec.value().has_value()) return;
        auto entry = ActorTableEntry::FromJson(ToString(rec.value()->value));
        if (!entry.ok()) return;
        ActorTableEntry e = entry.take();
        e.state = ActorLifeState::kAlive;
        e.node_id = opts_.node_id;
        gcs_.PutAsync(GcsTable::kActor, actor_id, ToBytes(e.ToJson()),
                      rec.value()->version,
                      [this, actor_id, attempt](Result<uint64_t> put) {
                        if (!put.ok() && put.status().code() ==
                                             ErrorCode::kVersionConflict) {
                          MarkActorAlive(actor_id, attempt + 1);
                        }
                      });
      });
}

void LocalScheduler::OnDisconnect(ConnId conn) {
  auto wit = worker_by_conn_.find(conn);
  if (wit != worker_by_conn_.end()) {
    WorkerSlot &slot = workers_[wit->second];
    UniqueId running = slot.running_task;
    slot.conn = 0;
    slot.busy = false;
    slot.running_task = UniqueId();
    worker_by_conn_.erase(wit);
    if (!running.IsNil()) {
      MRLOG_WARN << "worker died running " << running.Hex();
      // Revert the record so the task reruns (here or elsewhere).
      gcs_.GetAsync(
          GcsTable::kTask, running,
          [this](Result<std::optional<GcsRecord>> rec) {
            if (!rec.ok() || !rec.value().has_value()) return;
            auto entry = TaskTableEntry::FromJson(ToString(rec.value()->value));
            if (!entry.ok() || entry.value().state != TaskState::kDispatched) {
              return;
            }
            TaskTableEntry e = entry.take();
            e.state = TaskState::kSubmitted;
            e.updated_at_ms = WallMs();
            ResourceMap res = e.spec.resources;
            uint64_t expect = rec.value()->version;
            std::string payload = e.ToJson();
            gcs_.PutAsync(GcsTable::kTask, e.spec.task_id, ToBytes(payload),
                          expect, [this, e](Result<uint64_t> put) {
                            if (!put.ok()) return;
                            loop_.Post([this, e, v = put.value()] {
                              ResourcesAdd(resources_available_,
                                           e.spec.resources);
                              EnqueueLocal(e, v);
                            });
                          });
          });
    }
    return;
  }
  auto ait = actor_by_conn_.find(conn);
  if (ait != actor_by_conn_.end()) {
    UniqueId actor_id = ait->second;
    actor_by_conn_.erase(ait);
    auto hit = actors_.find(actor_id);
    if (hit != actors_.end()) {
      MRLOG_WARN << "actor process died: " << actor_id.Hex();
      ResourcesAdd(resources_available_, hit->second.held_resources);
      actors_.erase(hit);
      // Mark dead so demand can restore it (possibly right back here).
      gcs_.GetAsync(
          GcsTable::kActor, actor_id,
          [this, actor_id](Result<std::optional<GcsRecord>> rec) {
            if (!rec.ok() || !rec.value().has_value()) return;
            auto entry = ActorTableEntry::FromJson(ToString(rec.value()->value));
            if (!entry.ok()) return;
            ActorTableEntry e = entry.take();
            if (e.state != ActorLifeState::kAlive &&
                e.state != ActorLifeState::kCreating) {
              return;
            }
            e.state = ActorLifeState::kDead;
            gcs_.PutAsync(GcsTable::kActor, actor_id, ToBytes(e.ToJson()),
                          rec.value()->version, [](Result<uint64_t>) {});
          });
      TryDispatch();
    }
    return;
  }
  ReforwardAll(conn);
}

NodeRecord LocalScheduler::BuildHeartbeat(uint64_t seq,
                                          std::vector<double> bandwidth) {
  NodeRecord rec;
  rec.node_id = opts_.node_id;
  rec.name = opts_.node_name;
  rec.seq = seq;
  rec.queue_len = QueueLen();
  rec.resources_total = opts_.resources_total;
  rec.resources_available = resources_available_;
  rec.exec_samples = std::move(exec_samples_);
  exec_samples_.clear();
  rec.bandwidth_samples = std::move(bandwidth);
  return rec;
}

json LocalScheduler::Stats() const {
  return json{{"queue_len", QueueLen()},
              {"forwarded", forwarded_count_},
              {"dispatched", dispatched_count_},
              {"done", done_count_},
              {"placed", placed_count_},
              {"workers", workers_.size()},
              {"actors", actors_.size()}};
}

}  // namespace miniray
