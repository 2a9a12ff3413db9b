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

#include "sched/global_scheduler.h"

#include <memory>

#include "common/clock.h"
#include "common/logging.h"
#include "store/object_store.h"

namespace miniray {

GlobalScheduler::GlobalScheduler(EventLoop &loop, GcsClient &gcs, Options opts)
    : loop_(loop), gcs_(gcs), opts_(std::move(opts)), estimates_(opts_.config) {}

Status GlobalScheduler::Start() {
  auto port = loop_.Listen(opts_.listen_port);
  if (!port.ok()) return port.status();
  opts_.listen_port = port.value();

  loop_.set_handlers(EventLoop::Handlers{
      [this](ConnId conn, Message msg) { OnMessage(conn, msg); },
      [this](ConnId conn) { OnClose(conn); },
      nullptr,
  });

  gcs_.Subscribe({TablePattern(GcsTable::kClient)}, [this](const GcsRecord &rec) {
    loop_.Post([this, rec] { OnClientTableEvent(rec); });
  });

  // Register self so local schedulers can find us.
  ComponentRecord self;
  self.component_id = opts_.id;
  self.name = opts_.name;
  self.kind = "global_sched";
  self.port = opts_.listen_port;
  gcs_.PutAsync(GcsTable::kClient, opts_.id, ToBytes(self.ToJson()),
                std::nullopt, [](Result<uint64_t>) {});

  if (opts_.supervisor_port != 0) {
    auto conn = loop_.Connect(opts_.supervisor_host, opts_.supervisor_port, 2000);
    if (conn.ok()) supervisor_conn_ = conn.value();
  }
  loop_.Every(opts_.config.heartbeat_ms, [this] { SendHeartbeat(); });
  return Status::Ok();
}

void GlobalScheduler::SendHeartbeat() {
  if (supervisor_conn_ == 0 || !loop_.IsOpen(supervisor_conn_)) return;
  json j{{"op", "hb"},
         {"id", 0},
         {"name", opts_.name},
         {"kind", "global_sched"},
         {"port", opts_.listen_port},
         {"seq", ++hb_seq_},
         {"placed", placed_}};
  loop_.Send(supervisor_conn_, JsonMessage(kMsgRequest, j));
}

void GlobalScheduler::OnClientTableEvent(const GcsRecord &rec) {
  auto node = NodeRecord::FromJson(ToString(rec.value));
  if (!node.ok()) return;
  const NodeRecord &r = node.value();
  if (!r.alive) {
    estimates_.Remove(r.node_id);
    node_addrs_.erase(r.node_id);
    auto cit = node_conns_.find(r.node_id);
    if (cit != node_conns_.end()) {
      loop_.Close(cit->second);
      node_conns_.erase(cit);
    }
    return;
  }
  node_addrs_[r.node_id] = NodeAddr{r.host, r.sched_port};
  estimates_.ApplyReport(r);  // stale reports are dropped inside
}

void GlobalScheduler::OnMessage(ConnId conn, const Message &msg) {
  if (msg.tag != kMsgRequest) return;
  auto parsed = ParseJsonPayload(msg.payload);
  if (!parsed.ok()) return;
  const json &req = parsed.value();
  std::string op = req.value("op", "");
  if (op == "fwd") {
    auto entry =
        TaskTableEntry::FromJson(req.value("entry", json::object()).dump());
    if (!entry.ok()) return;
    HandleForward(conn, entry.take(), req.value("version", 1ull), 0);
  } else if (op == "gstat") {
    json resp = OkResponse(req.value("id", 0ull));
    resp["placed"] = placed_;
    resp["nodes"] = estimates_.size();
    loop_.Send(conn, JsonMessage(kMsgResponse, resp));
  }
}

void GlobalScheduler::OnClose(ConnId conn) {
  for (auto it = node_conns_.begin(); it != node_conns_.end(); ++it) {
    if (it->second == conn) {
      node_conns_.erase(it);
      break;
    }
  }
}

void GlobalScheduler::HandleForward(ConnId origin, TaskTableEntry entry,
                                    uint64_t version, int attempt) {
  if (estimates_.size() == 0) {
    // Heartbeats have not reached us yet; hold the task briefly.
    if (attempt > 100) {
      MarkInfeasible(std::move(entry), version, 0);
      return;
    }
    loop_.After(50, [this, origin, entry = std::move(entry), version,
                     attempt]() mutable {
      HandleForward(origin, std::move(entry), version, attempt + 1);
    });
    return;
  }
  std::vector<ObjectRef> refs = entry.spec.RefArgs();
  if (refs.empty()) {
    Decide(origin, entry, version, {});
    return;
  }
  // Look up input sizes and locations, then decide.
  struct Gather {
    std::unordered_map<UniqueId, uint64_t> remote_bytes;
    std::vector<ObjectTableEntry> entries;
    size_t remaining = 0;
  };
  auto gather = std::make_shared<Gather>();
  gather->remaining = refs.size();
  auto finish = [this, origin, entry, version, gather] {
    std::unordered_map<UniqueId, uint64_t> remote_bytes;
    for (const auto *est : estimates_.All()) {
      uint64_t total = 0;
      for (const ObjectTableEntry &obj : gather->entries) {
        bool resident = false;
        for (const UniqueId &loc : obj.locations) {
          if (loc == est->node_id) {
            resident = true;
            break;
          }
        }
        if (!resident) total += obj.size_bytes;
      }
      remote_bytes[est->node_id] = total;
    }
    Decide(origin, entry, version, remote_bytes);
  };
  for (const ObjectRef &ref : refs) {
    gcs_.GetAsync(
        GcsTable::kObject, ref.object_id,
        [this, gather, finish](Result<std::optional<GcsRecord>> rec) {
          loop_.Post([gather, finish, rec = std::move(rec)] {
            if (rec.ok() && rec.value().has_value()) {
              auto parsed =
                  ObjectTableEntry::FromJson(ToString(rec.value()->value));
              if (parsed.ok()) gather->entries.push_back(parsed.take());
            }
            if (--gather->remaining == 0) finish();
          });
        },
        3000);
  }
}

void GlobalScheduler::Decide(
    ConnId origin, const TaskTableEntry &entry, uint64_t version,
    const std::unordered_map<UniqueId, uint64_t> &remote_bytes) {
  Result<UniqueId> choice = Status::Ok();
  if (opts_.config.placement_mode == "random") {
    std::vector<UniqueId> feasible;
    for (const auto *est : estimates_.All()) {
      if (ResourcesSatisfy(est->resources_total, entry.spec.resources)) {
        feasible.push_back(est->node_id);
      }
    }
    if (feasible.empty()) {
      choice = Status::Error(ErrorCode::kInfeasible, "no feasible node");
    } else {
      choice = feasible[std::uniform_int_distribution<size_t>(
          0, feasible.size() - 1)(rng_)];
    }
  } else {
    choice = ChooseNode(estimates_.All(), entry.spec.resources,
                        entry.spec.function_id, remote_bytes);
  }
  if (!choice.ok()) {
    MRLOG_WARN << "infeasible task " << entry.spec.task_id.Hex() << ": "
               << choice.status().ToString();
    MarkInfeasible(entry, version, 0);
    if (origin != 0 && loop_.IsOpen(origin)) {
      loop_.Send(origin,
                 JsonMessage(kMsgRequest,
                             json{{"id", 0},
                                  {"op", "fwd_ok"},
                                  {"task_id", entry.spec.task_id.Hex()}}));
    }
    return;
  }
  Place(choice.value(), entry, version);
  estimates_.BumpQueue(choice.value());
  if (origin != 0 && loop_.IsOpen(origin)) {
    loop_.Send(origin, JsonMessage(kMsgRequest,
                                   json{{"id", 0},
                                        {"op", "fwd_ok"},
                                        {"task_id", entry.spec.task_id.Hex()}}));
  }
}

void GlobalScheduler::Place(const UniqueId &node_id, const TaskTableEntry &entry,
                            uint64_t version) {
  ConnId conn = 0;
  auto cit = node_conns_.find(node_id);
  if (cit != node_conns_.end() && loop_.IsOpen(cit->second)) {
    conn = cit->second;
  } else {
    auto ait = node_addrs_.find(node_id);
    if (ait == node_addrs_.end()) return;
    auto dialed = loop_.Connect(ait->second.host, ait->second.port, 1000);
    if (!dialed.ok()) {
      MRLOG_WARN << "cannot reach node for placement: "
                 << dialed.status().ToString();
      return;
    }
    conn = dialed.value();
    node_conns_[node_id] = conn;
  }
  placed_++;
  loop_.Send(conn, JsonMessage(kMsgRequest,
                               json{{"id", 0},
                                    {"op", "place"},
                                    {"entry", json::parse(entry.ToJson())},
                                    {"version", version}}));
}

void GlobalScheduler::MarkInfeasible(TaskTableEntry entry, uint64_t version,
                                     int attempt) {
  if (attempt >= 8) return;
  entry.state = TaskState::kError;
  entry.error = "Infeasible: no node satisfies the resource demand";
  entry.updated_at_ms = WallMs();
  UniqueId task_id = entry.spec.task_id;
  Bytes payload = ToBytes(entry.ToJson());
  gcs_.PutAsync(GcsTable::kTask, task_id, std::move(payload), version,
                [this, entry = std::move(entry),
                 attempt](Result<uint64_t> put) mutable {
                  if (put.ok() ||
                      put.status().code() != ErrorCode::kVersionConflict) {
                    return;
                  }
                  UniqueId task_id = entry.spec.task_id;
                  gcs_.GetAsync(
                      GcsTable::kTask, task_id,
                      [this, entry = std::move(entry), attempt](
                          Result<std::optional<GcsRecord>> rec) mutable {
                        if (!rec.ok() || !rec.value().has_value()) return;
                        auto cur = TaskTableEntry::FromJson(
                            ToString(rec.value()->value));
                        if (!cur.ok() ||
                            cur.value().state != TaskState::kSubmitted) {
                          return;
                        }
                        uint64_t v = rec.value()->version;
                        loop_.Post([this, entry = std::move(entry), v,
                                    attempt]() mutable {
                          MarkInfeasible(std::move(entry), v, attempt + 1);
                        });
                      });
                });
}

}  // namespace miniray
