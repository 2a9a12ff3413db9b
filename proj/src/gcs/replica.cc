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

#include "gcs/replica.h"

#include "common/logging.h"

namespace miniray {

namespace {
constexpr size_t kSyncPageRecords = 512;
constexpr size_t kScanPageLimit = 1024;

Result<GcsRecord> RecordFromWire(const json &j) {
  GcsRecord rec;
  int table = j.value("table", 0);
  if (table < 1 || table > 5) {
    return Status::Error(ErrorCode::kInvalidArgument, "bad table");
  }
  rec.table = static_cast<GcsTable>(table);
  auto key = UniqueId::FromHex(j.value("key", ""));
  auto value = FromHex(j.value("value", ""));
  if (!key || !value) {
    return Status::Error(ErrorCode::kInvalidArgument, "bad record");
  }
  rec.key = *key;
  rec.value = std::move(*value);
  rec.version = j.value("version", 0ull);
  rec.seq = j.value("seq", 0ull);
  return rec;
}
}  // namespace

GcsReplica::GcsReplica(EventLoop &loop, Options opts)
    : loop_(loop), opts_(std::move(opts)), storage_(opts_.flush) {}

Status GcsReplica::Start() {
  if (Status s = storage_.LoadFromDisk(); !s.ok()) return s;
  next_seq_ = storage_.last_seq() + 1;
  auto port = loop_.Listen(opts_.listen_port);
  if (!port.ok()) return port.status();
  opts_.listen_port = port.value();

  loop_.set_handlers(EventLoop::Handlers{
      [this](ConnId conn, Message msg) { OnMessage(conn, std::move(msg)); },
      [this](ConnId conn) { OnClose(conn); },
      nullptr,
  });

  if (opts_.supervisor_port != 0) {
    auto conn =
        loop_.Connect(opts_.supervisor_host, opts_.supervisor_port, 2000);
    if (!conn.ok()) return conn.status();
    supervisor_conn_ = conn.value();
    SendHeartbeat();
  }
  loop_.Every(opts_.heartbeat_ms, [this] { SendHeartbeat(); });
  loop_.Every(opts_.flush.flush_interval_ms, [this] { MaybeFlush(); });
  return Status::Ok();
}

void GcsReplica::SendHeartbeat() {
  if (supervisor_conn_ == 0 || !loop_.IsOpen(supervisor_conn_)) return;
  json j{{"op", "hb"},
         {"id", 0},
         {"name", opts_.name},
         {"kind", "gcs"},
         {"shard", opts_.shard},
         {"port", opts_.listen_port},
         {"seq", ++hb_seq_},
         {"last_seq", storage_.last_seq()},
         {"footprint", storage_.MemoryFootprint()},
         {"epoch", epoch_}};
  loop_.Send(supervisor_conn_, JsonMessage(kMsgRequest, j));
}

void GcsReplica::MaybeFlush() {
  if (!storage_.NeedsFlush()) return;
  auto freed = storage_.Flush();
  if (!freed.ok()) {
    MRLOG_ERROR << "flush failed: " << freed.status().ToString();
  }
}

void GcsReplica::OnMessage(ConnId conn, Message msg) {
  auto parsed = ParseJsonPayload(msg.payload);
  if (!parsed.ok()) return;
  json j = parsed.take();
  if (conn == supervisor_conn_ && msg.tag == kMsgEvent) {
    HandleSupervisorEvent(j);
    return;
  }
  if (msg.tag == kMsgRequest) HandleRequest(conn, j);
}

void GcsReplica::OnClose(ConnId conn) {
  subscribers_.erase(conn);
  sync_out_.erase(conn);
  shadow_successors_.erase(conn);
  if (conn == successor_conn_) {
    successor_conn_ = 0;
    // The supervisor will reconfigure; nothing to do until then.
  }
  if (conn == supervisor_conn_) {
    MRLOG_WARN << "lost supervisor connection";
    supervisor_conn_ = 0;
  }
}

void GcsReplica::HandleSupervisorEvent(const json &ev) {
  std::string op = ev.value("ev", "");
  if (op == "cfg") {
    std::vector<ChainMember> members;
    for (const json &m : ev.value("members", json::array())) {
      members.push_back(ChainMember{m.value("name", ""), m.value("host", ""),
                                    static_cast<uint16_t>(m.value("port", 0))});
    }
    ApplyConfig(ev.value("epoch", 0ull), std::move(members));
  } else if (op == "sync_from") {
    // Join the chain: pull a snapshot from the current tail. The source
    // shadow-forwards live applies from the moment it sees our request.
    std::string host = ev.value("host", "");
    uint16_t port = static_cast<uint16_t>(ev.value("port", 0));
    auto conn = loop_.Connect(host, port, 2000);
    if (!conn.ok()) {
      MRLOG_WARN << "sync_from connect failed: " << conn.status().ToString();
      return;
    }
    loop_.Send(conn.value(),
               JsonMessage(kMsgRequest, json{{"id", 0}, {"op", "sync"}}));
  }
}

void GcsReplica::ApplyConfig(uint64_t epoch, std::vector<ChainMember> members) {
  if (epoch <= epoch_ && !members_.empty()) return;
  bool was_tail = IsTail();
  epoch_ = epoch;
  members_ = std::move(members);
  my_index_ = -1;
  for (size_t i = 0; i < members_.size(); i++) {
    if (members_[i].name == opts_.name) my_index_ = static_cast<int>(i);
  }
  MRLOG_INFO << "shard " << opts_.shard << " epoch " << epoch_ << " role "
             << (my_index_ < 0 ? "standby"
                               : (IsHead() ? (IsTail() ? "solo" : "head")
                                           : (IsTail() ? "tail" : "mid")));
  ConnectSuccessor();
  if (IsHead()) {
    next_seq_ = std::max(next_seq_, storage_.last_seq() + 1);
    RepropagatePending();
  } else {
    pending_.clear();
  }
  if (was_tail && !IsTail()) {
    // Subscribers must move to the new tail; tell them and drop them.
    for (const auto &[conn, entries] : subscribers_) {
      loop_.Send(conn, JsonMessage(kMsgEvent, json{{"ev", "resub"}}));
    }
    subscribers_.clear();
  }
}

void GcsReplica::ConnectSuccessor() {
  ConnId old = successor_conn_;
  successor_conn_ = 0;
  if (my_index_ >= 0 && my_index_ + 1 < static_cast<int>(members_.size())) {
    const ChainMember &next = members_[my_index_ + 1];
    // Reuse a shadow connection to the joiner when it just became our
    // successor; otherwise dial fresh.
    for (ConnId shadow : shadow_successors_) {
      if (loop_.IsOpen(shadow)) {
        successor_conn_ = shadow;
        break;
      }
    }
    shadow_successors_.clear();
    if (successor_conn_ == 0) {
      auto conn = loop_.Connect(next.host, next.port, 2000);
      if (conn.ok()) {
        successor_conn_ = conn.value();
      } else {
        MRLOG_WARN << "cannot reach successor " << next.name << ": "
                   << conn.status().ToString();
      }
    }
  }
  if (old != 0 && old != successor_conn_ && loop_.IsOpen(old)) loop_.Close(old);
}

void GcsReplica::RepropagatePending() {
  if (pending_.empty()) return;
  if (members_.size() == 1) {
    // Alone: everything pending commits here.
    std::vector<uint64_t> seqs;
    for (const auto &[seq, p] : pending_) seqs.push_back(seq);
    for (uint64_t seq : seqs) {
      auto it = pending_.find(seq);
      if (it == pending_.end()) continue;
      NotifySubscribers(it->second.record);
      RespondPending(seq);
    }
    return;
  }
  for (const auto &[seq, p] : pending_) {
    ForwardDown(p.record);
  }
}

void GcsReplica::ForwardDown(const GcsRecord &rec) {
  if (successor_conn_ == 0) return;
  json j{{"id", 0},
         {"op", "apply"},
         {"epoch", epoch_},
         {"table", static_cast<int>(rec.table)},
         {"key", rec.key.Hex()},
         {"value", ToHex(rec.value)},
         {"version", rec.version},
         {"seq", rec.seq}};
  loop_.Send(successor_conn_, JsonMessage(kMsgRequest, j));
}

void GcsReplica::HandleRequest(ConnId conn, const json &req) {
  const std::string op = req.value("op", "");
  uint64_t id = req.value("id", 0ull);
  auto reply = [&](json resp) {
    if (id != 0) loop_.Send(conn, JsonMessage(kMsgResponse, resp));
  };

  if (op == "put") {
    HandlePut(conn, req);
  } else if (op == "get") {
    if (!IsTail()) {
      reply(ErrResponse(id, Status::Error(ErrorCode::kNotLeader, "not tail")));
      return;
    }
    auto key = UniqueId::FromHex(req.value("key", ""));
    int table = req.value("table", 0);
    if (!key || table < 1 || table > 5) {
      reply(ErrResponse(id, Status::Error(ErrorCode::kInvalidArgument, "key")));
      return;
    }
    auto rec = storage_.Get(static_cast<GcsTable>(table), *key);
    json resp = OkResponse(id);
    resp["found"] = rec.has_value();
    if (rec) {
      resp["value"] = ToHex(rec->value);
      resp["version"] = rec->version;
      resp["seq"] = rec->seq;
    }
    reply(std::move(resp));
  } else if (op == "scan") {
    if (!IsTail()) {
      reply(ErrResponse(id, Status::Error(ErrorCode::kNotLeader, "not tail")));
      return;
    }
    int table = req.value("table", 0);
    auto prefix = FromHex(req.value("prefix", ""));
    if (table < 1 || table > 5 || !prefix) {
      reply(ErrResponse(id, Status::Error(ErrorCode::kInvalidArgument, "scan")));
      return;
    }
    std::optional<UniqueId> after;
    if (req.contains("after")) {
      after = UniqueId::FromHex(req.value("after", ""));
    }
    size_t limit = std::min<size_t>(req.value("limit", kScanPageLimit),
                                    kScanPageLimit);
    auto records = storage_.ScanPage(static_cast<GcsTable>(table), *prefix,
                                     after, limit);
    json arr = json::array();
    for (const GcsRecord &rec : records) {
      arr.push_back(json{{"key", rec.key.Hex()},
                         {"value", ToHex(rec.value)},
                         {"version", rec.version},
                         {"seq", rec.seq}});
    }
    json resp = OkResponse(id);
    resp["records"] = std::move(arr);
    resp["more"] = records.size() == limit;
    reply(std::move(resp));
  } else if (op == "sub" || op == "sub_add") {
    if (!IsTail()) {
      reply(ErrResponse(id, Status::Error(ErrorCode::kNotLeader, "not tail")));
      return;
    }
    uint64_t sub_id = req.value("sub_id", 0ull);
    std::vector<SubPattern> patterns;
    for (const json &p : req.value("patterns", json::array())) {
      int table = p.value("table", 0);
      auto prefix = FromHex(p.value("prefix", ""));
      if (table < 1 || table > 5 || !prefix) continue;
      patterns.push_back(SubPattern{static_cast<GcsTable>(table), *prefix});
    }
    auto &entries = subscribers_[conn];
    SubscriberEntry *entry = nullptr;
    for (auto &e : entries) {
      if (e.sub_id == sub_id) entry = &e;
    }
    if (entry == nullptr) {
      entries.push_back(SubscriberEntry{sub_id, {}});
      entry = &entries.back();
    }
    if (op == "sub") {
      // Replace: a re-subscribe after reconfiguration carries the full set.
      entry->patterns = patterns;
    } else {
      for (const SubPattern &p : patterns) {
        if (std::find(entry->patterns.begin(), entry->patterns.end(), p) ==
            entry->patterns.end()) {
          entry->patterns.push_back(p);
        }
      }
    }
    int64_t last_seq = req.value("last_seq", -1);
    reply(OkResponse(id));
    if (op == "sub" && last_seq >= 0) {
      auto ring = storage_.RingSince(static_cast<uint64_t>(last_seq));
      if (ring) {
        for (const GcsRecord &rec : *ring) {
          for (const SubPattern &p : entry->patterns) {
            if (p.Matches(rec.table, rec.key)) {
              loop_.Send(conn, JsonMessage(kMsgEvent, RecordToWire(rec, sub_id)));
              break;
            }
          }
        }
        return;
      }
      // Cursor fell off the ring: full current-state replay instead.
    }
    ReplayPatterns(conn, sub_id, patterns);
  } else if (op == "sub_del") {
    uint64_t sub_id = req.value("sub_id", 0ull);
    std::vector<SubPattern> patterns;
    for (const json &p : req.value("patterns", json::array())) {
      int table = p.value("table", 0);
      auto prefix = FromHex(p.value("prefix", ""));
      if (table < 1 || table > 5 || !prefix) continue;
      patterns.push_back(SubPattern{static_cast<GcsTable>(table), *prefix});
    }
    auto it = subscribers_.find(conn);
    if (it != subscribers_.end()) {
      for (auto &entry : it->second) {
        if (entry.sub_id != sub_id) continue;
        std::erase_if(entry.patterns, [&](const SubPattern &p) {
          for (const SubPattern &q : patterns) {
            if (p == q) return true;
          }
          return false;
        });
      }
    }
    reply(OkResponse(id));
  } else if (op == "apply") {
    HandleApply(conn, req);
  } else if (op == "ack") {
    HandleAck(req);
  } else if (op == "sync") {
    StartSyncStream(conn);
  } else if (op == "sync_page") {
    for (const json &r : req.value("records", json::array())) {
      auto rec = RecordFromWire(r);
      if (rec.ok()) storage_.ApplyIfNewer(rec.value());
    }
  } else if (op == "sync_done") {
    storage_.set_last_seq(req.value("last_seq", 0ull));
    next_seq_ = storage_.last_seq() + 1;
    if (supervisor_conn_ != 0) {
      json j{{"op", "sync_complete"},
             {"id", 0},
             {"name", opts_.name},
             {"shard", opts_.shard},
             {"last_seq", storage_.last_seq()}};
      loop_.Send(supervisor_conn_, JsonMessage(kMsgRequest, j));
    }
  } else if (op == "status") {
    json resp = OkResponse(id);
    resp["name"] = opts_.name;
    resp["shard"] = opts_.shard;
    resp["epoch"] = epoch_;
    resp["role"] = my_index_ < 0 ? "standby"
                   : IsHead()    ? (IsTail() ? "solo" : "head")
                   : IsTail()    ? "tail"
                                 : "mid";
    resp["footprint"] = storage_.MemoryFootprint();
    resp["records"] = storage_.RecordCount();
    resp["last_seq"] = storage_.last_seq();
    reply(std::move(resp));
  } else if (op == "flush_now") {
    auto freed = storage_.Flush();
    if (!freed.ok()) {
      reply(ErrResponse(id, freed.status()));
    } else {
      json resp = OkResponse(id);
      resp["freed"] = freed.value();
      reply(std::move(resp));
    }
  } else {
    reply(ErrResponse(id, Status::Error(ErrorCode::kInvalidArgument,
                                        "unknown op " + op)));
  }
}

void GcsReplica::HandlePut(ConnId conn, const json &req) {
  uint64_t id = req.value("id", 0ull);
  auto reply = [&](json resp) {
    if (id != 0) loop_.Send(conn, JsonMessage(kMsgResponse, resp));
  };
  if (!IsHead()) {
    reply(ErrResponse(id, Status::Error(ErrorCode::kNotLeader, "not head")));
    return;
  }
  int table = req.value("table", 0);
  auto key = UniqueId::FromHex(req.value("key", ""));
  auto value = FromHex(req.value("value", ""));
  if (table < 1 || table > 5 || !key || !value) {
    reply(ErrResponse(id, Status::Error(ErrorCode::kInvalidArgument, "put")));
    return;
  }
  uint64_t current = storage_.CurrentVersion(static_cast<GcsTable>(table), *key);
  if (req.contains("expect")) {
    uint64_t expect = req.value("expect", 0ull);
    if (current != expect) {
      json resp = ErrResponse(
          id, Status::Error(ErrorCode::kVersionConflict,
                            "version is " + std::to_string(current)));
      resp["version"] = current;
      reply(std::move(resp));
      return;
    }
  }
  GcsRecord rec;
  rec.table = static_cast<GcsTable>(table);
  rec.key = *key;
  rec.value = std::move(*value);
  rec.version = current + 1;
  rec.seq = next_seq_++;
  storage_.Apply(rec);
  MaybeFlushInline();

  Pending pending;
  pending.record = rec;
  pending.client_conn = conn;
  pending.request_id = id;
  pending.has_client = id != 0;
  pending_.emplace(rec.seq, std::move(pending));

  for (ConnId shadow : shadow_successors_) ForwardShadow(shadow, rec);
  if (members_.size() == 1) {
    NotifySubscribers(rec);
    RespondPending(rec.seq);
  } else {
    ForwardDown(rec);
  }
}

void GcsReplica::HandleApply(ConnId conn, const json &req) {
  auto rec = RecordFromWire(req);
  if (!rec.ok()) return;
  upstream_conn_ = conn;
  const GcsRecord &r = rec.value();
  if (my_index_ < 0) {
    // Joining: shadow applies interleave with snapshot pages, so ordering is
    // by version, not seq.
    storage_.ApplyIfNewer(r);
    return;
  }
  bool is_new = r.seq > storage_.last_seq();
  if (is_new) {
    if (r.seq != storage_.last_seq() + 1) {
      MRLOG_WARN << "apply gap: have " << storage_.last_seq() << " got "
                 << r.seq;
    }
    storage_.Apply(r);
    MaybeFlushInline();
  }
  for (ConnId shadow : shadow_successors_) ForwardShadow(shadow, r);
  if (IsTail()) {
    ApplyAsTail(r);
  } else if (successor_conn_ != 0) {
    // Forward even if it was a duplicate: re-propagation must reach the tail
    // so the ack and the notification happen.
    ForwardDown(r);
  }
}

void GcsReplica::ApplyAsTail(const GcsRecord &rec) {
  NotifySubscribers(rec);
  if (upstream_conn_ != 0) {
    loop_.Send(upstream_conn_, JsonMessage(kMsgRequest,
                                           json{{"id", 0},
                                                {"op", "ack"},
                                                {"seq", rec.seq}}));
  }
}

void GcsReplica::HandleAck(const json &req) {
  uint64_t seq = req.value("seq", 0ull);
  if (IsHead()) {
    RespondPending(seq);
  } else if (upstream_conn_ != 0) {
    loop_.Send(upstream_conn_,
               JsonMessage(kMsgRequest, json{{"id", 0}, {"op", "ack"},
                                             {"seq", seq}}));
  }
}

void GcsReplica::RespondPending(uint64_t seq) {
  auto it = pending_.find(seq);
  if (it == pending_.end()) return;
  const Pending &p = it->second;
  if (p.has_client && loop_.IsOpen(p.client_conn)) {
    json resp = OkResponse(p.request_id);
    resp["version"] = p.record.version;
    resp["seq"] = p.record.seq;
    loop_.Send(p.client_conn, JsonMessage(kMsgResponse, resp));
  }
  pending_.erase(it);
}

json GcsReplica::RecordToWire(const GcsRecord &rec, uint64_t sub_id) const {
  return json{{"ev", "gcs"},
              {"sub_id", sub_id},
              {"table", static_cast<int>(rec.table)},
              {"key", rec.key.Hex()},
              {"value", ToHex(rec.value)},
              {"version", rec.version},
              {"seq", rec.seq}};
}

void GcsReplica::NotifySubscribers(const GcsRecord &rec) {
  for (const auto &[conn, entries] : subscribers_) {
    for (const SubscriberEntry &entry : entries) {
      bool matched = false;
      for (const SubPattern &p : entry.patterns) {
        if (p.Matches(rec.table, rec.key)) {
          matched = true;
          break;
        }
      }
      if (matched) {
        loop_.Send(conn, JsonMessage(kMsgEvent, RecordToWire(rec, entry.sub_id)));
      }
    }
  }
}

void GcsReplica::ReplayPatterns(ConnId conn, uint64_t sub_id,
                                const std::vector<SubPattern> &patterns) {
  for (const SubPattern &p : patterns) {
    if (p.IsExact()) {
      UniqueId key = UniqueId::FromBinary(
          std::string_view(reinterpret_cast<const char *>(p.prefix.data()),
                           p.prefix.size()));
      auto rec = storage_.Get(p.table, key);
      if (rec) loop_.Send(conn, JsonMessage(kMsgEvent, RecordToWire(*rec, sub_id)));
      continue;
    }
    std::optional<UniqueId> after;
    for (;;) {
      auto page = storage_.ScanPage(p.table, p.prefix, after, kScanPageLimit);
      for (const GcsRecord &rec : page) {
        loop_.Send(conn, JsonMessage(kMsgEvent, RecordToWire(rec, sub_id)));
      }
      if (page.size() < kScanPageLimit) break;
      after = page.back().key;
    }
  }
}

void GcsReplica::StartSyncStream(ConnId conn) {
  SyncOut &out = sync_out_[conn];
  out.base_seq = storage_.last_seq();
  out.records.clear();
  storage_.Snapshot([&](const GcsRecord &rec) { out.records.push_back(rec); });
  out.next = 0;
  // From now on this connection also receives live applies.
  shadow_successors_.insert(conn);
  loop_.SetDrainCallback(conn, [this, conn] { PumpSync(conn); });
  PumpSync(conn);
}

void GcsReplica::PumpSync(ConnId conn) {
  auto it = sync_out_.find(conn);
  if (it == sync_out_.end()) return;
  SyncOut &out = it->second;
  while (out.next < out.records.size() &&
         loop_.PendingSendBytes(conn) < (4u << 20)) {
    json page;
    page["id"] = 0;
    page["op"] = "sync_page";
    json arr = json::array();
    size_t end = std::min(out.next + kSyncPageRecords, out.records.size());
    for (size_t i = out.next; i < end; i++) {
      const GcsRecord &rec = out.records[i];
      arr.push_back(json{{"table", static_cast<int>(rec.table)},
                         {"key", rec.key.Hex()},
                         {"value", ToHex(rec.value)},
                         {"version", rec.version},
                         {"seq", rec.seq}});
    }
    page["records"] = std::move(arr);
    out.next = end;
    loop_.Send(conn, JsonMessage(kMsgRequest, page));
    if (!loop_.IsOpen(conn)) {
      sync_out_.erase(conn);
      return;
    }
  }
  if (out.next >= out.records.size()) {
    loop_.Send(conn, JsonMessage(kMsgRequest, json{{"id", 0},
                                                   {"op", "sync_done"},
                                                   {"last_seq", out.base_seq}}));
    loop_.SetDrainCallback(conn, nullptr);
    sync_out_.erase(conn);
  }
}

void GcsReplica::ForwardShadow(ConnId conn, const GcsRecord &rec) {
  if (!loop_.IsOpen(conn)) return;
  json j{{"id", 0},
         {"op", "apply"},
         {"epoch", epoch_},
         {"table", static_cast<int>(rec.table)},
         {"key", rec.key.Hex()},
         {"value", ToHex(rec.value)},
         {"version", rec.version},
         {"seq", rec.seq}};
  loop_.Send(conn, JsonMessage(kMsgRequest, j));
}

void GcsReplica::MaybeFlushInline() {
  if (storage_.NeedsFlush()) {
    auto freed = storage_.Flush();
    if (!freed.ok()) MRLOG_ERROR << "flush: " << freed.status().ToString();
  }
}

}  // namespace miniray
