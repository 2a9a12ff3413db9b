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

#include "store/object_store.h"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <filesystem>
#include <random>

#include "common/clock.h"
#include "common/hash.h"
#include "common/logging.h"

namespace miniray {

namespace {
constexpr int kMaxRegisterAttempts = 12;
constexpr int kMaxPullAttempts = 6;
constexpr uint64_t kServeWindowBytes = 4u << 20;
constexpr int64_t kPaceTickMs = 20;

std::mt19937 &Rng() {
  thread_local std::mt19937 rng(std::random_device{}());
  return rng;
}
}  // namespace

std::string ObjectTableEntry::ToJson() const {
  json j;
  j["object_id"] = object_id.Hex();
  j["size_bytes"] = size_bytes;
  j["digest"] = digest_hex;
  j["producing_task"] = producing_task.Hex();
  j["output_index"] = output_index;
  json locs = json::array();
  for (const UniqueId &n : locations) locs.push_back(n.Hex());
  j["locations"] = std::move(locs);
  return j.dump();
}

Result<ObjectTableEntry> ObjectTableEntry::FromJson(const std::string &text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    return Status::Error(ErrorCode::kInvalidArgument, "malformed object entry");
  }
  ObjectTableEntry entry;
  auto id = UniqueId::FromHex(j.value("object_id", ""));
  auto task = UniqueId::FromHex(j.value("producing_task", ""));
  if (!id || !task) {
    return Status::Error(ErrorCode::kInvalidArgument, "bad object entry ids");
  }
  entry.object_id = *id;
  entry.producing_task = *task;
  entry.size_bytes = j.value("size_bytes", 0ull);
  entry.digest_hex = j.value("digest", "");
  entry.output_index = j.value("output_index", 0ull);
  for (const json &loc : j.value("locations", json::array())) {
    auto node = UniqueId::FromHex(loc.get<std::string>());
    if (node) entry.locations.push_back(*node);
  }
  return entry;
}

ObjectStore::ObjectStore(EventLoop &loop, GcsClient &gcs, Options opts)
    : loop_(loop), gcs_(gcs), opts_(std::move(opts)) {}

Status ObjectStore::Start() {
  if (!opts_.eviction_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(opts_.eviction_dir, ec);
    if (ec) {
      return Status::Error(ErrorCode::kIoError,
                           "eviction dir: " + ec.message());
    }
  }
  gcs_sub_id_ = gcs_.Subscribe({}, [this](const GcsRecord &rec) {
    loop_.Post([this, rec] { OnObjectEvent(rec); });
  });
  return Status::Ok();
}

std::string ObjectStore::EvictionPath(const UniqueId &object_id) const {
  return opts_.eviction_dir + "/" + object_id.Hex() + ".obj";
}

bool ObjectStore::IsSealedLocally(const UniqueId &object_id) const {
  return objects_.contains(object_id);
}

void ObjectStore::Touch(const UniqueId &object_id, Entry &entry) {
  if (entry.last_access != 0) lru_.erase(entry.last_access);
  entry.last_access = ++access_counter_;
  if (entry.pin_count == 0 && entry.state == ObjState::kSealed) {
    lru_[entry.last_access] = object_id;
  }
}

void ObjectStore::Pin(const UniqueId &object_id) {
  auto it = objects_.find(object_id);
  if (it == objects_.end()) return;
  if (it->second.pin_count++ == 0 && it->second.last_access != 0) {
    lru_.erase(it->second.last_access);
  }
}

void ObjectStore::Unpin(const UniqueId &object_id) {
  auto it = objects_.find(object_id);
  if (it == objects_.end()) return;
  if (it->second.pin_count > 0 && --it->second.pin_count == 0 &&
      it->second.state == ObjState::kSealed) {
    lru_[it->second.last_access] = object_id;
  }
}

Status ObjectStore::EnsureFree(uint64_t bytes_needed) {
  if (bytes_needed > opts_.capacity_bytes) {
    return Status::Error(ErrorCode::kCapacityExceeded,
                         "object larger than store capacity");
  }
  while (mem_bytes_ + bytes_needed > opts_.capacity_bytes) {
    Status s = EvictOne();
    if (!s.ok()) return s;
  }
  return Status::Ok();
}

Status ObjectStore::EvictOne() {
  if (lru_.empty()) {
    return Status::Error(ErrorCode::kCannotFree,
                         "all resident objects are pinned or in use");
  }
  auto it = lru_.begin();
  UniqueId victim = it->second;
  lru_.erase(it);
  auto oit = objects_.find(victim);
  if (oit == objects_.end()) return Status::Ok();
  return EvictToDisk(victim, oit->second);
}

Status ObjectStore::EvictToDisk(const UniqueId &object_id, Entry &entry) {
  if (opts_.eviction_dir.empty()) {
    return Status::Error(ErrorCode::kCannotFree, "no eviction dir configured");
  }
  std::string path = EvictionPath(object_id);
  int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) {
    return Status::Error(ErrorCode::kIoError,
                         std::string("evict open: ") + strerror(errno));
  }
  size_t written = 0;
  while (written < entry.payload.size()) {
    ssize_t n = ::write(fd, entry.payload.data() + written,
                        entry.payload.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      return Status::Error(errno == ENOSPC ? ErrorCode::kDiskFull
                                           : ErrorCode::kIoError,
                           std::string("evict write: ") + strerror(errno));
    }
    written += static_cast<size_t>(n);
  }
  ::close(fd);
  mem_bytes_ -= entry.payload.size();
  entry.payload = Bytes();
  entry.state = ObjState::kEvicted;
  evictions_++;
  return Status::Ok();
}

bool ObjectStore::ReloadFromDisk(const UniqueId &object_id, Entry &entry) {
  std::string path = EvictionPath(object_id);
  int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
  if (fd < 0) return false;
  Bytes payload(entry.size);
  size_t got = 0;
  while (got < payload.size()) {
    ssize_t n = ::read(fd, payload.data() + got, payload.size() - got);
    if (n <= 0) {
      ::close(fd);
      return false;
    }
    got += static_cast<size_t>(n);
  }
  ::close(fd);
  if (!EnsureFree(payload.size()).ok()) return false;
  mem_bytes_ += payload.size();
  entry.payload = std::move(payload);
  entry.state = ObjState::kSealed;
  (void)object_id;
  return true;
}

std::optional<Bytes> ObjectStore::ReadLocal(const UniqueId &object_id) {
  auto it = objects_.find(object_id);
  if (it == objects_.end()) return std::nullopt;
  Entry &entry = it->second;
  if (entry.state == ObjState::kEvicted) {
    if (!ReloadFromDisk(object_id, entry)) return std::nullopt;
  }
  Touch(object_id, entry);
  return entry.payload;
}

Status ObjectStore::SealLocal(const ObjectRef &ref, Bytes payload,
                              std::function<void(Status)> registered) {
  return StageSeal(ref, std::move(payload), std::move(registered));
}

Status ObjectStore::StageSeal(const ObjectRef &ref, Bytes payload,
                              std::function<void(Status)> registered) {
  std::string digest = ToHex(Sha256Trunc20(payload));
  auto it = objects_.find(ref.object_id);
  if (it != objects_.end()) {
    if (it->second.digest_hex != digest) {
      // A re-executed producer sealed different bytes: nondeterministic user
      // code. Keep the original, fail loudly.
      MRLOG_ERROR << "DigestMismatch sealing " << ref.object_id.Hex()
                  << ": have " << it->second.digest_hex << " got " << digest;
      return Status::Error(ErrorCode::kDigestMismatch, ref.object_id.Hex());
    }
    // Idempotent re-seal.
    if (registered) registered(Status::Ok());
    return Status::Ok();
  }
  if (Status s = EnsureFree(payload.size()); !s.ok()) {
    return Status::Error(ErrorCode::kCapacityExceeded, s.message());
  }
  Entry entry;
  entry.state = ObjState::kSealed;
  entry.size = payload.size();
  entry.digest_hex = digest;
  entry.producing_task = ref.producing_task;
  entry.output_index = ref.output_index;
  mem_bytes_ += payload.size();
  entry.payload = std::move(payload);
  auto [eit, _] = objects_.emplace(ref.object_id, std::move(entry));
  Touch(ref.object_id, eit->second);
  uint64_t size = eit->second.size;
  RegisterLocation(ref, size, digest, 0,
                   registered ? std::move(registered)
                              : [](Status) {});
  FinishSeal(ref.object_id);
  return Status::Ok();
}

void ObjectStore::RegisterLocation(const ObjectRef &ref, uint64_t size,
                                   const std::string &digest_hex, int attempt,
                                   std::function<void(Status)> done) {
  if (attempt >= kMaxRegisterAttempts) {
    done(Status::Error(ErrorCode::kInternal, "object table cas exhausted"));
    return;
  }
  gcs_.GetAsync(
      GcsTable::kObject, ref.object_id,
      [this, ref, size, digest_hex, attempt,
       done = std::move(done)](Result<std::optional<GcsRecord>> rec) mutable {
        loop_.Post([this, ref, size, digest_hex, attempt,
                    done = std::move(done), rec = std::move(rec)]() mutable {
          if (!rec.ok()) {
            done(rec.status());
            return;
          }
          ObjectTableEntry entry;
          uint64_t expect = 0;
          if (rec.value().has_value()) {
            auto parsed = ObjectTableEntry::FromJson(
                ToString(rec.value()->value));
            if (!parsed.ok()) {
              done(parsed.status());
              return;
            }
            entry = parsed.take();
            expect = rec.value()->version;
            if (entry.digest_hex != digest_hex) {
              MRLOG_ERROR << "DigestMismatch in object table for "
                          << ref.object_id.Hex();
              // Cluster truth wins: drop the divergent local copy.
              auto oit = objects_.find(ref.object_id);
              if (oit != objects_.end() &&
                  oit->second.digest_hex == digest_hex) {
                if (oit->second.state == ObjState::kSealed) {
                  mem_bytes_ -= oit->second.payload.size();
                }
                lru_.erase(oit->second.last_access);
                objects_.erase(oit);
              }
              done(Status::Error(ErrorCode::kDigestMismatch,
                                 ref.object_id.Hex()));
              return;
            }
            if (std::find(entry.locations.begin(), entry.locations.end(),
                          opts_.node_id) != entry.locations.end()) {
              done(Status::Ok());
              return;
            }
          } else {
            entry.object_id = ref.object_id;
            entry.size_bytes = size;
            entry.digest_hex = digest_hex;
            entry.producing_task = ref.producing_task;
            entry.output_index = ref.output_index;
          }
          entry.locations.push_back(opts_.node_id);
          gcs_.PutAsync(
              GcsTable::kObject, ref.object_id, ToBytes(entry.ToJson()), expect,
              [this, ref, size, digest_hex, attempt,
               done = std::move(done)](Result<uint64_t> put) mutable {
                if (put.ok()) {
                  done(Status::Ok());
                  return;
                }
                if (put.status().code() == ErrorCode::kVersionConflict) {
                  loop_.Post([this, ref, size, digest_hex, attempt,
                              done = std::move(done)]() mutable {
                    RegisterLocation(ref, size, digest_hex, attempt + 1,
                                     std::move(done));
                  });
                  return;
                }
                done(put.status());
              });
        });
      },
      5000);
}

void ObjectStore::FinishSeal(const UniqueId &object_id) {
  // Stop watching, wake waiters, tell the scheduler.
  if (subscribed_keys_.erase(object_id) > 0) {
    gcs_.DelPatterns(gcs_sub_id_, {ExactPattern(GcsTable::kObject, object_id)});
  }
  AbortPullBookkeeping(object_id);
  ResolveWaiters(object_id);
  if (on_sealed_) on_sealed_(object_id);
}

void ObjectStore::ResolveWaiters(const UniqueId &object_id) {
  auto wit = waiters_.find(object_id);
  if (wit == waiters_.end()) return;
  std::vector<Waiter> waiters = std::move(wit->second);
  waiters_.erase(wit);
  auto oit = objects_.find(object_id);
  if (oit == objects_.end()) return;
  for (const Waiter &w : waiters) {
    if (w.timer_id != 0) loop_.CancelTimer(w.timer_id);
    if (!loop_.IsOpen(w.conn)) continue;
    if (w.want_payload) {
      SendPayload(w.conn, w.request_id, object_id, oit->second);
    } else {
      json resp = OkResponse(w.request_id);
      resp["found"] = true;
      loop_.Send(w.conn, JsonMessage(kMsgResponse, resp));
    }
  }
}

void ObjectStore::FailWaiters(const UniqueId &object_id, const Status &why) {
  auto wit = waiters_.find(object_id);
  if (wit == waiters_.end()) return;
  std::vector<Waiter> waiters = std::move(wit->second);
  waiters_.erase(wit);
  for (const Waiter &w : waiters) {
    if (w.timer_id != 0) loop_.CancelTimer(w.timer_id);
    if (!loop_.IsOpen(w.conn)) continue;
    loop_.Send(w.conn, JsonMessage(kMsgResponse, ErrResponse(w.request_id, why)));
  }
}

void ObjectStore::SendPayload(ConnId conn, uint64_t request_id,
                              const UniqueId &object_id, const Entry &entry) {
  // Local clients get the whole payload inline; peers use ranged fetches.
  const Bytes &payload = entry.payload;
  uint64_t offset = 0;
  do {
    uint64_t n = std::min<uint64_t>(opts_.stripe_chunk_bytes,
                                    payload.size() - offset);
    loop_.Send(conn, MakeChunk(object_id, offset,
                               std::span<const uint8_t>(
                                   payload.data() + offset, n)));
    offset += n;
  } while (offset < payload.size());
  json resp = OkResponse(request_id);
  resp["found"] = true;
  resp["size"] = entry.size;
  resp["digest"] = entry.digest_hex;
  loop_.Send(conn, JsonMessage(kMsgResponse, resp));
}

void ObjectStore::EnsureLocal(const ObjectRef &ref) {
  if (objects_.contains(ref.object_id) || pulls_.contains(ref.object_id)) {
    return;
  }
  if (!subscribed_keys_.contains(ref.object_id)) {
    subscribed_keys_.insert(ref.object_id);
    gcs_.AddPatterns(gcs_sub_id_,
                     {ExactPattern(GcsTable::kObject, ref.object_id)});
  }
  gcs_.GetAsync(
      GcsTable::kObject, ref.object_id,
      [this, ref](Result<std::optional<GcsRecord>> rec) {
        loop_.Post([this, ref, rec = std::move(rec)] {
          if (objects_.contains(ref.object_id) ||
              pulls_.contains(ref.object_id)) {
            return;
          }
          if (rec.ok() && rec.value().has_value()) {
            auto entry = ObjectTableEntry::FromJson(ToString(rec.value()->value));
            if (entry.ok()) {
              StartPull(ref, entry.value());
              return;
            }
          }
          // Nothing sealed anywhere yet: reconstruction demand decides
          // whether the producer needs a push.
          if (on_demand_) on_demand_(ref);
        });
      },
      5000);
}

void ObjectStore::StartPull(const ObjectRef &ref,
                            const ObjectTableEntry &entry) {
  if (objects_.contains(ref.object_id)) return;
  auto pit = pulls_.find(ref.object_id);
  if (pit != pulls_.end()) return;

  if (entry.size_bytes == 0) {
    // Nothing to transfer; seal an empty payload (digest of empty matches).
    StageSeal(ref, Bytes{}, nullptr);
    return;
  }

  // Uniformly random source among live locations we have not struck out on.
  std::vector<UniqueId> candidates;
  for (const UniqueId &node : entry.locations) {
    if (node == opts_.node_id) continue;
    if (resolve_node_ && !resolve_node_(node).has_value()) continue;
    candidates.push_back(node);
  }
  if (candidates.empty()) {
    if (on_demand_) on_demand_(ref);
    return;
  }
  UniqueId source =
      candidates[std::uniform_int_distribution<size_t>(0, candidates.size() - 1)(
          Rng())];
  auto addr = resolve_node_ ? resolve_node_(source) : std::nullopt;
  if (!addr) {
    if (on_demand_) on_demand_(ref);
    return;
  }
  if (Status s = EnsureFree(entry.size_bytes); !s.ok()) {
    MRLOG_ERROR << "pull " << ref.object_id.Hex() << ": " << s.ToString();
    FailWaiters(ref.object_id, s);
    return;
  }

  Pull pull;
  pull.ref = ref;
  pull.entry = entry;
  pull.source = source;
  pull.buffer.resize(entry.size_bytes);
  pull.started_ms = NowMs();
  uint32_t stripes = std::max<uint32_t>(1, opts_.stripe_count);
  uint64_t stripe_len = (entry.size_bytes + stripes - 1) / stripes;
  uint64_t offset = 0;
  std::vector<std::pair<ConnId, Stripe>> opened;
  for (uint32_t i = 0; i < stripes && offset < entry.size_bytes; i++) {
    uint64_t len = std::min(stripe_len, entry.size_bytes - offset);
    auto conn = loop_.Connect(addr->host, addr->port, 1000);
    if (!conn.ok()) {
      for (auto &[c, st] : opened) loop_.Close(c);
      PruneLocation(ref.object_id, source, 0);
      pull.tried.insert(source);
      RetryPull(ref, pull.tried, pull.attempts + 1);
      return;
    }
    opened.emplace_back(conn.value(), Stripe{offset, len, 0});
    offset += len;
  }
  for (auto &[conn, stripe] : opened) {
    pull.stripes[conn] = stripe;
    pull_conns_[conn] = ref.object_id;
    json req{{"id", 1},
             {"op", "fetch"},
             {"object_id", ref.object_id.Hex()},
             {"offset", stripe.offset},
             {"length", stripe.length}};
    loop_.Send(conn, JsonMessage(kMsgRequest, req));
  }
  pulls_.emplace(ref.object_id, std::move(pull));
}

void ObjectStore::RetryPull(const ObjectRef &ref, std::set<UniqueId> tried,
                            int attempts) {
  if (attempts >= kMaxPullAttempts) {
    if (on_demand_) on_demand_(ref);
    return;
  }
  loop_.After(50, [this, ref, tried = std::move(tried), attempts] {
    if (objects_.contains(ref.object_id) || pulls_.contains(ref.object_id)) {
      return;
    }
    gcs_.GetAsync(
        GcsTable::kObject, ref.object_id,
        [this, ref, tried, attempts](Result<std::optional<GcsRecord>> rec) {
          loop_.Post([this, ref, tried, attempts, rec = std::move(rec)] {
            if (!rec.ok() || !rec.value().has_value()) {
              if (on_demand_) on_demand_(ref);
              return;
            }
            auto entry =
                ObjectTableEntry::FromJson(ToString(rec.value()->value));
            if (!entry.ok()) return;
            ObjectTableEntry e = entry.take();
            std::erase_if(e.locations, [&](const UniqueId &n) {
              return tried.contains(n);
            });
            if (e.locations.empty()) {
              if (on_demand_) on_demand_(ref);
              return;
            }
            auto pit = pulls_.find(ref.object_id);
            if (pit != pulls_.end()) return;
            StartPull(ref, e);
            auto npit = pulls_.find(ref.object_id);
            if (npit != pulls_.end()) {
              npit->second.tried = tried;
              npit->second.attempts = attempts;
            }
          });
        },
        5000);
  });
}

void ObjectStore::AbortPullBookkeeping(const UniqueId &object_id) {
  auto pit = pulls_.find(object_id);
  if (pit == pulls_.end()) return;
  for (const auto &[conn, stripe] : pit->second.stripes) {
    pull_conns_.erase(conn);
    loop_.Close(conn);
  }
  pulls_.erase(pit);
}

void ObjectStore::AbortPull(const UniqueId &object_id, bool vanished) {
  auto pit = pulls_.find(object_id);
  if (pit == pulls_.end()) return;
  ObjectRef ref = pit->second.ref;
  UniqueId source = pit->second.source;
  std::set<UniqueId> tried = pit->second.tried;
  int attempts = pit->second.attempts;
  AbortPullBookkeeping(object_id);
  if (vanished) {
    PruneLocation(object_id, source, 0);
    tried.insert(source);
  }
  RetryPull(ref, std::move(tried), attempts + 1);
}

void ObjectStore::PruneLocation(const UniqueId &object_id,
                                const UniqueId &node_id, int attempt) {
  if (attempt >= kMaxRegisterAttempts) return;
  gcs_.GetAsync(
      GcsTable::kObject, object_id,
      [this, object_id, node_id, attempt](Result<std::optional<GcsRecord>> rec) {
        if (!rec.ok() || !rec.value().has_value()) return;
        auto parsed = ObjectTableEntry::FromJson(ToString(rec.value()->value));
        if (!parsed.ok()) return;
        ObjectTableEntry entry = parsed.take();
        auto it =
            std::find(entry.locations.begin(), entry.locations.end(), node_id);
        if (it == entry.locations.end()) return;
        entry.locations.erase(it);
        gcs_.PutAsync(GcsTable::kObject, object_id, ToBytes(entry.ToJson()),
                      rec.value()->version, [this, object_id, node_id, attempt](
                                                Result<uint64_t> put) {
                        if (!put.ok() && put.status().code() ==
                                             ErrorCode::kVersionConflict) {
                          PruneLocation(object_id, node_id, attempt + 1);
                        }
                      });
      },
      5000);
}

void ObjectStore::FinishPull(const UniqueId &object_id) {
  auto pit = pulls_.find(object_id);
  if (pit == pulls_.end()) return;
  Pull &pull = pit->second;
  std::string digest = ToHex(Sha256Trunc20(pull.buffer));
  if (digest != pull.entry.digest_hex) {
    MRLOG_ERROR << "pull digest mismatch for " << object_id.Hex() << " from "
                << pull.source.Hex();
    AbortPull(object_id, true);
    return;
  }
  int64_t elapsed = std::max<int64_t>(1, NowMs() - pull.started_ms);
  bandwidth_samples_.push_back(static_cast<double>(pull.buffer.size()) * 1000.0 /
                               static_cast<double>(elapsed));
  pulls_completed_++;
  ObjectRef ref = pull.ref;
  Bytes payload = std::move(pull.buffer);
  AbortPullBookkeeping(object_id);
  Status s = StageSeal(ref, std::move(payload), nullptr);
  if (!s.ok()) {
    MRLOG_ERROR << "seal after pull: " << s.ToString();
    FailWaiters(object_id, s);
  }
}

void ObjectStore::OnObjectEvent(const GcsRecord &rec) {
  if (rec.table != GcsTable::kObject) return;
  if (objects_.contains(rec.key) || pulls_.contains(rec.key)) return;
  if (!subscribed_keys_.contains(rec.key)) return;
  auto entry = ObjectTableEntry::FromJson(ToString(rec.value));
  if (!entry.ok()) return;
  StartPull(ObjectRef{rec.key, entry.value().producing_task,
                      entry.value().output_index},
            entry.value());
}

void ObjectStore::OnMessage(ConnId conn, const Message &msg) {
  if (msg.tag == kMsgChunk) {
    HandleChunk(conn, msg.payload);
    return;
  }
  if (msg.tag == kMsgResponse) {
    // Completion of one of our stripe fetches.
    auto it = pull_conns_.find(conn);
    if (it == pull_conns_.end()) return;
    UniqueId object_id = it->second;
    auto parsed = ParseJsonPayload(msg.payload);
    if (!parsed.ok()) return;
    Status s = StatusFromResponse(parsed.value());
    auto pit = pulls_.find(object_id);
    if (pit == pulls_.end()) return;
    if (!s.ok()) {
      AbortPull(object_id, s.code() == ErrorCode::kSourceVanished ||
                               s.code() == ErrorCode::kIoError);
      return;
    }
    Pull &pull = pit->second;
    auto sit = pull.stripes.find(conn);
    if (sit == pull.stripes.end()) return;
    if (sit->second.received != sit->second.length) {
      AbortPull(object_id, true);
      return;
    }
    pull_conns_.erase(conn);
    loop_.Close(conn);
    pull.stripes.erase(sit);
    if (pull.stripes.empty()) FinishPull(object_id);
    return;
  }
  auto parsed = ParseJsonPayload(msg.payload);
  if (!parsed.ok()) return;
  HandleRequest(conn, parsed.value());
}

void ObjectStore::HandleChunk(ConnId conn, const Bytes &payload) {
  auto header = ParseChunkHeader(payload);
  if (!header.ok()) return;
  const ChunkHeader &h = header.value();
  const uint8_t *body = payload.data() + ChunkHeader::kSize;

  auto uit = uploads_.find(conn);
  if (uit != uploads_.end() && uit->second.ref.object_id == h.object_id) {
    Upload &up = uit->second;
    if (h.offset + h.length <= up.staging.size()) {
      std::memcpy(up.staging.data() + h.offset, body, h.length);
    }
    up.received += h.length;
    if (up.received >= up.declared_size) {
      if (up.active) {
        FinalizeUpload(conn);
      } else {
        uploads_.erase(uit);
      }
    }
    return;
  }
  auto pit = pull_conns_.find(conn);
  if (pit != pull_conns_.end()) {
    auto pull_it = pulls_.find(pit->second);
    if (pull_it == pulls_.end()) return;
    Pull &pull = pull_it->second;
    auto sit = pull.stripes.find(conn);
    if (sit == pull.stripes.end()) return;
    if (h.offset + h.length <= pull.buffer.size()) {
      std::memcpy(pull.buffer.data() + h.offset, body, h.length);
      sit->second.received += h.length;
      pull.received += h.length;
    }
  }
}

void ObjectStore::FinalizeUpload(ConnId conn) {
  auto uit = uploads_.find(conn);
  if (uit == uploads_.end()) return;
  Upload up = std::move(uit->second);
  uploads_.erase(uit);
  if (!up.active) return;
  uint64_t request_id = up.request_id;
  Status s = StageSeal(up.ref, std::move(up.staging), [this, conn,
                                                       request_id](Status reg) {
    if (!loop_.IsOpen(conn)) return;
    if (reg.ok()) {
      loop_.Send(conn, JsonMessage(kMsgResponse, OkResponse(request_id)));
    } else {
      loop_.Send(conn, JsonMessage(kMsgResponse, ErrResponse(request_id, reg)));
    }
  });
  if (!s.ok() && loop_.IsOpen(conn)) {
    loop_.Send(conn, JsonMessage(kMsgResponse, ErrResponse(request_id, s)));
  }
}

void ObjectStore::HandleRequest(ConnId conn, const json &req) {
  const std::string op = req.value("op", "");
  uint64_t id = req.value("id", 0ull);
  auto reply = [&](json resp) {
    if (id != 0) loop_.Send(conn, JsonMessage(kMsgResponse, resp));
  };

  if (op == "put_obj") {
    auto oid = UniqueId::FromHex(req.value("object_id", ""));
    auto task = UniqueId::FromHex(req.value("producing_task", ""));
    if (!oid || !task) {
      reply(ErrResponse(id, Status::Error(ErrorCode::kInvalidArgument, "ids")));
      return;
    }
    Upload up;
    up.ref = ObjectRef{*oid, *task, req.value("output_index", 0ull)};
    up.declared_size = req.value("size", 0ull);
    up.declared_digest = req.value("digest", "");
    up.request_id = id;
    up.active = true;
    uint64_t declared_size = up.declared_size;
    auto oit = objects_.find(*oid);
    if (oit != objects_.end()) {
      // Already sealed here; drain incoming chunks silently and ack
      // idempotently.
      up.active = false;
      if (oit->second.digest_hex != up.declared_digest) {
        reply(ErrResponse(id, Status::Error(ErrorCode::kDigestMismatch,
                                            oid->Hex())));
      } else {
        reply(OkResponse(id));
      }
    } else if (Status s = EnsureFree(declared_size); !s.ok()) {
      reply(ErrResponse(id, s));
      up.active = false;
    }
    bool was_active = up.active;
    up.staging.resize(declared_size);
    uploads_[conn] = std::move(up);
    if (declared_size == 0) {
      if (was_active) {
        FinalizeUpload(conn);
      } else {
        uploads_.erase(conn);
      }
    }
  } else if (op == "wait_get" || op == "get_now") {
    auto oid = UniqueId::FromHex(req.value("object_id", ""));
    if (!oid) {
      reply(ErrResponse(id, Status::Error(ErrorCode::kInvalidArgument, "id")));
      return;
    }
    auto it = objects_.find(*oid);
    if (it != objects_.end()) {
      if (it->second.state == ObjState::kEvicted &&
          !ReloadFromDisk(*oid, it->second)) {
        reply(ErrResponse(id, Status::Error(ErrorCode::kIoError,
                                            "eviction file lost")));
        return;
      }
      Touch(*oid, it->second);
      SendPayload(conn, id, *oid, it->second);
      return;
    }
    if (op == "get_now") {
      json resp = OkResponse(id);
      resp["found"] = false;
      reply(std::move(resp));
      return;
    }
    auto task = UniqueId::FromHex(req.value("producing_task", ""));
    ObjectRef ref{*oid, task.value_or(UniqueId()),
                  req.value("output_index", 0ull)};
    int64_t timeout_ms = req.value("timeout_ms", -1);
    Waiter w;
    w.conn = conn;
    w.request_id = id;
    w.want_payload = true;
    w.timer_id = 0;
    if (timeout_ms > 0) {
      UniqueId key = *oid;
      w.timer_id = loop_.After(timeout_ms, [this, key, conn, id] {
        auto wit = waiters_.find(key);
        if (wit == waiters_.end()) return;
        std::erase_if(wit->second, [&](const Waiter &cand) {
          if (cand.conn == conn && cand.request_id == id) {
            if (loop_.IsOpen(conn)) {
              json resp = OkResponse(id);
              resp["found"] = false;
              resp["timeout"] = true;
              loop_.Send(conn, JsonMessage(kMsgResponse, resp));
            }
            return true;
          }
          return false;
        });
        if (wit->second.empty()) waiters_.erase(wit);
      });
    }
    waiters_[*oid].push_back(w);
    EnsureLocal(ref);
  } else if (op == "want") {
    for (const json &r : req.value("refs", json::array())) {
      auto oid = UniqueId::FromHex(r.value("object_id", ""));
      auto task = UniqueId::FromHex(r.value("producing_task", ""));
      if (!oid || !task) continue;
      ObjectRef ref{*oid, *task, r.value("output_index", 0ull)};
      if (!objects_.contains(*oid)) EnsureLocal(ref);
    }
  } else if (op == "fetch") {
    auto oid = UniqueId::FromHex(req.value("object_id", ""));
    if (!oid) {
      reply(ErrResponse(id, Status::Error(ErrorCode::kInvalidArgument, "id")));
      return;
    }
    auto it = objects_.find(*oid);
    if (it == objects_.end()) {
      reply(ErrResponse(id, Status::Error(ErrorCode::kSourceVanished,
                                          "object not here")));
      return;
    }
    if (it->second.state == ObjState::kEvicted &&
        !ReloadFromDisk(*oid, it->second)) {
      reply(ErrResponse(id, Status::Error(ErrorCode::kSourceVanished,
                                          "eviction file lost")));
      return;
    }
    Touch(*oid, it->second);
    Pin(*oid);
    Serve serve;
    serve.object_id = *oid;
    serve.offset = req.value("offset", 0ull);
    serve.end = std::min<uint64_t>(serve.offset + req.value("length", 0ull),
                                   it->second.size);
    serve.request_id = id;
    serves_[conn] = serve;
    if (opts_.pace_bytes_per_s > 0) {
      Serve &s = serves_[conn];
      s.pace_started_ms = NowMs();
      s.pace_timer = loop_.Every(kPaceTickMs, [this, conn] { PumpServe(conn); });
    } else {
      loop_.SetDrainCallback(conn, [this, conn] { PumpServe(conn); });
    }
    PumpServe(conn);
  } else if (op == "stat") {
    json resp = OkResponse(id);
    resp["objects"] = objects_.size();
    resp["mem_bytes"] = mem_bytes_;
    resp["evictions"] = evictions_;
    resp["pulls"] = pulls_completed_;
    reply(std::move(resp));
  } else if (op == "evict") {
    uint64_t bytes_needed = req.value("bytes", 0ull);
    json evicted = json::array();
    Status s = Status::Ok();
    while (mem_bytes_ + bytes_needed > opts_.capacity_bytes) {
      if (lru_.empty()) {
        s = Status::Error(ErrorCode::kCannotFree, "all pinned");
        break;
      }
      UniqueId victim = lru_.begin()->second;
      s = EvictOne();
      if (!s.ok()) break;
      evicted.push_back(victim.Hex());
    }
    if (!s.ok() && evicted.empty()) {
      reply(ErrResponse(id, s));
    } else {
      json resp = OkResponse(id);
      resp["evicted"] = std::move(evicted);
      reply(std::move(resp));
    }
  } else {
    reply(ErrResponse(id, Status::Error(ErrorCode::kInvalidArgument,
                                        "unknown store op " + op)));
  }
}

void ObjectStore::PumpServe(ConnId conn) {
  auto it = serves_.find(conn);
  if (it == serves_.end()) return;
  Serve &serve = it->second;
  auto oit = objects_.find(serve.object_id);
  if (oit == objects_.end() || oit->second.state != ObjState::kSealed) {
    loop_.Send(conn, JsonMessage(kMsgResponse,
                                 ErrResponse(serve.request_id,
                                             Status::Error(
                                                 ErrorCode::kSourceVanished,
                                                 "evicted mid-transfer"))));
    FinishServe(conn, false);
    return;
  }
  const Bytes &payload = oit->second.payload;
  while (serve.offset < serve.end &&
         loop_.PendingSendBytes(conn) < kServeWindowBytes) {
    uint64_t n = std::min<uint64_t>(opts_.stripe_chunk_bytes,
                                    serve.end - serve.offset);
    if (opts_.pace_bytes_per_s > 0) {
      // Stay under the configured rate for this connection.
      int64_t elapsed = std::max<int64_t>(1, NowMs() - serve.pace_started_ms);
      uint64_t allowed = opts_.pace_bytes_per_s * elapsed / 1000;
      if (serve.pace_sent >= allowed) return;
      n = std::min(n, allowed - serve.pace_sent);
    }
    loop_.Send(conn, MakeChunk(serve.object_id, serve.offset,
                               std::span<const uint8_t>(
                                   payload.data() + serve.offset, n)));
    if (!loop_.IsOpen(conn)) {
      FinishServe(conn, false);
      return;
    }
    serve.offset += n;
    serve.pace_sent += n;
  }
  if (serve.offset >= serve.end) {
    json resp = OkResponse(serve.request_id);
    resp["size"] = oit->second.size;
    resp["digest"] = oit->second.digest_hex;
    loop_.Send(conn, JsonMessage(kMsgResponse, resp));
    FinishServe(conn, true);
  }
}

void ObjectStore::FinishServe(ConnId conn, bool ok) {
  (void)ok;
  auto it = serves_.find(conn);
  if (it == serves_.end()) return;
  if (it->second.pace_timer != 0) loop_.CancelTimer(it->second.pace_timer);
  if (loop_.IsOpen(conn)) loop_.SetDrainCallback(conn, nullptr);
  Unpin(it->second.object_id);
  serves_.erase(it);
}

void ObjectStore::OnDisconnect(ConnId conn) {
  uploads_.erase(conn);
  auto sit = serves_.find(conn);
  if (sit != serves_.end()) {
    if (sit->second.pace_timer != 0) loop_.CancelTimer(sit->second.pace_timer);
    Unpin(sit->second.object_id);
    serves_.erase(sit);
  }
  auto pit = pull_conns_.find(conn);
  if (pit != pull_conns_.end()) {
    UniqueId object_id = pit->second;
    pull_conns_.erase(pit);
    AbortPull(object_id, true);
  }
  for (auto &[object_id, waiters] : waiters_) {
    std::erase_if(waiters, [&](const Waiter &w) {
      if (w.conn != conn) return false;
      if (w.timer_id != 0) loop_.CancelTimer(w.timer_id);
      return true;
    });
  }
}

json ObjectStore::Stats() const {
  return json{{"objects", objects_.size()},
              {"mem_bytes", mem_bytes_},
              {"evictions", evictions_},
              {"pulls", pulls_completed_}};
}

std::vector<double> ObjectStore::DrainBandwidthSamples() {
  std::vector<double> out;
  out.swap(bandwidth_samples_);
  return out;
}

}  // namespace miniray
