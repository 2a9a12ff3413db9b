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

#include "gcs/client.h"

#include <algorithm>

#include "common/clock.h"
#include "common/logging.h"

namespace miniray {

namespace {
constexpr int64_t kViewFetchMinIntervalMs = 50;
constexpr int64_t kRetryBackoffMs = 30;

bool IsRetryable(const Status &s) {
  return s.code() == ErrorCode::kIoError || s.code() == ErrorCode::kTimeout ||
         s.code() == ErrorCode::kNotLeader;
}
}  // namespace

GcsClient::GcsClient(GcsViewFetcher fetcher) : fetcher_(std::move(fetcher)) {
  retry_thread_ = std::thread([this] { RetryLoop(); });
}

GcsClient::~GcsClient() {
  {
    std::lock_guard<std::mutex> lock(retry_mutex_);
    stopping_ = true;
  }
  retry_cv_.notify_all();
  if (retry_thread_.joinable()) retry_thread_.join();
}

void GcsClient::RetryLoop() {
  std::unique_lock<std::mutex> lock(retry_mutex_);
  while (!stopping_) {
    int64_t now = NowMs();
    int64_t next = now + 1000;
    std::vector<std::function<void()>> due;
    for (auto it = retry_queue_.begin(); it != retry_queue_.end();) {
      if (it->first <= now) {
        due.push_back(std::move(it->second));
        it = retry_queue_.erase(it);
      } else {
        next = std::min(next, it->first);
        ++it;
      }
    }
    if (!due.empty()) {
      lock.unlock();
      for (auto &fn : due) fn();
      lock.lock();
      continue;
    }
    retry_cv_.wait_for(lock, std::chrono::milliseconds(next - now));
  }
}

void GcsClient::ScheduleRetry(int64_t delay_ms, std::function<void()> fn) {
  {
    std::lock_guard<std::mutex> lock(retry_mutex_);
    if (stopping_) return;
    retry_queue_.emplace_back(NowMs() + delay_ms, std::move(fn));
  }
  retry_cv_.notify_all();
}

Status GcsClient::RefreshView(bool force) {
  // mutex_ held by caller.
  int64_t now = NowMs();
  if (!force && !shards_.empty()) return Status::Ok();
  if (now - last_view_fetch_ms_ < kViewFetchMinIntervalMs && !shards_.empty()) {
    return Status::Ok();
  }
  last_view_fetch_ms_ = now;
  auto view = fetcher_();
  if (!view.ok()) return view.status();
  std::vector<GcsShardView> fresh = view.take();
  if (shards_.size() != fresh.size()) {
    shards_.clear();
    shards_.resize(fresh.size());
  }
  for (size_t i = 0; i < fresh.size(); i++) {
    ShardState &state = shards_[i];
    if (fresh[i].epoch > state.epoch || state.members.empty()) {
      bool head_changed =
          state.members.empty() || fresh[i].members.empty() ||
          state.members.front().name != fresh[i].members.front().name;
      bool tail_changed =
          state.members.empty() || fresh[i].members.empty() ||
          state.members.back().name != fresh[i].members.back().name;
      state.epoch = fresh[i].epoch;
      state.members = fresh[i].members;
      if (head_changed && state.head) {
        graveyard_.push_back(std::move(state.head));
      }
      if (tail_changed && state.tail) {
        graveyard_.push_back(std::move(state.tail));
        state.subscribed = false;
      }
    }
  }
  return Status::Ok();
}

std::shared_ptr<RpcClient> GcsClient::HeadFor(int shard, Status *why) {
  std::lock_guard<std::mutex> lock(mutex_);
  graveyard_.clear();
  if (Status s = RefreshView(false); !s.ok()) {
    *why = s;
    return nullptr;
  }
  if (shard >= static_cast<int>(shards_.size())) {
    *why = Status::Error(ErrorCode::kInvalidArgument, "bad shard");
    return nullptr;
  }
  ShardState &state = shards_[shard];
  if (state.head && state.head->alive()) return state.head;
  if (state.members.empty()) {
    *why = Status::Error(ErrorCode::kTimeout, "no chain members");
    RefreshView(true);
    return nullptr;
  }
  const ChainMember &head = state.members.front();
  auto client = RpcClient::Dial(head.host, head.port, 1000);
  if (!client.ok()) {
    *why = client.status();
    RefreshView(true);
    return nullptr;
  }
  state.head = std::shared_ptr<RpcClient>(client.take().release());
  return state.head;
}

std::shared_ptr<RpcClient> GcsClient::TailFor(int shard, Status *why) {
  std::lock_guard<std::mutex> lock(mutex_);
  graveyard_.clear();
  if (Status s = RefreshView(false); !s.ok()) {
    *why = s;
    return nullptr;
  }
  if (shard >= static_cast<int>(shards_.size())) {
    *why = Status::Error(ErrorCode::kInvalidArgument, "bad shard");
    return nullptr;
  }
  ShardState &state = shards_[shard];
  if (state.tail && state.tail->alive()) return state.tail;
  if (state.members.empty()) {
    *why = Status::Error(ErrorCode::kTimeout, "no chain members");
    RefreshView(true);
    return nullptr;
  }
  const ChainMember &tail = state.members.back();
  auto client = RpcClient::Dial(tail.host, tail.port, 1000);
  if (!client.ok()) {
    *why = client.status();
    RefreshView(true);
    return nullptr;
  }
  state.tail = std::shared_ptr<RpcClient>(client.take().release());
  state.subscribed = false;
  std::shared_ptr<RpcClient> tail_client = state.tail;
  tail_client->SetEventHandler([this, shard](json ev) { OnEvent(shard, ev); });
  ResubscribeLocked(shard, state);
  return tail_client;
}

std::vector<int> GcsClient::ShardsForPattern(const SubPattern &p) {
  std::vector<int> out;
  int count = static_cast<int>(shards_.size());
  if (count == 0) return out;
  if (p.IsExact()) {
    UniqueId key = UniqueId::FromBinary(std::string_view(
        reinterpret_cast<const char *>(p.prefix.data()), p.prefix.size()));
    out.push_back(static_cast<int>(ShardForKey(key, count)));
  } else {
    for (int i = 0; i < count; i++) out.push_back(i);
  }
  return out;
}

void GcsClient::ResubscribeLocked(int shard, ShardState &state) {
  if (state.subscribed || !state.tail) return;
  state.subscribed = true;
  for (const auto &[sub_id, sub] : subs_) {
    json patterns = json::array();
    for (const SubPattern &p : sub.patterns) {
      for (int s : ShardsForPattern(p)) {
        if (s == shard) {
          patterns.push_back(json{{"table", static_cast<int>(p.table)},
                                  {"prefix", ToHex(p.prefix)}});
          break;
        }
      }
    }
    if (patterns.empty()) continue;
    json req{{"sub_id", sub_id},
             {"patterns", std::move(patterns)},
             {"last_seq", state.last_seq > 0
                              ? static_cast<int64_t>(state.last_seq)
                              : -1}};
    state.tail->CallAsync("sub", std::move(req), [](Result<json>) {});
  }
}

void GcsClient::OnEvent(int shard, const json &ev) {
  std::string kind = ev.value("ev", "");
  if (kind == "resub") {
    // This tail is stepping down; drop it so the next op redials.
    std::lock_guard<std::mutex> lock(mutex_);
    if (shard < static_cast<int>(shards_.size())) {
      ShardState &state = shards_[shard];
      if (state.tail) graveyard_.push_back(std::move(state.tail));
      state.subscribed = false;
      RefreshView(true);
    }
    ScheduleRetry(kRetryBackoffMs, [this, shard] {
      Status why;
      TailFor(shard, &why);
    });
    return;
  }
  if (kind != "gcs") return;
  GcsRecord rec;
  int table = ev.value("table", 0);
  auto key = UniqueId::FromHex(ev.value("key", ""));
  auto value = FromHex(ev.value("value", ""));
  if (table < 1 || table > 5 || !key || !value) return;
  rec.table = static_cast<GcsTable>(table);
  rec.key = *key;
  rec.value = std::move(*value);
  rec.version = ev.value("version", 0ull);
  rec.seq = ev.value("seq", 0ull);
  uint64_t sub_id = ev.value("sub_id", 0ull);
  RecordFn fn;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (shard < static_cast<int>(shards_.size())) {
      shards_[shard].last_seq = std::max(shards_[shard].last_seq, rec.seq);
    }
    auto it = subs_.find(sub_id);
    if (it != subs_.end()) fn = it->second.fn;
  }
  if (fn) fn(rec);
}

Result<uint64_t> GcsClient::Put(GcsTable table, const UniqueId &key,
                                Bytes value,
                                std::optional<uint64_t> expect_version,
                                int timeout_ms) {
  int shard_total = shard_count();
  if (shard_total <= 0) {
    return Status::Error(ErrorCode::kTimeout, "no gcs view");
  }
  int shard = static_cast<int>(ShardForKey(key, shard_total));
  json req{{"table", static_cast<int>(table)},
           {"key", key.Hex()},
           {"value", ToHex(value)}};
  if (expect_version) req["expect"] = *expect_version;
  int64_t deadline = NowMs() + timeout_ms;
  Status last = Status::Error(ErrorCode::kTimeout, "gcs put");
  while (NowMs() < deadline) {
    Status why;
    auto head = HeadFor(shard, &why);
    if (!head) {
      last = why;
      std::this_thread::sleep_for(std::chrono::milliseconds(kRetryBackoffMs));
      continue;
    }
    int64_t left = deadline - NowMs();
    if (left <= 0) break;
    auto resp = head->Call("put", req, static_cast<int>(std::min<int64_t>(
                                           left, 3000)));
    if (resp.ok()) return resp.value().value("version", 0ull);
    last = resp.status();
    if (!IsRetryable(last)) return last;
    std::lock_guard<std::mutex> lock(mutex_);
    RefreshView(true);
  }
  return Status::Error(ErrorCode::kTimeout, "gcs put: " + last.ToString());
}

void GcsClient::PutAsync(GcsTable table, const UniqueId &key, Bytes value,
                         std::optional<uint64_t> expect_version,
                         std::function<void(Result<uint64_t>)> cb,
                         int timeout_ms) {
  int shard_total = shard_count();
  if (shard_total <= 0) {
    ScheduleRetry(kRetryBackoffMs,
                  [this, table, key, value = std::move(value), expect_version,
                   cb = std::move(cb), timeout_ms]() mutable {
                    if (timeout_ms < kRetryBackoffMs * 2) {
                      cb(Status::Error(ErrorCode::kTimeout, "no gcs view"));
                      return;
                    }
                    PutAsync(table, key, std::move(value), expect_version,
                             std::move(cb), timeout_ms - kRetryBackoffMs);
                  });
    return;
  }
  int shard = static_cast<int>(ShardForKey(key, shard_total));
  json req{{"table", static_cast<int>(table)},
           {"key", key.Hex()},
           {"value", ToHex(value)}};
  if (expect_version) req["expect"] = *expect_version;

  Status why;
  auto head = HeadFor(shard, &why);
  int64_t deadline = NowMs() + timeout_ms;
  if (!head) {
    ScheduleRetry(kRetryBackoffMs,
                  [this, table, key, value = std::move(value), expect_version,
                   cb = std::move(cb), deadline]() mutable {
                    int64_t left = deadline - NowMs();
                    if (left <= 0) {
                      cb(Status::Error(ErrorCode::kTimeout, "gcs put"));
                      return;
                    }
                    PutAsync(table, key, std::move(value), expect_version,
                             std::move(cb), static_cast<int>(left));
                  });
    return;
  }
  head->CallAsync(
      "put", std::move(req),
      [this, table, key, value = std::move(value), expect_version,
       cb = std::move(cb), deadline](Result<json> resp) mutable {
        if (resp.ok()) {
          cb(resp.value().value("version", 0ull));
          return;
        }
        if (!IsRetryable(resp.status())) {
          cb(resp.status());
          return;
        }
        {
          std::lock_guard<std::mutex> lock(mutex_);
          RefreshView(true);
        }
        int64_t left = deadline - NowMs();
        if (left <= kRetryBackoffMs) {
          cb(Status::Error(ErrorCode::kTimeout,
                           "gcs put: " + resp.status().ToString()));
          return;
        }
        ScheduleRetry(kRetryBackoffMs, [this, table, key,
                                        value = std::move(value),
                                        expect_version, cb = std::move(cb),
                                        deadline]() mutable {
          int64_t left = deadline - NowMs();
          if (left <= 0) {
            cb(Status::Error(ErrorCode::kTimeout, "gcs put"));
            return;
          }
          PutAsync(table, key, std::move(value), expect_version, std::move(cb),
                   static_cast<int>(left));
        });
      });
}

Result<std::optional<GcsRecord>> GcsClient::Get(GcsTable table,
                                                const UniqueId &key,
                                                int timeout_ms) {
  int shard_total = shard_count();
  if (shard_total <= 0) {
    return Status::Error(ErrorCode::kTimeout, "no gcs view");
  }
  int shard = static_cast<int>(ShardForKey(key, shard_total));
  json req{{"table", static_cast<int>(table)}, {"key", key.Hex()}};
  int64_t deadline = NowMs() + timeout_ms;
  Status last = Status::Error(ErrorCode::kTimeout, "gcs get");
  while (NowMs() < deadline) {
    Status why;
    auto tail = TailFor(shard, &why);
    if (!tail) {
      last = why;
      std::this_thread::sleep_for(std::chrono::milliseconds(kRetryBackoffMs));
      continue;
    }
    int64_t left = deadline - NowMs();
    if (left <= 0) break;
    auto resp =
        tail->Call("get", req, static_cast<int>(std::min<int64_t>(left, 3000)));
    if (resp.ok()) {
      const json &j = resp.value();
      if (!j.value("found", false)) return std::optional<GcsRecord>{};
      GcsRecord rec;
      rec.table = table;
      rec.key = key;
      auto value = FromHex(j.value("value", ""));
      if (!value) {
        return Status::Error(ErrorCode::kInternal, "bad get payload");
      }
      rec.value = std::move(*value);
      rec.version = j.value("version", 0ull);
      rec.seq = j.value("seq", 0ull);
      return std::optional<GcsRecord>{std::move(rec)};
    }
    last = resp.status();
    if (!IsRetryable(last)) return last;
    std::lock_guard<std::mutex> lock(mutex_);
    RefreshView(true);
  }
  return Status::Error(ErrorCode::kTimeout, "gcs get: " + last.ToString());
}

void GcsClient::GetAsync(
    GcsTable table, const UniqueId &key,
    std::function<void(Result<std::optional<GcsRecord>>)> cb, int timeout_ms) {
  int shard_total = shard_count();
  if (shard_total <= 0) {
    cb(Status::Error(ErrorCode::kTimeout, "no gcs view"));
    return;
  }
  int shard = static_cast<int>(ShardForKey(key, shard_total));
  Status why;
  auto tail = TailFor(shard, &why);
  int64_t deadline = NowMs() + timeout_ms;
  auto retry = [this, table, key, cb, deadline]() mutable {
    int64_t left = deadline - NowMs();
    if (left <= 0) {
      cb(Status::Error(ErrorCode::kTimeout, "gcs get"));
      return;
    }
    GetAsync(table, key, std::move(cb), static_cast<int>(left));
  };
  if (!tail) {
    ScheduleRetry(kRetryBackoffMs, std::move(retry));
    return;
  }
  json req{{"table", static_cast<int>(table)}, {"key", key.Hex()}};
  tail->CallAsync("get", std::move(req),
                  [this, table, key, cb, retry = std::move(retry)](
                      Result<json> resp) mutable {
                    if (!resp.ok()) {
                      if (!IsRetryable(resp.status())) {
                        cb(resp.status());
                        return;
                      }
                      {
                        std::lock_guard<std::mutex> lock(mutex_);
                        RefreshView(true);
                      }
                      ScheduleRetry(kRetryBackoffMs, std::move(retry));
                      return;
                    }
                    const json &j = resp.value();
                    if (!j.value("found", false)) {
                      cb(std::optional<GcsRecord>{});
                      return;
                    }
                    GcsRecord rec;
                    rec.table = table;
                    rec.key = key;
                    auto value = FromHex(j.value("value", ""));
                    if (!value) {
                      cb(Status::Error(ErrorCode::kInternal, "bad payload"));
                      return;
                    }
                    rec.value = std::move(*value);
                    rec.version = j.value("version", 0ull);
                    rec.seq = j.value("seq", 0ull);
                    cb(std::optional<GcsRecord>{std::move(rec)});
                  });
}

Result<std::vector<GcsRecord>> GcsClient::ScanAll(GcsTable table, Bytes prefix,
                                                  int timeout_ms) {
  int shard_total = shard_count();
  if (shard_total <= 0) {
    return Status::Error(ErrorCode::kTimeout, "no gcs view");
  }
  int64_t deadline = NowMs() + timeout_ms;
  std::vector<GcsRecord> out;
  for (int shard = 0; shard < shard_total; shard++) {
    std::optional<UniqueId> after;
    for (;;) {
      int64_t left = deadline - NowMs();
      if (left <= 0) return Status::Error(ErrorCode::kTimeout, "gcs scan");
      Status why;
      auto tail = TailFor(shard, &why);
      if (!tail) {
        std::this_thread::sleep_for(std::chrono::milliseconds(kRetryBackoffMs));
        continue;
      }
      json req{{"table", static_cast<int>(table)}, {"prefix", ToHex(prefix)}};
      if (after) req["after"] = after->Hex();
      auto resp = tail->Call("scan", req,
                             static_cast<int>(std::min<int64_t>(left, 5000)));
      if (!resp.ok()) {
        if (!IsRetryable(resp.status())) return resp.status();
        std::lock_guard<std::mutex> lock(mutex_);
        RefreshView(true);
        continue;
      }
      const json &j = resp.value();
      for (const json &r : j.value("records", json::array())) {
        GcsRecord rec;
        rec.table = table;
        auto key = UniqueId::FromHex(r.value("key", ""));
        auto value = FromHex(r.value("value", ""));
        if (!key || !value) continue;
        rec.key = *key;
        rec.value = std::move(*value);
        rec.version = r.value("version", 0ull);
        rec.seq = r.value("seq", 0ull);
        after = rec.key;
        out.push_back(std::move(rec));
      }
      if (!j.value("more", false)) break;
    }
  }
  return out;
}

uint64_t GcsClient::Subscribe(std::vector<SubPattern> patterns, RecordFn fn) {
  uint64_t sub_id;
  std::vector<int> shards;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    RefreshView(false);
    sub_id = next_sub_id_++;
    subs_[sub_id] = Subscription{patterns, std::move(fn)};
    for (const SubPattern &p : patterns) {
      for (int s : ShardsForPattern(p)) shards.push_back(s);
    }
  }
  std::sort(shards.begin(), shards.end());
  shards.erase(std::unique(shards.begin(), shards.end()), shards.end());
  for (int shard : shards) {
    Status why;
    auto tail = TailFor(shard, &why);
    if (!tail) continue;
    json pj = json::array();
    {
      std::lock_guard<std::mutex> lock(mutex_);
      for (const SubPattern &p : subs_[sub_id].patterns) {
        for (int s : ShardsForPattern(p)) {
          if (s == shard) {
            pj.push_back(json{{"table", static_cast<int>(p.table)},
                              {"prefix", ToHex(p.prefix)}});
            break;
          }
        }
      }
    }
    tail->CallAsync("sub",
                    json{{"sub_id", sub_id},
                         {"patterns", std::move(pj)},
                         {"last_seq", -1}},
                    [](Result<json>) {});
  }
  return sub_id;
}

void GcsClient::AddPatterns(uint64_t sub_id, std::vector<SubPattern> patterns) {
  std::vector<std::pair<int, json>> sends;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = subs_.find(sub_id);
    if (it == subs_.end()) return;
    it->second.patterns.insert(it->second.patterns.end(), patterns.begin(),
                               patterns.end());
    std::unordered_map<int, json> per_shard;
    for (const SubPattern &p : patterns) {
      for (int s : ShardsForPattern(p)) {
        if (!per_shard.contains(s)) per_shard[s] = json::array();
        per_shard[s].push_back(json{{"table", static_cast<int>(p.table)},
                                    {"prefix", ToHex(p.prefix)}});
      }
    }
    for (auto &[s, pj] : per_shard) sends.emplace_back(s, std::move(pj));
  }
  for (auto &[shard, pj] : sends) {
    Status why;
    auto tail = TailFor(shard, &why);
    if (!tail) continue;
    tail->CallAsync("sub_add",
                    json{{"sub_id", sub_id}, {"patterns", std::move(pj)}},
                    [](Result<json>) {});
  }
}

void GcsClient::DelPatterns(uint64_t sub_id, std::vector<SubPattern> patterns) {
  std::vector<std::pair<int, json>> sends;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = subs_.find(sub_id);
    if (it == subs_.end()) return;
    for (const SubPattern &p : patterns) {
      std::erase(it->second.patterns, p);
    }
    std::unordered_map<int, json> per_shard;
    for (const SubPattern &p : patterns) {
      for (int s : ShardsForPattern(p)) {
        if (!per_shard.contains(s)) per_shard[s] = json::array();
        per_shard[s].push_back(json{{"table", static_cast<int>(p.table)},
                                    {"prefix", ToHex(p.prefix)}});
      }
    }
    for (auto &[s, pj] : per_shard) sends.emplace_back(s, std::move(pj));
  }
  for (auto &[shard, pj] : sends) {
    Status why;
    auto tail = TailFor(shard, &why);
    if (!tail) continue;
    tail->CallAsync("sub_del",
                    json{{"sub_id", sub_id}, {"patterns", std::move(pj)}},
                    [](Result<json>) {});
  }
}

void GcsClient::Unsubscribe(uint64_t sub_id) {
  std::vector<SubPattern> patterns;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = subs_.find(sub_id);
    if (it == subs_.end()) return;
    patterns = it->second.patterns;
    subs_.erase(it);
  }
  DelPatternsForGone(sub_id, patterns);
}

void GcsClient::DelPatternsForGone(uint64_t sub_id,
                                   const std::vector<SubPattern> &patterns) {
  std::unordered_map<int, json> per_shard;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    for (const SubPattern &p : patterns) {
      for (int s : ShardsForPattern(p)) {
        if (!per_shard.contains(s)) per_shard[s] = json::array();
        per_shard[s].push_back(json{{"table", static_cast<int>(p.table)},
                                    {"prefix", ToHex(p.prefix)}});
      }
    }
  }
  for (auto &[shard, pj] : per_shard) {
    Status why;
    auto tail = TailFor(shard, &why);
    if (!tail) continue;
    tail->CallAsync("sub_del",
                    json{{"sub_id", sub_id}, {"patterns", std::move(pj)}},
                    [](Result<json>) {});
  }
}

Result<json> GcsClient::ShardStatus(int shard) {
  Status why;
  auto tail = TailFor(shard, &why);
  if (!tail) return why;
  return tail->Call("status", json::object(), 3000);
}

int GcsClient::shard_count() {
  std::lock_guard<std::mutex> lock(mutex_);
  RefreshView(false);
  return static_cast<int>(shards_.size());
}

}  // namespace miniray
