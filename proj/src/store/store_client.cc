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

#include "store/store_client.h"

#include <cstring>

#include "common/clock.h"
#include "common/hash.h"

namespace miniray {

namespace {
constexpr uint64_t kClientChunkBytes = 1 << 20;
}

Result<std::unique_ptr<StoreClient>> StoreClient::Dial(const std::string &host,
                                                       uint16_t port,
                                                       int timeout_ms) {
  auto conn = FrameConn::Dial(host, port, timeout_ms);
  if (!conn.ok()) return conn.status();
  return std::unique_ptr<StoreClient>(new StoreClient(conn.take()));
}

Result<json> StoreClient::ReadResponse(uint64_t id, Bytes *payload_out,
                                       int timeout_ms) {
  int64_t deadline = timeout_ms < 0 ? -1 : NowMs() + timeout_ms;
  for (;;) {
    int wait_ms = -1;
    if (deadline >= 0) {
      int64_t left = deadline - NowMs();
      if (left <= 0) return Status::Error(ErrorCode::kTimeout, "store op");
      wait_ms = static_cast<int>(left);
    }
    auto msg = conn_->Recv(wait_ms);
    if (!msg.ok()) return msg.status();
    if (msg.value().tag == kMsgChunk) {
      if (payload_out == nullptr) continue;
      auto header = ParseChunkHeader(msg.value().payload);
      if (!header.ok()) continue;
      const ChunkHeader &h = header.value();
      if (payload_out->size() < h.offset + h.length) {
        payload_out->resize(h.offset + h.length);
      }
      std::memcpy(payload_out->data() + h.offset,
                  msg.value().payload.data() + ChunkHeader::kSize, h.length);
      continue;
    }
    if (msg.value().tag != kMsgResponse) continue;
    auto parsed = ParseJsonPayload(msg.value().payload);
    if (!parsed.ok()) continue;
    if (parsed.value().value("id", 0ull) != id) continue;
    Status s = StatusFromResponse(parsed.value());
    if (!s.ok()) return s;
    return parsed.take();
  }
}

Status StoreClient::Put(const ObjectRef &ref, std::span<const uint8_t> payload,
                        int timeout_ms) {
  uint64_t id = next_id_++;
  json req{{"id", id},
           {"op", "put_obj"},
           {"object_id", ref.object_id.Hex()},
           {"producing_task", ref.producing_task.Hex()},
           {"output_index", ref.output_index},
           {"size", payload.size()},
           {"digest", ToHex(Sha256Trunc20(payload))}};
  if (Status s = conn_->Send(JsonMessage(kMsgRequest, req)); !s.ok()) return s;
  uint64_t offset = 0;
  do {
    uint64_t n = std::min<uint64_t>(kClientChunkBytes, payload.size() - offset);
    Status s =
        conn_->Send(MakeChunk(ref.object_id, offset, payload.subspan(offset, n)));
    if (!s.ok()) return s;
    offset += n;
  } while (offset < payload.size());
  auto resp = ReadResponse(id, nullptr, timeout_ms);
  if (!resp.ok()) return resp.status();
  return Status::Ok();
}

Result<Bytes> StoreClient::WaitGet(const ObjectRef &ref, int timeout_ms) {
  uint64_t id = next_id_++;
  json req{{"id", id},
           {"op", "wait_get"},
           {"object_id", ref.object_id.Hex()},
           {"producing_task", ref.producing_task.Hex()},
           {"output_index", ref.output_index},
           {"timeout_ms", timeout_ms}};
  if (Status s = conn_->Send(JsonMessage(kMsgRequest, req)); !s.ok()) return s;
  Bytes payload;
  // Let the server own the deadline; allow slack on the socket read.
  int read_timeout = timeout_ms < 0 ? -1 : timeout_ms + 2000;
  auto resp = ReadResponse(id, &payload, read_timeout);
  if (!resp.ok()) return resp.status();
  if (!resp.value().value("found", false)) {
    return Status::Error(ErrorCode::kTimeout, "object wait timed out");
  }
  payload.resize(resp.value().value("size", payload.size()));
  return payload;
}

Result<std::optional<Bytes>> StoreClient::GetNow(const UniqueId &object_id,
                                                 int timeout_ms) {
  uint64_t id = next_id_++;
  json req{{"id", id}, {"op", "get_now"}, {"object_id", object_id.Hex()}};
  if (Status s = conn_->Send(JsonMessage(kMsgRequest, req)); !s.ok()) return s;
  Bytes payload;
  auto resp = ReadResponse(id, &payload, timeout_ms);
  if (!resp.ok()) return resp.status();
  if (!resp.value().value("found", false)) return std::optional<Bytes>{};
  payload.resize(resp.value().value("size", payload.size()));
  return std::optional<Bytes>{std::move(payload)};
}

void StoreClient::Want(std::span<const ObjectRef> refs) {
  json arr = json::array();
  for (const ObjectRef &ref : refs) {
    arr.push_back(json{{"object_id", ref.object_id.Hex()},
                       {"producing_task", ref.producing_task.Hex()},
                       {"output_index", ref.output_index}});
  }
  conn_->Send(JsonMessage(kMsgRequest,
                          json{{"id", 0}, {"op", "want"}, {"refs", arr}}));
}

Result<json> StoreClient::Stat() {
  uint64_t id = next_id_++;
  json req{{"id", id}, {"op", "stat"}};
  if (Status s = conn_->Send(JsonMessage(kMsgRequest, req)); !s.ok()) return s;
  return ReadResponse(id, nullptr, 5000);
}

}  // namespace miniray
