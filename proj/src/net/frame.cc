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

#include "net/frame.h"

#include <cstring>

namespace miniray {

void EncodeFrame(const Message &msg, Bytes &out) {
  PutU32Be(out, static_cast<uint32_t>(msg.payload.size()));
  out.push_back(msg.tag);
  out.insert(out.end(), msg.payload.begin(), msg.payload.end());
}

Bytes EncodeFrame(const Message &msg) {
  Bytes out;
  out.reserve(5 + msg.payload.size());
  EncodeFrame(msg, out);
  return out;
}

Message MakeChunk(const UniqueId &object_id, uint64_t offset,
                  std::span<const uint8_t> data) {
  Message msg;
  msg.tag = kMsgChunk;
  msg.payload.reserve(ChunkHeader::kSize + data.size());
  msg.payload.insert(msg.payload.end(), object_id.bytes().begin(),
                     object_id.bytes().end());
  PutU64Be(msg.payload, offset);
  PutU32Be(msg.payload, static_cast<uint32_t>(data.size()));
  msg.payload.insert(msg.payload.end(), data.begin(), data.end());
  return msg;
}

Result<ChunkHeader> ParseChunkHeader(const Bytes &payload) {
  if (payload.size() < ChunkHeader::kSize) {
    return Status::Error(ErrorCode::kInvalidArgument, "short chunk");
  }
  ChunkHeader h;
  h.object_id = UniqueId::FromBinary(
      std::string_view(reinterpret_cast<const char *>(payload.data()), 20));
  h.offset = GetU64Be(payload.data() + 20);
  h.length = GetU32Be(payload.data() + 28);
  if (payload.size() != ChunkHeader::kSize + h.length) {
    return Status::Error(ErrorCode::kInvalidArgument, "chunk length mismatch");
  }
  return h;
}

Status FrameDecoder::Feed(const uint8_t *data, size_t len) {
  buf_.insert(buf_.end(), data, data + len);
  // Parse as many complete frames as possible; compact the buffer once at
  // the end so repeated small feeds stay linear.
  while (buf_.size() - consumed_ >= 5) {
    const uint8_t *p = buf_.data() + consumed_;
    uint32_t payload_len = GetU32Be(p);
    if (payload_len > kMaxFramePayload) {
      return Status::Error(ErrorCode::kInvalidArgument, "oversized frame");
    }
    if (buf_.size() - consumed_ < 5u + payload_len) break;
    Message msg;
    msg.tag = p[4];
    msg.payload.assign(p + 5, p + 5 + payload_len);
    ready_.push_back(std::move(msg));
    consumed_ += 5u + payload_len;
  }
  if (consumed_ > 0) {
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<ssize_t>(consumed_));
    consumed_ = 0;
  }
  return Status::Ok();
}

std::optional<Message> FrameDecoder::Next() {
  if (ready_.empty()) return std::nullopt;
  Message msg = std::move(ready_.front());
  ready_.pop_front();
  return msg;
}

}  // namespace miniray
