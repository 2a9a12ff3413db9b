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

#include <cstdint>
#include <deque>
#include <optional>

#include "common/bytes.h"
#include "common/id.h"
#include "common/status.h"

namespace miniray {

// Wire format, bit-exact: 4-byte big-endian payload length, 1-byte
// message-type tag, payload. Control-plane payloads are canonical UTF-8 text
// (keys sorted, no insignificant whitespace). Chunk payloads are raw bytes
// behind a fixed 32-byte header.
enum MsgTag : uint8_t {
  kMsgRequest = 1,
  kMsgResponse = 2,
  kMsgEvent = 3,
  kMsgChunk = 4,
};

struct Message {
  uint8_t tag = kMsgRequest;
  Bytes payload;
};

// Data-plane chunk header: object_id (20B), offset (8B BE), length (4B BE).
struct ChunkHeader {
  static constexpr size_t kSize = 32;
  UniqueId object_id;
  uint64_t offset = 0;
  uint32_t length = 0;
};

constexpr size_t kMaxFramePayload = 256u << 20;

void EncodeFrame(const Message &msg, Bytes &out);
Bytes EncodeFrame(const Message &msg);

Message MakeChunk(const UniqueId &object_id, uint64_t offset,
                  std::span<const uint8_t> data);
// Returns the header and a view into the chunk body inside `payload`.
Result<ChunkHeader> ParseChunkHeader(const Bytes &payload);

// Incremental decoder: feed arbitrary byte runs, pop whole messages.
class FrameDecoder {
 public:
  Status Feed(const uint8_t *data, size_t len);
  std::optional<Message> Next();
  size_t BufferedBytes() const { return buf_.size(); }

 private:
  Bytes buf_;
  size_t consumed_ = 0;
  std::deque<Message> ready_;
};

}  // namespace miniray
