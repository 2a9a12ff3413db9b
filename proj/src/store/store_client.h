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

#include <memory>
#include <optional>

#include "common/value.h"
#include "net/client.h"

namespace miniray {

// Blocking handle to a node's object store; one outstanding operation at a
// time (workers execute one task at a time, so this is the natural shape).
class StoreClient {
 public:
  static Result<std::unique_ptr<StoreClient>> Dial(const std::string &host,
                                                   uint16_t port,
                                                   int timeout_ms = 2000);

  // Seals a new object; idempotent when the identical payload is re-sealed.
  Status Put(const ObjectRef &ref, std::span<const uint8_t> payload,
             int timeout_ms = 30000);
  // Blocks until sealed locally (pulling or reconstructing remotely produced
  // data as needed); timeout_ms < 0 waits forever.
  Result<Bytes> WaitGet(const ObjectRef &ref, int timeout_ms);
  Result<std::optional<Bytes>> GetNow(const UniqueId &object_id,
                                      int timeout_ms = 30000);
  void Want(std::span<const ObjectRef> refs);
  Result<json> Stat();

 private:
  explicit StoreClient(std::unique_ptr<FrameConn> conn)
      : conn_(std::move(conn)) {}
  Result<json> ReadResponse(uint64_t id, Bytes *payload_out, int timeout_ms);

  std::unique_ptr<FrameConn> conn_;
  uint64_t next_id_ = 1;
};

}  // namespace miniray
