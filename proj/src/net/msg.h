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

#include <json.hpp>

#include "common/status.h"
#include "net/frame.h"

namespace miniray {

using nlohmann::json;

struct NodeAddr {
  std::string host;
  uint16_t port = 0;
};

// Control-plane payload conventions:
//   request:  {"id": n, "op": "...", ...}   (id 0 means no response wanted)
//   response: {"id": n, "ok": true, ...} or {"id": n, "ok": false,
//              "err": "<code name>", "msg": "..."}
//   event:    {"ev": "...", ...}
inline Message JsonMessage(uint8_t tag, const json &j) {
  Message msg;
  msg.tag = tag;
  std::string text = j.dump();
  msg.payload.assign(text.begin(), text.end());
  return msg;
}

inline Result<json> ParseJsonPayload(const Bytes &payload) {
  json j = json::parse(payload.begin(), payload.end(), nullptr, false);
  if (j.is_discarded()) {
    return Status::Error(ErrorCode::kInvalidArgument, "malformed payload");
  }
  return j;
}

inline json OkResponse(uint64_t id) { return json{{"id", id}, {"ok", true}}; }

inline json ErrResponse(uint64_t id, const Status &status) {
  return json{{"id", id},
              {"ok", false},
              {"err", ErrorCodeName(status.code())},
              {"msg", status.message()}};
}

inline Status StatusFromResponse(const json &resp) {
  if (resp.value("ok", false)) return Status::Ok();
  return Status::Error(ErrorCodeFromName(resp.value("err", "Internal")),
                       resp.value("msg", ""));
}

}  // namespace miniray
