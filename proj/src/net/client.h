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

#include <atomic>
#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>

#include "net/msg.h"

namespace miniray {

// Blocking framed connection; single-threaded use. Workers talk to their
// node daemons through one of these.
class FrameConn {
 public:
  static Result<std::unique_ptr<FrameConn>> Dial(const std::string &host,
                                                 uint16_t port, int timeout_ms);
  ~FrameConn();
  FrameConn(const FrameConn &) = delete;

  Status Send(const Message &msg);
  // timeout_ms < 0 waits forever.
  Result<Message> Recv(int timeout_ms);
  void Shutdown();
  int fd() const { return fd_; }

 private:
  explicit FrameConn(int fd) : fd_(fd) {}
  int fd_;
  FrameDecoder decoder_;
};

// Thread-safe pipelined JSON RPC over one connection with a background
// receiver thread. Response routing is by request id; events and chunks go
// to the registered handlers (called on the receiver thread).
class RpcClient {
 public:
  static Result<std::unique_ptr<RpcClient>> Dial(const std::string &host,
                                                 uint16_t port, int timeout_ms);
  ~RpcClient();
  RpcClient(const RpcClient &) = delete;

  Result<json> Call(const std::string &op, json req, int timeout_ms);
  void CallAsync(const std::string &op, json req,
                 std::function<void(Result<json>)> cb);
  // Request plus a raw payload streamed as chunk frames; the response comes
  // back after the server has consumed the body.
  Result<json> CallWithBody(const std::string &op, json req,
                            const UniqueId &object_id,
                            std::span<const uint8_t> body, size_t chunk_bytes,
                            int timeout_ms);
  void Notify(const std::string &op, json req);

  void SetEventHandler(std::function<void(json)> fn);
  void SetChunkHandler(std::function<void(const ChunkHeader &, const Bytes &)> fn);
  void SetCloseHandler(std::function<void()> fn);

  bool alive() const { return alive_.load(); }

 private:
  explicit RpcClient(int fd);
  void ReceiverLoop();
  Status SendLocked(const Message &msg);
  uint64_t Register(std::function<void(Result<json>)> cb);

  int fd_;
  std::atomic<bool> alive_{true};
  std::thread receiver_;
  std::mutex send_mutex_;
  std::mutex pending_mutex_;
  uint64_t next_id_ = 1;
  std::unordered_map<uint64_t, std::function<void(Result<json>)>> pending_;
  std::function<void(json)> on_event_;
  std::function<void(const ChunkHeader &, const Bytes &)> on_chunk_;
  std::function<void()> on_close_;
};

}  // namespace miniray
