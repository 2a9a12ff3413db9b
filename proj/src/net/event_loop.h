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
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "net/frame.h"

namespace miniray {

// Single-threaded epoll loop with framed TCP connections and timers. Every
// daemon is one of these. Only Post() and Stop() may be called from other
// threads; everything else belongs to the loop thread.
class EventLoop {
 public:
  using ConnId = uint64_t;
  using Callback = std::function<void()>;

  struct Handlers {
    std::function<void(ConnId, Message)> on_message;
    std::function<void(ConnId)> on_close;
    std::function<void(ConnId, uint16_t)> on_accept;  // port it arrived on
  };

  EventLoop();
  ~EventLoop();
  EventLoop(const EventLoop &) = delete;
  EventLoop &operator=(const EventLoop &) = delete;

  void set_handlers(Handlers handlers) { handlers_ = std::move(handlers); }

  // port 0 binds an ephemeral port; returns the bound port.
  Result<uint16_t> Listen(uint16_t port);
  Result<ConnId> Connect(const std::string &host, uint16_t port, int timeout_ms);

  void Send(ConnId id, const Message &msg);
  void Close(ConnId id);
  bool IsOpen(ConnId id) const { return conns_.contains(id); }
  size_t PendingSendBytes(ConnId id) const;
  // Fires whenever the connection's send buffer drains below the watermark;
  // used to stream large objects without buffering them whole.
  void SetDrainCallback(ConnId id, Callback fn);

  uint64_t After(int64_t delay_ms, Callback fn);
  uint64_t Every(int64_t period_ms, Callback fn);
  void CancelTimer(uint64_t id);

  void Post(Callback fn);  // thread-safe
  void Run();
  void Stop();  // thread-safe

 private:
  struct Conn {
    int fd = -1;
    uint16_t accept_port = 0;
    FrameDecoder decoder;
    Bytes out;
    size_t out_head = 0;
    bool want_write = false;
    bool in_drain = false;
    Callback on_drain;
  };
  struct Timer {
    uint64_t id;
    int64_t period_ms;  // 0 for one-shot
    Callback fn;
  };

  void HandleReadable(ConnId id);
  void HandleWritable(ConnId id);
  void FlushWrites(ConnId id, Conn &conn);
  void CloseInternal(ConnId id, bool notify);
  void UpdateEpoll(ConnId id, Conn &conn);
  void RunDueTimers();
  int NextTimerDelayMs() const;

  int epoll_fd_ = -1;
  int wake_fd_ = -1;
  bool running_ = false;
  uint64_t next_conn_id_ = 1;
  uint64_t next_timer_id_ = 1;
  Handlers handlers_;
  std::unordered_map<ConnId, Conn> conns_;
  std::unordered_map<int, uint16_t> listeners_;  // fd -> port
  std::multimap<int64_t, Timer> timers_;         // deadline -> timer
  std::unordered_map<uint64_t, int64_t> timer_deadlines_;
  std::mutex posted_mutex_;
  std::vector<Callback> posted_;
};

}  // namespace miniray
