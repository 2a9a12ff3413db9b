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

#include "net/event_loop.h"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <signal.h>
#include <sys/epoll.h>
#include <sys/eventfd.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "common/clock.h"
#include "common/logging.h"

namespace miniray {

namespace {

constexpr size_t kReadChunk = 256 * 1024;
constexpr size_t kDrainWatermark = 1 << 20;

void SetNonBlocking(int fd) {
  int flags = fcntl(fd, F_GETFL, 0);
  fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

void SetNoDelay(int fd) {
  int one = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

struct SigpipeIgnorer {
  SigpipeIgnorer() { signal(SIGPIPE, SIG_IGN); }
};
SigpipeIgnorer g_sigpipe_ignorer;

}  // namespace

EventLoop::EventLoop() {
  epoll_fd_ = epoll_create1(EPOLL_CLOEXEC);
  wake_fd_ = eventfd(0, EFD_NONBLOCK | EFD_CLOEXEC);
  epoll_event ev{};
  ev.events = EPOLLIN;
  ev.data.u64 = 0;  // wake marker
  epoll_ctl(epoll_fd_, EPOLL_CTL_ADD, wake_fd_, &ev);
}

EventLoop::~EventLoop() {
  for (auto &[id, conn] : conns_) {
    ::close(conn.fd);
  }
  for (auto &[fd, port] : listeners_) {
    ::close(fd);
  }
  if (wake_fd_ >= 0) ::close(wake_fd_);
  if (epoll_fd_ >= 0) ::close(epoll_fd_);
}

Result<uint16_t> EventLoop::Listen(uint16_t port) {
  int fd = socket(AF_INET, SOCK_STREAM | SOCK_NONBLOCK | SOCK_CLOEXEC, 0);
  if (fd < 0) return Status::Error(ErrorCode::kIoError, strerror(errno));
  int one = 1;
  setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (bind(fd, reinterpret_cast<sockaddr *>(&addr), sizeof(addr)) != 0) {
    ::close(fd);
    return Status::Error(errno == EADDRINUSE ? ErrorCode::kPortInUse
                                             : ErrorCode::kIoError,
                         "bind " + std::to_string(port) + ": " + strerror(errno));
  }
  if (listen(fd, 512) != 0) {
    ::close(fd);
    return Status::Error(ErrorCode::kIoError, strerror(errno));
  }
  if (port == 0) {
    socklen_t len = sizeof(addr);
    getsockname(fd, reinterpret_cast<sockaddr *>(&addr), &len);
    port = ntohs(addr.sin_port);
  }
  listeners_[fd] = port;
  epoll_event ev{};
  ev.events = EPOLLIN;
  ev.data.u64 = static_cast<uint64_t>(fd) << 1 | 1;  // low bit: listener
  epoll_ctl(epoll_fd_, EPOLL_CTL_ADD, fd, &ev);
  return port;
}

Result<EventLoop::ConnId> EventLoop::Connect(const std::string &host,
                                             uint16_t port, int timeout_ms) {
  int fd = socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) return Status::Error(ErrorCode::kIoError, strerror(errno));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    return Status::Error(ErrorCode::kInvalidArgument, "bad host " + host);
  }
  SetNonBlocking(fd);
  int rc = connect(fd, reinterpret_cast<sockaddr *>(&addr), sizeof(addr));
  if (rc != 0 && errno == EINPROGRESS) {
    pollfd pfd{fd, POLLOUT, 0};
    rc = poll(&pfd, 1, timeout_ms);
    if (rc <= 0) {
      ::close(fd);
      return Status::Error(ErrorCode::kTimeout, "connect timeout");
    }
    int err = 0;
    socklen_t len = sizeof(err);
    getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) {
      ::close(fd);
      return Status::Error(ErrorCode::kIoError,
                           std::string("connect: ") + strerror(err));
    }
  } else if (rc != 0) {
    int err = errno;
    ::close(fd);
    return Status::Error(ErrorCode::kIoError,
                         std::string("connect: ") + strerror(err));
  }
  SetNoDelay(fd);
  ConnId id = next_conn_id_++;
  Conn &conn = conns_[id];
  conn.fd = fd;
  epoll_event ev{};
  ev.events = EPOLLIN;
  ev.data.u64 = id << 1;
  epoll_ctl(epoll_fd_, EPOLL_CTL_ADD, fd, &ev);
  return id;
}

void EventLoop::Send(ConnId id, const Message &msg) {
  auto it = conns_.find(id);
  if (it == conns_.end()) return;
  Conn &conn = it->second;
  EncodeFrame(msg, conn.out);
  FlushWrites(id, conn);
}

size_t EventLoop::PendingSendBytes(ConnId id) const {
  auto it = conns_.find(id);
  if (it == conns_.end()) return 0;
  return it->second.out.size() - it->second.out_head;
}

void EventLoop::SetDrainCallback(ConnId id, Callback fn) {
  auto it = conns_.find(id);
  if (it != conns_.end()) it->second.on_drain = std::move(fn);
}

void EventLoop::FlushWrites(ConnId id, Conn &conn) {
  while (conn.out_head < conn.out.size()) {
    ssize_t n = ::send(conn.fd, conn.out.data() + conn.out_head,
                       conn.out.size() - conn.out_head, MSG_NOSIGNAL);
    if (n > 0) {
      conn.out_head += static_cast<size_t>(n);
      continue;
    }
    if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) break;
    if (n < 0 && errno == EINTR) continue;
    CloseInternal(id, true);
    return;
  }
  if (conn.out_head == conn.out.size()) {
    conn.out.clear();
    conn.out_head = 0;
  } else if (conn.out_head > (1 << 20) && conn.out_head * 2 > conn.out.size()) {
    conn.out.erase(conn.out.begin(),
                   conn.out.begin() + static_cast<ssize_t>(conn.out_head));
    conn.out_head = 0;
  }
  bool want_write = conn.out_head < conn.out.size();
  if (want_write != conn.want_write) {
    conn.want_write = want_write;
    UpdateEpoll(id, conn);
  }
  // The drain callback may Send() more data; re-entry is cut off so a
  // streamer that stays under the watermark cannot recurse.
  if (conn.on_drain && !conn.in_drain &&
      conn.out.size() - conn.out_head < kDrainWatermark) {
    conn.in_drain = true;
    conn.on_drain();
    auto it = conns_.find(id);
    if (it != conns_.end()) it->second.in_drain = false;
  }
}

void EventLoop::UpdateEpoll(ConnId id, Conn &conn) {
  epoll_event ev{};
  ev.events = EPOLLIN | (conn.want_write ? EPOLLOUT : 0u);
  ev.data.u64 = id << 1;
  epoll_ctl(epoll_fd_, EPOLL_CTL_MOD, conn.fd, &ev);
}

void EventLoop::Close(ConnId id) { CloseInternal(id, false); }

void EventLoop::CloseInternal(ConnId id, bool notify) {
  auto it = conns_.find(id);
  if (it == conns_.end()) return;
  int fd = it->second.fd;
  epoll_ctl(epoll_fd_, EPOLL_CTL_DEL, fd, nullptr);
  ::close(fd);
  conns_.erase(it);
  if (notify && handlers_.on_close) handlers_.on_close(id);
}

void EventLoop::HandleReadable(ConnId id) {
  auto it = conns_.find(id);
  if (it == conns_.end()) return;
  Conn &conn = it->second;
  uint8_t buf[kReadChunk];
  bool closed = false;
  for (;;) {
    ssize_t n = ::recv(conn.fd, buf, sizeof(buf), 0);
    if (n > 0) {
      if (!conn.decoder.Feed(buf, static_cast<size_t>(n)).ok()) {
        closed = true;
        break;
      }
      if (static_cast<size_t>(n) < sizeof(buf)) break;
      continue;
    }
    if (n == 0) {
      closed = true;
      break;
    }
    if (errno == EAGAIN || errno == EWOULDBLOCK) break;
    if (errno == EINTR) continue;
    closed = true;
    break;
  }
  // Dispatch whatever parsed, then close; the handler may itself close.
  while (conns_.contains(id)) {
    auto msg = conns_[id].decoder.Next();
    if (!msg) break;
    if (handlers_.on_message) handlers_.on_message(id, std::move(*msg));
  }
  if (closed && conns_.contains(id)) CloseInternal(id, true);
}

void EventLoop::HandleWritable(ConnId id) {
  auto it = conns_.find(id);
  if (it == conns_.end()) return;
  FlushWrites(id, it->second);
}

uint64_t EventLoop::After(int64_t delay_ms, Callback fn) {
  uint64_t id = next_timer_id_++;
  int64_t deadline = NowMs() + delay_ms;
  timers_.emplace(deadline, Timer{id, 0, std::move(fn)});
  timer_deadlines_[id] = deadline;
  return id;
}

uint64_t EventLoop::Every(int64_t period_ms, Callback fn) {
  uint64_t id = next_timer_id_++;
  int64_t deadline = NowMs() + period_ms;
  timers_.emplace(deadline, Timer{id, period_ms, std::move(fn)});
  timer_deadlines_[id] = deadline;
  return id;
}

void EventLoop::CancelTimer(uint64_t id) {
  auto dit = timer_deadlines_.find(id);
  if (dit == timer_deadlines_.end()) return;
  auto [begin, end] = timers_.equal_range(dit->second);
  for (auto it = begin; it != end; ++it) {
    if (it->second.id == id) {
      timers_.erase(it);
      break;
    }
  }
  timer_deadlines_.erase(dit);
}

void EventLoop::RunDueTimers() {
  int64_t now = NowMs();
  while (!timers_.empty() && timers_.begin()->first <= now) {
    auto it = timers_.begin();
    Timer timer = std::move(it->second);
    timers_.erase(it);
    timer_deadlines_.erase(timer.id);
    if (timer.period_ms > 0) {
      int64_t next = now + timer.period_ms;
      timer_deadlines_[timer.id] = next;
      timers_.emplace(next, Timer{timer.id, timer.period_ms, timer.fn});
    }
    timer.fn();
  }
}

int EventLoop::NextTimerDelayMs() const {
  if (timers_.empty()) return 200;
  int64_t delta = timers_.begin()->first - NowMs();
  if (delta < 0) return 0;
  if (delta > 200) return 200;
  return static_cast<int>(delta);
}

void EventLoop::Post(Callback fn) {
  {
    std::lock_guard<std::mutex> lock(posted_mutex_);
    posted_.push_back(std::move(fn));
  }
  uint64_t one = 1;
  [[maybe_unused]] ssize_t n = write(wake_fd_, &one, sizeof(one));
}

void EventLoop::Stop() {
  Post([this] { running_ = false; });
}

void EventLoop::Run() {
  running_ = true;
  epoll_event events[128];
  while (running_) {
    int n = epoll_wait(epoll_fd_, events, 128, NextTimerDelayMs());
    if (n < 0 && errno != EINTR) break;
    for (int i = 0; i < n; i++) {
      uint64_t key = events[i].data.u64;
      if (key == 0) {
        uint64_t drain;
        while (read(wake_fd_, &drain, sizeof(drain)) > 0) {
        }
        continue;
      }
      if (key & 1) {
        int listen_fd = static_cast<int>(key >> 1);
        uint16_t port = listeners_[listen_fd];
        for (;;) {
          int fd = accept4(listen_fd, nullptr, nullptr,
                           SOCK_NONBLOCK | SOCK_CLOEXEC);
          if (fd < 0) break;
          SetNoDelay(fd);
          ConnId id = next_conn_id_++;
          Conn &conn = conns_[id];
          conn.fd = fd;
          conn.accept_port = port;
          epoll_event ev{};
          ev.events = EPOLLIN;
          ev.data.u64 = id << 1;
          epoll_ctl(epoll_fd_, EPOLL_CTL_ADD, fd, &ev);
          if (handlers_.on_accept) handlers_.on_accept(id, port);
        }
        continue;
      }
      ConnId id = key >> 1;
      if (events[i].events & (EPOLLHUP | EPOLLERR)) {
        // Drain any readable bytes first so final messages are not lost.
        HandleReadable(id);
        if (conns_.contains(id)) CloseInternal(id, true);
        continue;
      }
      if (events[i].events & EPOLLIN) HandleReadable(id);
      if (events[i].events & EPOLLOUT) HandleWritable(id);
    }
    RunDueTimers();
    std::vector<Callback> posted;
    {
      std::lock_guard<std::mutex> lock(posted_mutex_);
      posted.swap(posted_);
    }
    for (Callback &fn : posted) fn();
  }
}

}  // namespace miniray
