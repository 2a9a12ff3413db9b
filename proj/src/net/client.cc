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

#include "net/client.h"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <future>

#include "common/clock.h"
#include "common/logging.h"

namespace miniray {

namespace {

Result<int> DialFd(const std::string &host, uint16_t port, int timeout_ms) {
  int fd = socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) return Status::Error(ErrorCode::kIoError, strerror(errno));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    return Status::Error(ErrorCode::kInvalidArgument, "bad host " + host);
  }
  int flags = fcntl(fd, F_GETFL, 0);
  fcntl(fd, F_SETFL, flags | O_NONBLOCK);
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
  fcntl(fd, F_SETFL, flags);  // back to blocking
  int one = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return fd;
}

Status SendAll(int fd, const Bytes &data) {
  size_t sent = 0;
  while (sent < data.size()) {
    ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return Status::Error(ErrorCode::kIoError,
                           std::string("send: ") + strerror(errno));
    }
    sent += static_cast<size_t>(n);
  }
  return Status::Ok();
}

}  // namespace

Result<std::unique_ptr<FrameConn>> FrameConn::Dial(const std::string &host,
                                                   uint16_t port,
                                                   int timeout_ms) {
  auto fd = DialFd(host, port, timeout_ms);
  if (!fd.ok()) return fd.status();
  return std::unique_ptr<FrameConn>(new FrameConn(fd.value()));
}

FrameConn::~FrameConn() {
  if (fd_ >= 0) ::close(fd_);
}

Status FrameConn::Send(const Message &msg) {
  return SendAll(fd_, EncodeFrame(msg));
}

Result<Message> FrameConn::Recv(int timeout_ms) {
  int64_t deadline = timeout_ms < 0 ? -1 : NowMs() + timeout_ms;
  for (;;) {
    if (auto msg = decoder_.Next()) return std::move(*msg);
    int wait_ms = -1;
    if (deadline >= 0) {
      int64_t left = deadline - NowMs();
      if (left <= 0) return Status::Error(ErrorCode::kTimeout, "recv timeout");
      wait_ms = static_cast<int>(left);
    }
    pollfd pfd{fd_, POLLIN, 0};
    int rc = poll(&pfd, 1, wait_ms);
    if (rc == 0) return Status::Error(ErrorCode::kTimeout, "recv timeout");
    if (rc < 0) {
      if (errno == EINTR) continue;
      return Status::Error(ErrorCode::kIoError, strerror(errno));
    }
    uint8_t buf[64 * 1024];
    ssize_t n = ::recv(fd_, buf, sizeof(buf), 0);
    if (n == 0) return Status::Error(ErrorCode::kIoError, "connection closed");
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      return Status::Error(ErrorCode::kIoError, strerror(errno));
    }
    if (Status s = decoder_.Feed(buf, static_cast<size_t>(n)); !s.ok()) return s;
  }
}

void FrameConn::Shutdown() { ::shutdown(fd_, SHUT_RDWR); }

RpcClient::RpcClient(int fd) : fd_(fd) {
  receiver_ = std::thread([this] { ReceiverLoop(); });
}

Result<std::unique_ptr<RpcClient>> RpcClient::Dial(const std::string &host,
                                                   uint16_t port,
                                                   int timeout_ms) {
  auto fd = DialFd(host, port, timeout_ms);
  if (!fd.ok()) return fd.status();
  return std::unique_ptr<RpcClient>(new RpcClient(fd.value()));
}

RpcClient::~RpcClient() {
  alive_.store(false);
  ::shutdown(fd_, SHUT_RDWR);
  if (receiver_.joinable()) receiver_.join();
  ::close(fd_);
}

void RpcClient::ReceiverLoop() {
  FrameDecoder decoder;
  uint8_t buf[256 * 1024];
  for (;;) {
    ssize_t n = ::recv(fd_, buf, sizeof(buf), 0);
    if (n <= 0) {
      if (n < 0 && errno == EINTR) continue;
      break;
    }
    if (!decoder.Feed(buf, static_cast<size_t>(n)).ok()) break;
    while (auto msg = decoder.Next()) {
      if (msg->tag == kMsgChunk) {
        auto header = ParseChunkHeader(msg->payload);
        if (header.ok() && on_chunk_) on_chunk_(header.value(), msg->payload);
        continue;
      }
      auto parsed = ParseJsonPayload(msg->payload);
      if (!parsed.ok()) continue;
      json j = parsed.take();
      if (msg->tag == kMsgResponse) {
        uint64_t id = j.value("id", 0ull);
        std::function<void(Result<json>)> cb;
        {
          std::lock_guard<std::mutex> lock(pending_mutex_);
          auto it = pending_.find(id);
          if (it != pending_.end()) {
            cb = std::move(it->second);
            pending_.erase(it);
          }
        }
        if (cb) {
          Status s = StatusFromResponse(j);
          if (s.ok()) {
            cb(std::move(j));
          } else {
            cb(s);
          }
        }
      } else if (msg->tag == kMsgEvent && on_event_) {
        on_event_(std::move(j));
      }
    }
  }
  alive_.store(false);
  // Fail everything still in flight so callers do not hang.
  std::unordered_map<uint64_t, std::function<void(Result<json>)>> pending;
  {
    std::lock_guard<std::mutex> lock(pending_mutex_);
    pending.swap(pending_);
  }
  for (auto &[id, cb] : pending) {
    cb(Status::Error(ErrorCode::kIoError, "connection lost"));
  }
  if (on_close_) on_close_();
}

Status RpcClient::SendLocked(const Message &msg) {
  std::lock_guard<std::mutex> lock(send_mutex_);
  if (!alive_.load()) return Status::Error(ErrorCode::kIoError, "closed");
  return SendAll(fd_, EncodeFrame(msg));
}

uint64_t RpcClient::Register(std::function<void(Result<json>)> cb) {
  std::lock_guard<std::mutex> lock(pending_mutex_);
  uint64_t id = next_id_++;
  pending_[id] = std::move(cb);
  return id;
}

void RpcClient::CallAsync(const std::string &op, json req,
                          std::function<void(Result<json>)> cb) {
  uint64_t id = Register(std::move(cb));
  req["id"] = id;
  req["op"] = op;
  Status s = SendLocked(JsonMessage(kMsgRequest, req));
  if (!s.ok()) {
    std::function<void(Result<json>)> pending_cb;
    {
      std::lock_guard<std::mutex> lock(pending_mutex_);
      auto it = pending_.find(id);
      if (it != pending_.end()) {
        pending_cb = std::move(it->second);
        pending_.erase(it);
      }
    }
    if (pending_cb) pending_cb(s);
  }
}

Result<json> RpcClient::Call(const std::string &op, json req, int timeout_ms) {
  struct Shared {
    std::mutex m;
    std::condition_variable cv;
    bool done = false;
    Result<json> result = Status::Ok();
  };
  auto shared = std::make_shared<Shared>();
  CallAsync(op, std::move(req), [shared](Result<json> r) {
    std::lock_guard<std::mutex> lock(shared->m);
    shared->result = std::move(r);
    shared->done = true;
    shared->cv.notify_all();
  });
  std::unique_lock<std::mutex> lock(shared->m);
  if (timeout_ms < 0) {
    shared->cv.wait(lock, [&] { return shared->done; });
  } else if (!shared->cv.wait_for(lock, std::chrono::milliseconds(timeout_ms),
                                  [&] { return shared->done; })) {
    return Status::Error(ErrorCode::kTimeout, "rpc timeout: " + op);
  }
  return std::move(shared->result);
}

Result<json> RpcClient::CallWithBody(const std::string &op, json req,
                                     const UniqueId &object_id,
                                     std::span<const uint8_t> body,
                                     size_t chunk_bytes, int timeout_ms) {
  struct Shared {
    std::mutex m;
    std::condition_variable cv;
    bool done = false;
    Result<json> result = Status::Ok();
  };
  auto shared = std::make_shared<Shared>();
  uint64_t id = Register([shared](Result<json> r) {
    std::lock_guard<std::mutex> lock(shared->m);
    shared->result = std::move(r);
    shared->done = true;
    shared->cv.notify_all();
  });
  req["id"] = id;
  req["op"] = op;
  {
    std::lock_guard<std::mutex> lock(send_mutex_);
    Bytes wire = EncodeFrame(JsonMessage(kMsgRequest, req));
    size_t offset = 0;
    do {
      size_t n = std::min(chunk_bytes, body.size() - offset);
      EncodeFrame(MakeChunk(object_id, offset, body.subspan(offset, n)), wire);
      offset += n;
      if (wire.size() >= (4u << 20)) {
        if (Status s = SendAll(fd_, wire); !s.ok()) break;
        wire.clear();
      }
    } while (offset < body.size());
    if (!wire.empty()) SendAll(fd_, wire);
  }
  std::unique_lock<std::mutex> lock(shared->m);
  if (timeout_ms < 0) {
    shared->cv.wait(lock, [&] { return shared->done; });
  } else if (!shared->cv.wait_for(lock, std::chrono::milliseconds(timeout_ms),
                                  [&] { return shared->done; })) {
    return Status::Error(ErrorCode::kTimeout, "rpc timeout: " + op);
  }
  return std::move(shared->result);
}

void RpcClient::Notify(const std::string &op, json req) {
  req["id"] = 0;
  req["op"] = op;
  SendLocked(JsonMessage(kMsgRequest, req));
}

void RpcClient::SetEventHandler(std::function<void(json)> fn) {
  on_event_ = std::move(fn);
}
void RpcClient::SetChunkHandler(
    std::function<void(const ChunkHeader &, const Bytes &)> fn) {
  on_chunk_ = std::move(fn);
}
void RpcClient::SetCloseHandler(std::function<void()> fn) {
  on_close_ = std::move(fn);
}

}  // namespace miniray
