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

#include <stdexcept>
#include <string>
#include <utility>
#include <variant>

namespace miniray {

// Error codes used across the wire and internally. Names are stable: they
// appear verbatim in error payloads.
enum class ErrorCode {
  kOk = 0,
  kTimeout,
  kDuplicateTask,
  kBrokenActorChain,
  kUnknownObject,
  kDuplicateName,
  kUnknownFunction,
  kDigestMismatch,
  kCapacityExceeded,
  kCannotFree,
  kSourceVanished,
  kInfeasible,
  kTaskExecutionError,
  kReconstructionFailed,
  kActorDead,
  kWorkerDied,
  kStaleReport,
  kNoStandbyAvailable,
  kDiskFull,
  kLengthMismatch,
  kCheckpointSerializationError,
  kVersionConflict,
  kPortInUse,
  kSpawnFailure,
  kUnknownTarget,
  kBenchFailed,
  kInvalidArgument,
  kIoError,
  kNotLeader,
  kInternal,
};

const char *ErrorCodeName(ErrorCode code);
ErrorCode ErrorCodeFromName(const std::string &name);

class Status {
 public:
  Status() : code_(ErrorCode::kOk) {}
  Status(ErrorCode code, std::string message)
      : code_(code), message_(std::move(message)) {}

  static Status Ok() { return Status(); }
  static Status Error(ErrorCode code, std::string message = "") {
    return Status(code, std::move(message));
  }

  bool ok() const { return code_ == ErrorCode::kOk; }
  ErrorCode code() const { return code_; }
  const std::string &message() const { return message_; }

  std::string ToString() const {
    if (ok()) return "OK";
    std::string s = ErrorCodeName(code_);
    if (!message_.empty()) {
      s += ": ";
      s += message_;
    }
    return s;
  }

 private:
  ErrorCode code_;
  std::string message_;
};

template <typename T>
class Result {
 public:
  Result(T value) : v_(std::move(value)) {}  // NOLINT: implicit by design
  Result(Status status) : v_(std::move(status)) {}  // NOLINT

  bool ok() const { return std::holds_alternative<T>(v_); }
  const Status &status() const { return std::get<Status>(v_); }
  T &value() { return std::get<T>(v_); }
  const T &value() const { return std::get<T>(v_); }
  T take() { return std::move(std::get<T>(v_)); }

 private:
  std::variant<T, Status> v_;
};

// Thrown at the public API surface (get/wait/create_actor); daemon internals
// pass Status values instead.
class ApiError : public std::runtime_error {
 public:
  ApiError(ErrorCode code, const std::string &message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace miniray
