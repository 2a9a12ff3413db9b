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

#include <string>
#include <vector>

#include "common/value.h"
#include "runtime/registry.h"

namespace miniray {

struct ActorHandle {
  UniqueId actor_id;
  UniqueId creation_task;

  ActorHandleData Data() const { return ActorHandleData{actor_id, creation_task}; }
  static ActorHandle From(const ActorHandleData &d) {
    return ActorHandle{d.actor_id, d.creation_task};
  }
};

struct WaitResult {
  std::vector<ObjectRef> ready;      // completion order
  std::vector<ObjectRef> not_ready;  // original order
};

// The program-facing surface. Implemented by the cluster runtime (driver and
// worker processes) and by the single-process reference interpreter, so the
// same program runs on either. Blocking calls throw ApiError on task errors.
class RuntimeApi {
 public:
  virtual ~RuntimeApi() = default;

  virtual std::vector<ObjectRef> RemoteInvoke(const std::string &function_name,
                                              std::vector<Value> args,
                                              ResourceMap resources = {}) = 0;
  virtual std::vector<Value> Get(const std::vector<ObjectRef> &refs) = 0;
  virtual WaitResult Wait(const std::vector<ObjectRef> &refs, size_t k,
                          int64_t timeout_ms) = 0;
  virtual ActorHandle CreateActor(const std::string &class_name,
                                  std::vector<Value> args,
                                  ResourceMap resources = {}) = 0;
  virtual std::vector<ObjectRef> ActorInvoke(const ActorHandle &handle,
                                             const std::string &method,
                                             std::vector<Value> args) = 0;
  virtual ObjectRef Put(Value value) = 0;

  // Snapshot actor state now; occupies a chain index like any method.
  ObjectRef CheckpointNow(const ActorHandle &handle) {
    return ActorInvoke(handle, kCheckpointMethodName, {}).at(0);
  }
};

}  // namespace miniray
