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

#include <optional>
#include <string>
#include <vector>

#include "graph/task_spec.h"

namespace miniray {

// submitted -> dispatched -> done, with dispatched -> submitted/lost allowed
// on failure; executions increments only on dispatch.
enum class TaskState { kSubmitted, kDispatched, kDone, kLost, kError };

const char *TaskStateName(TaskState state);
std::optional<TaskState> TaskStateFromName(const std::string &name);

struct TaskTableEntry {
  TaskSpec spec;
  TaskState state = TaskState::kSubmitted;
  uint64_t executions = 0;
  UniqueId last_node;
  std::string error;          // populated when state == kError
  int64_t updated_at_ms = 0;  // wall clock of the last transition

  std::string ToJson() const;
  static Result<TaskTableEntry> FromJson(const std::string &text);
};

enum class ActorLifeState { kCreating, kAlive, kDead, kRestoring };

const char *ActorLifeStateName(ActorLifeState state);

struct ActorCheckpointRef {
  uint64_t index = 0;  // chain index covered by the checkpoint
  UniqueId object_id;  // serialized state blob
};

struct ActorTableEntry {
  UniqueId actor_id;
  UniqueId creation_task;
  UniqueId node_id;  // current or last host
  ActorLifeState state = ActorLifeState::kCreating;
  std::string class_name;
  uint64_t auto_checkpoint_every = 0;  // 0 disables the auto policy
  std::vector<ActorCheckpointRef> checkpoints;

  std::string ToJson() const;
  static Result<ActorTableEntry> FromJson(const std::string &text);
};

}  // namespace miniray
