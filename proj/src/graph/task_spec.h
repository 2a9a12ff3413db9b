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
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "common/bytes.h"
#include "common/id.h"
#include "common/rational.h"
#include "common/status.h"
#include "common/value.h"

namespace miniray {

enum class TaskKind { kFunction, kActorMethod, kActorCreation };

const char *TaskKindName(TaskKind kind);
std::optional<TaskKind> TaskKindFromName(const std::string &name);

// One argument: either a reference to an object or small inlined bytes
// (an encoded Value).
struct TaskArg {
  std::variant<ObjectRef, Bytes> v;

  bool IsRef() const { return std::holds_alternative<ObjectRef>(v); }
  const ObjectRef &AsRef() const { return std::get<ObjectRef>(v); }
  const Bytes &AsInline() const { return std::get<Bytes>(v); }
  bool operator==(const TaskArg &) const = default;
};

// One node of the dynamic task graph. Immutable after construction.
struct TaskSpec {
  UniqueId task_id;
  TaskKind kind = TaskKind::kFunction;
  UniqueId function_id;
  std::optional<UniqueId> actor_id;
  // Position in the actor's stateful-edge chain. Assigned by the actor's
  // hosting scheduler on arrival; unset while an actor_method is in flight.
  std::optional<uint64_t> actor_method_index;
  std::vector<TaskArg> args;
  uint64_t num_returns = 1;
  ResourceMap resources;
  UniqueId parent_task_id;
  uint64_t parent_counter = 0;

  ObjectRef Return(uint64_t index) const {
    return ObjectRef::ForTaskOutput(task_id, index);
  }
  std::vector<ObjectRef> RefArgs() const;

  // Invariants from the type definition; DuplicateTask/chain checks live in
  // LineageGraph.
  Status Validate() const;

  // Canonical control-plane text encoding, field names as in the type
  // definition, keys sorted.
  std::string ToJson() const;
  static Result<TaskSpec> FromJson(const std::string &json);

  bool operator==(const TaskSpec &) const = default;
};

}  // namespace miniray
