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

#include "recovery/task_state.h"

#include <json.hpp>

namespace miniray {

using nlohmann::json;

const char *TaskStateName(TaskState state) {
  switch (state) {
    case TaskState::kSubmitted: return "submitted";
    case TaskState::kDispatched: return "dispatched";
    case TaskState::kDone: return "done";
    case TaskState::kLost: return "lost";
    case TaskState::kError: return "error";
  }
  return "submitted";
}

std::optional<TaskState> TaskStateFromName(const std::string &name) {
  if (name == "submitted") return TaskState::kSubmitted;
  if (name == "dispatched") return TaskState::kDispatched;
  if (name == "done") return TaskState::kDone;
  if (name == "lost") return TaskState::kLost;
  if (name == "error") return TaskState::kError;
  return std::nullopt;
}

std::string TaskTableEntry::ToJson() const {
  json j;
  j["spec"] = json::parse(spec.ToJson());
  j["state"] = TaskStateName(state);
  j["executions"] = executions;
  j["last_node"] = last_node.Hex();
  if (!error.empty()) j["error"] = error;
  j["updated_at_ms"] = updated_at_ms;
  return j.dump();
}

Result<TaskTableEntry> TaskTableEntry::FromJson(const std::string &text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    return Status::Error(ErrorCode::kInvalidArgument, "malformed task entry");
  }
  TaskTableEntry entry;
  auto spec = TaskSpec::FromJson(j.value("spec", json::object()).dump());
  if (!spec.ok()) return spec.status();
  entry.spec = spec.take();
  auto state = TaskStateFromName(j.value("state", ""));
  if (!state) return Status::Error(ErrorCode::kInvalidArgument, "bad state");
  entry.state = *state;
  entry.executions = j.value("executions", 0ull);
  auto node = UniqueId::FromHex(j.value("last_node", std::string(40, '0')));
  entry.last_node = node.value_or(UniqueId());
  entry.error = j.value("error", "");
  entry.updated_at_ms = j.value("updated_at_ms", 0ll);
  return entry;
}

const char *ActorLifeStateName(ActorLifeState state) {
  switch (state) {
    case ActorLifeState::kCreating: return "creating";
    case ActorLifeState::kAlive: return "alive";
    case ActorLifeState::kDead: return "dead";
    case ActorLifeState::kRestoring: return "restoring";
  }
  return "creating";
}

std::string ActorTableEntry::ToJson() const {
  json j;
  j["actor_id"] = actor_id.Hex();
  j["creation_task"] = creation_task.Hex();
  j["node_id"] = node_id.Hex();
  j["state"] = ActorLifeStateName(state);
  j["class_name"] = class_name;
  j["auto_checkpoint_every"] = auto_checkpoint_every;
  json cps = json::array();
  for (const ActorCheckpointRef &cp : checkpoints) {
    cps.push_back(json{{"index", cp.index}, {"object_id", cp.object_id.Hex()}});
  }
  j["checkpoints"] = std::move(cps);
  return j.dump();
}

Result<ActorTableEntry> ActorTableEntry::FromJson(const std::string &text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    return Status::Error(ErrorCode::kInvalidArgument, "malformed actor entry");
  }
  ActorTableEntry entry;
  auto actor = UniqueId::FromHex(j.value("actor_id", ""));
  auto task = UniqueId::FromHex(j.value("creation_task", ""));
  auto node = UniqueId::FromHex(j.value("node_id", std::string(40, '0')));
  if (!actor || !task) {
    return Status::Error(ErrorCode::kInvalidArgument, "bad actor entry ids");
  }
  entry.actor_id = *actor;
  entry.creation_task = *task;
  entry.node_id = node.value_or(UniqueId());
  std::string state = j.value("state", "");
  if (state == "creating") entry.state = ActorLifeState::kCreating;
  else if (state == "alive") entry.state = ActorLifeState::kAlive;
  else if (state == "dead") entry.state = ActorLifeState::kDead;
  else if (state == "restoring") entry.state = ActorLifeState::kRestoring;
  else return Status::Error(ErrorCode::kInvalidArgument, "bad actor state");
  entry.class_name = j.value("class_name", "");
  entry.auto_checkpoint_every = j.value("auto_checkpoint_every", 0ull);
  for (const json &cp : j.value("checkpoints", json::array())) {
    auto oid = UniqueId::FromHex(cp.value("object_id", ""));
    if (!oid) continue;
    entry.checkpoints.push_back(
        ActorCheckpointRef{cp.value("index", 0ull), *oid});
  }
  return entry;
}

}  // namespace miniray
