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

#include "graph/task_spec.h"

#include <json.hpp>

namespace miniray {

using nlohmann::json;

const char *TaskKindName(TaskKind kind) {
  switch (kind) {
    case TaskKind::kFunction: return "function";
    case TaskKind::kActorMethod: return "actor_method";
    case TaskKind::kActorCreation: return "actor_creation";
  }
  return "function";
}

std::optional<TaskKind> TaskKindFromName(const std::string &name) {
  if (name == "function") return TaskKind::kFunction;
  if (name == "actor_method") return TaskKind::kActorMethod;
  if (name == "actor_creation") return TaskKind::kActorCreation;
  return std::nullopt;
}

std::vector<ObjectRef> TaskSpec::RefArgs() const {
  // Dependencies: top-level ref args plus refs nested inside inlined values.
  std::vector<ObjectRef> out;
  for (const TaskArg &arg : args) {
    if (arg.IsRef()) {
      out.push_back(arg.AsRef());
    } else {
      auto value = Value::Decode(arg.AsInline());
      if (value.ok()) value.value().CollectRefs(out);
    }
  }
  return out;
}

Status TaskSpec::Validate() const {
  if (num_returns < 1) {
    return Status::Error(ErrorCode::kInvalidArgument, "num_returns must be >= 1");
  }
  if (kind == TaskKind::kActorMethod && !actor_id.has_value()) {
    return Status::Error(ErrorCode::kInvalidArgument,
                         "actor_method without actor_id");
  }
  for (const auto &[name, amount] : resources) {
    if (amount < Rational::FromInt(0)) {
      return Status::Error(ErrorCode::kInvalidArgument,
                           "negative resource demand for " + name);
    }
  }
  for (const TaskArg &arg : args) {
    if (arg.IsRef()) {
      const ObjectRef &ref = arg.AsRef();
      if (ref.object_id != DeriveObjectId(ref.producing_task, ref.output_index)) {
        return Status::Error(ErrorCode::kInvalidArgument,
                             "object ref id does not match its derivation");
      }
    }
  }
  return Status::Ok();
}

std::string TaskSpec::ToJson() const {
  json j;
  j["task_id"] = task_id.Hex();
  j["kind"] = TaskKindName(kind);
  j["function_id"] = function_id.Hex();
  if (actor_id) j["actor_id"] = actor_id->Hex();
  if (actor_method_index) j["actor_method_index"] = *actor_method_index;
  json args_json = json::array();
  for (const TaskArg &arg : args) {
    if (arg.IsRef()) {
      const ObjectRef &ref = arg.AsRef();
      args_json.push_back(json{{"ref", json{{"object_id", ref.object_id.Hex()},
                                            {"output_index", ref.output_index},
                                            {"producing_task",
                                             ref.producing_task.Hex()}}}});
    } else {
      args_json.push_back(json{{"bytes", ToHex(arg.AsInline())}});
    }
  }
  j["args"] = std::move(args_json);
  j["num_returns"] = num_returns;
  json res = json::object();
  for (const auto &[name, amount] : resources) {
    res[name] = json::array({amount.num(), amount.den()});
  }
  j["resources"] = std::move(res);
  j["parent_task_id"] = parent_task_id.Hex();
  j["parent_counter"] = parent_counter;
  return j.dump();
}

Result<TaskSpec> TaskSpec::FromJson(const std::string &text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    return Status::Error(ErrorCode::kInvalidArgument, "malformed task spec");
  }
  try {
    TaskSpec spec;
    auto id = UniqueId::FromHex(j.at("task_id").get<std::string>());
    auto fid = UniqueId::FromHex(j.at("function_id").get<std::string>());
    auto pid = UniqueId::FromHex(j.at("parent_task_id").get<std::string>());
    auto kind = TaskKindFromName(j.at("kind").get<std::string>());
    if (!id || !fid || !pid || !kind) {
      return Status::Error(ErrorCode::kInvalidArgument, "bad task spec fields");
    }
    spec.task_id = *id;
    spec.kind = *kind;
    spec.function_id = *fid;
    spec.parent_task_id = *pid;
    spec.parent_counter = j.at("parent_counter").get<uint64_t>();
    spec.num_returns = j.at("num_returns").get<uint64_t>();
    if (j.contains("actor_id")) {
      spec.actor_id = UniqueId::FromHex(j["actor_id"].get<std::string>());
      if (!spec.actor_id) {
        return Status::Error(ErrorCode::kInvalidArgument, "bad actor_id");
      }
    }
    if (j.contains("actor_method_index")) {
      spec.actor_method_index = j["actor_method_index"].get<uint64_t>();
    }
    for (const json &a : j.at("args")) {
      if (a.contains("ref")) {
        const json &r = a["ref"];
        ObjectRef ref;
        auto oid = UniqueId::FromHex(r.at("object_id").get<std::string>());
        auto tid = UniqueId::FromHex(r.at("producing_task").get<std::string>());
        if (!oid || !tid) {
          return Status::Error(ErrorCode::kInvalidArgument, "bad arg ref");
        }
        ref.object_id = *oid;
        ref.producing_task = *tid;
        ref.output_index = r.at("output_index").get<uint64_t>();
        spec.args.push_back(TaskArg{ref});
      } else {
        auto bytes = FromHex(a.at("bytes").get<std::string>());
        if (!bytes) {
          return Status::Error(ErrorCode::kInvalidArgument, "bad inline arg");
        }
        spec.args.push_back(TaskArg{std::move(*bytes)});
      }
    }
    for (const auto &[name, amount] : j.at("resources").items()) {
      spec.resources[name] =
          Rational(amount.at(0).get<int64_t>(), amount.at(1).get<int64_t>());
    }
    return spec;
  } catch (const json::exception &e) {
    return Status::Error(ErrorCode::kInvalidArgument,
                         std::string("task spec parse: ") + e.what());
  }
}

}  // namespace miniray
