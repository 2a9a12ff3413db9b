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
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "common/bytes.h"
#include "common/id.h"
#include "common/status.h"

namespace miniray {

struct ObjectRef {
  UniqueId object_id;
  UniqueId producing_task;
  uint64_t output_index = 0;

  static ObjectRef ForTaskOutput(const UniqueId &task_id, uint64_t index) {
    return ObjectRef{DeriveObjectId(task_id, index), task_id, index};
  }
  bool operator==(const ObjectRef &) const = default;
};

struct ActorHandleData {
  UniqueId actor_id;
  UniqueId creation_task;
  bool operator==(const ActorHandleData &) const = default;
};

// The closed value universe passed between tasks: integers, floats, byte
// strings, text strings, lists, string-keyed maps, object refs, and actor
// handles. Errors travel as values too, so a failed task's outputs carry the
// failure to whoever calls get.
class Value {
 public:
  struct Error {
    ErrorCode code = ErrorCode::kTaskExecutionError;
    std::string message;
    bool operator==(const Error &) const = default;
  };

  using List = std::vector<Value>;
  using Map = std::map<std::string, Value>;

  Value() : v_(Unit{}) {}
  static Value Int(int64_t v) { return Value(Repr(v)); }
  static Value Float(double v) { return Value(Repr(v)); }
  static Value Blob(Bytes v) { return Value(Repr(std::move(v))); }
  static Value Str(std::string v) { return Value(Repr(std::move(v))); }
  static Value FromList(List v) { return Value(Repr(std::move(v))); }
  static Value FromMap(Map v) { return Value(Repr(std::move(v))); }
  static Value Ref(ObjectRef v) { return Value(Repr(v)); }
  static Value Actor(ActorHandleData v) { return Value(Repr(v)); }
  static Value MakeError(ErrorCode code, std::string message) {
    return Value(Repr(Error{code, std::move(message)}));
  }

  bool IsUnit() const { return std::holds_alternative<Unit>(v_); }
  bool IsInt() const { return std::holds_alternative<int64_t>(v_); }
  bool IsFloat() const { return std::holds_alternative<double>(v_); }
  bool IsBlob() const { return std::holds_alternative<Bytes>(v_); }
  bool IsStr() const { return std::holds_alternative<std::string>(v_); }
  bool IsList() const { return std::holds_alternative<List>(v_); }
  bool IsMap() const { return std::holds_alternative<Map>(v_); }
  bool IsRef() const { return std::holds_alternative<ObjectRef>(v_); }
  bool IsActor() const { return std::holds_alternative<ActorHandleData>(v_); }
  bool IsError() const { return std::holds_alternative<Error>(v_); }

  int64_t AsInt() const { return std::get<int64_t>(v_); }
  double AsFloat() const { return std::get<double>(v_); }
  const Bytes &AsBlob() const { return std::get<Bytes>(v_); }
  const std::string &AsStr() const { return std::get<std::string>(v_); }
  const List &AsList() const { return std::get<List>(v_); }
  const Map &AsMap() const { return std::get<Map>(v_); }
  const ObjectRef &AsRef() const { return std::get<ObjectRef>(v_); }
  const ActorHandleData &AsActor() const { return std::get<ActorHandleData>(v_); }
  const Error &AsError() const { return std::get<Error>(v_); }

  // Canonical binary form: equal values encode to identical bytes.
  Bytes Encode() const;
  static Result<Value> Decode(std::span<const uint8_t> data);

  // Refs reachable anywhere inside this value (including inside lists/maps).
  void CollectRefs(std::vector<ObjectRef> &out) const;

  std::string ToString() const;  // debug rendering

  bool operator==(const Value &) const = default;

 private:
  struct Unit {
    bool operator==(const Unit &) const = default;
  };
  using Repr = std::variant<Unit, int64_t, double, Bytes, std::string, List, Map,
                            ObjectRef, ActorHandleData, Error>;
  explicit Value(Repr v) : v_(std::move(v)) {}

  Repr v_;
};

}  // namespace miniray
