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

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "common/rational.h"
#include "common/value.h"

namespace miniray {

class RuntimeApi;

// Function bodies are compiled into every process image; the GCS function
// table carries the descriptors so ids resolve cluster-wide.
struct FunctionDef {
  std::string name;
  UniqueId function_id;
  uint64_t num_returns = 1;
  ResourceMap default_resources;
  std::function<Result<std::vector<Value>>(std::vector<Value>, RuntimeApi &)>
      body;
};

struct ActorState {
  virtual ~ActorState() = default;
};

struct ActorMethodDef {
  std::string name;
  UniqueId function_id;
  uint64_t num_returns = 1;
  std::function<Result<std::vector<Value>>(ActorState &, std::vector<Value>,
                                           RuntimeApi &)>
      body;
};

struct ActorClassDef {
  std::string name;
  UniqueId class_id;  // doubles as the creation task's function id
  ResourceMap default_resources;
  uint64_t auto_checkpoint_every = 0;
  std::function<Result<std::unique_ptr<ActorState>>(std::vector<Value>,
                                                    RuntimeApi &)>
      constructor;
  std::map<std::string, ActorMethodDef> methods;
  std::function<Result<Value>(const ActorState &)> save;
  std::function<Result<std::unique_ptr<ActorState>>(const Value &)> restore;
};

// GCS function-table record.
struct FunctionTableEntry {
  UniqueId function_id;
  std::string name;
  uint64_t num_returns = 1;
  ResourceMap default_resources;

  std::string ToJson() const;
  static Result<FunctionTableEntry> FromJson(const std::string &text);
};

class Registry {
 public:
  static Registry &Instance();

  void RegisterFunction(FunctionDef def);
  void RegisterActorClass(ActorClassDef def);

  const FunctionDef *FindFunction(const UniqueId &function_id) const;
  const FunctionDef *FindFunctionByName(const std::string &name) const;
  const ActorClassDef *FindClass(const UniqueId &class_id) const;
  const ActorClassDef *FindClassByName(const std::string &name) const;
  const ActorMethodDef *FindMethod(const UniqueId &function_id) const;
  const ActorClassDef *ClassOfMethod(const UniqueId &function_id) const;

  std::vector<const FunctionDef *> AllFunctions() const;
  std::vector<const ActorClassDef *> AllClasses() const;

 private:
  std::map<UniqueId, FunctionDef> functions_;
  std::map<UniqueId, ActorClassDef> classes_;
  std::map<UniqueId, std::pair<UniqueId, std::string>> method_index_;
  std::map<std::string, UniqueId> function_names_;
  std::map<std::string, UniqueId> class_names_;
};

UniqueId MethodFunctionId(const std::string &class_name,
                          const std::string &method_name);

// Built-in function names.
inline constexpr const char *kPutFunctionName = "__builtin.put";
inline constexpr const char *kPutOpaqueFunctionName = "__builtin.put_opaque";
inline constexpr const char *kCheckpointMethodName = "__checkpoint__";
inline constexpr const char *kDriverFunctionName = "__builtin.driver";

void RegisterBuiltins();

}  // namespace miniray
