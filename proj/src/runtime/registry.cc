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

#include "runtime/registry.h"

#include <json.hpp>

namespace miniray {

using nlohmann::json;

std::string FunctionTableEntry::ToJson() const {
  json j;
  j["function_id"] = function_id.Hex();
  j["name"] = name;
  j["num_returns"] = num_returns;
  json res = json::object();
  for (const auto &[k, v] : default_resources) {
    res[k] = json::array({v.num(), v.den()});
  }
  j["resources"] = std::move(res);
  return j.dump();
}

Result<FunctionTableEntry> FunctionTableEntry::FromJson(const std::string &text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    return Status::Error(ErrorCode::kInvalidArgument, "malformed function entry");
  }
  FunctionTableEntry entry;
  auto id = UniqueId::FromHex(j.value("function_id", ""));
  if (!id) return Status::Error(ErrorCode::kInvalidArgument, "function_id");
  entry.function_id = *id;
  entry.name = j.value("name", "");
  entry.num_returns = j.value("num_returns", 1ull);
  for (const auto &[k, v] : j.value("resources", json::object()).items()) {
    entry.default_resources[k] =
        Rational(v.at(0).get<int64_t>(), v.at(1).get<int64_t>());
  }
  return entry;
}

Registry &Registry::Instance() {
  static Registry *registry = new Registry();
  return *registry;
}

UniqueId MethodFunctionId(const std::string &class_name,
                          const std::string &method_name) {
  return DeriveFunctionId(class_name + "." + method_name);
}

void Registry::RegisterFunction(FunctionDef def) {
  def.function_id = DeriveFunctionId(def.name);
  function_names_[def.name] = def.function_id;
  functions_[def.function_id] = std::move(def);
}

void Registry::RegisterActorClass(ActorClassDef def) {
  def.class_id = DeriveFunctionId(def.name);
  for (auto &[mname, method] : def.methods) {
    method.function_id = MethodFunctionId(def.name, mname);
    method_index_[method.function_id] = {def.class_id, mname};
  }
  // The implicit checkpoint method occupies a chain slot like any other.
  if (!def.methods.contains(kCheckpointMethodName)) {
    ActorMethodDef cp;
    cp.name = kCheckpointMethodName;
    cp.function_id = MethodFunctionId(def.name, kCheckpointMethodName);
    cp.num_returns = 1;
    cp.body = nullptr;  // handled specially by the worker
    method_index_[cp.function_id] = {def.class_id, cp.name};
    def.methods[kCheckpointMethodName] = std::move(cp);
  }
  class_names_[def.name] = def.class_id;
  classes_[def.class_id] = std::move(def);
}

const FunctionDef *Registry::FindFunction(const UniqueId &function_id) const {
  auto it = functions_.find(function_id);
  return it == functions_.end() ? nullptr : &it->second;
}

const FunctionDef *Registry::FindFunctionByName(const std::string &name) const {
  auto it = function_names_.find(name);
  return it == function_names_.end() ? nullptr : FindFunction(it->second);
}

const ActorClassDef *Registry::FindClass(const UniqueId &class_id) const {
  auto it = classes_.find(class_id);
  return it == classes_.end() ? nullptr : &it->second;
}

const ActorClassDef *Registry::FindClassByName(const std::string &name) const {
  auto it = class_names_.find(name);
  return it == class_names_.end() ? nullptr : FindClass(it->second);
}

const ActorMethodDef *Registry::FindMethod(const UniqueId &function_id) const {
  auto it = method_index_.find(function_id);
  if (it == method_index_.end()) return nullptr;
  const ActorClassDef *cls = FindClass(it->second.first);
  if (cls == nullptr) return nullptr;
  auto mit = cls->methods.find(it->second.second);
  return mit == cls->methods.end() ? nullptr : &mit->second;
}

const ActorClassDef *Registry::ClassOfMethod(const UniqueId &function_id) const {
  auto it = method_index_.find(function_id);
  return it == method_index_.end() ? nullptr : FindClass(it->second.first);
}

std::vector<const FunctionDef *> Registry::AllFunctions() const {
  std::vector<const FunctionDef *> out;
  for (const auto &[id, def] : functions_) out.push_back(&def);
  return out;
}

std::vector<const ActorClassDef *> Registry::AllClasses() const {
  std::vector<const ActorClassDef *> out;
  for (const auto &[id, def] : classes_) out.push_back(&def);
  return out;
}

void RegisterBuiltins() {
  Registry &reg = Registry::Instance();
  if (reg.FindFunctionByName(kPutFunctionName) != nullptr) return;
  FunctionDef put;
  put.name = kPutFunctionName;
  put.num_returns = 1;
  put.body = [](std::vector<Value> args, RuntimeApi &) -> Result<std::vector<Value>> {
    if (args.size() != 1) {
      return Status::Error(ErrorCode::kInvalidArgument, "put arity");
    }
    return std::vector<Value>{std::move(args[0])};
  };
  reg.RegisterFunction(std::move(put));

  FunctionDef opaque;
  opaque.name = kPutOpaqueFunctionName;
  opaque.num_returns = 1;
  opaque.body = [](std::vector<Value>, RuntimeApi &) -> Result<std::vector<Value>> {
    // A put() above the inline threshold has no lineage to replay.
    return Status::Error(ErrorCode::kReconstructionFailed,
                         "oversized put objects cannot be reconstructed");
  };
  reg.RegisterFunction(std::move(opaque));
}

}  // namespace miniray
