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

#include "runtime/marshal.h"

namespace miniray {

TaskArg MarshalArg(const Value &value, uint64_t inline_limit,
                   const std::function<ObjectRef(const Value &)> &spill) {
  if (value.IsRef()) return TaskArg{value.AsRef()};
  Bytes encoded = value.Encode();
  if (encoded.size() <= inline_limit) return TaskArg{std::move(encoded)};
  return TaskArg{spill(value)};
}

std::vector<ObjectRef> SpecDependencies(const TaskSpec &spec) {
  std::vector<ObjectRef> deps;
  for (const TaskArg &arg : spec.args) {
    if (arg.IsRef()) {
      deps.push_back(arg.AsRef());
      continue;
    }
    auto value = Value::Decode(arg.AsInline());
    if (value.ok()) value.value().CollectRefs(deps);
  }
  return deps;
}

}  // namespace miniray
