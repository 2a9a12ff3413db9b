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

#include "common/value.h"
#include "graph/task_spec.h"

namespace miniray {

// Arguments under this size are inlined into the spec; larger values become
// store objects owned by the caller. Configurable per runtime.
inline constexpr uint64_t kDefaultInlineArgLimit = 100 * 1024;

// Ref values become ref args (resolved to values before the body runs);
// everything else is inlined or spilled via `spill` (returns the ref of the
// newly created object).
TaskArg MarshalArg(const Value &value, uint64_t inline_limit,
                   const std::function<ObjectRef(const Value &)> &spill);

// All dependencies of a spec: top-level ref args plus refs nested inside
// inlined values.
std::vector<ObjectRef> SpecDependencies(const TaskSpec &spec);

}  // namespace miniray
