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

#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "common/status.h"
#include "graph/task_spec.h"

namespace miniray {

enum class EdgeKind { kData, kControl, kStateful };

const char *EdgeKindName(EdgeKind kind);

// data edges connect task<->object, control edges parent task -> child task,
// stateful edges consecutive methods on one actor.
struct GraphEdge {
  EdgeKind kind = EdgeKind::kData;
  UniqueId src;
  UniqueId dst;

  auto operator<=>(const GraphEdge &) const = default;

  std::string ToJson() const;
  static Result<GraphEdge> FromJson(const std::string &json);
};

// The executed-task graph: specs plus the three edge kinds, derived
// incrementally as tasks are added. Pure data; no I/O.
class LineageGraph {
 public:
  // pre: spec.task_id not present; for actor methods, the predecessor with
  // index-1 exists or index == 0.
  Status AddTask(const TaskSpec &spec);

  bool HasTask(const UniqueId &task_id) const { return tasks_.contains(task_id); }
  const TaskSpec *FindTask(const UniqueId &task_id) const;
  const TaskSpec *FindProducer(const UniqueId &object_id) const;
  size_t TaskCount() const { return tasks_.size(); }

  const std::set<GraphEdge> &edges() const { return edges_; }
  std::vector<GraphEdge> EdgesOfKind(EdgeKind kind) const;

  // Minimal set of tasks, topologically ordered, whose re-execution
  // regenerates every lost object given the available ones. Lost
  // actor-method outputs bring in the contiguous stateful chain back to the
  // checkpointed index (checkpoint_index.at(actor) covered; absent means
  // replay from creation).
  Result<std::vector<TaskSpec>> LineageClosure(
      const std::unordered_set<UniqueId> &lost,
      const std::unordered_set<UniqueId> &available,
      const std::unordered_map<UniqueId, uint64_t> &actor_checkpoints = {}) const;

  // True while data+control edges stay acyclic; add_task preserves this.
  bool IsAcyclic() const;

 private:
  std::unordered_map<UniqueId, TaskSpec> tasks_;
  std::unordered_map<UniqueId, UniqueId> producer_;  // object -> task
  // actor -> method task ids ordered by actor_method_index.
  std::unordered_map<UniqueId, std::vector<UniqueId>> actor_chains_;
  std::unordered_map<UniqueId, UniqueId> creation_tasks_;  // actor -> task
  std::set<GraphEdge> edges_;
};

}  // namespace miniray
