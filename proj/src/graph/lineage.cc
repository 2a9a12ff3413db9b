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

#include "graph/lineage.h"

#include <algorithm>
#include <functional>
#include <map>

#include <json.hpp>

namespace miniray {

using nlohmann::json;

const char *EdgeKindName(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::kData: return "data";
    case EdgeKind::kControl: return "control";
    case EdgeKind::kStateful: return "stateful";
  }
  return "data";
}

std::string GraphEdge::ToJson() const {
  json j;
  j["kind"] = EdgeKindName(kind);
  j["src"] = src.Hex();
  j["dst"] = dst.Hex();
  return j.dump();
}

Result<GraphEdge> GraphEdge::FromJson(const std::string &text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    return Status::Error(ErrorCode::kInvalidArgument, "malformed edge");
  }
  GraphEdge e;
  std::string kind = j.value("kind", "");
  if (kind == "data") e.kind = EdgeKind::kData;
  else if (kind == "control") e.kind = EdgeKind::kControl;
  else if (kind == "stateful") e.kind = EdgeKind::kStateful;
  else return Status::Error(ErrorCode::kInvalidArgument, "bad edge kind");
  auto src = UniqueId::FromHex(j.value("src", ""));
  auto dst = UniqueId::FromHex(j.value("dst", ""));
  if (!src || !dst) {
    return Status::Error(ErrorCode::kInvalidArgument, "bad edge endpoint");
  }
  e.src = *src;
  e.dst = *dst;
  return e;
}

const TaskSpec *LineageGraph::FindTask(const UniqueId &task_id) const {
  auto it = tasks_.find(task_id);
  return it == tasks_.end() ? nullptr : &it->second;
}

const TaskSpec *LineageGraph::FindProducer(const UniqueId &object_id) const {
  auto it = producer_.find(object_id);
  return it == producer_.end() ? nullptr : FindTask(it->second);
}

std::vector<GraphEdge> LineageGraph::EdgesOfKind(EdgeKind kind) const {
  std::vector<GraphEdge> out;
  for (const GraphEdge &e : edges_) {
    if (e.kind == kind) out.push_back(e);
  }
  return out;
}

Status LineageGraph::AddTask(const TaskSpec &spec) {
  if (Status s = spec.Validate(); !s.ok()) return s;
  if (tasks_.contains(spec.task_id)) {
    return Status::Error(ErrorCode::kDuplicateTask, spec.task_id.Hex());
  }

  const UniqueId *stateful_pred = nullptr;
  if (spec.kind == TaskKind::kActorMethod) {
    if (!spec.actor_method_index.has_value()) {
      return Status::Error(ErrorCode::kBrokenActorChain,
                           "actor method without an assigned chain index");
    }
    uint64_t index = *spec.actor_method_index;
    auto &chain = actor_chains_[*spec.actor_id];
    if (index != chain.size()) {
      // A gap or a second task claiming an existing slot breaks the chain.
      return Status::Error(ErrorCode::kBrokenActorChain,
                           "method index " + std::to_string(index) +
                               " does not extend chain of length " +
                               std::to_string(chain.size()));
    }
    if (index > 0) stateful_pred = &chain[index - 1];
    chain.push_back(spec.task_id);
  }

  tasks_.emplace(spec.task_id, spec);
  for (const ObjectRef &ref : spec.RefArgs()) {
    edges_.insert({EdgeKind::kData, ref.object_id, spec.task_id});
  }
  for (uint64_t i = 0; i < spec.num_returns; i++) {
    UniqueId out = DeriveObjectId(spec.task_id, i);
    producer_[out] = spec.task_id;
    edges_.insert({EdgeKind::kData, spec.task_id, out});
  }
  if (tasks_.contains(spec.parent_task_id)) {
    edges_.insert({EdgeKind::kControl, spec.parent_task_id, spec.task_id});
  }
  if (stateful_pred != nullptr) {
    edges_.insert({EdgeKind::kStateful, *stateful_pred, spec.task_id});
  }
  if (spec.kind == TaskKind::kActorCreation) {
    creation_tasks_[*spec.actor_id] = spec.task_id;
  }
  return Status::Ok();
}

Result<std::vector<TaskSpec>> LineageGraph::LineageClosure(
    const std::unordered_set<UniqueId> &lost,
    const std::unordered_set<UniqueId> &available,
    const std::unordered_map<UniqueId, uint64_t> &actor_checkpoints) const {
  std::unordered_set<UniqueId> needed;
  Status error = Status::Ok();

  std::function<void(const UniqueId &)> need_task;
  std::function<void(const UniqueId &, bool)> need_object;

  need_object = [&](const UniqueId &object_id, bool must_regenerate) {
    if (!error.ok()) return;
    if (!must_regenerate && available.contains(object_id)) return;
    auto it = producer_.find(object_id);
    if (it == producer_.end()) {
      error = Status::Error(ErrorCode::kUnknownObject, object_id.Hex());
      return;
    }
    need_task(it->second);
  };

  need_task = [&](const UniqueId &task_id) {
    if (!error.ok() || needed.contains(task_id)) return;
    const TaskSpec *spec = FindTask(task_id);
    if (spec == nullptr) {
      error = Status::Error(ErrorCode::kUnknownObject,
                            "task missing from lineage: " + task_id.Hex());
      return;
    }
    needed.insert(task_id);
    for (const ObjectRef &ref : spec->RefArgs()) {
      need_object(ref.object_id, false);
    }
    if (spec->kind == TaskKind::kActorMethod) {
      // State flows through the chain: everything after the last checkpoint
      // (or the creation task) must re-run regardless of output availability.
      const UniqueId &actor = *spec->actor_id;
      uint64_t index = *spec->actor_method_index;
      auto cp = actor_checkpoints.find(actor);
      uint64_t start = cp == actor_checkpoints.end() ? 0 : cp->second + 1;
      auto chain_it = actor_chains_.find(actor);
      if (chain_it != actor_chains_.end()) {
        for (uint64_t j = start; j < index && j < chain_it->second.size(); j++) {
          need_task(chain_it->second[j]);
        }
      }
      if (cp == actor_checkpoints.end()) {
        auto created = creation_tasks_.find(actor);
        if (created != creation_tasks_.end()) need_task(created->second);
      }
    }
  };

  for (const UniqueId &object_id : lost) {
    need_object(object_id, true);
  }
  if (!error.ok()) return error;

  // Topological order over data + control + stateful edges restricted to the
  // needed set. An object edge pair task->obj->task collapses to task->task.
  std::map<UniqueId, std::vector<UniqueId>> successors;
  std::map<UniqueId, size_t> indegree;
  for (const UniqueId &t : needed) indegree[t] = 0;
  auto add_dep = [&](const UniqueId &before, const UniqueId &after) {
    if (!needed.contains(before) || !needed.contains(after) || before == after) {
      return;
    }
    successors[before].push_back(after);
    indegree[after]++;
  };
  for (const UniqueId &t : needed) {
    const TaskSpec &spec = tasks_.at(t);
    for (const ObjectRef &ref : spec.RefArgs()) {
      auto it = producer_.find(ref.object_id);
      if (it != producer_.end()) add_dep(it->second, t);
    }
    if (tasks_.contains(spec.parent_task_id)) add_dep(spec.parent_task_id, t);
  }
  for (const GraphEdge &e : edges_) {
    if (e.kind == EdgeKind::kStateful) add_dep(e.src, e.dst);
  }
  for (const auto &[actor, chain] : actor_chains_) {
    auto created = creation_tasks_.find(actor);
    if (created != creation_tasks_.end() && !chain.empty()) {
      add_dep(created->second, chain.front());
    }
  }

  // Kahn's algorithm with the smallest id first, so the order is stable.
  std::set<UniqueId> frontier;
  for (const auto &[t, deg] : indegree) {
    if (deg == 0) frontier.insert(t);
  }
  std::vector<TaskSpec> order;
  order.reserve(needed.size());
  while (!frontier.empty()) {
    UniqueId t = *frontier.begin();
    frontier.erase(frontier.begin());
    order.push_back(tasks_.at(t));
    auto it = successors.find(t);
    if (it == successors.end()) continue;
    for (const UniqueId &next : it->second) {
      if (--indegree[next] == 0) frontier.insert(next);
    }
  }
  if (order.size() != needed.size()) {
    return Status::Error(ErrorCode::kInternal, "cycle in lineage closure");
  }
  return order;
}

bool LineageGraph::IsAcyclic() const {
  // DFS over data + control edges; nodes are task and object ids.
  std::unordered_map<UniqueId, std::vector<UniqueId>> next;
  for (const GraphEdge &e : edges_) {
    if (e.kind == EdgeKind::kStateful) continue;
    next[e.src].push_back(e.dst);
  }
  enum class Mark { kNew, kOpen, kDone };
  std::unordered_map<UniqueId, Mark> marks;
  std::function<bool(const UniqueId &)> visit = [&](const UniqueId &n) {
    Mark &m = marks.try_emplace(n, Mark::kNew).first->second;
    if (m == Mark::kOpen) return false;
    if (m == Mark::kDone) return true;
    m = Mark::kOpen;
    auto it = next.find(n);
    if (it != next.end()) {
      for (const UniqueId &succ : it->second) {
        if (!visit(succ)) return false;
      }
    }
    marks[n] = Mark::kDone;
    return true;
  };
  for (const auto &[n, _] : next) {
    if (!visit(n)) return false;
  }
  return true;
}

}  // namespace miniray
