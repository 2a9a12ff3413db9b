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

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "common/id.h"
#include "common/rational.h"
#include "common/status.h"
#include "graph/task_spec.h"

namespace miniray {

struct SchedulerConfig {
  uint64_t forward_threshold = 4;  // theta
  int64_t heartbeat_ms = 100;
  double averaging_alpha = 0.1;
  double default_task_exec_ms = 10.0;
  double default_bandwidth_bytes_per_s = 1e9;
  // Placement ablation for the locality benchmark: "locality" | "random".
  std::string placement_mode = "locality";
  // A demanded object whose producer sits in state submitted longer than
  // this is treated as possibly stranded and resubmitted (duplicates are
  // benign: dispatch is CAS-guarded).
  int64_t stuck_ms = 2000;
};

struct ExecSample {
  UniqueId function_id;
  double exec_ms = 0;
};

// The client-table record a node publishes every heartbeat: static addresses
// plus dynamic load and the samples since the last beat.
struct NodeRecord {
  UniqueId node_id;
  std::string name;
  std::string host = "127.0.0.1";
  uint16_t sched_port = 0;
  uint16_t store_port = 0;
  bool alive = true;
  uint64_t seq = 0;  // heartbeat sequence, monotone per node
  uint64_t queue_len = 0;
  ResourceMap resources_total;
  ResourceMap resources_available;
  std::vector<ExecSample> exec_samples;
  std::vector<double> bandwidth_samples;  // bytes/s observed on pulls

  std::string ToJson() const;
  static Result<NodeRecord> FromJson(const std::string &text);
};

// Client-table record for non-node components (global schedulers, gcs
// replicas, workers are not registered).
struct ComponentRecord {
  UniqueId component_id;
  std::string name;
  std::string kind;  // "global_sched" | "gcs" | "supervisor"
  std::string host = "127.0.0.1";
  uint16_t port = 0;
  bool alive = true;

  std::string ToJson() const;
  static Result<ComponentRecord> FromJson(const std::string &text);
};

// Per-node load estimate maintained by a global scheduler. t-bar is tracked
// per (node, function) with the node-wide average as fallback.
struct NodeLoadEstimate {
  UniqueId node_id;
  uint64_t queue_len = 0;
  double node_exec_ms = 0;
  double bandwidth = 0;
  std::unordered_map<UniqueId, double> per_function_exec_ms;
  ResourceMap resources_total;
  ResourceMap resources_available;
  uint64_t last_seq = 0;

  double ExecEstimate(const UniqueId &function_id) const {
    auto it = per_function_exec_ms.find(function_id);
    return it == per_function_exec_ms.end() ? node_exec_ms : it->second;
  }
};

// t-new = alpha * sample + (1 - alpha) * t-old, folded per sample in order.
double FoldExponential(double current, double sample, double alpha);

class EstimateStore {
 public:
  explicit EstimateStore(SchedulerConfig config) : config_(std::move(config)) {}

  // Folds one heartbeat report; StaleReport when seq is not newer.
  Status ApplyReport(const NodeRecord &report);
  void Remove(const UniqueId &node_id) { estimates_.erase(node_id); }
  // Optimistic queue bump for our own placement, overwritten by the next
  // heartbeat.
  void BumpQueue(const UniqueId &node_id);

  const NodeLoadEstimate *Find(const UniqueId &node_id) const;
  std::vector<const NodeLoadEstimate *> All() const;
  size_t size() const { return estimates_.size(); }

 private:
  SchedulerConfig config_;
  std::unordered_map<UniqueId, NodeLoadEstimate> estimates_;
};

// W(n) = q(n) * t-bar(n) + S_remote(n) / B(n), milliseconds.
double EstimatedWaitMs(const NodeLoadEstimate &est, const UniqueId &function_id,
                       uint64_t remote_input_bytes);

// argmin W over resource-feasible nodes; ties break to the lowest node id.
// remote_bytes maps node -> S_remote(n); missing entries mean 0.
Result<UniqueId> ChooseNode(
    const std::vector<const NodeLoadEstimate *> &estimates,
    const ResourceMap &demand, const UniqueId &function_id,
    const std::unordered_map<UniqueId, uint64_t> &remote_bytes);

}  // namespace miniray
