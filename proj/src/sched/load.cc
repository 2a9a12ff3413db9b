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

#include "sched/load.h"

#include <json.hpp>

namespace miniray {

using nlohmann::json;

namespace {
json ResourcesToJson(const ResourceMap &resources) {
  json out = json::object();
  for (const auto &[name, amount] : resources) {
    out[name] = json::array({amount.num(), amount.den()});
  }
  return out;
}

Result<ResourceMap> ResourcesFromJson(const json &j) {
  ResourceMap out;
  if (!j.is_object()) {
    return Status::Error(ErrorCode::kInvalidArgument, "resources");
  }
  for (const auto &[name, amount] : j.items()) {
    out[name] = Rational(amount.at(0).get<int64_t>(),
                         amount.at(1).get<int64_t>());
  }
  return out;
}
}  // namespace

std::string NodeRecord::ToJson() const {
  json j;
  j["record"] = "node";
  j["node_id"] = node_id.Hex();
  j["name"] = name;
  j["host"] = host;
  j["sched_port"] = sched_port;
  j["store_port"] = store_port;
  j["alive"] = alive;
  j["seq"] = seq;
  j["queue_len"] = queue_len;
  j["resources_total"] = ResourcesToJson(resources_total);
  j["resources_available"] = ResourcesToJson(resources_available);
  json samples = json::array();
  for (const ExecSample &s : exec_samples) {
    samples.push_back(json{{"fn", s.function_id.Hex()}, {"ms", s.exec_ms}});
  }
  j["exec_samples"] = std::move(samples);
  j["bandwidth_samples"] = bandwidth_samples;
  return j.dump();
}

Result<NodeRecord> NodeRecord::FromJson(const std::string &text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || j.value("record", "") != "node") {
    return Status::Error(ErrorCode::kInvalidArgument, "not a node record");
  }
  try {
    NodeRecord rec;
    auto id = UniqueId::FromHex(j.value("node_id", ""));
    if (!id) return Status::Error(ErrorCode::kInvalidArgument, "node_id");
    rec.node_id = *id;
    rec.name = j.value("name", "");
    rec.host = j.value("host", "127.0.0.1");
    rec.sched_port = static_cast<uint16_t>(j.value("sched_port", 0));
    rec.store_port = static_cast<uint16_t>(j.value("store_port", 0));
    rec.alive = j.value("alive", true);
    rec.seq = j.value("seq", 0ull);
    rec.queue_len = j.value("queue_len", 0ull);
    auto total = ResourcesFromJson(j.value("resources_total", json::object()));
    auto avail =
        ResourcesFromJson(j.value("resources_available", json::object()));
    if (!total.ok() || !avail.ok()) {
      return Status::Error(ErrorCode::kInvalidArgument, "resources");
    }
    rec.resources_total = total.take();
    rec.resources_available = avail.take();
    for (const json &s : j.value("exec_samples", json::array())) {
      auto fn = UniqueId::FromHex(s.value("fn", ""));
      if (!fn) continue;
      rec.exec_samples.push_back(ExecSample{*fn, s.value("ms", 0.0)});
    }
    for (const json &b : j.value("bandwidth_samples", json::array())) {
      rec.bandwidth_samples.push_back(b.get<double>());
    }
    return rec;
  } catch (const json::exception &e) {
    return Status::Error(ErrorCode::kInvalidArgument, e.what());
  }
}

std::string ComponentRecord::ToJson() const {
  json j;
  j["record"] = "component";
  j["component_id"] = component_id.Hex();
  j["name"] = name;
  j["kind"] = kind;
  j["host"] = host;
  j["port"] = port;
  j["alive"] = alive;
  return j.dump();
}

Result<ComponentRecord> ComponentRecord::FromJson(const std::string &text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || j.value("record", "") != "component") {
    return Status::Error(ErrorCode::kInvalidArgument, "not a component record");
  }
  ComponentRecord rec;
  auto id = UniqueId::FromHex(j.value("component_id", ""));
  if (!id) return Status::Error(ErrorCode::kInvalidArgument, "component_id");
  rec.component_id = *id;
  rec.name = j.value("name", "");
  rec.kind = j.value("kind", "");
  rec.host = j.value("host", "127.0.0.1");
  rec.port = static_cast<uint16_t>(j.value("port", 0));
  rec.alive = j.value("alive", true);
  return rec;
}

double FoldExponential(double current, double sample, double alpha) {
  return alpha * sample + (1.0 - alpha) * current;
}

Status EstimateStore::ApplyReport(const NodeRecord &report) {
  auto [it, inserted] = estimates_.try_emplace(report.node_id);
  NodeLoadEstimate &est = it->second;
  if (inserted) {
    est.node_id = report.node_id;
    est.node_exec_ms = config_.default_task_exec_ms;
    est.bandwidth = config_.default_bandwidth_bytes_per_s;
  } else if (report.seq <= est.last_seq) {
    return Status::Error(ErrorCode::kStaleReport,
                         "seq " + std::to_string(report.seq));
  }
  est.last_seq = report.seq;
  est.queue_len = report.queue_len;
  est.resources_total = report.resources_total;
  est.resources_available = report.resources_available;
  for (const ExecSample &s : report.exec_samples) {
    est.node_exec_ms =
        FoldExponential(est.node_exec_ms, s.exec_ms, config_.averaging_alpha);
    auto fit = est.per_function_exec_ms
                   .try_emplace(s.function_id, config_.default_task_exec_ms)
                   .first;
    fit->second =
        FoldExponential(fit->second, s.exec_ms, config_.averaging_alpha);
  }
  for (double b : report.bandwidth_samples) {
    est.bandwidth = FoldExponential(est.bandwidth, b, config_.averaging_alpha);
  }
  return Status::Ok();
}

void EstimateStore::BumpQueue(const UniqueId &node_id) {
  auto it = estimates_.find(node_id);
  if (it != estimates_.end()) it->second.queue_len++;
}

const NodeLoadEstimate *EstimateStore::Find(const UniqueId &node_id) const {
  auto it = estimates_.find(node_id);
  return it == estimates_.end() ? nullptr : &it->second;
}

std::vector<const NodeLoadEstimate *> EstimateStore::All() const {
  std::vector<const NodeLoadEstimate *> out;
  out.reserve(estimates_.size());
  for (const auto &[id, est] : estimates_) out.push_back(&est);
  return out;
}

double EstimatedWaitMs(const NodeLoadEstimate &est, const UniqueId &function_id,
                       uint64_t remote_input_bytes) {
  double queue_ms =
      static_cast<double>(est.queue_len) * est.ExecEstimate(function_id);
  double transfer_ms =
      est.bandwidth <= 0
          ? 0
          : static_cast<double>(remote_input_bytes) / est.bandwidth * 1000.0;
  return queue_ms + transfer_ms;
}

Result<UniqueId> ChooseNode(
    const std::vector<const NodeLoadEstimate *> &estimates,
    const ResourceMap &demand, const UniqueId &function_id,
    const std::unordered_map<UniqueId, uint64_t> &remote_bytes) {
  const NodeLoadEstimate *best = nullptr;
  double best_w = 0;
  for (const NodeLoadEstimate *est : estimates) {
    if (!ResourcesSatisfy(est->resources_total, demand)) continue;
    uint64_t bytes = 0;
    auto it = remote_bytes.find(est->node_id);
    if (it != remote_bytes.end()) bytes = it->second;
    double w = EstimatedWaitMs(*est, function_id, bytes);
    if (best == nullptr || w < best_w ||
        (w == best_w && est->node_id < best->node_id)) {
      best = est;
      best_w = w;
    }
  }
  if (best == nullptr) {
    return Status::Error(ErrorCode::kInfeasible,
                         "no node satisfies the resource demand");
  }
  return best->node_id;
}

}  // namespace miniray
