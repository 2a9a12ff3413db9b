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

#include "common/status.h"

#include <unordered_map>

namespace miniray {

namespace {
constexpr std::pair<ErrorCode, const char *> kNames[] = {
    {ErrorCode::kOk, "OK"},
    {ErrorCode::kTimeout, "Timeout"},
    {ErrorCode::kDuplicateTask, "DuplicateTask"},
    {ErrorCode::kBrokenActorChain, "BrokenActorChain"},
    {ErrorCode::kUnknownObject, "UnknownObject"},
    {ErrorCode::kDuplicateName, "DuplicateName"},
    {ErrorCode::kUnknownFunction, "UnknownFunction"},
    {ErrorCode::kDigestMismatch, "DigestMismatch"},
    {ErrorCode::kCapacityExceeded, "CapacityExceeded"},
    {ErrorCode::kCannotFree, "CannotFree"},
    {ErrorCode::kSourceVanished, "SourceVanished"},
    {ErrorCode::kInfeasible, "Infeasible"},
    {ErrorCode::kTaskExecutionError, "TaskExecutionError"},
    {ErrorCode::kReconstructionFailed, "ReconstructionFailed"},
    {ErrorCode::kActorDead, "ActorDead"},
    {ErrorCode::kWorkerDied, "WorkerDied"},
    {ErrorCode::kStaleReport, "StaleReport"},
    {ErrorCode::kNoStandbyAvailable, "NoStandbyAvailable"},
    {ErrorCode::kDiskFull, "DiskFull"},
    {ErrorCode::kLengthMismatch, "LengthMismatch"},
    {ErrorCode::kCheckpointSerializationError, "CheckpointSerializationError"},
    {ErrorCode::kVersionConflict, "VersionConflict"},
    {ErrorCode::kPortInUse, "PortInUse"},
    {ErrorCode::kSpawnFailure, "SpawnFailure"},
    {ErrorCode::kUnknownTarget, "UnknownTarget"},
    {ErrorCode::kBenchFailed, "BenchFailed"},
    {ErrorCode::kInvalidArgument, "InvalidArgument"},
    {ErrorCode::kIoError, "IoError"},
    {ErrorCode::kNotLeader, "NotLeader"},
    {ErrorCode::kInternal, "Internal"},
};
}  // namespace

const char *ErrorCodeName(ErrorCode code) {
  for (const auto &[c, name] : kNames) {
    if (c == code) return name;
  }
  return "Internal";
}

ErrorCode ErrorCodeFromName(const std::string &name) {
  for (const auto &[c, n] : kNames) {
    if (name == n) return c;
  }
  return ErrorCode::kInternal;
}

}  // namespace miniray
