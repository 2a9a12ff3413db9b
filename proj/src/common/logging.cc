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

#include "common/logging.h"

#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <mutex>

#include "common/clock.h"

namespace miniray {

namespace {
LogLevel g_level = LogLevel::kWarn;
std::string g_tag = "proc";
std::mutex g_mutex;

const char *LevelName(LogLevel level) {
  switch (level) {
    case LogLevel::kError: return "E";
    case LogLevel::kWarn: return "W";
    case LogLevel::kInfo: return "I";
    case LogLevel::kDebug: return "D";
  }
  return "?";
}
}  // namespace

void InitLogging(const std::string &process_tag) {
  g_tag = process_tag;
  const char *env = std::getenv("MINIRAY_LOG_LEVEL");
  if (env == nullptr) return;
  if (std::strcmp(env, "error") == 0) g_level = LogLevel::kError;
  else if (std::strcmp(env, "warn") == 0) g_level = LogLevel::kWarn;
  else if (std::strcmp(env, "info") == 0) g_level = LogLevel::kInfo;
  else if (std::strcmp(env, "debug") == 0) g_level = LogLevel::kDebug;
}

LogLevel CurrentLogLevel() { return g_level; }

void LogLine(LogLevel level, const std::string &msg) {
  std::lock_guard<std::mutex> lock(g_mutex);
  std::fprintf(stderr, "[%s %lld %s/%d] %s\n", LevelName(level),
               static_cast<long long>(WallMs()), g_tag.c_str(), getpid(),
               msg.c_str());
}

}  // namespace miniray
