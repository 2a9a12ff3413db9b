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

#include <sstream>
#include <string>

namespace miniray {

enum class LogLevel { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

// Level comes from MINIRAY_LOG_LEVEL in {error, warn, info, debug};
// default warn. The process tag shows up in every line so interleaved
// multi-process output stays readable.
void InitLogging(const std::string &process_tag);
LogLevel CurrentLogLevel();
void LogLine(LogLevel level, const std::string &msg);

class LogMessage {
 public:
  explicit LogMessage(LogLevel level) : level_(level) {}
  ~LogMessage() { LogLine(level_, stream_.str()); }
  std::ostringstream &stream() { return stream_; }

 private:
  LogLevel level_;
  std::ostringstream stream_;
};

}  // namespace miniray

#define MRLOG(level)                                      \
  if (::miniray::LogLevel::level <= ::miniray::CurrentLogLevel()) \
  ::miniray::LogMessage(::miniray::LogLevel::level).stream()

#define MRLOG_ERROR MRLOG(kError)
#define MRLOG_WARN MRLOG(kWarn)
#define MRLOG_INFO MRLOG(kInfo)
#define MRLOG_DEBUG MRLOG(kDebug)
