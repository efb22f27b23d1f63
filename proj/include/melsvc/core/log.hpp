// Copyright 2026 The melsvc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <functional>
#include <vector>
#include <iostream>
#include <mutex>
#include <string>

namespace melsvc::log {

enum class Level { info, warning };

using Sink = std::function<void(Level, const std::string&)>;

namespace detail {
inline std::mutex& mutex() {
  static std::mutex m;
  return m;
}
inline Sink& sink() {
  static Sink s = [](Level level, const std::string& msg) {
    std::cerr << (level == Level::warning ? "[warn] " : "[info] ") << msg << '\n';
  };
  return s;
}
inline bool& quiet_info() {
  static bool q = false;
  return q;
}
}  // namespace detail

/// Replaces the process-wide sink and returns the previous one.
inline Sink set_sink(Sink s) {
  std::lock_guard lock(detail::mutex());
  std::swap(detail::sink(), s);
  return s;
}

inline void set_quiet(bool quiet) { detail::quiet_info() = quiet; }

inline void warn(const std::string& msg) {
  std::lock_guard lock(detail::mutex());
  detail::sink()(Level::warning, msg);
}

inline void info(const std::string& msg) {
  std::lock_guard lock(detail::mutex());
  if (!detail::quiet_info()) detail::sink()(Level::info, msg);
}

/// Captures warnings for the lifetime of the object (tests use this).
class ScopedCapture {
 public:
  ScopedCapture() {
    previous_ = set_sink([this](Level level, const std::string& msg) {
      if (level == Level::warning) warnings.push_back(msg);
    });
  }
  ~ScopedCapture() { set_sink(std::move(previous_)); }
  ScopedCapture(const ScopedCapture&) = delete;
  ScopedCapture& operator=(const ScopedCapture&) = delete;

  std::vector<std::string> warnings;

 private:
  Sink previous_;
};

}  // namespace melsvc::log
