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

#include <stdexcept>
#include <string>

namespace melsvc {

/// Broad failure classes. The CLI maps these onto process exit codes.
enum class ErrorKind {
  config,  // bad or unknown configuration
  data,    // unreadable input, shape/alignment problems, inconsistent manifests
  stage,   // a pipeline stage failed (training, conversion, synthesis)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& what)
      : std::runtime_error(what), kind_(kind), code_(std::move(code)) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// Short machine-readable tag, e.g. "short-input" or "alignment".
  const std::string& code() const noexcept { return code_; }

 private:
  ErrorKind kind_;
  std::string code_;
};

inline Error data_error(std::string code, const std::string& what) {
  return Error(ErrorKind::data, std::move(code), what);
}
inline Error config_error(std::string code, const std::string& what) {
  return Error(ErrorKind::config, std::move(code), what);
}
inline Error stage_error(std::string code, const std::string& what) {
  return Error(ErrorKind::stage, std::move(code), what);
}

/// Raised by end-to-end pipelines; names the stage that failed.
class StageFailure : public Error {
 public:
  StageFailure(std::string stage, const std::string& what)
      : Error(ErrorKind::stage, "stage-failure", stage + ": " + what),
        stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace melsvc
