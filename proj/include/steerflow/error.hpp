/* Copyright 2026 The steerflow Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace steerflow {

// Every error raised by the library carries a stable code string; the
// steering protocol forwards it verbatim in Error messages.
class Error : public std::runtime_error {
public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

private:
  std::string code_;
};

#define STEERFLOW_ERROR_TYPE(Name)                                   \
  class Name : public Error {                                        \
  public:                                                            \
    explicit Name(const std::string& what) : Error(#Name, what) {}   \
  };

STEERFLOW_ERROR_TYPE(InvalidParams)
STEERFLOW_ERROR_TYPE(NumericalBlowup)
STEERFLOW_ERROR_TYPE(DegenerateGeometry)
STEERFLOW_ERROR_TYPE(InvalidGeometry)
STEERFLOW_ERROR_TYPE(UnknownId)
STEERFLOW_ERROR_TYPE(DeadlockDetected)
STEERFLOW_ERROR_TYPE(ZeroSpan)
STEERFLOW_ERROR_TYPE(MissingTile)
STEERFLOW_ERROR_TYPE(JobLimitExceeded)
STEERFLOW_ERROR_TYPE(NoInteractiveResult)
STEERFLOW_ERROR_TYPE(NoManikin)
STEERFLOW_ERROR_TYPE(ModelDiverged)
STEERFLOW_ERROR_TYPE(ProtocolError)
STEERFLOW_ERROR_TYPE(Unauthorized)
STEERFLOW_ERROR_TYPE(ViewOnly)
STEERFLOW_ERROR_TYPE(IoError)

#undef STEERFLOW_ERROR_TYPE

// Executor failure inside the scheduler; remembers which task failed.
class TaskFailed : public Error {
public:
  TaskFailed(int task, const std::string& what)
      : Error("TaskFailed", "task " + std::to_string(task) + ": " + what), task_(task) {}
  int task() const noexcept { return task_; }

private:
  int task_;
};

} // namespace steerflow
