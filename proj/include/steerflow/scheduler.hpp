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

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "steerflow/partition.hpp"

namespace steerflow::scheduler {

struct RoleConfig {
  int n_traders = 1;
  int n_slaves = 1;
  // An idle slave steals from another trader only if that trader's pending
  // work exceeds steal_threshold x the mean task work of the graph.
  double steal_threshold = 0.0;

  // ceil(n_slaves / 4) traders.
  static RoleConfig for_slaves(int n_slaves);
  void validate() const; // throws InvalidParams
  int home_trader(int slave) const noexcept { return slave % n_traders; }
};

enum class TaskState : std::uint8_t { Pending, Advertised, Claimed, Done };

struct TaskNode {
  int id = 0;
  double work = 1.0; // relative cost estimate, used for balancing and stealing
  std::string label;
};

// Task ids are dense: 0 .. size()-1 in insertion order.
class TaskGraph {
public:
  TaskGraph() = default;
  explicit TaskGraph(const std::vector<partition::TaskSpec>& tasks);

  int add_task(double work = 1.0, std::string label = {});
  // `task` may only start after `prerequisite` completed.
  void add_dependency(int task, int prerequisite);

  int size() const noexcept { return static_cast<int>(nodes_.size()); }
  const TaskNode& task(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const std::vector<int>& prerequisites(int id) const { return prereqs_.at(static_cast<std::size_t>(id)); }
  const std::vector<int>& dependents(int id) const { return dependents_.at(static_cast<std::size_t>(id)); }
  double mean_work() const noexcept;

  // Kahn order; throws DeadlockDetected when the dependencies contain a cycle.
  std::vector<int> topological_order() const;

private:
  std::vector<TaskNode> nodes_;
  std::vector<std::vector<int>> prereqs_;
  std::vector<std::vector<int>> dependents_;
};

struct TraceInterval {
  int slave = 0;
  int trader = 0;
  int task = 0;
  std::int64_t claim_ns = 0;    // relative to the start of the run
  std::int64_t complete_ns = 0;
  bool stolen = false;
};

struct TaskTrace {
  int n_slaves = 0;
  std::int64_t span_ns = 0;
  std::vector<TraceInterval> intervals; // completion order

  // Appends `other` shifted to start where this trace ends.
  void append(const TaskTrace& other);
  std::vector<TraceInterval> lane(int slave) const; // sorted by claim time
};

// Mean over slaves of busy time / span. Throws ZeroSpan for span 0.
double busy_fraction(const TaskTrace& trace);

// JSON lines: a start record, one claim and one complete record per task
// (in time order), and an end record. Start/end carry slave = -1.
void write_trace_jsonl(std::ostream& out, const TaskTrace& trace);
TaskTrace read_trace_jsonl(std::istream& in);

using TraderMap = std::vector<std::vector<int>>; // trader -> task ids

// Splits `work` (in the given order) into n contiguous runs minimising the
// largest run total. Returns run boundaries as index lists.
TraderMap contiguous_split(const std::vector<double>& work, int n_traders);
// Graph tasks in id order.
TraderMap assign_to_traders(const TaskGraph& graph, int n_traders);
// Tasks ordered by the depth-first position of their first tree leaf, so each
// trader receives neighbouring subtrees.
TraderMap assign_to_traders(const partition::PartitionTree& tree,
                            const std::vector<partition::TaskSpec>& tasks, int n_traders);

using Executor = std::function<void(int task)>;

// Master/trader/slave worker pool. Threads live as long as the engine and
// are reused by every run.
class Engine {
public:
  explicit Engine(RoleConfig roles);
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  // Executes every task once, respecting dependencies. Throws
  // DeadlockDetected for cyclic graphs (before anything runs) and
  // TaskFailed after in-flight tasks drained when an executor throws.
  TaskTrace run(const TaskGraph& graph, const Executor& executor,
                const TraderMap* assignment = nullptr);

  const RoleConfig& roles() const noexcept;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// One-shot convenience over a temporary engine.
TaskTrace run(const TaskGraph& graph, const RoleConfig& roles, const Executor& executor);

template <class R>
struct Outcome {
  std::vector<R> results; // by task id
  TaskTrace trace;
};

template <class R>
Outcome<R> run_collect(Engine& engine, const TaskGraph& graph, const std::function<R(int)>& fn) {
  std::vector<std::optional<R>> slots(static_cast<std::size_t>(graph.size()));
  Outcome<R> out;
  out.trace = engine.run(graph, [&](int t) { slots[static_cast<std::size_t>(t)] = fn(t); });
  out.results.reserve(slots.size());
  for (auto& s : slots) out.results.push_back(std::move(*s));
  return out;
}

// Deterministic single-threaded replay of the same policies on a virtual
// clock: `duration(task)` gives each task's virtual length in ns, and the
// executor runs inline in virtual-claim order.
TaskTrace run_simulated(const TaskGraph& graph, const RoleConfig& roles,
                        const std::function<std::int64_t(int)>& duration,
                        const Executor& executor = {}, const TraderMap* assignment = nullptr);

// Runs each wave of a partition::WaveRunner as a graph of independent tasks
// on `engine`, appending every wave's trace to `trace` when given. `work`
// (per wave item) drives trader assignment; empty means equal work.
partition::WaveRunner wave_runner(Engine& engine, TaskTrace* trace = nullptr,
                                  std::vector<double> work = {});

} // namespace steerflow::scheduler
