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
#include <memory>
#include <vector>

#include <json.hpp>

#include "steerflow/lattice.hpp"

namespace steerflow::partition {

// Half-open cell-index rectangle [x0, x0+w) x [y0, y0+h).
struct Rect {
  int x0 = 0;
  int y0 = 0;
  int w = 0;
  int h = 0;

  std::int64_t cells() const noexcept { return static_cast<std::int64_t>(w) * h; }
  bool contains(int x, int y) const noexcept {
    return x >= x0 && x < x0 + w && y >= y0 && y < y0 + h;
  }
  bool operator==(const Rect&) const = default;
};

// Number of cells along the edge two rectangles share (0 if they only touch
// at a corner or not at all). Does not wrap around the domain.
int shared_edge(const Rect& a, const Rect& b) noexcept;

enum class Axis : std::uint8_t { X, Y };

struct Node {
  Rect rect;
  int parent = -1;
  int left = -1;  // lower half along the split axis
  int right = -1; // upper half
  Axis axis = Axis::X;
  int split = 0;  // absolute cell index where the right child starts
  int depth = 0;
  std::int64_t fluid_cells = 0;
  double work = 0.0; // flops per step

  bool is_leaf() const noexcept { return left < 0; }
};

inline constexpr int kDefaultFlopsPerCell = 200;
inline constexpr double kDefaultTheta = 0.3;

// Axis-aligned BSP tree over a cell domain. Node 0 is the root; children are
// always created in pairs that exactly partition their parent.
class PartitionTree {
public:
  PartitionTree() = default;
  explicit PartitionTree(Rect domain);

  // Splits a leaf at an absolute cell index strictly inside its extent and
  // returns the index of the new lower child (the upper child follows it).
  int split(int node, Axis axis, int position);

  // Recomputes fluid counts and work estimates bottom-up.
  void annotate(const lattice::FlagField& flags, int flops_per_cell = kDefaultFlopsPerCell);

  const Node& node(int index) const { return nodes_.at(static_cast<std::size_t>(index)); }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  int size() const noexcept { return static_cast<int>(nodes_.size()); }
  const Rect& domain() const { return nodes_.front().rect; }

  std::vector<int> leaves() const; // depth-first, lower child first
  int leaf_count() const;
  int height() const; // edges on the longest root-to-leaf path
  std::vector<int> post_order() const;

  bool operator==(const PartitionTree&) const;

private:
  std::vector<Node> nodes_;
};

// Recursive longest-axis median split until every leaf has at most
// `max_leaf_cells` cells (>= 16). Ties between axes split x.
PartitionTree build_tree(const lattice::FlagField& flags, int max_leaf_cells,
                         int flops_per_cell = kDefaultFlopsPerCell);

// fluid_cells x flops_per_cell for the node; solid cells cost nothing.
double estimate_work(const PartitionTree& tree, int node, int flops_per_cell);

struct HaloEdge {
  int neighbor = 0;
  int shared_cells = 0;
  bool operator==(const HaloEdge&) const = default;
};

struct TaskSpec {
  int id = 0;
  std::vector<Rect> rects;
  std::int64_t cells = 0;
  std::int64_t fluid_cells = 0;
  double work = 0.0;
  std::vector<HaloEdge> halo;

  double fluid_fraction() const noexcept {
    return cells > 0 ? static_cast<double>(fluid_cells) / static_cast<double>(cells) : 0.0;
  }
  bool contains(int x, int y) const noexcept;
};

// One task per leaf, in leaf order.
std::vector<TaskSpec> leaf_tasks(const PartitionTree& tree);

// Merges tasks whose fluid fraction is below `theta` into adjacent tasks
// until every task reaches theta or is maximal. A merge may not create a task
// whose work exceeds the heaviest leaf's; a task with no neighbour it can
// merge with under that cap is maximal. Needy tasks bordering fluid go first,
// lowest fraction first; the receiver is an adjacent task carrying fluid,
// preferring one that stays at or above theta, then the smallest work.
// Pure function of (tree, theta).
std::vector<TaskSpec> coalesce(const PartitionTree& tree, double theta);

// Regular block decomposition into `count` rectangles, the baseline the tree
// decomposition is compared against.
std::vector<TaskSpec> block_tasks(const lattice::FlagField& flags, int count,
                                  int flops_per_cell = kDefaultFlopsPerCell);

// Fills halo lists from shared rectangle edges.
void compute_halos(std::vector<TaskSpec>& tasks);

// Owner task of every cell; throws InvalidParams when tasks overlap or leave
// a cell uncovered.
std::vector<std::int32_t> cell_owners(const std::vector<TaskSpec>& tasks, int nx, int ny);

struct StripCopy {
  int source = 0;
  int dest = 0;
  std::vector<std::int32_t> cells; // global cell indices, ascending

  bool operator==(const StripCopy&) const = default;
};

using ExchangeSchedule = std::vector<StripCopy>;

// Per-step copies: for each destination task, every cell owned by another
// task that its streaming cells read, grouped by source task. Ordered by
// (dest, source); each directed task pair appears at most once.
ExchangeSchedule halo_plan(const std::vector<TaskSpec>& tasks, const lattice::FlagField& flags);

// Executes `count` independent work items; the default runs them in order.
using WaveRunner = std::function<void(int count, const std::function<void(int)>& body)>;
void run_serial(int count, const std::function<void(int)>& body);

// Distributed-memory style stepping: each task holds only its own cells plus
// a halo of copies received through the exchange schedule.
class PartitionedSolver {
public:
  PartitionedSolver(const lattice::DistributionGrid& initial, std::vector<TaskSpec> tasks);

  void step(const lattice::FluidParams& params, const WaveRunner& runner = run_serial,
            const lattice::StepOptions& options = {});
  void advance(const lattice::FluidParams& params, int steps,
               const WaveRunner& runner = run_serial);

  lattice::DistributionGrid gather() const;
  const ExchangeSchedule& schedule() const noexcept { return schedule_; }
  const std::vector<TaskSpec>& tasks() const noexcept { return tasks_; }

private:
  struct Local {
    std::vector<std::int32_t> cells; // owned, ascending
    std::vector<double> f, g, post_f, post_g, next_f, next_g;
    std::vector<std::int32_t> halo_cells;
    std::vector<double> halo_f, halo_g;
    std::vector<std::int32_t> halo_slot; // global cell -> halo index, -1 if absent
  };

  void collide_task(int t, const lattice::FluidParams& params);
  void exchange_into(int dest);
  void stream_task(int t, const lattice::FluidParams& params, const lattice::StepOptions& options);

  lattice::DistributionGrid prototype_;
  lattice::StreamTable table_;
  std::vector<TaskSpec> tasks_;
  ExchangeSchedule schedule_;
  std::vector<std::vector<std::size_t>> incoming_; // dest -> schedule entries
  std::vector<std::int32_t> owner_;
  std::vector<std::int32_t> local_index_;
  std::vector<Local> locals_;
  std::int64_t time_ = 0;
};

nlohmann::json tree_to_json(const PartitionTree& tree);
nlohmann::json tasks_to_json(const std::vector<TaskSpec>& tasks);

} // namespace steerflow::partition
