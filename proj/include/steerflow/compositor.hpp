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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "steerflow/lattice.hpp"
#include "steerflow/partition.hpp"
#include "steerflow/scheduler.hpp"
#include "steerflow/viz.hpp"

namespace steerflow::compositor {

struct Frame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgba; // row 0 is the lowest y
  std::uint64_t seq = 0;
  int level = 0;
  lattice::FieldId field = lattice::FieldId::Speed;
  std::int64_t timestamp_ms = 0;
};

struct Style {
  viz::Colormap map = viz::Colormap::diverging();
  std::optional<viz::Range> range; // automatic when empty
  int px_per_cell = 1;
};

// One colour-mapped tile per leaf, in leaf order, each tagged with its node.
// Runs one scheduler task per leaf when `engine` is given, inline otherwise.
std::vector<viz::SubImage> render_leaves(const partition::PartitionTree& tree,
                                         const viz::ScalarField& field, const Style& style,
                                         scheduler::Engine* engine = nullptr);

// Joins sibling tiles bottom-up until the root. Every internal node is one
// task depending on its internal children; ids follow join_schedule order.
// Throws MissingTile when a leaf has no tile.
Frame compose(const partition::PartitionTree& tree, std::vector<viz::SubImage> tiles,
              scheduler::Engine* engine = nullptr, scheduler::TaskTrace* trace = nullptr);

// Internal nodes grouped by depth, deepest first. Joins in one wave touch
// disjoint subtrees.
std::vector<std::vector<int>> join_schedule(const partition::PartitionTree& tree);

struct CompositionCost {
  int critical_path = 0; // joins on the longest root-to-leaf path
  int total = 0;
  bool operator==(const CompositionCost&) const = default;
};

CompositionCost composition_cost(const partition::PartitionTree& tree);

// Whole-domain render in one piece, for comparison and single-tile use.
Frame render_monolithic(const viz::ScalarField& field, const Style& style);

void write_ppm(const std::string& path, const Frame& frame);

} // namespace steerflow::compositor
