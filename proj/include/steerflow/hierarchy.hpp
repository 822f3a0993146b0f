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

#include <functional>
#include <memory>
#include <optional>
#include <stop_token>
#include <vector>

#include "steerflow/lattice.hpp"
#include "steerflow/partition.hpp"
#include "steerflow/scene.hpp"

namespace steerflow::hierarchy {

struct LevelResult {
  int level = 0;
  std::shared_ptr<const lattice::DistributionGrid> grid;
  lattice::FluidParams params; // the parameters this level was stepped with
  double residual = 0.0;
  double elapsed_ms = 0.0;     // since the start of the run
  std::int64_t steps = 0;      // steps taken at this level
  bool converged = false;      // residual fell below the plan threshold
};

// Largest velocity component change over fluid cells between `previous` and
// the grid's current state. `previous` must have the grid's shape.
double residual(const lattice::DistributionGrid& grid, const lattice::MacroFields& previous);
double residual(const lattice::DistributionGrid& grid, const lattice::MacroFields& previous,
                const lattice::FluidParams& params);

// Parameters at a refinement level. Relaxation time and velocities are kept;
// the body force shrinks by ratio^2 per level so a forced channel keeps its
// centreline velocity on the finer grid.
lattice::FluidParams level_params(const lattice::FluidParams& base, int level, int ratio);

// Fine grid over `fine_flags` (ratio times the coarse size in each axis).
// rho, u and temp are bilinearly interpolated between coarse cell centres,
// extrapolating linearly past the outermost centres; fluid cells start at
// equilibrium of the interpolated state, solid cells at rest.
lattice::DistributionGrid prolongate(const lattice::DistributionGrid& coarse,
                                     const lattice::FluidParams& coarse_params, int ratio,
                                     std::shared_ptr<const lattice::FlagField> fine_flags,
                                     const lattice::FluidParams& fine_params);
// Same, re-rasterizing the scene at the fine resolution.
lattice::DistributionGrid prolongate(const lattice::DistributionGrid& coarse, const Scene& scene,
                                     int ratio);

// Uniform equilibrium start for a level: inflow velocity in a channel,
// rest otherwise.
lattice::DistributionGrid cold_start(const Scene& scene, int level);

struct RunOptions {
  bool warm_start = true;            // false: every level starts cold
  partition::WaveRunner runner;      // set: step through a PartitionedSolver
  double theta = partition::kDefaultTheta;
  int max_leaf_cells = 1024;
  std::stop_token stop;              // checked every steps_per_check steps
  // Called with (level, step, residual) after every convergence check.
  std::function<void(int, std::int64_t, double)> on_check;
};

using Sink = std::function<void(const LevelResult&)>;

// Coarse-to-fine run of `scene` under its plan. Level 0 is always emitted
// unless the run is stopped; every later level is emitted in order and the
// loop ends when the budget is spent or the last level is done. Returns the
// last emitted result, or nothing if stopped before level 0 finished.
std::optional<LevelResult> run_budgeted(const Scene& scene, const Sink& emit,
                                        const RunOptions& options = {});

} // namespace steerflow::hierarchy
