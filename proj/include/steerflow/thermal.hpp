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
#include <iosfwd>
#include <span>
#include <vector>

#include <json.hpp>

#include "steerflow/lattice.hpp"
#include "steerflow/scene.hpp"

namespace steerflow::thermal {

// Air next to one ThermalActive patch.
struct SurfaceSample {
  int patch = 0;
  double speed = 0.0;    // lattice units
  double air_temp = 0.0; // deg C
  int area = 0;          // patch cells
};

// Mean |u| and temperature of the fluid cells next to each patch, one
// entry per patch id. A fluid cell counts once per patch face it touches.
// Throws NoManikin when the grid has no patches.
std::vector<SurfaceSample> sample_surface(const lattice::DistributionGrid& grid,
                                          const lattice::MacroFields& macro);

// Two-node (core/skin) regulator of one manikin.
struct RegulatorState {
  double core = 37.0;
  double skin = 33.7;
  ThermalSettings params;

  static RegulatorState initial(const ThermalSettings& s) { return {s.initial_core, s.initial_skin, s}; }
};

struct PatchResponse {
  int patch = 0;
  double surface_temp = 0.0; // deg C
  double flux = 0.0;         // skin to air, W/m^2
};

struct SurfaceResponse {
  std::vector<PatchResponse> patches;
  double flux_total = 0.0;      // sum of area x flux
  double metabolic_total = 0.0; // metabolic rate x total area
};

// Heat transfer coefficient h0 (1 + c |u|).
double convection_coefficient(const ThermalSettings& s, double speed);

// One explicit Euler step of length dt seconds. Fluxes use the incoming
// skin temperature; the returned surface temperature is the updated skin.
// Throws ModelDiverged when core or skin leaves [20, 45] deg C.
std::pair<SurfaceResponse, RegulatorState> regulate(std::span<const SurfaceSample> samples,
                                                    const RegulatorState& state, double dt);

// 7-point sensation vote: round((skin - neutral) / half_width) in [-3, 3].
int comfort_vote(double skin_temp, double neutral, double half_width);

struct Exchange {
  int index = 0;
  std::vector<SurfaceResponse> responses; // one per manikin
  std::vector<RegulatorState> states;
  std::vector<int> votes;
  double mean_skin = 0.0;
  double mean_core = 0.0;
  double flux_total = 0.0;
  double max_change = 0.0; // largest |delta T| of any node this exchange
};

void to_json(nlohmann::json& j, const Exchange& e);

// Alternates n_cfd_steps lattice steps with one regulator step per manikin
// and feeds the skin temperatures back as patch wall temperatures.
class CouplingLoop {
public:
  // Starts from rest at the ambient temperature on the scene's base level.
  explicit CouplingLoop(const Scene& scene, int level = 0);
  // Continues from an existing grid, e.g. the latest interactive result.
  CouplingLoop(const Scene& scene, lattice::DistributionGrid grid, const lattice::FluidParams& params);

  // Errors from the solver or the regulator are rethrown prefixed with the
  // exchange index.
  Exchange step(int n_cfd_steps);

  // Exchanges until every node changes by less than tolerance deg C in one
  // exchange or max_exchanges ran; the callback sees every exchange.
  Exchange run(int n_cfd_steps, int max_exchanges, double tolerance = 0.0,
               const std::function<void(const Exchange&)>& on_exchange = {});

  const lattice::DistributionGrid& grid() const noexcept { return grid_; }
  const std::vector<RegulatorState>& states() const noexcept { return states_; }
  int exchanges() const noexcept { return exchanges_; }

private:
  void apply_surface_temps();

  ThermalSettings settings_;
  lattice::FluidParams params_;
  lattice::DistributionGrid grid_;
  std::vector<RegulatorState> states_;
  int exchanges_ = 0;
};

} // namespace steerflow::thermal
