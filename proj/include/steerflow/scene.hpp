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

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "steerflow/lattice.hpp"

namespace steerflow {

enum class Shape { Circle, Rect };
enum class ObjectKind { Obstacle, Manikin };

// Boundary convention of the domain edges.
//   Channel        left inflow, right outflow, top/bottom no-slip walls
//   Periodic       every edge wraps
//   WalledPeriodic top/bottom walls, x wraps (body-force channel)
enum class BoundaryMode { Channel, Periodic, WalledPeriodic };

struct SceneObject {
  std::string id;
  Shape shape = Shape::Circle;
  Vec2 center{0.5, 0.5};
  Vec2 size{0.1, 0.1}; // circle: size.x is the radius; rect: full width/height
  ObjectKind kind = ObjectKind::Obstacle;

  bool contains(Vec2 p) const noexcept;
  bool operator==(const SceneObject&) const = default;
};

// Coarse-to-fine refinement plan for one steering response.
struct LevelPlan {
  int base_nx = 48;
  int base_ny = 48;
  int refinement_ratio = 2;
  int max_level = 2;
  double budget_ms = 1000.0;
  int steps_per_check = 10;
  double residual_threshold = 1e-6;
  int max_steps_per_level = 0;       // 0: 5 x max(base_nx, base_ny)
  std::size_t max_cells = 1u << 22;  // finest-level memory cap

  int level_nx(int level) const;
  int level_ny(int level) const;
  int step_cap() const;
  void validate() const; // throws InvalidParams
  bool operator==(const LevelPlan&) const = default;
};

// Two-node regulator and comfort-scale settings. The defaults are
// placeholders without physiological calibration.
struct ThermalSettings {
  double metabolic_rate = 58.2;     // W/m^2
  double core_skin_conductance = 20.0; // W/(m^2 K)
  double h0 = 100.0;                // W/(m^2 K), still-air skin-air coefficient
  double velocity_gain = 10.0;      // c in h = h0 (1 + c |u|), per lattice velocity
  double core_capacity = 60000.0;   // J/(m^2 K)
  double skin_capacity = 2000.0;    // J/(m^2 K)
  double seconds_per_step = 1.0;    // regulator time per LBM step
  double initial_core = 37.0;
  double initial_skin = 33.7;
  double neutral_skin = 33.7;
  double vote_half_width = 1.0;
  int patches_per_manikin = 4;

  bool operator==(const ThermalSettings&) const = default;
};

struct Scene {
  std::vector<SceneObject> objects;
  lattice::FluidParams params;
  LevelPlan plan;
  BoundaryMode boundary = BoundaryMode::Channel;
  ThermalSettings thermal;

  const SceneObject* find(const std::string& id) const;
  SceneObject* find(const std::string& id);
  bool has_manikin() const;

  // Checks ids, coordinates and sizes; throws InvalidGeometry,
  // DegenerateGeometry or InvalidParams.
  void validate() const;
};

// Cell flags at the given resolution (cell centers at ((i+.5)/nx, (j+.5)/ny)).
lattice::FlagField rasterize(const Scene& scene, int nx, int ny);

const char* to_string(Shape shape);
const char* to_string(ObjectKind kind);
const char* to_string(BoundaryMode mode);

void to_json(nlohmann::json& j, const SceneObject& o);
void from_json(const nlohmann::json& j, SceneObject& o);
void to_json(nlohmann::json& j, const LevelPlan& p);
void from_json(const nlohmann::json& j, LevelPlan& p);
void to_json(nlohmann::json& j, const ThermalSettings& t);
void from_json(const nlohmann::json& j, ThermalSettings& t);
void to_json(nlohmann::json& j, const Scene& s);
void from_json(const nlohmann::json& j, Scene& s);

nlohmann::json params_to_json(const lattice::FluidParams& p);
lattice::FluidParams params_from_json(const nlohmann::json& j,
                                      const lattice::FluidParams& base = {});

Scene load_scene(const std::string& path);
void save_scene(const std::string& path, const Scene& scene);

} // namespace steerflow
