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
#include "steerflow/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "steerflow/error.hpp"

namespace steerflow {

using lattice::CellFlag;
using lattice::CellKind;
using lattice::FlagField;
using nlohmann::json;

bool SceneObject::contains(Vec2 p) const noexcept {
  const Vec2 d = p - center;
  if (shape == Shape::Circle) return d.x * d.x + d.y * d.y <= size.x * size.x;
  return std::abs(d.x) <= 0.5 * size.x && std::abs(d.y) <= 0.5 * size.y;
}

int LevelPlan::level_nx(int level) const {
  int n = base_nx;
  for (int l = 0; l < level; ++l) n *= refinement_ratio;
  return n;
}

int LevelPlan::level_ny(int level) const {
  int n = base_ny;
  for (int l = 0; l < level; ++l) n *= refinement_ratio;
  return n;
}

int LevelPlan::step_cap() const {
  return max_steps_per_level > 0 ? max_steps_per_level : 5 * std::max(base_nx, base_ny);
}

void LevelPlan::validate() const {
  if (base_nx < 16 || base_ny < 16) throw InvalidParams("base resolution must be at least 16x16");
  if (refinement_ratio < 2) throw InvalidParams("refinement ratio must be >= 2");
  if (max_level < 0) throw InvalidParams("max_level must be >= 0");
  if (steps_per_check < 1) throw InvalidParams("steps_per_check must be >= 1");
  if (!(budget_ms >= 0.0)) throw InvalidParams("budget_ms must be >= 0");
  if (!(residual_threshold >= 0.0)) throw InvalidParams("residual threshold must be >= 0");
  double cells = static_cast<double>(base_nx) * base_ny;
  for (int l = 0; l < max_level; ++l) cells *= static_cast<double>(refinement_ratio) * refinement_ratio;
  if (cells > static_cast<double>(max_cells)) {
    throw InvalidParams("finest level exceeds the configured cell cap");
  }
}

const SceneObject* Scene::find(const std::string& id) const {
  auto it = std::find_if(objects.begin(), objects.end(), [&](const auto& o) { return o.id == id; });
  return it == objects.end() ? nullptr : &*it;
}

SceneObject* Scene::find(const std::string& id) {
  auto it = std::find_if(objects.begin(), objects.end(), [&](const auto& o) { return o.id == id; });
  return it == objects.end() ? nullptr : &*it;
}

bool Scene::has_manikin() const {
  return std::any_of(objects.begin(), objects.end(),
                     [](const auto& o) { return o.kind == ObjectKind::Manikin; });
}

void Scene::validate() const {
  std::set<std::string> ids;
  for (const auto& o : objects) {
    if (o.id.empty()) throw InvalidGeometry("object id must be nonempty");
    if (!ids.insert(o.id).second) throw InvalidGeometry("duplicate object id '" + o.id + "'");
    if (!(o.center.x >= 0.0 && o.center.x <= 1.0 && o.center.y >= 0.0 && o.center.y <= 1.0)) {
      throw InvalidGeometry("object '" + o.id + "' center lies outside the unit domain");
    }
    const bool degenerate = o.shape == Shape::Circle ? !(o.size.x > 0.0)
                                                     : !(o.size.x > 0.0 && o.size.y > 0.0);
    if (degenerate) throw DegenerateGeometry("object '" + o.id + "' has non-positive size");
  }
  plan.validate();
  if (thermal.patches_per_manikin < 1) throw InvalidParams("patches_per_manikin must be >= 1");
  if (!(thermal.vote_half_width > 0.0)) throw InvalidParams("vote half width must be positive");
}

namespace {

bool is_edge_cell(BoundaryMode mode, int x, int y, int nx, int ny, int wall) {
  const bool walled = y < wall || y >= ny - wall;
  switch (mode) {
  case BoundaryMode::Periodic: return false;
  case BoundaryMode::WalledPeriodic: return walled;
  case BoundaryMode::Channel: return walled || x == 0 || x == nx - 1;
  }
  return false;
}

} // namespace

FlagField rasterize(const Scene& scene, int nx, int ny) {
  for (const auto& o : scene.objects) {
    const bool degenerate = o.shape == Shape::Circle ? !(o.size.x > 0.0)
                                                     : !(o.size.x > 0.0 && o.size.y > 0.0);
    if (degenerate) throw DegenerateGeometry("object '" + o.id + "' has non-positive size");
  }
  FlagField flags(nx, ny);
  const BoundaryMode mode = scene.boundary;
  // walls are one base-level row thick, so finer levels keep their position
  const int wall = std::max(1, ny / std::max(1, scene.plan.base_ny));
  for (int y = 0; y < ny; ++y) {
    for (int x = 0; x < nx; ++x) {
      CellFlag& cell = flags.at(x, y);
      const bool walled = y < wall || y >= ny - wall;
      if (mode == BoundaryMode::Channel) {
        if (walled) cell.kind = CellKind::Wall;
        else if (x == 0) cell.kind = CellKind::Inflow;
        else if (x == nx - 1) cell.kind = CellKind::Outflow;
      } else if (mode == BoundaryMode::WalledPeriodic) {
        if (walled) cell.kind = CellKind::Wall;
      }
    }
  }

  auto center_of = [&](int x, int y) {
    return Vec2{(x + 0.5) / nx, (y + 0.5) / ny};
  };

  // Plain obstacles first, then manikins so their active surface is never
  // hidden by an overlapping obstacle.
  for (const auto& o : scene.objects) {
    if (o.kind != ObjectKind::Obstacle) continue;
    for (int y = 0; y < ny; ++y) {
      for (int x = 0; x < nx; ++x) {
        if (is_edge_cell(mode, x, y, nx, ny, wall)) continue;
        if (o.contains(center_of(x, y))) flags.at(x, y).kind = CellKind::Obstacle;
      }
    }
  }

  const int patches = scene.thermal.patches_per_manikin;
  int manikin_index = 0;
  for (const auto& o : scene.objects) {
    if (o.kind != ObjectKind::Manikin) continue;
    auto inside = [&](int x, int y) {
      if (x < 0 || x >= nx || y < 0 || y >= ny) return false;
      return o.contains(center_of(x, y));
    };
    for (int y = 0; y < ny; ++y) {
      for (int x = 0; x < nx; ++x) {
        if (is_edge_cell(mode, x, y, nx, ny, wall) || !inside(x, y)) continue;
        const bool boundary =
            !inside(x - 1, y) || !inside(x + 1, y) || !inside(x, y - 1) || !inside(x, y + 1);
        CellFlag& cell = flags.at(x, y);
        if (!boundary) {
          cell.kind = CellKind::Obstacle;
          cell.surface = 0;
          continue;
        }
        const Vec2 d = center_of(x, y) - o.center;
        const double angle = std::atan2(d.y, d.x) + std::numbers::pi; // [0, 2pi]
        int sector = static_cast<int>(angle / (2.0 * std::numbers::pi) * patches);
        sector = std::clamp(sector, 0, patches - 1);
        cell.kind = CellKind::ThermalActive;
        cell.surface = static_cast<std::uint16_t>(manikin_index * patches + sector);
      }
    }
    ++manikin_index;
  }
  return flags;
}

const char* to_string(Shape shape) { return shape == Shape::Circle ? "circle" : "rect"; }

const char* to_string(ObjectKind kind) {
  return kind == ObjectKind::Obstacle ? "obstacle" : "manikin";
}

const char* to_string(BoundaryMode mode) {
  switch (mode) {
  case BoundaryMode::Channel: return "channel";
  case BoundaryMode::Periodic: return "periodic";
  case BoundaryMode::WalledPeriodic: return "walled_periodic";
  }
  return "?";
}

namespace {

Vec2 vec_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw InvalidParams("expected a 2-vector");
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

json vec_to_json(Vec2 v) { return json::array({v.x, v.y}); }

} // namespace

void to_json(json& j, const SceneObject& o) {
  j = json{{"id", o.id},
           {"shape", to_string(o.shape)},
           {"center", vec_to_json(o.center)},
           {"kind", to_string(o.kind)}};
  if (o.shape == Shape::Circle) j["size"] = o.size.x;
  else j["size"] = vec_to_json(o.size);
}

void from_json(const json& j, SceneObject& o) {
  try {
    o.id = j.at("id").get<std::string>();
    const auto shape = j.value("shape", std::string("circle"));
    if (shape == "circle") o.shape = Shape::Circle;
    else if (shape == "rect") o.shape = Shape::Rect;
    else throw InvalidGeometry("unknown shape '" + shape + "'");
    o.center = vec_from_json(j.at("center"));
    const json& size = j.at("size");
    if (size.is_number()) o.size = {size.get<double>(), size.get<double>()};
    else o.size = vec_from_json(size);
    const auto kind = j.value("kind", std::string("obstacle"));
    if (kind == "obstacle") o.kind = ObjectKind::Obstacle;
    else if (kind == "manikin") o.kind = ObjectKind::Manikin;
    else throw InvalidGeometry("unknown object kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw InvalidGeometry(std::string("malformed object: ") + e.what());
  }
}

void to_json(json& j, const LevelPlan& p) {
  j = json{{"base_resolution", {p.base_nx, p.base_ny}},
           {"refinement_ratio", p.refinement_ratio},
           {"max_level", p.max_level},
           {"budget_ms", p.budget_ms},
           {"steps_per_check", p.steps_per_check},
           {"residual_threshold", p.residual_threshold},
           {"max_steps_per_level", p.max_steps_per_level},
           {"max_cells", p.max_cells}};
}

void from_json(const json& j, LevelPlan& p) {
  LevelPlan d;
  if (j.contains("base_resolution")) {
    const auto& r = j.at("base_resolution");
    d.base_nx = r.at(0).get<int>();
    d.base_ny = r.at(1).get<int>();
  }
  d.refinement_ratio = j.value("refinement_ratio", d.refinement_ratio);
  d.max_level = j.value("max_level", d.max_level);
  d.budget_ms = j.value("budget_ms", d.budget_ms);
  d.steps_per_check = j.value("steps_per_check", d.steps_per_check);
  d.residual_threshold = j.value("residual_threshold", d.residual_threshold);
  d.max_steps_per_level = j.value("max_steps_per_level", d.max_steps_per_level);
  d.max_cells = j.value("max_cells", d.max_cells);
  p = d;
}

void to_json(json& j, const ThermalSettings& t) {
  j = json{{"metabolic_rate", t.metabolic_rate},
           {"core_skin_conductance", t.core_skin_conductance},
           {"h0", t.h0},
           {"velocity_gain", t.velocity_gain},
           {"core_capacity", t.core_capacity},
           {"skin_capacity", t.skin_capacity},
           {"seconds_per_step", t.seconds_per_step},
           {"initial_core", t.initial_core},
           {"initial_skin", t.initial_skin},
           {"neutral_skin", t.neutral_skin},
           {"vote_half_width", t.vote_half_width},
           {"patches_per_manikin", t.patches_per_manikin}};
}

void from_json(const json& j, ThermalSettings& t) {
  ThermalSettings d;
  d.metabolic_rate = j.value("metabolic_rate", d.metabolic_rate);
  d.core_skin_conductance = j.value("core_skin_conductance", d.core_skin_conductance);
  d.h0 = j.value("h0", d.h0);
  d.velocity_gain = j.value("velocity_gain", d.velocity_gain);
  d.core_capacity = j.value("core_capacity", d.core_capacity);
  d.skin_capacity = j.value("skin_capacity", d.skin_capacity);
  d.seconds_per_step = j.value("seconds_per_step", d.seconds_per_step);
  d.initial_core = j.value("initial_core", d.initial_core);
  d.initial_skin = j.value("initial_skin", d.initial_skin);
  d.neutral_skin = j.value("neutral_skin", d.neutral_skin);
  d.vote_half_width = j.value("vote_half_width", d.vote_half_width);
  d.patches_per_manikin = j.value("patches_per_manikin", d.patches_per_manikin);
  t = d;
}

json params_to_json(const lattice::FluidParams& p) {
  return json{{"tau", p.tau()},
              {"body_force", vec_to_json(p.body_force())},
              {"inflow_velocity", vec_to_json(p.inflow_velocity())},
              {"ambient_temp", p.ambient_temp()},
              {"thermal_diffusivity", p.thermal_diffusivity()}};
}

lattice::FluidParams params_from_json(const json& j, const lattice::FluidParams& base) {
  try {
    return lattice::FluidParams(
        j.value("tau", base.tau()),
        j.contains("body_force") ? vec_from_json(j.at("body_force")) : base.body_force(),
        j.contains("inflow_velocity") ? vec_from_json(j.at("inflow_velocity"))
                                      : base.inflow_velocity(),
        j.value("ambient_temp", base.ambient_temp()),
        j.value("thermal_diffusivity", base.thermal_diffusivity()));
  } catch (const json::exception& e) {
    throw InvalidParams(std::string("malformed params: ") + e.what());
  }
}

void to_json(json& j, const Scene& s) {
  j = json{{"objects", s.objects},
           {"params", params_to_json(s.params)},
           {"plan", s.plan},
           {"boundary", to_string(s.boundary)},
           {"thermal", s.thermal}};
}

void from_json(const json& j, Scene& s) {
  Scene out;
  try {
    if (j.contains("objects")) out.objects = j.at("objects").get<std::vector<SceneObject>>();
    if (j.contains("params")) out.params = params_from_json(j.at("params"));
    if (j.contains("plan")) out.plan = j.at("plan").get<LevelPlan>();
    if (j.contains("thermal")) out.thermal = j.at("thermal").get<ThermalSettings>();
    const auto boundary = j.value("boundary", std::string("channel"));
    if (boundary == "channel") out.boundary = BoundaryMode::Channel;
    else if (boundary == "periodic") out.boundary = BoundaryMode::Periodic;
    else if (boundary == "walled_periodic") out.boundary = BoundaryMode::WalledPeriodic;
    else throw InvalidParams("unknown boundary mode '" + boundary + "'");
  } catch (const json::exception& e) {
    throw InvalidParams(std::string("malformed scene: ") + e.what());
  }
  s = std::move(out);
}

Scene load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scene file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("scene file " + path + " is not valid JSON: " + e.what());
  }
  Scene scene = j.get<Scene>();
  scene.validate();
  return scene;
}

void save_scene(const std::string& path, const Scene& scene) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write scene file " + path);
  out << json(scene).dump(2) << '\n';
}

} // namespace steerflow
