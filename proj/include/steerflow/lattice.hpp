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

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "steerflow/vec2.hpp"

namespace steerflow::lattice {

// D2Q9 flow stencil. Direction 0 is rest, 1..4 axis, 5..8 diagonal.
inline constexpr int kQ = 9;
inline constexpr std::array<int, kQ> kEx{0, 1, 0, -1, 0, 1, -1, -1, 1};
inline constexpr std::array<int, kQ> kEy{0, 0, 1, 0, -1, 1, 1, -1, -1};
inline constexpr std::array<int, kQ> kOpposite{0, 3, 4, 1, 2, 7, 8, 5, 6};
inline constexpr std::array<double, kQ> kWeight{4.0 / 9.0,  1.0 / 9.0,  1.0 / 9.0,
                                                1.0 / 9.0,  1.0 / 9.0,  1.0 / 36.0,
                                                1.0 / 36.0, 1.0 / 36.0, 1.0 / 36.0};

// D2Q5 stencil for the passive temperature scalar (c_s^2 = 1/3).
inline constexpr int kQT = 5;
inline constexpr std::array<int, kQT> kExT{0, 1, 0, -1, 0};
inline constexpr std::array<int, kQT> kEyT{0, 0, 1, 0, -1};
inline constexpr std::array<int, kQT> kOppositeT{0, 3, 4, 1, 2};
inline constexpr std::array<double, kQT> kWeightT{1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0,
                                                  1.0 / 6.0, 1.0 / 6.0};

// Flow parameters in lattice units. Construction validates the BGK
// stability bound (tau > 0.5) and the low-Mach bound (|u_in| < 0.3).
class FluidParams {
public:
  FluidParams();
  FluidParams(double tau, Vec2 body_force, Vec2 inflow_velocity, double ambient_temp,
              double thermal_diffusivity);

  double tau() const noexcept { return tau_; }
  Vec2 body_force() const noexcept { return body_force_; }
  Vec2 inflow_velocity() const noexcept { return inflow_velocity_; }
  double ambient_temp() const noexcept { return ambient_temp_; }
  double thermal_diffusivity() const noexcept { return thermal_diffusivity_; }

  double viscosity() const noexcept { return (tau_ - 0.5) / 3.0; }
  double thermal_tau() const noexcept { return 0.5 + 3.0 * thermal_diffusivity_; }

  FluidParams with_body_force(Vec2 force) const;
  FluidParams with_inflow_velocity(Vec2 velocity) const;
  FluidParams with_ambient_temp(double celsius) const;

  bool operator==(const FluidParams&) const = default;

private:
  double tau_;
  Vec2 body_force_;
  Vec2 inflow_velocity_;
  double ambient_temp_;
  double thermal_diffusivity_;
};

enum class CellKind : std::uint8_t { Fluid, Obstacle, Inflow, Outflow, Wall, ThermalActive };

struct CellFlag {
  CellKind kind = CellKind::Fluid;
  std::uint16_t surface = 0; // patch id, meaningful for ThermalActive only

  bool operator==(const CellFlag&) const = default;
};

constexpr bool is_solid(CellFlag flag) noexcept {
  return flag.kind == CellKind::Obstacle || flag.kind == CellKind::Wall ||
         flag.kind == CellKind::ThermalActive;
}

// Cells that carry flow and cost work per step.
constexpr bool is_fluid(CellFlag flag) noexcept { return !is_solid(flag); }

const char* to_string(CellKind kind);

struct FlagField {
  int nx = 0;
  int ny = 0;
  std::vector<CellFlag> cells; // row-major, y outer

  FlagField() = default;
  FlagField(int nx, int ny, CellFlag fill = {});

  int index(int x, int y) const noexcept { return y * nx + x; }
  CellFlag at(int x, int y) const { return cells[static_cast<std::size_t>(index(x, y))]; }
  CellFlag& at(int x, int y) { return cells[static_cast<std::size_t>(index(x, y))]; }
  std::size_t size() const noexcept { return cells.size(); }
  int surface_count() const; // 1 + max ThermalActive patch id, or 0

  bool operator==(const FlagField&) const = default;
};

// All-fluid flags; streaming wraps on every side.
FlagField periodic_flags(int nx, int ny);

// Simulation state at one refinement level. Flags are shared and immutable;
// a geometry edit produces a new FlagField rather than mutating this one.
class DistributionGrid {
public:
  DistributionGrid() = default;
  DistributionGrid(std::shared_ptr<const FlagField> flags, int level = 0);

  int nx() const noexcept { return flags_->nx; }
  int ny() const noexcept { return flags_->ny; }
  std::size_t cell_count() const noexcept { return flags_->size(); }
  int level() const noexcept { return level_; }
  void set_level(int level) noexcept { level_ = level; }
  std::int64_t time() const noexcept { return time_; }
  void set_time(std::int64_t t) noexcept { time_ = t; }

  const FlagField& flags() const noexcept { return *flags_; }
  const std::shared_ptr<const FlagField>& shared_flags() const noexcept { return flags_; }

  std::span<double> f() noexcept { return f_; }
  std::span<const double> f() const noexcept { return f_; }
  std::span<double> g() noexcept { return g_; }
  std::span<const double> g() const noexcept { return g_; }

  double* f_at(std::size_t cell) noexcept { return f_.data() + cell * kQ; }
  const double* f_at(std::size_t cell) const noexcept { return f_.data() + cell * kQ; }
  double* g_at(std::size_t cell) noexcept { return g_.data() + cell * kQT; }
  const double* g_at(std::size_t cell) const noexcept { return g_.data() + cell * kQT; }

  // Dirichlet temperatures of ThermalActive patches, indexed by patch id.
  std::vector<double>& surface_temps() noexcept { return surface_temps_; }
  const std::vector<double>& surface_temps() const noexcept { return surface_temps_; }

  // Temperature reported for solid cells by macroscopics().
  double ambient_temp() const noexcept { return ambient_temp_; }
  void set_ambient_temp(double celsius) noexcept { ambient_temp_ = celsius; }

  bool operator==(const DistributionGrid& other) const;

private:
  std::shared_ptr<const FlagField> flags_;
  std::vector<double> f_;
  std::vector<double> g_;
  std::vector<double> surface_temps_;
  double ambient_temp_ = 20.0;
  int level_ = 0;
  std::int64_t time_ = 0;
};

struct MacroFields {
  int nx = 0;
  int ny = 0;
  std::vector<double> rho;
  std::vector<double> ux;
  std::vector<double> uy;
  std::vector<double> temp;

  MacroFields() = default;
  MacroFields(int nx, int ny);
  std::size_t size() const noexcept { return rho.size(); }
};

enum class FieldId : std::uint32_t { Rho = 0, Ux = 1, Uy = 2, Temp = 3, Speed = 4 };

const char* to_string(FieldId id);
FieldId field_from_string(const std::string& name);

// Scalar view of one macroscopic field. Speed is derived (|u|) and is not
// a dump field id.
std::vector<double> extract(const MacroFields& macro, FieldId id);

double equilibrium(double rho, Vec2 u, int i);
// Temperature populations carry rho T, so the scalar is advected without
// picking up the weak density variation of the flow.
double equilibrium_temp(double rho, double temp, Vec2 u, int i);

// Sets every non-solid cell to feq(rho, u) / geq(temp, u); solid cells get
// the rest-state populations. Patch temperatures are set to `temp`.
void fill_equilibrium(DistributionGrid& grid, double rho, Vec2 u, double temp);

struct StepOptions {
  bool verify = false; // additionally require every population >= 0
};

// One collide-stream cycle. Throws NumericalBlowup when a fluid cell ends up
// with a non-finite population or non-positive density.
DistributionGrid step(const DistributionGrid& grid, const FluidParams& params,
                      const StepOptions& options = {});

// In-place repeated stepping with an internal scratch buffer.
void advance(DistributionGrid& grid, const FluidParams& params, int steps,
             const StepOptions& options = {});

MacroFields macroscopics(const DistributionGrid& grid);
// Same as above with the half-force velocity shift and the params' ambient.
MacroFields macroscopics(const DistributionGrid& grid, const FluidParams& params);

double total_mass(const DistributionGrid& grid);

// --- kernel pieces shared with partitioned stepping ---------------------

// Pull sources of every cell, precomputed from a flag field. Streaming wraps
// periodically on every edge. Inflow and Outflow cells do not pull: they
// are rebuilt each step from their interior x neighbour (inflow: that
// neighbour's density at the prescribed velocity; outflow: unit density at
// the neighbour's velocity and temperature).
class StreamTable {
public:
  enum class Mode : std::uint8_t { Pull, Keep, Inflow, Outflow };
  static constexpr std::int32_t kBounce = -1; // reflect own post-collision value
  // g sources <= -2 encode an anti-bounce-back off ThermalActive patch -(s+2)

  StreamTable() = default;
  explicit StreamTable(const FlagField& flags);

  Mode mode(std::size_t cell) const noexcept { return modes_[cell]; }
  const std::int32_t* f_sources(std::size_t cell) const noexcept { return f_src_.data() + cell * kQ; }
  const std::int32_t* g_sources(std::size_t cell) const noexcept { return g_src_.data() + cell * kQT; }
  // Interior neighbour of an Inflow/Outflow cell; -1 when it is solid.
  std::int32_t neighbor(std::size_t cell) const noexcept { return neighbor_[cell]; }
  std::size_t size() const noexcept { return modes_.size(); }

  // Interior neighbour column of an open boundary cell at x.
  static int boundary_neighbor_x(const FlagField& flags, int x, int y);

private:
  std::vector<Mode> modes_;
  std::vector<std::int32_t> f_src_;
  std::vector<std::int32_t> g_src_;
  std::vector<std::int32_t> neighbor_;
};

namespace kernel {

// Post-collision populations for one cell. Solid and open boundary cells
// are copied unchanged.
inline void collide(const double* f, const double* g, CellFlag flag, const FluidParams& params,
                    double* f_post, double* g_post);

// Pull-streaming for one cell. `post_f(cell)` / `post_g(cell)` return the
// post-collision arrays of a source cell.
template <class PostF, class PostG>
inline void stream(std::size_t cell, const StreamTable& table,
                   std::span<const double> surface_temps, const FluidParams& params,
                   const double* own_f, const double* own_g, PostF&& post_f, PostG&& post_g,
                   double* f_out, double* g_out);

void check_cell(const double* f, CellFlag flag, bool verify, int x, int y);

} // namespace kernel

// --- field dumps ------------------------------------------------------------

struct FieldDump {
  std::uint32_t nx = 0;
  std::uint32_t ny = 0;
  FieldId field = FieldId::Rho;
  std::vector<double> values;
};

void write_field_dump(std::ostream& out, const FieldDump& dump);
void write_field_dump(const std::string& path, const FieldDump& dump);
FieldDump read_field_dump(std::istream& in);
FieldDump read_field_dump(const std::string& path);

} // namespace steerflow::lattice

#include "steerflow/detail/lattice_stream.hpp"
