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
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "steerflow/lattice.hpp"
#include "steerflow/partition.hpp"
#include "steerflow/vec2.hpp"

namespace steerflow::viz {

struct Rgba {
  std::uint8_t r = 0, g = 0, b = 0, a = 255;
  bool operator==(const Rgba&) const = default;
};

inline constexpr Rgba kObstacleColor{64, 64, 64, 255};

struct ColorStop {
  double at = 0.0; // in [0, 1]
  Rgba color;
};

// Piecewise-linear map from [0, 1] to RGBA.
class Colormap {
public:
  // Anchors must increase strictly from 0 to 1; throws InvalidParams.
  Colormap(std::string name, std::vector<ColorStop> stops);

  static Colormap diverging(); // blue, white, red
  static Colormap grayscale(); // black to white
  static Colormap named(const std::string& name);

  const std::string& name() const noexcept { return name_; }
  const std::vector<ColorStop>& stops() const noexcept { return stops_; }
  Rgba operator()(double t) const; // t clamped to [0, 1]

private:
  std::string name_;
  std::vector<ColorStop> stops_;
};

// Regular sample lattice in domain coordinates: sample (i, j) sits at
// (x0 + i dx, y0 + j dy).
struct Sampling {
  int nx = 0;
  int ny = 0;
  double x0 = 0.0;
  double y0 = 0.0;
  double dx = 1.0;
  double dy = 1.0;

  Vec2 point(int i, int j) const noexcept { return {x0 + i * dx, y0 + j * dy}; }
  // Cell centres of an nx x ny lattice over the unit square.
  static Sampling unit_cells(int nx, int ny);
  // nx x ny samples spanning [lo, hi] on both axes, corners included.
  static Sampling spanning(int nx, int ny, double lo = 0.0, double hi = 1.0);
};

struct ScalarField {
  Sampling grid;
  std::vector<double> values;     // row-major, j outer
  std::vector<std::uint8_t> solid; // empty means no obstacles

  std::size_t index(int i, int j) const noexcept {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(grid.nx) + static_cast<std::size_t>(i);
  }
  double at(int i, int j) const { return values[index(i, j)]; }
  bool is_solid(int i, int j) const { return !solid.empty() && solid[index(i, j)] != 0; }
};

// Velocities are in domain units per unit time.
struct VectorField {
  Sampling grid;
  std::vector<double> ux;
  std::vector<double> uy;
  std::vector<std::uint8_t> solid;

  std::size_t index(int i, int j) const noexcept {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(grid.nx) + static_cast<std::size_t>(i);
  }
  Vec2 at(int i, int j) const { return {ux[index(i, j)], uy[index(i, j)]}; }
  bool is_solid(int i, int j) const { return !solid.empty() && solid[index(i, j)] != 0; }
  // Bilinear interpolation; `p` must lie inside the sample hull.
  Vec2 interpolate(Vec2 p) const;
  bool inside(Vec2 p) const noexcept;
};

// Lattice fields on the unit square. Velocities are converted from cells
// per step to domain units per step.
ScalarField scalar_field(const lattice::MacroFields& macro, const lattice::FlagField& flags,
                         lattice::FieldId id);
VectorField vector_field(const lattice::MacroFields& macro, const lattice::FlagField& flags);

struct Range {
  double lo = 0.0;
  double hi = 1.0;
};

// Min/max over non-solid samples; a degenerate range is widened by 1.
Range auto_range(const ScalarField& field);

// RGBA8 tile. `rect` is in pixels; pixel row r holds sample row
// rect.y0 / px + r / px, so row 0 is the lowest y.
struct SubImage {
  partition::Rect rect;
  int node = -1;
  std::vector<std::uint8_t> rgba;

  Rgba pixel(int x, int y) const; // frame coordinates
  bool operator==(const SubImage&) const = default;
};

// Renders the samples in `cells` with px x px pixels each. Values are
// clamped to the range; solid samples get kObstacleColor.
SubImage color_map(const ScalarField& field, const partition::Rect& cells, Range range,
                   const Colormap& map, int px_per_cell);
SubImage color_map(const ScalarField& field, Range range, const Colormap& map, int px_per_cell);

enum class PolylineKind : std::uint8_t { Iso, Streamline, StreambandEdge };
const char* to_string(PolylineKind kind);

struct Polyline {
  PolylineKind kind = PolylineKind::Iso;
  double tag = 0.0; // iso value or seed id
  std::vector<Vec2> points;
};

// Marching squares over the sample cells. A corner counts as inside when
// its value is >= level; saddles are resolved by the mean of the four
// corners. Cells touching a solid sample are skipped. Segments are chained
// into polylines; a closed loop repeats its first vertex at the end.
std::vector<Polyline> iso_lines(const ScalarField& field, std::span<const double> levels);

// Classic RK4 through the bilinear velocity. A line stops when a stage
// leaves the sample hull, enters a solid sample (nearest), the speed drops
// below 1e-9 or after max_steps. Seeds yielding fewer than two vertices are
// dropped. Tags are seed indices.
std::vector<Polyline> streamlines(const VectorField& u, std::span<const Vec2> seeds, double h,
                                  int max_steps);

// Two streamlines per seed, started half a width either side of the seed
// across the local flow direction.
std::vector<Polyline> streambands(const VectorField& u, std::span<const Vec2> seeds, double width,
                                  double h, int max_steps);

struct Glyph {
  Vec2 anchor;
  Vec2 direction; // unit length
  double magnitude = 0.0;
  bool operator==(const Glyph&) const = default;
};

// One glyph per non-solid sample with i % stride == 0 and j % stride == 0
// and nonzero velocity. The region overload keeps the global stride phase,
// so per-tile extraction unions to the whole-domain result.
std::vector<Glyph> glyphs(const VectorField& u, int stride);
std::vector<Glyph> glyphs(const VectorField& u, int stride, const partition::Rect& region);

void to_json(nlohmann::json& j, const Polyline& p);
void to_json(nlohmann::json& j, const Glyph& g);

// Binary P6, alpha dropped, highest row first so the image is upright.
void write_ppm(std::ostream& out, int width, int height, std::span<const std::uint8_t> rgba);
void write_ppm(const std::string& path, int width, int height, std::span<const std::uint8_t> rgba);

} // namespace steerflow::viz
