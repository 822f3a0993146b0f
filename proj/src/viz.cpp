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
#include "steerflow/viz.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <ostream>
#include <unordered_map>

#include "steerflow/error.hpp"

namespace steerflow::viz {

Colormap::Colormap(std::string name, std::vector<ColorStop> stops)
    : name_(std::move(name)), stops_(std::move(stops)) {
  if (stops_.size() < 2) throw InvalidParams("colormap needs at least two stops");
  if (stops_.front().at != 0.0 || stops_.back().at != 1.0)
    throw InvalidParams("colormap anchors must run from 0 to 1");
  for (std::size_t k = 1; k < stops_.size(); ++k) {
    if (!(stops_[k].at > stops_[k - 1].at)) throw InvalidParams("colormap anchors must increase");
  }
}

Colormap Colormap::diverging() {
  return Colormap("diverging", {{0.0, {59, 76, 192, 255}}, {0.5, {255, 255, 255, 255}}, {1.0, {180, 4, 38, 255}}});
}

Colormap Colormap::grayscale() {
  return Colormap("grayscale", {{0.0, {0, 0, 0, 255}}, {1.0, {255, 255, 255, 255}}});
}

Colormap Colormap::named(const std::string& name) {
  if (name == "diverging") return diverging();
  if (name == "grayscale") return grayscale();
  throw InvalidParams("unknown colormap '" + name + "'");
}

namespace {

std::uint8_t mix(std::uint8_t a, std::uint8_t b, double s) {
  return static_cast<std::uint8_t>(std::lround(a + s * (b - a)));
}

} // namespace

Rgba Colormap::operator()(double t) const {
  if (!(t > 0.0)) t = 0.0; // also catches NaN
  if (t > 1.0) t = 1.0;
  std::size_t k = 1;
  while (k + 1 < stops_.size() && t > stops_[k].at) ++k;
  const ColorStop& a = stops_[k - 1];
  const ColorStop& b = stops_[k];
  const double s = (t - a.at) / (b.at - a.at);
  return {mix(a.color.r, b.color.r, s), mix(a.color.g, b.color.g, s), mix(a.color.b, b.color.b, s),
          mix(a.color.a, b.color.a, s)};
}

Sampling Sampling::unit_cells(int nx, int ny) {
  return {nx, ny, 0.5 / nx, 0.5 / ny, 1.0 / nx, 1.0 / ny};
}

Sampling Sampling::spanning(int nx, int ny, double lo, double hi) {
  if (nx < 2 || ny < 2) throw InvalidParams("spanning sampling needs at least 2x2 samples");
  return {nx, ny, lo, lo, (hi - lo) / (nx - 1), (hi - lo) / (ny - 1)};
}

bool VectorField::inside(Vec2 p) const noexcept {
  const double fx = (p.x - grid.x0) / grid.dx;
  const double fy = (p.y - grid.y0) / grid.dy;
  return fx >= 0.0 && fy >= 0.0 && fx <= grid.nx - 1 && fy <= grid.ny - 1;
}

Vec2 VectorField::interpolate(Vec2 p) const {
  const double fx = (p.x - grid.x0) / grid.dx;
  const double fy = (p.y - grid.y0) / grid.dy;
  const int i = std::clamp(static_cast<int>(std::floor(fx)), 0, grid.nx - 2);
  const int j = std::clamp(static_cast<int>(std::floor(fy)), 0, grid.ny - 2);
  const double s = fx - i;
  const double t = fy - j;
  const Vec2 bottom = at(i, j) * (1.0 - s) + at(i + 1, j) * s;
  const Vec2 top = at(i, j + 1) * (1.0 - s) + at(i + 1, j + 1) * s;
  return bottom * (1.0 - t) + top * t;
}

namespace {

std::vector<std::uint8_t> solid_mask(const lattice::FlagField& flags) {
  std::vector<std::uint8_t> mask(flags.size());
  for (std::size_t c = 0; c < flags.size(); ++c) mask[c] = lattice::is_solid(flags.cells[c]) ? 1 : 0;
  return mask;
}

} // namespace

ScalarField scalar_field(const lattice::MacroFields& macro, const lattice::FlagField& flags,
                         lattice::FieldId id) {
  if (macro.nx != flags.nx || macro.ny != flags.ny) throw InvalidParams("field and flags differ in shape");
  return {Sampling::unit_cells(macro.nx, macro.ny), lattice::extract(macro, id), solid_mask(flags)};
}

VectorField vector_field(const lattice::MacroFields& macro, const lattice::FlagField& flags) {
  if (macro.nx != flags.nx || macro.ny != flags.ny) throw InvalidParams("field and flags differ in shape");
  VectorField v{Sampling::unit_cells(macro.nx, macro.ny), macro.ux, macro.uy, solid_mask(flags)};
  for (double& x : v.ux) x /= macro.nx;
  for (double& y : v.uy) y /= macro.ny;
  return v;
}

Range auto_range(const ScalarField& field) {
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t c = 0; c < field.values.size(); ++c) {
    if (!field.solid.empty() && field.solid[c]) continue;
    if (!std::isfinite(field.values[c])) continue;
    lo = std::min(lo, field.values[c]);
    hi = std::max(hi, field.values[c]);
  }
  if (!(lo < hi)) {
    if (!std::isfinite(lo)) lo = 0.0;
    return {lo - 0.5, lo + 0.5};
  }
  return {lo, hi};
}

Rgba SubImage::pixel(int x, int y) const {
  const std::size_t at = (static_cast<std::size_t>(y - rect.y0) * static_cast<std::size_t>(rect.w) +
                          static_cast<std::size_t>(x - rect.x0)) * 4;
  return {rgba[at], rgba[at + 1], rgba[at + 2], rgba[at + 3]};
}

SubImage color_map(const ScalarField& field, const partition::Rect& cells, Range range,
                   const Colormap& map, int px_per_cell) {
  if (!(range.lo < range.hi)) throw InvalidParams("color range needs lo < hi");
  if (px_per_cell < 1) throw InvalidParams("px_per_cell must be >= 1");
  if (cells.x0 < 0 || cells.y0 < 0 || cells.x0 + cells.w > field.grid.nx || cells.y0 + cells.h > field.grid.ny)
    throw InvalidParams("render rectangle outside the field");
  const int px = px_per_cell;
  SubImage img;
  img.rect = {cells.x0 * px, cells.y0 * px, cells.w * px, cells.h * px};
  img.rgba.resize(static_cast<std::size_t>(img.rect.w) * static_cast<std::size_t>(img.rect.h) * 4);
  const double span = range.hi - range.lo;
  for (int j = 0; j < cells.h; ++j) {
    for (int i = 0; i < cells.w; ++i) {
      const int gi = cells.x0 + i;
      const int gj = cells.y0 + j;
      const Rgba c = field.is_solid(gi, gj) ? kObstacleColor : map((field.at(gi, gj) - range.lo) / span);
      for (int r = 0; r < px; ++r) {
        std::uint8_t* row = img.rgba.data() +
            (static_cast<std::size_t>(j * px + r) * static_cast<std::size_t>(img.rect.w) +
             static_cast<std::size_t>(i * px)) * 4;
        for (int k = 0; k < px; ++k) {
          row[4 * k] = c.r;
          row[4 * k + 1] = c.g;
          row[4 * k + 2] = c.b;
          row[4 * k + 3] = c.a;
        }
      }
    }
  }
  return img;
}

SubImage color_map(const ScalarField& field, Range range, const Colormap& map, int px_per_cell) {
  return color_map(field, {0, 0, field.grid.nx, field.grid.ny}, range, map, px_per_cell);
}

const char* to_string(PolylineKind kind) {
  switch (kind) {
    case PolylineKind::Iso: return "iso";
    case PolylineKind::Streamline: return "streamline";
    case PolylineKind::StreambandEdge: return "streamband-edge";
  }
  return "?";
}

namespace {

constexpr double kJoinTolerance = 1e-9;

struct Segment {
  Vec2 a, b;
};

// Cell edges: 0 bottom, 1 right, 2 top, 3 left. Each entry lists edge
// pairs; -1 ends the list. Saddles (5, 10) are handled separately.
constexpr int kCases[16][4] = {
    {-1, -1, -1, -1}, {3, 0, -1, -1}, {0, 1, -1, -1}, {3, 1, -1, -1},
    {1, 2, -1, -1},   {-1, -1, -1, -1}, {0, 2, -1, -1}, {3, 2, -1, -1},
    {2, 3, -1, -1},   {0, 2, -1, -1}, {-1, -1, -1, -1}, {1, 2, -1, -1},
    {1, 3, -1, -1},   {0, 1, -1, -1}, {3, 0, -1, -1},   {-1, -1, -1, -1}};

std::vector<Segment> march(const ScalarField& f, double level) {
  const Sampling& g = f.grid;
  // Crossings are always interpolated from the lower-index corner so that
  // neighbouring cells produce bit-identical shared points.
  auto horizontal = [&](int i, int j) {
    const double a = f.at(i, j), b = f.at(i + 1, j);
    const double t = (level - a) / (b - a);
    return Vec2{g.x0 + (i + t) * g.dx, g.y0 + j * g.dy};
  };
  auto vertical = [&](int i, int j) {
    const double a = f.at(i, j), b = f.at(i, j + 1);
    const double t = (level - a) / (b - a);
    return Vec2{g.x0 + i * g.dx, g.y0 + (j + t) * g.dy};
  };

  std::vector<Segment> out;
  for (int j = 0; j + 1 < g.ny; ++j) {
    for (int i = 0; i + 1 < g.nx; ++i) {
      if (f.is_solid(i, j) || f.is_solid(i + 1, j) || f.is_solid(i + 1, j + 1) || f.is_solid(i, j + 1)) continue;
      const double v[4] = {f.at(i, j), f.at(i + 1, j), f.at(i + 1, j + 1), f.at(i, j + 1)};
      int code = 0;
      for (int k = 0; k < 4; ++k) code |= (v[k] >= level ? 1 : 0) << k;
      if (code == 0 || code == 15) continue;
      auto edge = [&](int e) {
        switch (e) {
          case 0: return horizontal(i, j);
          case 1: return vertical(i + 1, j);
          case 2: return horizontal(i, j + 1);
          default: return vertical(i, j);
        }
      };
      int pairs[4];
      std::copy(std::begin(kCases[code]), std::end(kCases[code]), pairs);
      if (code == 5 || code == 10) {
        const bool centre_in = 0.25 * (v[0] + v[1] + v[2] + v[3]) >= level;
        // Cut off the corners whose state differs from the centre.
        const bool cut_even = (code == 5) != centre_in;
        const int even[4] = {3, 0, 1, 2};
        const int odd[4] = {0, 1, 2, 3};
        std::copy(std::begin(cut_even ? even : odd), std::end(cut_even ? even : odd), pairs);
      }
      for (int k = 0; k < 4 && pairs[k] >= 0; k += 2) {
        const Segment s{edge(pairs[k]), edge(pairs[k + 1])};
        if ((s.a - s.b).norm() > kJoinTolerance) out.push_back(s);
      }
    }
  }
  return out;
}

struct KeyHash {
  std::size_t operator()(const std::pair<long long, long long>& k) const noexcept {
    return std::hash<long long>()(k.first) * 1000003u ^ std::hash<long long>()(k.second);
  }
};

std::vector<std::vector<Vec2>> chain(const std::vector<Segment>& segs) {
  using Key = std::pair<long long, long long>;
  auto key = [](Vec2 p) {
    return Key{std::llround(p.x / kJoinTolerance), std::llround(p.y / kJoinTolerance)};
  };
  std::unordered_map<Key, std::vector<int>, KeyHash> ends;
  auto endpoint = [&](int e) { return e % 2 == 0 ? segs[static_cast<std::size_t>(e / 2)].a : segs[static_cast<std::size_t>(e / 2)].b; };
  for (int e = 0; e < static_cast<int>(segs.size()) * 2; ++e) ends[key(endpoint(e))].push_back(e);

  std::vector<bool> used(segs.size(), false);
  auto find_next = [&](Vec2 p) {
    const Key k = key(p);
    for (long long dx = -1; dx <= 1; ++dx) {
      for (long long dy = -1; dy <= 1; ++dy) {
        auto it = ends.find({k.first + dx, k.second + dy});
        if (it == ends.end()) continue;
        for (int e : it->second) {
          if (!used[static_cast<std::size_t>(e / 2)] && (endpoint(e) - p).norm() <= kJoinTolerance) return e;
        }
      }
    }
    return -1;
  };

  std::vector<std::vector<Vec2>> lines;
  for (std::size_t s = 0; s < segs.size(); ++s) {
    if (used[s]) continue;
    used[s] = true;
    std::deque<Vec2> line{segs[s].a, segs[s].b};
    for (int e; (e = find_next(line.back())) >= 0;) {
      used[static_cast<std::size_t>(e / 2)] = true;
      line.push_back(endpoint(e ^ 1));
    }
    for (int e; (e = find_next(line.front())) >= 0;) {
      used[static_cast<std::size_t>(e / 2)] = true;
      line.push_front(endpoint(e ^ 1));
    }
    lines.emplace_back(line.begin(), line.end());
  }
  return lines;
}

} // namespace

std::vector<Polyline> iso_lines(const ScalarField& field, std::span<const double> levels) {
  std::vector<Polyline> out;
  for (double level : levels) {
    if (!std::isfinite(level)) throw InvalidParams("iso level must be finite");
    for (auto& pts : chain(march(field, level))) out.push_back({PolylineKind::Iso, level, std::move(pts)});
  }
  return out;
}

namespace {

bool enters_solid(const VectorField& u, Vec2 p) {
  if (u.solid.empty()) return false;
  const int i = static_cast<int>(std::lround((p.x - u.grid.x0) / u.grid.dx));
  const int j = static_cast<int>(std::lround((p.y - u.grid.y0) / u.grid.dy));
  return u.is_solid(i, j);
}

std::vector<Vec2> trace(const VectorField& u, Vec2 seed, double h, int max_steps) {
  std::vector<Vec2> pts;
  if (!u.inside(seed) || enters_solid(u, seed)) return pts;
  pts.push_back(seed);
  Vec2 p = seed;
  for (int s = 0; s < max_steps; ++s) {
    const Vec2 k1 = u.interpolate(p);
    if (k1.norm() < 1e-9) break;
    const Vec2 p2 = p + k1 * (0.5 * h);
    if (!u.inside(p2)) break;
    const Vec2 k2 = u.interpolate(p2);
    const Vec2 p3 = p + k2 * (0.5 * h);
    if (!u.inside(p3)) break;
    const Vec2 k3 = u.interpolate(p3);
    const Vec2 p4 = p + k3 * h;
    if (!u.inside(p4)) break;
    const Vec2 k4 = u.interpolate(p4);
    const Vec2 next = p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    if (!u.inside(next) || enters_solid(u, next)) break;
    pts.push_back(next);
    p = next;
  }
  return pts;
}

} // namespace

std::vector<Polyline> streamlines(const VectorField& u, std::span<const Vec2> seeds, double h,
                                  int max_steps) {
  if (!(h > 0.0)) throw InvalidParams("streamline step must be positive");
  if (u.grid.nx < 2 || u.grid.ny < 2) throw InvalidParams("velocity field needs at least 2x2 samples");
  std::vector<Polyline> out;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    auto pts = trace(u, seeds[s], h, max_steps);
    if (pts.size() >= 2) out.push_back({PolylineKind::Streamline, static_cast<double>(s), std::move(pts)});
  }
  return out;
}

std::vector<Polyline> streambands(const VectorField& u, std::span<const Vec2> seeds, double width,
                                  double h, int max_steps) {
  if (!(h > 0.0) || !(width > 0.0)) throw InvalidParams("streamband step and width must be positive");
  if (u.grid.nx < 2 || u.grid.ny < 2) throw InvalidParams("velocity field needs at least 2x2 samples");
  std::vector<Polyline> out;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    if (!u.inside(seeds[s])) continue;
    const Vec2 v = u.interpolate(seeds[s]);
    const double m = v.norm();
    if (m < 1e-9) continue;
    const Vec2 offset = Vec2{-v.y, v.x} * (0.5 * width / m);
    auto left = trace(u, seeds[s] + offset, h, max_steps);
    auto right = trace(u, seeds[s] - offset, h, max_steps);
    if (left.size() < 2 || right.size() < 2) continue;
    out.push_back({PolylineKind::StreambandEdge, static_cast<double>(s), std::move(left)});
    out.push_back({PolylineKind::StreambandEdge, static_cast<double>(s), std::move(right)});
  }
  return out;
}

std::vector<Glyph> glyphs(const VectorField& u, int stride, const partition::Rect& region) {
  if (stride < 1) throw InvalidParams("glyph stride must be >= 1");
  std::vector<Glyph> out;
  const int j0 = (region.y0 + stride - 1) / stride * stride;
  const int i0 = (region.x0 + stride - 1) / stride * stride;
  for (int j = j0; j < region.y0 + region.h; j += stride) {
    for (int i = i0; i < region.x0 + region.w; i += stride) {
      if (u.is_solid(i, j)) continue;
      const Vec2 v = u.at(i, j);
      const double m = v.norm();
      if (m == 0.0) continue;
      out.push_back({u.grid.point(i, j), v * (1.0 / m), m});
    }
  }
  return out;
}

std::vector<Glyph> glyphs(const VectorField& u, int stride) {
  return glyphs(u, stride, {0, 0, u.grid.nx, u.grid.ny});
}

void to_json(nlohmann::json& j, const Polyline& p) {
  auto pts = nlohmann::json::array();
  for (const Vec2& v : p.points) pts.push_back({v.x, v.y});
  j = {{"kind", to_string(p.kind)}, {"tag", p.tag}, {"points", std::move(pts)}};
}

void to_json(nlohmann::json& j, const Glyph& g) {
  j = {{"anchor", {g.anchor.x, g.anchor.y}}, {"dir", {g.direction.x, g.direction.y}}, {"mag", g.magnitude}};
}

void write_ppm(std::ostream& out, int width, int height, std::span<const std::uint8_t> rgba) {
  if (rgba.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 4)
    throw InvalidParams("pixel buffer does not match image size");
  out << "P6\n" << width << ' ' << height << "\n255\n";
  std::vector<char> row(static_cast<std::size_t>(width) * 3);
  for (int y = height - 1; y >= 0; --y) {
    const std::uint8_t* src = rgba.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(width) * 4;
    for (int x = 0; x < width; ++x) {
      row[3 * static_cast<std::size_t>(x)] = static_cast<char>(src[4 * x]);
      row[3 * static_cast<std::size_t>(x) + 1] = static_cast<char>(src[4 * x + 1]);
      row[3 * static_cast<std::size_t>(x) + 2] = static_cast<char>(src[4 * x + 2]);
    }
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw IoError("failed to write PPM");
}

void write_ppm(const std::string& path, int width, int height, std::span<const std::uint8_t> rgba) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path);
  write_ppm(out, width, height, rgba);
}

} // namespace steerflow::viz
