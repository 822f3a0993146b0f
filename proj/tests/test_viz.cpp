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
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "steerflow/error.hpp"
#include "steerflow/viz.hpp"

using namespace steerflow;
using namespace steerflow::viz;

namespace {

ScalarField make_scalar(Sampling grid, auto&& fn) {
  ScalarField f{grid, {}, {}};
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) f.values.push_back(fn(i, j));
  }
  return f;
}

VectorField make_vector(Sampling grid, auto&& fn) {
  VectorField v{grid, {}, {}, {}};
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      const Vec2 u = fn(grid.point(i, j));
      v.ux.push_back(u.x);
      v.uy.push_back(u.y);
    }
  }
  return v;
}

// Straight evaluation of the stop interpolation for one scalar.
Rgba reference_color(const Colormap& map, double value, Range range) {
  const double t = std::clamp((value - range.lo) / (range.hi - range.lo), 0.0, 1.0);
  const auto& stops = map.stops();
  auto hi = std::lower_bound(stops.begin() + 1, stops.end() - 1, t,
                             [](const ColorStop& s, double v) { return s.at < v; });
  auto lo = hi - 1;
  const double s = (t - lo->at) / (hi->at - lo->at);
  auto ch = [&](std::uint8_t a, std::uint8_t b) {
    return static_cast<std::uint8_t>(std::lround(a + s * (b - a)));
  };
  return {ch(lo->color.r, hi->color.r), ch(lo->color.g, hi->color.g), ch(lo->color.b, hi->color.b),
          ch(lo->color.a, hi->color.a)};
}

struct Seg {
  Vec2 a, b;
};

std::vector<Seg> segments_of(const std::vector<Polyline>& lines) {
  std::vector<Seg> out;
  for (const auto& l : lines) {
    for (std::size_t k = 1; k < l.points.size(); ++k) out.push_back({l.points[k - 1], l.points[k]});
  }
  return out;
}

// Per-cell evaluation: find the sign changes on the four edges directly and
// pair them; with four crossings, isolate the corners that disagree with
// the cell-centre average.
std::vector<Seg> brute_force_segments(const ScalarField& f, double level) {
  std::vector<Seg> out;
  const Sampling& g = f.grid;
  for (int j = 0; j + 1 < g.ny; ++j) {
    for (int i = 0; i + 1 < g.nx; ++i) {
      const int ci[4] = {i, i + 1, i + 1, i};
      const int cj[4] = {j, j, j + 1, j + 1};
      bool in[4];
      double v[4];
      for (int k = 0; k < 4; ++k) {
        v[k] = f.at(ci[k], cj[k]);
        in[k] = v[k] >= level;
      }
      // edge e joins corner e and corner (e + 1) % 4
      Vec2 cross[4];
      bool has[4];
      for (int e = 0; e < 4; ++e) {
        const int a = e, b = (e + 1) % 4;
        has[e] = in[a] != in[b];
        if (!has[e]) continue;
        const double t = (level - v[a]) / (v[b] - v[a]);
        const Vec2 pa = g.point(ci[a], cj[a]), pb = g.point(ci[b], cj[b]);
        cross[e] = pa + (pb - pa) * t;
      }
      const int count = has[0] + has[1] + has[2] + has[3];
      if (count == 2) {
        std::vector<Vec2> pts;
        for (int e = 0; e < 4; ++e) {
          if (has[e]) pts.push_back(cross[e]);
        }
        out.push_back({pts[0], pts[1]});
      } else if (count == 4) {
        const bool centre = (v[0] + v[1] + v[2] + v[3]) / 4.0 >= level;
        for (int k = 0; k < 4; ++k) {
          if (in[k] != centre) out.push_back({cross[(k + 3) % 4], cross[k]});
        }
      }
    }
  }
  return out;
}

bool same_segment(const Seg& s, const Seg& t, double tol) {
  auto near = [&](Vec2 a, Vec2 b) { return (a - b).norm() <= tol; };
  return (near(s.a, t.a) && near(s.b, t.b)) || (near(s.a, t.b) && near(s.b, t.a));
}

} // namespace

TEST_CASE("colormap validates anchors") {
  CHECK_THROWS_AS(Colormap("x", {{0.0, {}}}), InvalidParams);
  CHECK_THROWS_AS(Colormap("x", {{0.1, {}}, {1.0, {}}}), InvalidParams);
  CHECK_THROWS_AS(Colormap("x", {{0.0, {}}, {0.5, {}}, {0.5, {}}, {1.0, {}}}), InvalidParams);
  CHECK_THROWS_AS(Colormap::named("rainbow"), InvalidParams);
  CHECK(Colormap::diverging().stops().size() == 3);
}

TEST_CASE("constant fields render the end stops") {
  const auto map = Colormap::diverging();
  const Range range{-1.0, 2.0};
  for (double value : {range.lo, range.hi}) {
    const auto f = make_scalar(Sampling::unit_cells(5, 3), [&](int, int) { return value; });
    const auto img = color_map(f, range, map, 3);
    REQUIRE(img.rgba.size() == 4u * 15 * 9);
    const Rgba want = value == range.lo ? map.stops().front().color : map.stops().back().color;
    for (int y = 0; y < 9; ++y) {
      for (int x = 0; x < 15; ++x) CHECK(img.pixel(x, y) == want);
    }
  }
}

TEST_CASE("ramp pixels match pointwise stop interpolation") {
  const auto map = Colormap::diverging();
  const Range range{0.1, 0.9};
  const auto f = make_scalar(Sampling::unit_cells(40, 7), [](int i, int j) { return i / 39.0 + 0.001 * j; });
  const int px = 2;
  const auto img = color_map(f, range, map, px);
  CHECK(img.rect == partition::Rect{0, 0, 80, 14});
  for (int y = 0; y < img.rect.h; ++y) {
    for (int x = 0; x < img.rect.w; ++x) {
      CHECK(img.pixel(x, y) == reference_color(map, f.at(x / px, y / px), range));
    }
  }
}

TEST_CASE("monochrome ramp is monotone and obstacles are gray") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> d(-0.5, 1.5);
  auto f = make_scalar(Sampling::unit_cells(64, 4), [&](int, int) { return d(rng); });
  const auto img = color_map(f, {0.0, 1.0}, Colormap::grayscale(), 1);
  std::vector<std::pair<double, int>> samples;
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 64; ++x) samples.push_back({f.at(x, y), img.pixel(x, y).r});
  }
  std::sort(samples.begin(), samples.end());
  for (std::size_t k = 1; k < samples.size(); ++k) CHECK(samples[k].second >= samples[k - 1].second);

  f.solid.assign(f.values.size(), 0);
  f.solid[f.index(3, 2)] = 1;
  const auto masked = color_map(f, {0.0, 1.0}, Colormap::grayscale(), 2);
  CHECK(masked.pixel(6, 4) == kObstacleColor);
  CHECK(masked.pixel(7, 5) == kObstacleColor);
  CHECK_THROWS_AS(color_map(f, {1.0, 1.0}, Colormap::grayscale(), 1), InvalidParams);
}

TEST_CASE("rendering a rectangle equals cropping the full render") {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  const auto f = make_scalar(Sampling::unit_cells(24, 16), [&](int, int) { return d(rng); });
  const auto map = Colormap::diverging();
  const auto whole = color_map(f, {0.2, 0.8}, map, 3);
  const partition::Rect cells{5, 3, 11, 9};
  const auto tile = color_map(f, cells, {0.2, 0.8}, map, 3);
  CHECK(tile.rect == partition::Rect{15, 9, 33, 27});
  for (int y = tile.rect.y0; y < tile.rect.y0 + tile.rect.h; ++y) {
    for (int x = tile.rect.x0; x < tile.rect.x0 + tile.rect.w; ++x) CHECK(tile.pixel(x, y) == whole.pixel(x, y));
  }
}

TEST_CASE("uniform field has no iso-lines away from its value") {
  const auto f = make_scalar(Sampling::spanning(6, 6), [](int, int) { return 0.3; });
  const double levels[] = {0.0, 0.29, 0.31, 5.0};
  CHECK(iso_lines(f, levels).empty());
}

TEST_CASE("iso-line of f = x is the vertical line at the level") {
  const Sampling grid = Sampling::spanning(8, 8);
  const auto f = make_scalar(grid, [&](int i, int j) { return grid.point(i, j).x; });
  const double levels[] = {0.5};
  const auto lines = iso_lines(f, levels);
  REQUIRE(lines.size() == 1);
  CHECK(lines[0].kind == PolylineKind::Iso);
  CHECK(lines[0].tag == 0.5);
  CHECK(lines[0].points.size() == 8);
  double ylo = 1.0, yhi = 0.0;
  for (Vec2 p : lines[0].points) {
    CHECK(p.x == doctest::Approx(0.5).epsilon(1e-12));
    ylo = std::min(ylo, p.y);
    yhi = std::max(yhi, p.y);
  }
  CHECK(ylo == doctest::Approx(0.0));
  CHECK(yhi == doctest::Approx(1.0));
}

TEST_CASE("random field iso-lines match per-cell evaluation") {
  for (unsigned seed : {1u, 2u, 3u, 4u, 5u}) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    const Sampling grid = Sampling::spanning(8, 8);
    const auto f = make_scalar(grid, [&](int, int) { return d(rng); });
    const double levels[] = {0.5};
    const auto got = segments_of(iso_lines(f, levels));
    const auto want = brute_force_segments(f, 0.5);
    REQUIRE(got.size() == want.size());
    std::vector<bool> matched(want.size(), false);
    for (const Seg& s : got) {
      bool found = false;
      for (std::size_t k = 0; k < want.size() && !found; ++k) {
        if (!matched[k] && same_segment(s, want[k], 1e-12)) matched[k] = found = true;
      }
      CHECK(found);
    }
  }
}

TEST_CASE("iso vertices lie on edges at the exact level") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  const Sampling grid = Sampling::spanning(17, 13, 0.0, 2.0);
  const auto f = make_scalar(grid, [&](int, int) { return d(rng); });
  const double levels[] = {-0.25, 0.0, 0.4};
  const auto lines = iso_lines(f, levels);
  CHECK(!lines.empty());
  for (const auto& l : lines) {
    CHECK(l.points.size() >= 2);
    for (Vec2 p : l.points) {
      const double fx = (p.x - grid.x0) / grid.dx;
      const double fy = (p.y - grid.y0) / grid.dy;
      const bool on_column = std::abs(fx - std::round(fx)) < 1e-9;
      const bool on_row = std::abs(fy - std::round(fy)) < 1e-9;
      REQUIRE((on_column || on_row));
      double value;
      if (on_row) {
        const int j = static_cast<int>(std::round(fy));
        const int i = std::min(static_cast<int>(std::floor(fx)), grid.nx - 2);
        const double t = fx - i;
        value = f.at(i, j) + t * (f.at(i + 1, j) - f.at(i, j));
      } else {
        const int i = static_cast<int>(std::round(fx));
        const int j = std::min(static_cast<int>(std::floor(fy)), grid.ny - 2);
        const double t = fy - j;
        value = f.at(i, j) + t * (f.at(i, j + 1) - f.at(i, j));
      }
      CHECK(std::abs(value - l.tag) <= 1e-12);
    }
  }
}

TEST_CASE("closed contours repeat their first vertex") {
  const Sampling grid = Sampling::spanning(21, 21);
  const auto f = make_scalar(grid, [&](int i, int j) {
    const Vec2 p = grid.point(i, j) - Vec2{0.5, 0.5};
    return dot(p, p);
  });
  const double levels[] = {0.09};
  const auto lines = iso_lines(f, levels);
  REQUIRE(lines.size() == 1);
  const auto& pts = lines[0].points;
  CHECK(pts.size() > 8);
  CHECK((pts.front() - pts.back()).norm() <= 1e-9);
  for (Vec2 p : pts) CHECK((p - Vec2{0.5, 0.5}).norm() == doctest::Approx(0.3).epsilon(0.02));
}

TEST_CASE("iso-lines skip cells touching solids") {
  const Sampling grid = Sampling::spanning(8, 8);
  auto f = make_scalar(grid, [&](int i, int j) { return grid.point(i, j).x; });
  f.solid.assign(f.values.size(), 0);
  for (int j = 0; j < 8; ++j) f.solid[f.index(4, j)] = 1;
  const double levels[] = {0.5};
  CHECK(iso_lines(f, levels).empty());
}

TEST_CASE("streamline in a uniform field") {
  const auto u = make_vector(Sampling::spanning(5, 5), [](Vec2) { return Vec2{1.0, 0.0}; });
  const Vec2 seeds[] = {{0.1, 0.5}};
  const auto lines = streamlines(u, seeds, 0.01, 10);
  REQUIRE(lines.size() == 1);
  CHECK(lines[0].kind == PolylineKind::Streamline);
  CHECK(lines[0].tag == 0.0);
  REQUIRE(lines[0].points.size() == 11);
  CHECK(std::abs(lines[0].points.back().x - 0.2) <= 1e-12);
  CHECK(std::abs(lines[0].points.back().y - 0.5) <= 1e-12);
}

TEST_CASE("streamline stops at the domain edge") {
  const auto u = make_vector(Sampling::spanning(5, 5), [](Vec2) { return Vec2{1.0, 0.0}; });
  const Vec2 seeds[] = {{0.1, 0.5}, {1.5, 0.5}};
  const auto lines = streamlines(u, seeds, 0.1, 1000);
  REQUIRE(lines.size() == 1);
  CHECK(lines[0].points.back().x <= 1.0);
  CHECK(lines[0].points.back().x > 0.85);
  CHECK_THROWS_AS(streamlines(u, seeds, 0.0, 10), InvalidParams);
}

TEST_CASE("rigid rotation keeps its radius over one revolution") {
  const auto u = make_vector(Sampling::spanning(9, 9), [](Vec2 p) { return Vec2{-(p.y - 0.5), p.x - 0.5}; });
  const int n = 2000;
  const double h = 2.0 * std::numbers::pi / n;
  const Vec2 seeds[] = {{0.8, 0.5}};
  const auto lines = streamlines(u, seeds, h, n);
  REQUIRE(lines.size() == 1);
  REQUIRE(lines[0].points.size() == static_cast<std::size_t>(n) + 1);
  double drift = 0.0;
  for (Vec2 p : lines[0].points) drift = std::max(drift, std::abs((p - Vec2{0.5, 0.5}).norm() - 0.3));
  CHECK(drift <= 1e-6);
  CHECK((lines[0].points.back() - seeds[0]).norm() <= 1e-6);
}

TEST_CASE("streamlines respect obstacles and stagnation") {
  auto u = make_vector(Sampling::spanning(11, 11), [](Vec2) { return Vec2{1.0, 0.0}; });
  u.solid.assign(u.ux.size(), 0);
  for (int j = 0; j < 11; ++j) u.solid[u.index(7, j)] = 1;
  const Vec2 seeds[] = {{0.7, 0.5}, {0.1, 0.5}};
  const auto lines = streamlines(u, seeds, 0.01, 1000);
  REQUIRE(lines.size() == 1);
  CHECK(lines[0].tag == 1.0);
  CHECK(lines[0].points.back().x < 0.65);

  const auto still = make_vector(Sampling::spanning(4, 4), [](Vec2) { return Vec2{}; });
  CHECK(streamlines(still, seeds, 0.01, 100).empty());
}

TEST_CASE("streamlines are tangent to the flow") {
  const auto u = make_vector(Sampling::spanning(65, 65), [](Vec2 p) {
    return Vec2{1.0, 0.4 * std::sin(2.0 * std::numbers::pi * p.x)};
  });
  const Vec2 seeds[] = {{0.05, 0.3}, {0.05, 0.6}};
  const auto lines = streamlines(u, seeds, 0.002, 2000);
  REQUIRE(lines.size() == 2);
  double worst = 0.0;
  for (const auto& l : lines) {
    for (std::size_t k = 1; k < l.points.size(); ++k) {
      const Vec2 chord = l.points[k] - l.points[k - 1];
      const Vec2 v = u.interpolate((l.points[k] + l.points[k - 1]) * 0.5);
      const double c = dot(chord, v) / (chord.norm() * v.norm());
      worst = std::max(worst, std::acos(std::min(1.0, c)) * 180.0 / std::numbers::pi);
    }
  }
  CHECK(worst <= 2.0);
}

TEST_CASE("streambands are two offset streamlines") {
  const auto u = make_vector(Sampling::spanning(5, 5), [](Vec2) { return Vec2{1.0, 0.0}; });
  const Vec2 seeds[] = {{0.1, 0.5}};
  const auto bands = streambands(u, seeds, 0.1, 0.01, 20);
  REQUIRE(bands.size() == 2);
  for (const auto& b : bands) CHECK(b.kind == PolylineKind::StreambandEdge);
  CHECK(std::abs(bands[0].points.front().y - bands[1].points.front().y) == doctest::Approx(0.1));
  CHECK(bands[0].points.back().x == doctest::Approx(0.3));
}

TEST_CASE("glyph sampling") {
  const auto zero = make_vector(Sampling::unit_cells(8, 8), [](Vec2) { return Vec2{}; });
  CHECK(glyphs(zero, 2).empty());
  const auto uniform = make_vector(Sampling::unit_cells(8, 8), [](Vec2) { return Vec2{0.3, 0.4}; });
  const auto g = glyphs(uniform, 4);
  REQUIRE(g.size() == 4);
  for (const auto& x : g) {
    CHECK(x.magnitude == doctest::Approx(0.5));
    CHECK(x.direction.norm() == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS(glyphs(uniform, 0), InvalidParams);
}

TEST_CASE("glyph magnitudes and tile union") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  auto u = make_vector(Sampling::unit_cells(30, 20), [&](Vec2) { return Vec2{d(rng), d(rng)}; });
  u.solid.assign(u.ux.size(), 0);
  u.solid[u.index(3, 3)] = 1;
  const int stride = 3;
  const auto all = glyphs(u, stride);
  std::size_t expected = 0;
  for (int j = 0; j < 20; j += stride) {
    for (int i = 0; i < 30; i += stride) expected += (i == 3 && j == 3) ? 0 : 1;
  }
  CHECK(all.size() == expected);
  for (const auto& g : all) {
    const int i = static_cast<int>(std::lround((g.anchor.x - u.grid.x0) / u.grid.dx));
    const int j = static_cast<int>(std::lround((g.anchor.y - u.grid.y0) / u.grid.dy));
    CHECK(g.magnitude == doctest::Approx(std::hypot(u.ux[u.index(i, j)], u.uy[u.index(i, j)])).epsilon(1e-15));
  }

  const partition::Rect tiles[] = {{0, 0, 13, 7}, {13, 0, 17, 7}, {0, 7, 5, 13}, {5, 7, 25, 13}};
  std::vector<Glyph> joined;
  for (const auto& t : tiles) {
    const auto part = glyphs(u, stride, t);
    joined.insert(joined.end(), part.begin(), part.end());
  }
  auto order = [](const Glyph& a, const Glyph& b) {
    return std::tie(a.anchor.x, a.anchor.y) < std::tie(b.anchor.x, b.anchor.y);
  };
  auto sorted_all = all;
  std::sort(sorted_all.begin(), sorted_all.end(), order);
  std::sort(joined.begin(), joined.end(), order);
  CHECK(joined == sorted_all);
}

TEST_CASE("lattice fields map onto the unit square") {
  lattice::MacroFields m(4, 2);
  lattice::FlagField flags = lattice::periodic_flags(4, 2);
  flags.at(1, 1).kind = lattice::CellKind::Obstacle;
  std::fill(m.ux.begin(), m.ux.end(), 0.08);
  std::fill(m.uy.begin(), m.uy.end(), 0.02);
  std::fill(m.rho.begin(), m.rho.end(), 1.0);
  const auto v = vector_field(m, flags);
  CHECK(v.grid.point(0, 0) == Vec2{0.125, 0.25});
  CHECK(v.ux[0] == doctest::Approx(0.02));
  CHECK(v.uy[0] == doctest::Approx(0.01));
  CHECK(v.is_solid(1, 1));
  const auto s = scalar_field(m, flags, lattice::FieldId::Rho);
  CHECK(s.at(3, 1) == 1.0);
  CHECK(s.is_solid(1, 1));
  const auto r = auto_range(s);
  CHECK(r.lo < r.hi);
}

TEST_CASE("polyline and glyph JSON") {
  const Polyline p{PolylineKind::StreambandEdge, 2.0, {{0.0, 1.0}, {0.5, 0.25}}};
  const nlohmann::json j = p;
  CHECK(j["kind"] == "streamband-edge");
  CHECK(j["tag"] == 2.0);
  CHECK(j["points"][1][0] == 0.5);
  const nlohmann::json g = Glyph{{0.1, 0.2}, {1.0, 0.0}, 3.0};
  CHECK(g["mag"] == 3.0);
  CHECK(g["dir"][0] == 1.0);
}

TEST_CASE("PPM output is upright RGB") {
  // 1x2 image: bottom row red, top row blue
  const std::vector<std::uint8_t> rgba{255, 0, 0, 255, 0, 0, 255, 255};
  std::ostringstream out;
  write_ppm(out, 1, 2, rgba);
  const std::string s = out.str();
  const std::string header = "P6\n1 2\n255\n";
  REQUIRE(s.size() == header.size() + 6);
  CHECK(s.substr(0, header.size()) == header);
  CHECK(static_cast<unsigned char>(s[header.size() + 2]) == 255); // blue first
  CHECK(static_cast<unsigned char>(s[header.size() + 3]) == 255); // then red
  CHECK_THROWS_AS(write_ppm(out, 2, 2, rgba), InvalidParams);
}
