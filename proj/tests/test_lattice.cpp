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

#include <cmath>
#include <sstream>

#include "steerflow/error.hpp"
#include "steerflow/lattice.hpp"
#include "steerflow/scene.hpp"
#include "support.hpp"

using namespace steerflow;
using namespace steerflow::lattice;
using steerflow::testing::share;

TEST_CASE("fluid params reject unstable tau and supersonic inflow") {
  CHECK_THROWS_AS(FluidParams(0.5, {}, {}, 20.0, 0.05), InvalidParams);
  CHECK_THROWS_AS(FluidParams(0.3, {}, {}, 20.0, 0.05), InvalidParams);
  CHECK_THROWS_AS(FluidParams(0.8, {}, {0.3, 0.0}, 20.0, 0.05), InvalidParams);
  CHECK_THROWS_AS(FluidParams(0.8, {}, {0.25, 0.25}, 20.0, 0.05), InvalidParams);
  CHECK_NOTHROW(FluidParams(0.51, {}, {0.29, 0.0}, 20.0, 0.05));
}

TEST_CASE("equilibrium at rest equals the lattice weights") {
  CHECK(equilibrium(1.0, {0, 0}, 0) == doctest::Approx(4.0 / 9.0).epsilon(1e-15));
  CHECK(equilibrium(1.0, {0, 0}, 5) == doctest::Approx(1.0 / 36.0).epsilon(1e-15));
  for (int i = 1; i <= 4; ++i) CHECK(equilibrium(1.0, {0, 0}, i) == doctest::Approx(1.0 / 9.0));
}

TEST_CASE("equilibrium moments reproduce density and velocity") {
  // moment-summation oracle over the nine directions
  for (const Vec2 u : {Vec2{0.1, 0.0}, Vec2{-0.04, 0.07}, Vec2{0.0, 0.0}}) {
    for (const double rho : {1.0, 0.9, 1.2}) {
      double m0 = 0.0, mx = 0.0, my = 0.0;
      for (int i = 0; i < kQ; ++i) {
        const double f = equilibrium(rho, u, i);
        m0 += f;
        mx += f * kEx[static_cast<std::size_t>(i)];
        my += f * kEy[static_cast<std::size_t>(i)];
      }
      CHECK(std::abs(m0 - rho) < 1e-14);
      CHECK(std::abs(mx - rho * u.x) < 1e-14);
      CHECK(std::abs(my - rho * u.y) < 1e-14);
    }
  }
}

TEST_CASE("macroscopics of equilibrium state") {
  auto flags = share(periodic_flags(6, 5));
  DistributionGrid grid(flags);
  SUBCASE("weights give rest state") {
    const MacroFields m = macroscopics(grid);
    for (std::size_t c = 0; c < m.size(); ++c) {
      CHECK(m.rho[c] == doctest::Approx(1.0).epsilon(1e-15));
      CHECK(std::abs(m.ux[c]) < 1e-16);
      CHECK(std::abs(m.uy[c]) < 1e-16);
    }
  }
  SUBCASE("moment consistency") {
    fill_equilibrium(grid, 1.0, {0.1, 0.0}, 25.0);
    const MacroFields m = macroscopics(grid);
    for (std::size_t c = 0; c < m.size(); ++c) {
      CHECK(std::abs(m.rho[c] - 1.0) < 1e-14);
      CHECK(std::abs(m.ux[c] - 0.1) < 1e-14);
      CHECK(std::abs(m.uy[c]) < 1e-14);
      CHECK(std::abs(m.temp[c] - 25.0) < 1e-12);
    }
  }
  SUBCASE("obstacle cells report the fill value") {
    FlagField f = periodic_flags(6, 5);
    f.at(2, 2).kind = CellKind::Obstacle;
    DistributionGrid g2(share(f));
    fill_equilibrium(g2, 1.0, {0.1, 0.05}, 30.0);
    g2.set_ambient_temp(18.0);
    const MacroFields m = macroscopics(g2);
    const auto c = static_cast<std::size_t>(f.index(2, 2));
    CHECK(m.ux[c] == 0.0);
    CHECK(m.uy[c] == 0.0);
    CHECK(m.rho[c] == 1.0);
    CHECK(m.temp[c] == 18.0);
  }
}

TEST_CASE("equilibrium is a fixed point of step") {
  auto flags = share(periodic_flags(12, 9));
  DistributionGrid grid(flags);
  fill_equilibrium(grid, 1.0, {0.0, 0.0}, 20.0);
  for (const double tau : {0.55, 0.8, 1.0, 1.7}) {
    const FluidParams params(tau, {}, {}, 20.0, 0.05);
    const DistributionGrid next = step(grid, params);
    CHECK(next.time() == grid.time() + 1);
    for (std::size_t k = 0; k < grid.f().size(); ++k) {
      CHECK(std::abs(next.f()[k] - grid.f()[k]) <= 1e-14);
    }
  }
}

TEST_CASE("uniform moving equilibrium stays uniform on a periodic domain") {
  auto flags = share(periodic_flags(8, 8));
  DistributionGrid grid(flags);
  fill_equilibrium(grid, 1.0, {0.05, -0.02}, 20.0);
  const FluidParams params(0.9, {}, {}, 20.0, 0.05);
  DistributionGrid g = grid;
  advance(g, params, 20);
  const MacroFields m = macroscopics(g);
  for (std::size_t c = 0; c < m.size(); ++c) {
    CHECK(std::abs(m.ux[c] - 0.05) < 1e-13);
    CHECK(std::abs(m.uy[c] + 0.02) < 1e-13);
  }
}

TEST_CASE("periodic mass conservation over 1000 steps") {
  auto flags = share(periodic_flags(24, 20));
  DistributionGrid grid(flags);
  steerflow::testing::randomize(grid, 7);
  const FluidParams params(0.7, {}, {}, 20.0, 0.05);
  const double m0 = total_mass(grid);
  advance(grid, params, 1000);
  const double m1 = total_mass(grid);
  CHECK(std::abs(m1 - m0) / m0 <= 1e-10);
}

TEST_CASE("temperature is conserved on a periodic domain") {
  auto flags = share(periodic_flags(16, 16));
  DistributionGrid grid(flags);
  steerflow::testing::randomize(grid, 3);
  const FluidParams params(0.8, {}, {}, 20.0, 0.1);
  auto heat = [](const DistributionGrid& g) {
    double s = 0.0;
    for (double v : g.g()) s += v;
    return s;
  };
  const double h0 = heat(grid);
  advance(grid, params, 200);
  CHECK(std::abs(heat(grid) - h0) / h0 < 1e-11);
}

TEST_CASE("body-force channel approaches the analytic Poiseuille profile") {
  const int nx = 4;
  const int ny = 18;
  const double tau = 0.8;
  const Scene scene = steerflow::testing::poiseuille_scene(nx, ny, tau, 0.02);
  DistributionGrid grid(share(rasterize(scene, nx, ny)));
  fill_equilibrium(grid, 1.0, {}, 20.0);
  advance(grid, scene.params, 6000);
  const MacroFields m = macroscopics(grid, scene.params);
  const double force = scene.params.body_force().x;
  const double nu = (tau - 0.5) / 3.0;
  const double h = ny - 2.0;
  const double centre = 0.5 * (m.ux[static_cast<std::size_t>((ny / 2 - 1) * nx)] +
                               m.ux[static_cast<std::size_t>((ny / 2) * nx)]);
  // cell centres straddle the channel centre; compare with the analytic value there
  const double expected = steerflow::testing::poiseuille_exact(ny, tau, force, ny / 2);
  CHECK(centre == doctest::Approx(expected).epsilon(0.01));
  CHECK(force * h * h / (8.0 * nu) == doctest::Approx(0.02));
  CHECK(steerflow::testing::poiseuille_error(m, tau, force) < 0.01);
}

TEST_CASE("stepping is deterministic") {
  Scene scene;
  scene.objects.push_back({"c", Shape::Circle, {0.4, 0.5}, {0.15, 0.15}, ObjectKind::Obstacle});
  auto flags = share(rasterize(scene, 32, 24));
  DistributionGrid a(flags);
  fill_equilibrium(a, 1.0, {}, 20.0);
  DistributionGrid b = a;
  advance(a, scene.params, 50);
  advance(b, scene.params, 50);
  CHECK(a == b);
  CHECK(a.time() == 50);
}

TEST_CASE("channel flow with obstacle stays bounded") {
  Scene scene;
  scene.objects.push_back({"c", Shape::Circle, {0.3, 0.5}, {0.12, 0.12}, ObjectKind::Obstacle});
  auto flags = share(rasterize(scene, 48, 32));
  DistributionGrid grid(flags);
  fill_equilibrium(grid, 1.0, {}, 20.0);
  advance(grid, scene.params, 600, StepOptions{true});
  const MacroFields m = macroscopics(grid, scene.params);
  double umax = 0.0;
  for (std::size_t c = 0; c < m.size(); ++c) umax = std::max(umax, std::hypot(m.ux[c], m.uy[c]));
  CHECK(umax > 0.02);
  CHECK(umax < 0.2);
}

TEST_CASE("open channel settles to a steady through-flow") {
  Scene scene;
  scene.params = FluidParams(0.8, {}, {0.05, 0.0}, 18.0, 0.05);
  const int nx = 48, ny = 24;
  auto flags = share(rasterize(scene, nx, ny));
  DistributionGrid grid(flags);
  fill_equilibrium(grid, 1.0, {}, 18.0);
  advance(grid, scene.params, 6000);
  const MacroFields m = macroscopics(grid, scene.params);

  // Mass flux through every column equals the inflow flux.
  const double inflow = m.rho[static_cast<std::size_t>(ny / 2 * nx + 1)] * 0.05 * (ny - 2);
  for (int x = 1; x < nx - 1; ++x) {
    double flux = 0.0;
    for (int y = 1; y < ny - 1; ++y) {
      const auto c = static_cast<std::size_t>(y * nx + x);
      flux += m.rho[c] * m.ux[c];
    }
    CHECK(flux == doctest::Approx(inflow).epsilon(0.02));
  }
  for (std::size_t c = 0; c < m.size(); ++c) {
    if (!is_fluid(flags->cells[c])) continue;
    CHECK(m.rho[c] == doctest::Approx(1.0).epsilon(0.05));
    // no heat source: the inflow temperature persists
    CHECK(m.temp[c] == doctest::Approx(18.0).epsilon(0.02));
  }
  // Developed profile is faster on the centreline than at the inlet.
  CHECK(m.ux[static_cast<std::size_t>(ny / 2 * nx + nx - 2)] > 0.06);
}

TEST_CASE("unstable parameters raise NumericalBlowup") {
  auto flags = share(periodic_flags(16, 16));
  DistributionGrid grid(flags);
  steerflow::testing::randomize(grid, 11);
  // a violent shear at tau barely above 1/2 diverges within a few hundred steps
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      const auto c = static_cast<std::size_t>(y * 16 + x);
      const Vec2 u{y < 8 ? 0.29 : -0.29, x % 2 ? 0.2 : -0.2};
      for (int i = 0; i < kQ; ++i) grid.f_at(c)[i] = equilibrium(1.0, u, i);
    }
  }
  const FluidParams params(0.5000001, {}, {}, 20.0, 0.05);
  CHECK_THROWS_AS(advance(grid, params, 5000), NumericalBlowup);
}

TEST_CASE("rasterize follows the channel convention") {
  Scene scene;
  const FlagField f = rasterize(scene, 8, 8);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      const CellKind k = f.at(x, y).kind;
      if (y == 0 || y == 7) CHECK(k == CellKind::Wall);
      else if (x == 0) CHECK(k == CellKind::Inflow);
      else if (x == 7) CHECK(k == CellKind::Outflow);
      else CHECK(k == CellKind::Fluid);
    }
  }
}

TEST_CASE("rasterized circle matches brute-force cell-centre count") {
  Scene scene;
  scene.objects.push_back({"c", Shape::Circle, {0.5, 0.5}, {0.25, 0.25}, ObjectKind::Obstacle});
  const FlagField f = rasterize(scene, 16, 16);
  int brute = 0;
  for (int y = 1; y < 15; ++y) {
    for (int x = 1; x < 15; ++x) {
      const double dx = (x + 0.5) / 16.0 - 0.5;
      const double dy = (y + 0.5) / 16.0 - 0.5;
      if (dx * dx + dy * dy <= 0.0625) ++brute;
    }
  }
  int count = 0;
  for (const auto& c : f.cells) count += c.kind == CellKind::Obstacle;
  CHECK(count == brute);
  CHECK(brute == 52);
}

TEST_CASE("rect covering the whole domain fills the interior") {
  Scene scene;
  scene.objects.push_back({"r", Shape::Rect, {0.5, 0.5}, {1.0, 1.0}, ObjectKind::Obstacle});
  const FlagField f = rasterize(scene, 10, 10);
  for (int y = 1; y < 9; ++y) {
    for (int x = 1; x < 9; ++x) CHECK(f.at(x, y).kind == CellKind::Obstacle);
  }
  CHECK(f.at(0, 5).kind == CellKind::Inflow);
}

TEST_CASE("degenerate objects are rejected") {
  Scene scene;
  scene.objects.push_back({"z", Shape::Circle, {0.5, 0.5}, {0.0, 0.0}, ObjectKind::Obstacle});
  CHECK_THROWS_AS(rasterize(scene, 16, 16), DegenerateGeometry);
  scene.objects[0] = {"r", Shape::Rect, {0.5, 0.5}, {0.2, -0.1}, ObjectKind::Obstacle};
  CHECK_THROWS_AS(rasterize(scene, 16, 16), DegenerateGeometry);
}

TEST_CASE("manikin boundary becomes thermally active patches") {
  Scene scene;
  scene.boundary = BoundaryMode::Periodic;
  scene.objects.push_back({"m", Shape::Circle, {0.5, 0.5}, {0.2, 0.2}, ObjectKind::Manikin});
  const FlagField f = rasterize(scene, 32, 32);
  int active = 0;
  int interior = 0;
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      const CellFlag c = f.at(x, y);
      if (c.kind == CellKind::ThermalActive) {
        ++active;
        CHECK(c.surface < 4);
        // one-cell-thick: some 4-neighbour is outside the object
        bool touches_outside = false;
        for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
          const CellKind k = f.at(x + dx, y + dy).kind;
          touches_outside = touches_outside || k == CellKind::Fluid;
        }
        CHECK(touches_outside);
      } else if (c.kind == CellKind::Obstacle) {
        ++interior;
      }
    }
  }
  CHECK(active > 0);
  CHECK(interior > 0);
  CHECK(f.surface_count() == 4);
}

TEST_CASE("field dump layout is bit-exact") {
  FieldDump dump{3, 2, FieldId::Ux, {1.0, -2.5, 0.0, 3.25, 1e-300, -0.0}};
  std::stringstream buf;
  write_field_dump(buf, dump);
  const std::string bytes = buf.str();
  REQUIRE(bytes.size() == 4 + 16 + 6 * 8);
  CHECK(bytes.substr(0, 4) == "STLB");
  CHECK(bytes[4] == 1);
  CHECK(bytes[8] == 3);
  CHECK(bytes[12] == 2);
  CHECK(bytes[16] == 1);
  // 1.0 is 0x3FF0000000000000, little-endian
  CHECK(static_cast<unsigned char>(bytes[20 + 7]) == 0x3F);
  CHECK(static_cast<unsigned char>(bytes[20 + 6]) == 0xF0);
  const FieldDump back = read_field_dump(buf);
  CHECK(back.nx == 3);
  CHECK(back.ny == 2);
  CHECK(back.field == FieldId::Ux);
  CHECK(back.values == dump.values);
  CHECK(std::signbit(back.values[5]));

  std::stringstream bad("XXXX");
  CHECK_THROWS_AS(read_field_dump(bad), IoError);
}
