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
#include <map>
#include <random>

#include "steerflow/error.hpp"
#include "steerflow/thermal.hpp"
#include "support.hpp"

using namespace steerflow;
using namespace steerflow::thermal;
using lattice::CellKind;

namespace {

Scene manikin_scene(double ambient, double inflow, int ny) {
  Scene s;
  s.boundary = BoundaryMode::Channel;
  s.params = lattice::FluidParams(0.8, {}, {inflow, 0.0}, ambient, 0.05);
  s.plan.base_nx = 2 * ny;
  s.plan.base_ny = ny;
  s.objects.push_back({"body", Shape::Circle, {0.4, 0.5}, {0.15, 0.15}, ObjectKind::Manikin});
  s.thermal.core_capacity = 6000.0;
  return s;
}

lattice::DistributionGrid grid_for(const Scene& s, double temp, Vec2 u) {
  lattice::DistributionGrid grid(testing::share(rasterize(s, s.plan.base_nx, s.plan.base_ny)));
  lattice::fill_equilibrium(grid, 1.0, u, temp);
  return grid;
}

} // namespace

TEST_CASE("comfort vote mapping") {
  CHECK(comfort_vote(33.7, 33.7, 1.0) == 0);
  CHECK(comfort_vote(33.7 + 3.5, 33.7, 1.0) == 3);
  CHECK(comfort_vote(33.7 - 3.5 * 0.5, 33.7, 0.5) == -3);
  CHECK(comfort_vote(32.2, 33.7, 1.0) == -2);
  CHECK_THROWS_AS(comfort_vote(30.0, 33.7, 0.0), InvalidParams);

  std::map<int, int> seen;
  int previous = -4;
  for (double t = 20.0; t <= 45.0; t += 0.01) {
    const int v = comfort_vote(t, 33.7, 1.0);
    CHECK(v >= previous);
    previous = v;
    ++seen[v];
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("surface samples of uniform states") {
  const Scene s = manikin_scene(25.0, 0.0, 24);
  const auto still = grid_for(s, 25.0, {});
  const auto samples = sample_surface(still, lattice::macroscopics(still));
  REQUIRE(samples.size() == static_cast<std::size_t>(s.thermal.patches_per_manikin));
  for (const auto& x : samples) {
    CHECK(x.area > 0);
    CHECK(x.speed == 0.0);
    CHECK(x.air_temp == doctest::Approx(25.0).epsilon(1e-14));
  }

  const auto moving = grid_for(s, 20.0, {0.05, 0.0});
  for (const auto& x : sample_surface(moving, lattice::macroscopics(moving))) {
    CHECK(x.speed == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(x.air_temp == doctest::Approx(20.0).epsilon(1e-14));
  }

  Scene empty = s;
  empty.objects.clear();
  const auto plain = grid_for(empty, 20.0, {});
  CHECK_THROWS_AS(sample_surface(plain, lattice::macroscopics(plain)), NoManikin);
}

TEST_CASE("surface samples average the touching fluid cells") {
  const Scene s = manikin_scene(20.0, 0.0, 32);
  const auto grid = grid_for(s, 20.0, {});
  const auto& flags = grid.flags();
  lattice::MacroFields m(flags.nx, flags.ny);
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> d(-0.1, 0.1), t(10.0, 30.0);
  for (std::size_t c = 0; c < m.size(); ++c) {
    m.rho[c] = 1.0;
    m.ux[c] = d(rng);
    m.uy[c] = d(rng);
    m.temp[c] = t(rng);
  }
  // Walk from the fluid side: every fluid cell adds itself once per patch
  // face it borders.
  const int patches = flags.surface_count();
  std::vector<double> speed(static_cast<std::size_t>(patches)), temp(speed.size()), count(speed.size());
  std::vector<int> area(speed.size());
  for (int y = 0; y < flags.ny; ++y) {
    for (int x = 0; x < flags.nx; ++x) {
      const auto cell = flags.at(x, y);
      if (cell.kind == CellKind::ThermalActive) ++area[cell.surface];
      if (!lattice::is_fluid(cell)) continue;
      const auto c = static_cast<std::size_t>(flags.index(x, y));
      const int dx[] = {1, -1, 0, 0}, dy[] = {0, 0, 1, -1};
      for (int k = 0; k < 4; ++k) {
        const auto other = flags.at(x + dx[k], y + dy[k]);
        if (other.kind != CellKind::ThermalActive) continue;
        speed[other.surface] += std::hypot(m.ux[c], m.uy[c]);
        temp[other.surface] += m.temp[c];
        count[other.surface] += 1.0;
      }
    }
  }
  const auto samples = sample_surface(grid, m);
  REQUIRE(samples.size() == static_cast<std::size_t>(patches));
  for (std::size_t p = 0; p < samples.size(); ++p) {
    REQUIRE(count[p] > 0.0);
    CHECK(samples[p].patch == static_cast<int>(p));
    CHECK(samples[p].area == area[p]);
    CHECK(samples[p].speed == doctest::Approx(speed[p] / count[p]).epsilon(1e-12));
    CHECK(samples[p].air_temp == doctest::Approx(temp[p] / count[p]).epsilon(1e-12));
  }
}

TEST_CASE("no temperature difference, no convective flux") {
  RegulatorState state = RegulatorState::initial(ThermalSettings{});
  const SurfaceSample samples[] = {{0, 0.0, state.skin, 5}, {1, 0.0, state.skin, 3}};
  const auto [response, next] = regulate(samples, state, 1.0);
  REQUIRE(response.patches.size() == 2);
  for (const auto& p : response.patches) CHECK(p.flux == 0.0);
  CHECK(response.flux_total == 0.0);
  CHECK(response.metabolic_total == doctest::Approx(8 * state.params.metabolic_rate));
  // only metabolic heating and core-skin exchange remain
  const auto& q = state.params;
  const double k = q.core_skin_conductance * (state.core - state.skin);
  CHECK(next.core == doctest::Approx(state.core + (q.metabolic_rate - k) / q.core_capacity).epsilon(1e-14));
  CHECK(next.skin == doctest::Approx(state.skin + k / q.skin_capacity).epsilon(1e-14));
  CHECK_THROWS_AS(regulate(samples, state, 0.0), InvalidParams);
}

TEST_CASE("regulator converges to the analytic fixed point in still air") {
  const ThermalSettings p{};
  RegulatorState state = RegulatorState::initial(p);
  const SurfaceSample samples[] = {{0, 0.0, 25.0, 4}, {1, 0.0, 25.0, 6}};
  SurfaceResponse last;
  double change = 1.0;
  int steps = 0;
  while (change >= 1e-9 && steps < 2000000) {
    auto [response, next] = regulate(samples, state, 10.0);
    change = std::max(std::abs(next.core - state.core), std::abs(next.skin - state.skin));
    state = next;
    last = std::move(response);
    ++steps;
  }
  CHECK(change < 1e-9);
  // steady state: M = K (core - skin) = h0 (skin - air)
  const double skin = 25.0 + p.metabolic_rate / p.h0;
  const double core = skin + p.metabolic_rate / p.core_skin_conductance;
  CHECK(state.skin == doctest::Approx(skin).epsilon(1e-6));
  CHECK(state.core == doctest::Approx(core).epsilon(1e-6));
  CHECK(std::abs(last.flux_total - last.metabolic_total) / last.metabolic_total <= 1e-6);
}

TEST_CASE("regulator leaving the envelope diverges") {
  RegulatorState state = RegulatorState::initial(ThermalSettings{});
  const SurfaceSample freezing[] = {{0, 0.1, -40.0, 10}};
  CHECK_THROWS_AS(
      [&] {
        for (int k = 0; k < 100000; ++k) state = regulate(freezing, state, 10.0).second;
      }(),
      ModelDiverged);
}

TEST_CASE("thermoneutral coupling stays neutral") {
  Scene s = manikin_scene(33.7, 0.0, 16);
  s.thermal.metabolic_rate = 0.0;
  s.thermal.initial_core = 33.7;
  s.thermal.initial_skin = 33.7;
  CouplingLoop loop(s);
  const auto last = loop.run(10, 40);
  CHECK(loop.exchanges() == 40);
  for (int v : last.votes) CHECK(v == 0);
  CHECK(std::abs(last.flux_total) <= 1e-9);
  CHECK(last.mean_skin == doctest::Approx(33.7).epsilon(1e-12));
}

TEST_CASE("cold draught cools the skin and agrees across exchange sizes") {
  const Scene s = manikin_scene(18.0, 0.05, 16);
  CouplingLoop coarse(s);
  const auto a = coarse.run(10, 5000, 1e-10);
  CouplingLoop fine(s);
  const auto b = fine.run(1, 50000, 1e-11);
  CHECK(a.max_change < 1e-10);
  CHECK(b.max_change < 1e-11);
  CHECK(a.mean_skin < s.thermal.neutral_skin);
  for (int v : a.votes) CHECK(v <= -1);
  CHECK(std::abs(a.mean_skin - b.mean_skin) <= 1e-4);
  CHECK(std::abs(a.mean_core - b.mean_core) <= 1e-4);
  for (const auto& r : {a.responses[0], b.responses[0]}) {
    CHECK(std::abs(r.flux_total - r.metabolic_total) / r.metabolic_total <= 1e-6);
  }
  // the patches run at the regulated skin temperature
  for (double t : coarse.grid().surface_temps()) CHECK(t == coarse.states()[0].skin);
}

TEST_CASE("coupling errors carry the exchange index") {
  Scene s = manikin_scene(-30.0, 0.05, 16);
  CouplingLoop loop(s);
  try {
    loop.run(10, 100000);
    FAIL("expected divergence");
  } catch (const ModelDiverged& e) {
    CHECK(std::string(e.what()).rfind("exchange ", 0) == 0);
  }
  Scene empty = s;
  empty.objects.clear();
  CHECK_THROWS_AS(CouplingLoop{empty}, NoManikin);
}

TEST_CASE("exchange log record") {
  Exchange e;
  e.index = 3;
  e.mean_skin = 30.5;
  e.mean_core = 36.0;
  e.flux_total = 12.0;
  e.votes = {-3, 0};
  const nlohmann::json j = e;
  CHECK(j["exchange"] == 3);
  CHECK(j["mean_skin_C"] == 30.5);
  CHECK(j["core_C"] == 36.0);
  CHECK(j["flux_total"] == 12.0);
  CHECK(j["votes"] == nlohmann::json::array({-3, 0}));
}
