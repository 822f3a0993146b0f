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

// Test-only helpers: analytic reference solutions and scene builders. Nothing
// in here calls into the code paths the tests are checking.

#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "steerflow/lattice.hpp"
#include "steerflow/scene.hpp"

namespace steerflow::testing {

// Body force that gives a centreline velocity `umax` in a walled channel of
// `ny` rows (two wall rows, halfway bounce-back).
inline double poiseuille_force(int ny, double tau, double umax) {
  const double nu = (tau - 0.5) / 3.0;
  const double h = ny - 2.0;
  return 8.0 * nu * umax / (h * h);
}

// Analytic velocity at row y (cell index) for `wall` solid rows at the top
// and bottom; the no-slip planes lie halfway between solid and fluid rows.
inline double poiseuille_exact(int ny, double tau, double force, int y, int wall = 1) {
  const double nu = (tau - 0.5) / 3.0;
  const double lo = wall - 0.5;
  const double hi = ny - wall - 0.5;
  return force / (2.0 * nu) * (y - lo) * (hi - y);
}

inline Scene poiseuille_scene(int nx, int ny, double tau, double umax) {
  Scene scene;
  scene.boundary = BoundaryMode::WalledPeriodic;
  scene.params = lattice::FluidParams(tau, {poiseuille_force(ny, tau, umax), 0.0}, {0.0, 0.0},
                                      20.0, 0.05);
  scene.plan.base_nx = nx;
  scene.plan.base_ny = ny;
  return scene;
}

// Relative L2 error of the ux profile in column `x` against the analytic
// solution for the given force.
inline double poiseuille_error(const lattice::MacroFields& m, double tau, double force, int x = 0,
                               int wall = 1) {
  double num = 0.0;
  double den = 0.0;
  for (int y = wall; y < m.ny - wall; ++y) {
    const double exact = poiseuille_exact(m.ny, tau, force, y, wall);
    const double u = m.ux[static_cast<std::size_t>(y * m.nx + x)];
    num += (u - exact) * (u - exact);
    den += exact * exact;
  }
  return std::sqrt(num / den);
}

inline std::shared_ptr<const lattice::FlagField> share(lattice::FlagField flags) {
  return std::make_shared<const lattice::FlagField>(std::move(flags));
}

// Random but valid populations: equilibrium of a random small velocity and
// density, perturbed by a few percent.
inline void randomize(lattice::DistributionGrid& grid, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> rho_dist(0.95, 1.05);
  std::uniform_real_distribution<double> u_dist(-0.05, 0.05);
  std::uniform_real_distribution<double> jitter(0.98, 1.02);
  std::uniform_real_distribution<double> temp_dist(15.0, 30.0);
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    const double rho = rho_dist(rng);
    const Vec2 u{u_dist(rng), u_dist(rng)};
    for (int i = 0; i < lattice::kQ; ++i) grid.f_at(c)[i] = lattice::equilibrium(rho, u, i) * jitter(rng);
    const double t = temp_dist(rng);
    for (int j = 0; j < lattice::kQT; ++j) grid.g_at(c)[j] = lattice::equilibrium_temp(rho, t, u, j) * jitter(rng);
  }
}

} // namespace steerflow::testing
