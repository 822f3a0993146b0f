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
#include "steerflow/hierarchy.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "steerflow/error.hpp"

namespace steerflow::hierarchy {

using lattice::DistributionGrid;
using lattice::FlagField;
using lattice::FluidParams;
using lattice::MacroFields;

namespace {

double max_change(const FlagField& flags, const MacroFields& now, const MacroFields& previous) {
  if (previous.nx != now.nx || previous.ny != now.ny) throw InvalidParams("residual shape mismatch");
  double r = 0.0;
  for (std::size_t c = 0; c < flags.size(); ++c) {
    if (!lattice::is_fluid(flags.cells[c])) continue;
    r = std::max({r, std::abs(now.ux[c] - previous.ux[c]), std::abs(now.uy[c] - previous.uy[c])});
  }
  return r;
}

// Bilinear sample of a cell-centred field at fractional cell coordinates;
// outside the outermost centres the edge gradient is extended.
double sample(const std::vector<double>& v, int nx, int ny, double x, double y) {
  auto base = [](double p, int n) { return n < 2 ? 0 : std::clamp(static_cast<int>(std::floor(p)), 0, n - 2); };
  const int x0 = base(x, nx);
  const int y0 = base(y, ny);
  const int x1 = std::min(x0 + 1, nx - 1);
  const int y1 = std::min(y0 + 1, ny - 1);
  const double tx = nx < 2 ? 0.0 : x - x0;
  const double ty = ny < 2 ? 0.0 : y - y0;
  auto at = [&](int i, int j) { return v[static_cast<std::size_t>(j * nx + i)]; };
  const double lo = at(x0, y0) + tx * (at(x1, y0) - at(x0, y0));
  const double hi = at(x0, y1) + tx * (at(x1, y1) - at(x0, y1));
  return lo + ty * (hi - lo);
}

// Solid cells get the bounce-back image of their fluid neighbours so the
// interpolated velocity vanishes on the halfway wall plane: rho is copied,
// u negated, temp mirrored (Dirichlet patches reflect about their value).
MacroFields with_wall_images(const lattice::DistributionGrid& grid, MacroFields m) {
  const FlagField& flags = grid.flags();
  const MacroFields src = m;
  const auto& temps = grid.surface_temps();
  for (int y = 0; y < flags.ny; ++y) {
    for (int x = 0; x < flags.nx; ++x) {
      const auto c = static_cast<std::size_t>(flags.index(x, y));
      const lattice::CellFlag flag = flags.cells[c];
      if (lattice::is_fluid(flag)) continue;
      double rho = 0.0;
      double ux = 0.0;
      double uy = 0.0;
      double temp = 0.0;
      int n = 0;
      for (int reach : {1, 2}) { // axis neighbours first, then diagonals
        for (int i = 1; i < lattice::kQ; ++i) {
          if ((i <= 4) != (reach == 1)) continue;
          const int sx = x + lattice::kEx[static_cast<std::size_t>(i)];
          const int sy = y + lattice::kEy[static_cast<std::size_t>(i)];
          if (sx < 0 || sx >= flags.nx || sy < 0 || sy >= flags.ny) continue;
          const auto s = static_cast<std::size_t>(flags.index(sx, sy));
          if (!lattice::is_fluid(flags.cells[s])) continue;
          rho += src.rho[s];
          ux += src.ux[s];
          uy += src.uy[s];
          temp += src.temp[s];
          ++n;
        }
        if (n > 0) break;
      }
      if (n == 0) continue;
      m.rho[c] = rho / n;
      m.ux[c] = -ux / n;
      m.uy[c] = -uy / n;
      m.temp[c] = temp / n;
      if (flag.kind == lattice::CellKind::ThermalActive && flag.surface < temps.size()) {
        m.temp[c] = 2.0 * temps[flag.surface] - m.temp[c];
      }
    }
  }
  return m;
}

double since_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

} // namespace

double residual(const DistributionGrid& grid, const MacroFields& previous) {
  return max_change(grid.flags(), lattice::macroscopics(grid), previous);
}

double residual(const DistributionGrid& grid, const MacroFields& previous, const FluidParams& params) {
  return max_change(grid.flags(), lattice::macroscopics(grid, params), previous);
}

FluidParams level_params(const FluidParams& base, int level, int ratio) {
  if (level < 0 || ratio < 2) throw InvalidParams("level must be >= 0 and ratio >= 2");
  const double scale = std::pow(static_cast<double>(ratio), 2 * level);
  const Vec2 f = base.body_force();
  return base.with_body_force({f.x / scale, f.y / scale});
}

DistributionGrid prolongate(const DistributionGrid& coarse, const FluidParams& coarse_params, int ratio,
                            std::shared_ptr<const FlagField> fine_flags, const FluidParams& fine_params) {
  if (ratio < 2) throw InvalidParams("refinement ratio must be >= 2");
  if (!fine_flags || fine_flags->nx != coarse.nx() * ratio || fine_flags->ny != coarse.ny() * ratio) {
    throw InvalidParams("fine flags must be ratio times the coarse size");
  }
  const MacroFields m = with_wall_images(coarse, lattice::macroscopics(coarse, coarse_params));
  const int cnx = coarse.nx();
  const int cny = coarse.ny();
  DistributionGrid fine(fine_flags, coarse.level() + 1);
  fine.set_ambient_temp(coarse.ambient_temp());
  const FlagField& flags = *fine_flags;
  const Vec2 accel = fine_params.body_force();
  for (int y = 0; y < flags.ny; ++y) {
    const double cy = (y + 0.5) / ratio - 0.5;
    for (int x = 0; x < flags.nx; ++x) {
      const auto c = static_cast<std::size_t>(flags.index(x, y));
      if (lattice::is_solid(flags.cells[c])) {
        for (int i = 0; i < lattice::kQ; ++i) fine.f_at(c)[i] = lattice::equilibrium(1.0, {}, i);
        for (int j = 0; j < lattice::kQT; ++j) {
          fine.g_at(c)[j] = lattice::equilibrium_temp(1.0, coarse.ambient_temp(), {}, j);
        }
        continue;
      }
      const double cx = (x + 0.5) / ratio - 0.5;
      const double rho = sample(m.rho, cnx, cny, cx, cy);
      const Vec2 u{sample(m.ux, cnx, cny, cx, cy), sample(m.uy, cnx, cny, cx, cy)};
      const double temp = sample(m.temp, cnx, cny, cx, cy);
      // stored momentum excludes the half-step force contribution
      const Vec2 u_store{u.x - 0.5 * accel.x, u.y - 0.5 * accel.y};
      for (int i = 0; i < lattice::kQ; ++i) fine.f_at(c)[i] = lattice::equilibrium(rho, u_store, i);
      for (int j = 0; j < lattice::kQT; ++j) fine.g_at(c)[j] = lattice::equilibrium_temp(rho, temp, u, j);
    }
  }
  const auto& temps = coarse.surface_temps();
  auto& out = fine.surface_temps();
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = p < temps.size() ? temps[p] : coarse.ambient_temp();
  return fine;
}

DistributionGrid prolongate(const DistributionGrid& coarse, const Scene& scene, int ratio) {
  const int level = coarse.level();
  auto flags = std::make_shared<const FlagField>(rasterize(scene, coarse.nx() * ratio, coarse.ny() * ratio));
  return prolongate(coarse, level_params(scene.params, level, ratio), ratio, std::move(flags),
                    level_params(scene.params, level + 1, ratio));
}

DistributionGrid cold_start(const Scene& scene, int level) {
  const LevelPlan& plan = scene.plan;
  auto flags = std::make_shared<const FlagField>(rasterize(scene, plan.level_nx(level), plan.level_ny(level)));
  DistributionGrid grid(std::move(flags), level);
  const Vec2 u = scene.boundary == BoundaryMode::Channel ? scene.params.inflow_velocity() : Vec2{};
  lattice::fill_equilibrium(grid, 1.0, u, scene.params.ambient_temp());
  return grid;
}

std::optional<LevelResult> run_budgeted(const Scene& scene, const Sink& emit, const RunOptions& options) {
  const LevelPlan& plan = scene.plan;
  plan.validate();
  const auto start = std::chrono::steady_clock::now();
  const int cap = plan.step_cap();
  std::optional<LevelResult> last;

  for (int level = 0; level <= plan.max_level; ++level) {
    if (level > 0 && since_ms(start) >= plan.budget_ms) break;
    const FluidParams params = level_params(scene.params, level, plan.refinement_ratio);
    DistributionGrid grid = level == 0 || !options.warm_start
                                ? cold_start(scene, level)
                                : prolongate(*last->grid, scene, plan.refinement_ratio);
    std::optional<partition::PartitionedSolver> solver;
    if (options.runner) {
      const auto tree = partition::build_tree(grid.flags(), std::max(16, options.max_leaf_cells));
      solver.emplace(grid, partition::coalesce(tree, options.theta));
    }
    auto advance = [&](int n) {
      if (solver) {
        solver->advance(params, n, options.runner);
      } else {
        lattice::advance(grid, params, n);
      }
    };

    LevelResult result;
    result.level = level;
    result.params = params;
    result.residual = std::numeric_limits<double>::infinity();
    try {
      while (result.steps < cap) {
        if (options.stop.stop_requested()) return last;
        const int n = static_cast<int>(std::min<std::int64_t>(plan.steps_per_check, cap - result.steps));
        advance(n - 1);
        if (solver) grid = solver->gather();
        const MacroFields before = lattice::macroscopics(grid, params);
        advance(1);
        if (solver) grid = solver->gather();
        result.residual = residual(grid, before, params);
        result.steps += n;
        if (options.on_check) options.on_check(level, result.steps, result.residual);
        if (result.residual < plan.residual_threshold) {
          result.converged = true;
          break;
        }
        if (level > 0 && since_ms(start) >= plan.budget_ms) break;
      }
    } catch (const NumericalBlowup& e) {
      throw NumericalBlowup("level " + std::to_string(level) + ": " + e.what());
    }
    if (options.stop.stop_requested()) return last;
    result.elapsed_ms = since_ms(start);
    result.grid = std::make_shared<const DistributionGrid>(std::move(grid));
    emit(result);
    last = std::move(result);
  }
  return last;
}

} // namespace steerflow::hierarchy
