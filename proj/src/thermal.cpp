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
#include "steerflow/thermal.hpp"

#include <algorithm>
#include <cmath>

#include "steerflow/error.hpp"

namespace steerflow::thermal {

using lattice::CellKind;
using lattice::DistributionGrid;

namespace {

constexpr double kEnvelopeLo = 20.0;
constexpr double kEnvelopeHi = 45.0;

bool in_envelope(double t) { return std::isfinite(t) && t >= kEnvelopeLo && t <= kEnvelopeHi; }

} // namespace

std::vector<SurfaceSample> sample_surface(const DistributionGrid& grid, const lattice::MacroFields& macro) {
  const auto& flags = grid.flags();
  const int patches = flags.surface_count();
  if (patches == 0) throw NoManikin("the scene has no thermally active surface");
  if (macro.nx != flags.nx || macro.ny != flags.ny) throw InvalidParams("field and grid differ in shape");

  std::vector<SurfaceSample> out(static_cast<std::size_t>(patches));
  std::vector<double> weight(out.size(), 0.0);
  for (int p = 0; p < patches; ++p) out[static_cast<std::size_t>(p)].patch = p;
  for (int y = 0; y < flags.ny; ++y) {
    for (int x = 0; x < flags.nx; ++x) {
      const auto cell = flags.at(x, y);
      if (cell.kind != CellKind::ThermalActive) continue;
      auto& s = out[cell.surface];
      ++s.area;
      for (int k = 1; k < lattice::kQT; ++k) {
        const int nx = (x + lattice::kExT[static_cast<std::size_t>(k)] + flags.nx) % flags.nx;
        const int ny = (y + lattice::kEyT[static_cast<std::size_t>(k)] + flags.ny) % flags.ny;
        if (!lattice::is_fluid(flags.at(nx, ny))) continue;
        const auto c = static_cast<std::size_t>(flags.index(nx, ny));
        s.speed += std::hypot(macro.ux[c], macro.uy[c]);
        s.air_temp += macro.temp[c];
        weight[cell.surface] += 1.0;
      }
    }
  }
  for (std::size_t p = 0; p < out.size(); ++p) {
    if (weight[p] > 0.0) {
      out[p].speed /= weight[p];
      out[p].air_temp /= weight[p];
    } else {
      // Enclosed patch: no air contact, hence no exchange.
      out[p].air_temp = p < grid.surface_temps().size() ? grid.surface_temps()[p] : grid.ambient_temp();
    }
  }
  return out;
}

double convection_coefficient(const ThermalSettings& s, double speed) {
  return s.h0 * (1.0 + s.velocity_gain * speed);
}

std::pair<SurfaceResponse, RegulatorState> regulate(std::span<const SurfaceSample> samples,
                                                    const RegulatorState& state, double dt) {
  if (!(dt > 0.0)) throw InvalidParams("regulator step must be positive");
  const ThermalSettings& s = state.params;
  SurfaceResponse response;
  double area = 0.0;
  for (const auto& sample : samples) {
    const double q = convection_coefficient(s, sample.speed) * (state.skin - sample.air_temp);
    response.patches.push_back({sample.patch, 0.0, q});
    response.flux_total += sample.area * q;
    area += sample.area;
  }
  response.metabolic_total = s.metabolic_rate * area;
  const double skin_loss = area > 0.0 ? response.flux_total / area : 0.0;
  const double core_to_skin = s.core_skin_conductance * (state.core - state.skin);

  RegulatorState next = state;
  next.core = state.core + dt * (s.metabolic_rate - core_to_skin) / s.core_capacity;
  next.skin = state.skin + dt * (core_to_skin - skin_loss) / s.skin_capacity;
  if (!in_envelope(next.core) || !in_envelope(next.skin)) {
    throw ModelDiverged("regulator left the operating envelope (core " + std::to_string(next.core) +
                        " C, skin " + std::to_string(next.skin) + " C)");
  }
  for (auto& p : response.patches) p.surface_temp = next.skin;
  return {std::move(response), next};
}

int comfort_vote(double skin_temp, double neutral, double half_width) {
  if (!(half_width > 0.0)) throw InvalidParams("half_width must be positive");
  const double v = std::round((skin_temp - neutral) / half_width);
  return static_cast<int>(std::clamp(v, -3.0, 3.0));
}

void to_json(nlohmann::json& j, const Exchange& e) {
  j = {{"exchange", e.index},   {"mean_skin_C", e.mean_skin}, {"core_C", e.mean_core},
       {"flux_total", e.flux_total}, {"votes", e.votes}};
}

namespace {

DistributionGrid initial_grid(const Scene& scene, int level) {
  auto flags = std::make_shared<const lattice::FlagField>(
      rasterize(scene, scene.plan.level_nx(level), scene.plan.level_ny(level)));
  DistributionGrid grid(flags, level);
  lattice::fill_equilibrium(grid, 1.0, {}, scene.params.ambient_temp());
  return grid;
}

} // namespace

CouplingLoop::CouplingLoop(const Scene& scene, int level)
    : CouplingLoop(scene, initial_grid(scene, level), scene.params) {}

CouplingLoop::CouplingLoop(const Scene& scene, DistributionGrid grid, const lattice::FluidParams& params)
    : settings_(scene.thermal), params_(params), grid_(std::move(grid)) {
  const int patches = grid_.flags().surface_count();
  if (patches == 0) throw NoManikin("the scene has no manikin");
  const int per = settings_.patches_per_manikin;
  states_.assign(static_cast<std::size_t>((patches + per - 1) / per), RegulatorState::initial(settings_));
  apply_surface_temps();
}

void CouplingLoop::apply_surface_temps() {
  auto& temps = grid_.surface_temps();
  const int per = settings_.patches_per_manikin;
  for (std::size_t p = 0; p < temps.size(); ++p) temps[p] = states_[p / static_cast<std::size_t>(per)].skin;
}

Exchange CouplingLoop::step(int n_cfd_steps) {
  if (n_cfd_steps < 1) throw InvalidParams("n_cfd_steps must be >= 1");
  const int index = exchanges_;
  const std::string tag = "exchange " + std::to_string(index) + ": ";
  Exchange ex;
  ex.index = index;
  try {
    lattice::advance(grid_, params_, n_cfd_steps);
    const auto samples = sample_surface(grid_, lattice::macroscopics(grid_, params_));
    const auto per = static_cast<std::size_t>(settings_.patches_per_manikin);
    const double dt = n_cfd_steps * settings_.seconds_per_step;
    for (std::size_t m = 0; m < states_.size(); ++m) {
      const std::span<const SurfaceSample> mine(samples.begin() + static_cast<std::ptrdiff_t>(m * per),
                                                samples.begin() + static_cast<std::ptrdiff_t>(std::min(samples.size(), (m + 1) * per)));
      auto [response, next] = regulate(mine, states_[m], dt);
      ex.max_change = std::max({ex.max_change, std::abs(next.core - states_[m].core),
                                std::abs(next.skin - states_[m].skin)});
      ex.flux_total += response.flux_total;
      ex.votes.push_back(comfort_vote(next.skin, settings_.neutral_skin, settings_.vote_half_width));
      ex.mean_skin += next.skin / static_cast<double>(states_.size());
      ex.mean_core += next.core / static_cast<double>(states_.size());
      ex.responses.push_back(std::move(response));
      states_[m] = next;
    }
  } catch (const NumericalBlowup& e) {
    throw NumericalBlowup(tag + e.what());
  } catch (const ModelDiverged& e) {
    throw ModelDiverged(tag + e.what());
  }
  ex.states = states_;
  apply_surface_temps();
  ++exchanges_;
  return ex;
}

Exchange CouplingLoop::run(int n_cfd_steps, int max_exchanges, double tolerance,
                           const std::function<void(const Exchange&)>& on_exchange) {
  if (max_exchanges < 1) throw InvalidParams("max_exchanges must be >= 1");
  Exchange last;
  for (int k = 0; k < max_exchanges; ++k) {
    last = step(n_cfd_steps);
    if (on_exchange) on_exchange(last);
    if (last.max_change < tolerance) break;
  }
  return last;
}

} // namespace steerflow::thermal
