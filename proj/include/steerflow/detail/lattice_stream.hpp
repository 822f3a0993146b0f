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

// Included from lattice.hpp; not a standalone header.

namespace steerflow::lattice {
namespace kernel {

inline double density(const double* f) {
  return f[0] + f[1] + f[2] + f[3] + f[4] + f[5] + f[6] + f[7] + f[8];
}

inline void inflow_state(const FluidParams& params, const double* interior_f, double* f_out,
                         double* g_out) {
  const Vec2 u = params.inflow_velocity();
  const double rho = interior_f ? density(interior_f) : 1.0;
  for (int i = 0; i < kQ; ++i) f_out[i] = equilibrium(rho, u, i);
  for (int j = 0; j < kQT; ++j) g_out[j] = equilibrium_temp(rho, params.ambient_temp(), u, j);
}

inline void outflow_state(const double* interior_f, const double* interior_g, const FluidParams& params,
                          double* f_out, double* g_out) {
  Vec2 u{};
  double temp = params.ambient_temp();
  if (interior_f) {
    const double* f = interior_f;
    const double rho = density(f);
    u = {(f[1] - f[3] + f[5] - f[6] - f[7] + f[8]) / rho, (f[2] - f[4] + f[5] + f[6] - f[7] - f[8]) / rho};
    temp = (interior_g[0] + interior_g[1] + interior_g[2] + interior_g[3] + interior_g[4]) / rho;
  }
  for (int i = 0; i < kQ; ++i) f_out[i] = equilibrium(1.0, u, i);
  for (int j = 0; j < kQT; ++j) g_out[j] = equilibrium_temp(1.0, temp, u, j);
}

inline void collide(const double* f, const double* g, CellFlag flag, const FluidParams& params,
                    double* f_post, double* g_post) {
  if (is_solid(flag) || flag.kind == CellKind::Inflow || flag.kind == CellKind::Outflow) {
    for (int i = 0; i < kQ; ++i) f_post[i] = f[i];
    for (int j = 0; j < kQT; ++j) g_post[j] = g[j];
    return;
  }
  const double rho = density(f);
  const double mx = f[1] - f[3] + f[5] - f[6] - f[7] + f[8];
  const double my = f[2] - f[4] + f[5] + f[6] - f[7] - f[8];
  const Vec2 accel = params.body_force();
  const double fx = rho * accel.x;
  const double fy = rho * accel.y;
  const double inv_rho = 1.0 / rho;
  const double ux = (mx + 0.5 * fx) * inv_rho;
  const double uy = (my + 0.5 * fy) * inv_rho;
  const double omega = 1.0 / params.tau();
  const double uu = 1.5 * (ux * ux + uy * uy);
  const bool forced = fx != 0.0 || fy != 0.0;
  const double source_scale = 1.0 - 0.5 * omega;
  for (int i = 0; i < kQ; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double ex = kEx[k];
    const double ey = kEy[k];
    const double eu = ex * ux + ey * uy;
    const double feq = kWeight[k] * rho * (1.0 + 3.0 * eu + 4.5 * eu * eu - uu);
    double post = f[i] - omega * (f[i] - feq);
    if (forced) {
      // Guo forcing: w_i [3 (e_i - u) + 9 (e_i . u) e_i] . F
      const double sx = 3.0 * (ex - ux) + 9.0 * eu * ex;
      const double sy = 3.0 * (ey - uy) + 9.0 * eu * ey;
      post += source_scale * kWeight[k] * (sx * fx + sy * fy);
    }
    f_post[i] = post;
  }
  const double temp = g[0] + g[1] + g[2] + g[3] + g[4];
  const double omega_t = 1.0 / params.thermal_tau();
  for (int j = 0; j < kQT; ++j) {
    const auto k = static_cast<std::size_t>(j);
    const double eu = kExT[k] * ux + kEyT[k] * uy;
    const double geq = kWeightT[k] * temp * (1.0 + 3.0 * eu);
    g_post[j] = g[j] - omega_t * (g[j] - geq);
  }
}

template <class PostF, class PostG>
inline void stream(std::size_t cell, const StreamTable& table,
                   std::span<const double> surface_temps, const FluidParams& params,
                   const double* own_f, const double* own_g, PostF&& post_f, PostG&& post_g,
                   double* f_out, double* g_out) {
  switch (table.mode(cell)) {
  case StreamTable::Mode::Keep:
    for (int i = 0; i < kQ; ++i) f_out[i] = own_f[i];
    for (int j = 0; j < kQT; ++j) g_out[j] = own_g[j];
    return;
  case StreamTable::Mode::Inflow: {
    const std::int32_t nb = table.neighbor(cell);
    inflow_state(params, nb >= 0 ? post_f(nb) : nullptr, f_out, g_out);
    return;
  }
  case StreamTable::Mode::Outflow: {
    const std::int32_t nb = table.neighbor(cell);
    if (nb >= 0) outflow_state(post_f(nb), post_g(nb), params, f_out, g_out);
    else outflow_state(nullptr, nullptr, params, f_out, g_out);
    return;
  }
  case StreamTable::Mode::Pull:
    break;
  }
  const auto self = static_cast<std::int32_t>(cell);
  const double* self_f = post_f(self);
  const std::int32_t* fsrc = table.f_sources(cell);
  for (int i = 0; i < kQ; ++i) {
    const std::int32_t src = fsrc[i];
    f_out[i] = src >= 0 ? post_f(src)[i] : self_f[kOpposite[static_cast<std::size_t>(i)]];
  }
  const double* self_g = post_g(self);
  const double self_rho = density(self_f);
  const std::int32_t* gsrc = table.g_sources(cell);
  for (int j = 0; j < kQT; ++j) {
    const auto uj = static_cast<std::size_t>(j);
    const std::int32_t src = gsrc[j];
    if (src >= 0) {
      g_out[j] = post_g(src)[j];
    } else if (src == StreamTable::kBounce) {
      g_out[j] = self_g[kOppositeT[uj]];
    } else {
      // anti-bounce-back: wall temperature fixed halfway between cells
      const auto patch = static_cast<std::size_t>(-(src + 2));
      const double wall = patch < surface_temps.size() ? surface_temps[patch] : params.ambient_temp();
      g_out[j] = -self_g[kOppositeT[uj]] + 2.0 * kWeightT[uj] * self_rho * wall;
    }
  }
}

} // namespace kernel
} // namespace steerflow::lattice
