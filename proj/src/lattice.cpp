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
#include "steerflow/lattice.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "steerflow/error.hpp"

namespace steerflow::lattice {

FluidParams::FluidParams() : FluidParams(0.8, {}, {0.05, 0.0}, 20.0, 0.05) {}

FluidParams::FluidParams(double tau, Vec2 body_force, Vec2 inflow_velocity,
                         double ambient_temp, double thermal_diffusivity)
    : tau_(tau),
      body_force_(body_force),
      inflow_velocity_(inflow_velocity),
      ambient_temp_(ambient_temp),
      thermal_diffusivity_(thermal_diffusivity) {
  if (!(tau > 0.5) || !std::isfinite(tau)) {
    throw InvalidParams("tau must exceed 0.5, got " + std::to_string(tau));
  }
  if (!(inflow_velocity.norm() < 0.3)) {
    throw InvalidParams("|inflow_velocity| must stay below 0.3 lattice units");
  }
  if (!(thermal_diffusivity > 0.0) || !std::isfinite(thermal_diffusivity)) {
    throw InvalidParams("thermal_diffusivity must be positive");
  }
  if (!std::isfinite(body_force.x) || !std::isfinite(body_force.y) ||
      !std::isfinite(ambient_temp)) {
    throw InvalidParams("non-finite fluid parameter");
  }
}

FluidParams FluidParams::with_body_force(Vec2 force) const {
  return {tau_, force, inflow_velocity_, ambient_temp_, thermal_diffusivity_};
}

FluidParams FluidParams::with_inflow_velocity(Vec2 velocity) const {
  return {tau_, body_force_, velocity, ambient_temp_, thermal_diffusivity_};
}

FluidParams FluidParams::with_ambient_temp(double celsius) const {
  return {tau_, body_force_, inflow_velocity_, celsius, thermal_diffusivity_};
}

const char* to_string(CellKind kind) {
  switch (kind) {
  case CellKind::Fluid: return "fluid";
  case CellKind::Obstacle: return "obstacle";
  case CellKind::Inflow: return "inflow";
  case CellKind::Outflow: return "outflow";
  case CellKind::Wall: return "wall";
  case CellKind::ThermalActive: return "thermal_active";
  }
  return "?";
}

FlagField::FlagField(int nx_, int ny_, CellFlag fill)
    : nx(nx_), ny(ny_), cells(static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_), fill) {
  if (nx_ <= 0 || ny_ <= 0) throw InvalidParams("flag field must be nonempty");
}

int FlagField::surface_count() const {
  int count = 0;
  for (const auto& c : cells) {
    if (c.kind == CellKind::ThermalActive) count = std::max(count, c.surface + 1);
  }
  return count;
}

FlagField periodic_flags(int nx, int ny) { return FlagField(nx, ny); }

DistributionGrid::DistributionGrid(std::shared_ptr<const FlagField> flags, int level)
    : flags_(std::move(flags)), level_(level) {
  f_.assign(flags_->size() * kQ, 0.0);
  g_.assign(flags_->size() * kQT, 0.0);
  surface_temps_.assign(static_cast<std::size_t>(flags_->surface_count()), ambient_temp_);
  for (std::size_t c = 0; c < flags_->size(); ++c) {
    for (int i = 0; i < kQ; ++i) f_[c * kQ + i] = kWeight[static_cast<std::size_t>(i)];
  }
}

bool DistributionGrid::operator==(const DistributionGrid& other) const {
  // bitwise population equality; NaN payloads compare by representation
  auto same_bits = [](const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
  };
  return *flags_ == *other.flags_ && time_ == other.time_ && level_ == other.level_ &&
         same_bits(f_, other.f_) && same_bits(g_, other.g_) &&
         same_bits(surface_temps_, other.surface_temps_);
}

MacroFields::MacroFields(int nx_, int ny_)
    : nx(nx_), ny(ny_),
      rho(static_cast<std::size_t>(nx_ * ny_), 1.0),
      ux(static_cast<std::size_t>(nx_ * ny_), 0.0),
      uy(static_cast<std::size_t>(nx_ * ny_), 0.0),
      temp(static_cast<std::size_t>(nx_ * ny_), 0.0) {}

const char* to_string(FieldId id) {
  switch (id) {
  case FieldId::Rho: return "rho";
  case FieldId::Ux: return "ux";
  case FieldId::Uy: return "uy";
  case FieldId::Temp: return "temp";
  case FieldId::Speed: return "speed";
  }
  return "?";
}

FieldId field_from_string(const std::string& name) {
  if (name == "rho" || name == "pressure") return FieldId::Rho;
  if (name == "ux") return FieldId::Ux;
  if (name == "uy") return FieldId::Uy;
  if (name == "temp" || name == "temperature") return FieldId::Temp;
  if (name == "speed" || name == "velocity") return FieldId::Speed;
  throw InvalidParams("unknown field '" + name + "'");
}

std::vector<double> extract(const MacroFields& macro, FieldId id) {
  switch (id) {
  case FieldId::Rho: return macro.rho;
  case FieldId::Ux: return macro.ux;
  case FieldId::Uy: return macro.uy;
  case FieldId::Temp: return macro.temp;
  case FieldId::Speed: {
    std::vector<double> out(macro.size());
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = std::hypot(macro.ux[c], macro.uy[c]);
    return out;
  }
  }
  return {};
}

double equilibrium(double rho, Vec2 u, int i) {
  const auto k = static_cast<std::size_t>(i);
  const double eu = kEx[k] * u.x + kEy[k] * u.y;
  const double uu = u.x * u.x + u.y * u.y;
  return kWeight[k] * rho * (1.0 + 3.0 * eu + 4.5 * eu * eu - 1.5 * uu);
}

double equilibrium_temp(double rho, double temp, Vec2 u, int i) {
  const auto k = static_cast<std::size_t>(i);
  const double eu = kExT[k] * u.x + kEyT[k] * u.y;
  return kWeightT[k] * rho * temp * (1.0 + 3.0 * eu);
}

void fill_equilibrium(DistributionGrid& grid, double rho, Vec2 u, double temp) {
  const FlagField& flags = grid.flags();
  for (std::size_t c = 0; c < flags.size(); ++c) {
    const bool solid = is_solid(flags.cells[c]);
    const Vec2 uc = solid ? Vec2{} : u;
    for (int i = 0; i < kQ; ++i) grid.f_at(c)[i] = equilibrium(solid ? 1.0 : rho, uc, i);
    for (int j = 0; j < kQT; ++j) grid.g_at(c)[j] = equilibrium_temp(solid ? 1.0 : rho, temp, uc, j);
  }
  std::fill(grid.surface_temps().begin(), grid.surface_temps().end(), temp);
  grid.set_ambient_temp(temp);
}

int StreamTable::boundary_neighbor_x(const FlagField& flags, int x, int y) {
  switch (flags.at(x, y).kind) {
  case CellKind::Inflow: return x + 1 < flags.nx ? x + 1 : x;
  case CellKind::Outflow: return x > 0 ? x - 1 : x;
  default: return x;
  }
}

StreamTable::StreamTable(const FlagField& flags)
    : modes_(flags.size()), f_src_(flags.size() * kQ), g_src_(flags.size() * kQT),
      neighbor_(flags.size(), -1) {
  auto source = [&](int x, int y, int ex, int ey) {
    const int sx = (x - ex + flags.nx) % flags.nx;
    const int sy = (y - ey + flags.ny) % flags.ny;
    return flags.index(sx, sy);
  };
  for (int y = 0; y < flags.ny; ++y) {
    for (int x = 0; x < flags.nx; ++x) {
      const auto c = static_cast<std::size_t>(flags.index(x, y));
      const CellFlag flag = flags.cells[c];
      if (is_solid(flag)) {
        modes_[c] = Mode::Keep;
      } else if (flag.kind == CellKind::Inflow || flag.kind == CellKind::Outflow) {
        modes_[c] = flag.kind == CellKind::Inflow ? Mode::Inflow : Mode::Outflow;
        const int nb = flags.index(boundary_neighbor_x(flags, x, y), y);
        if (!is_solid(flags.cells[static_cast<std::size_t>(nb)])) neighbor_[c] = nb;
      } else {
        modes_[c] = Mode::Pull;
      }
      for (std::size_t i = 0; i < kQ; ++i) {
        const int src = source(x, y, kEx[i], kEy[i]);
        f_src_[c * kQ + i] = is_solid(flags.cells[static_cast<std::size_t>(src)]) ? kBounce : src;
      }
      for (std::size_t j = 0; j < kQT; ++j) {
        const int src = source(x, y, kExT[j], kEyT[j]);
        const CellFlag sflag = flags.cells[static_cast<std::size_t>(src)];
        std::int32_t code = src;
        if (sflag.kind == CellKind::ThermalActive) code = -2 - static_cast<std::int32_t>(sflag.surface);
        else if (is_solid(sflag)) code = kBounce;
        g_src_[c * kQT + j] = code;
      }
    }
  }
}

namespace kernel {

void check_cell(const double* f, CellFlag flag, bool verify, int x, int y) {
  if (is_solid(flag)) return;
  double rho = 0.0;
  bool finite = true;
  bool nonnegative = true;
  for (int i = 0; i < kQ; ++i) {
    rho += f[i];
    finite = finite && std::isfinite(f[i]);
    nonnegative = nonnegative && f[i] >= 0.0;
  }
  if (!finite || !(rho > 0.0)) {
    std::ostringstream msg;
    msg << "unstable state at cell (" << x << ", " << y << "): rho=" << rho;
    throw NumericalBlowup(msg.str());
  }
  if (verify && !nonnegative) {
    std::ostringstream msg;
    msg << "negative population at cell (" << x << ", " << y << ")";
    throw NumericalBlowup(msg.str());
  }
}

} // namespace kernel

namespace {

struct Scratch {
  std::vector<double> post_f;
  std::vector<double> post_g;
};

void step_into(const DistributionGrid& in, DistributionGrid& out, const FluidParams& params,
               const StreamTable& table, const StepOptions& options, Scratch& scratch) {
  const FlagField& flags = in.flags();
  const std::size_t n = flags.size();
  scratch.post_f.resize(n * kQ);
  scratch.post_g.resize(n * kQT);
  double* pf = scratch.post_f.data();
  double* pg = scratch.post_g.data();
  for (std::size_t c = 0; c < n; ++c) {
    kernel::collide(in.f_at(c), in.g_at(c), flags.cells[c], params, pf + c * kQ, pg + c * kQT);
  }
  auto post_f = [pf](std::int32_t cell) { return pf + static_cast<std::size_t>(cell) * kQ; };
  auto post_g = [pg](std::int32_t cell) { return pg + static_cast<std::size_t>(cell) * kQT; };
  const std::span<const double> temps = in.surface_temps();
  for (std::size_t c = 0; c < n; ++c) {
    kernel::stream(c, table, temps, params, in.f_at(c), in.g_at(c), post_f, post_g, out.f_at(c),
                   out.g_at(c));
  }
  for (std::size_t c = 0; c < n; ++c) {
    const double* f = out.f_at(c);
    const double rho = f[0] + f[1] + f[2] + f[3] + f[4] + f[5] + f[6] + f[7] + f[8];
    if (options.verify || !(rho > 0.0) || !std::isfinite(rho)) {
      const int x = static_cast<int>(c % static_cast<std::size_t>(flags.nx));
      const int y = static_cast<int>(c / static_cast<std::size_t>(flags.nx));
      kernel::check_cell(f, flags.cells[c], options.verify, x, y);
    }
  }
  out.set_time(in.time() + 1);
}

} // namespace

DistributionGrid step(const DistributionGrid& grid, const FluidParams& params,
                      const StepOptions& options) {
  DistributionGrid out = grid;
  Scratch scratch;
  const StreamTable table(grid.flags());
  step_into(grid, out, params, table, options, scratch);
  return out;
}

void advance(DistributionGrid& grid, const FluidParams& params, int steps,
             const StepOptions& options) {
  if (steps <= 0) return;
  Scratch scratch;
  const StreamTable table(grid.flags());
  DistributionGrid other = grid;
  for (int s = 0; s < steps; ++s) {
    step_into(grid, other, params, table, options, scratch);
    std::swap(grid, other);
  }
}

namespace {

MacroFields compute_macro(const DistributionGrid& grid, Vec2 accel, double ambient) {
  const FlagField& flags = grid.flags();
  MacroFields m(flags.nx, flags.ny);
  for (std::size_t c = 0; c < flags.size(); ++c) {
    if (is_solid(flags.cells[c])) {
      m.rho[c] = 1.0;
      m.ux[c] = 0.0;
      m.uy[c] = 0.0;
      m.temp[c] = ambient;
      continue;
    }
    const double* f = grid.f_at(c);
    double rho = 0.0;
    double mx = 0.0;
    double my = 0.0;
    for (int i = 0; i < kQ; ++i) {
      const auto k = static_cast<std::size_t>(i);
      rho += f[i];
      mx += f[i] * kEx[k];
      my += f[i] * kEy[k];
    }
    m.rho[c] = rho;
    m.ux[c] = mx / rho + 0.5 * accel.x;
    m.uy[c] = my / rho + 0.5 * accel.y;
    const double* g = grid.g_at(c);
    double t = 0.0;
    for (int j = 0; j < kQT; ++j) t += g[j];
    m.temp[c] = t / rho;
  }
  return m;
}

} // namespace

MacroFields macroscopics(const DistributionGrid& grid) {
  return compute_macro(grid, {}, grid.ambient_temp());
}

MacroFields macroscopics(const DistributionGrid& grid, const FluidParams& params) {
  return compute_macro(grid, params.body_force(), params.ambient_temp());
}

double total_mass(const DistributionGrid& grid) {
  // Kahan-compensated
  double sum = 0.0;
  double comp = 0.0;
  const FlagField& flags = grid.flags();
  for (std::size_t c = 0; c < flags.size(); ++c) {
    if (is_solid(flags.cells[c])) continue;
    for (int i = 0; i < kQ; ++i) {
      const double y = grid.f_at(c)[i] - comp;
      const double t = sum + y;
      comp = (t - sum) - y;
      sum = t;
    }
  }
  return sum;
}

// --- field dumps ------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'S', 'T', 'L', 'B'};
constexpr std::uint32_t kDumpVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) throw IoError("truncated field dump header");
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

} // namespace

void write_field_dump(std::ostream& out, const FieldDump& dump) {
  if (dump.values.size() != static_cast<std::size_t>(dump.nx) * dump.ny) {
    throw IoError("field dump size mismatch");
  }
  if (static_cast<std::uint32_t>(dump.field) > 3) throw IoError("field id not dumpable");
  out.write(kMagic, 4);
  put_u32(out, kDumpVersion);
  put_u32(out, dump.nx);
  put_u32(out, dump.ny);
  put_u32(out, static_cast<std::uint32_t>(dump.field));
  for (double v : dump.values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xff);
    out.write(bytes, 8);
  }
  if (!out) throw IoError("failed writing field dump");
}

void write_field_dump(const std::string& path, const FieldDump& dump) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path);
  write_field_dump(out, dump);
}

FieldDump read_field_dump(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError("not a field dump (bad magic)");
  }
  if (get_u32(in) != kDumpVersion) throw IoError("unsupported field dump version");
  FieldDump dump;
  dump.nx = get_u32(in);
  dump.ny = get_u32(in);
  const std::uint32_t id = get_u32(in);
  if (id > 3) throw IoError("bad field id in dump");
  dump.field = static_cast<FieldId>(id);
  dump.values.resize(static_cast<std::size_t>(dump.nx) * dump.ny);
  for (double& v : dump.values) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw IoError("truncated field dump");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    v = std::bit_cast<double>(bits);
  }
  return dump;
}

FieldDump read_field_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_field_dump(in);
}

} // namespace steerflow::lattice
