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
#include "steerflow/partition.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

#include "steerflow/error.hpp"

namespace steerflow::partition {

using lattice::FlagField;
using lattice::kQ;
using lattice::kQT;

int shared_edge(const Rect& a, const Rect& b) noexcept {
  auto overlap = [](int a0, int a1, int b0, int b1) { return std::max(0, std::min(a1, b1) - std::max(a0, b0)); };
  if (a.x0 + a.w == b.x0 || b.x0 + b.w == a.x0) return overlap(a.y0, a.y0 + a.h, b.y0, b.y0 + b.h);
  if (a.y0 + a.h == b.y0 || b.y0 + b.h == a.y0) return overlap(a.x0, a.x0 + a.w, b.x0, b.x0 + b.w);
  return 0;
}

PartitionTree::PartitionTree(Rect domain) {
  if (domain.w <= 0 || domain.h <= 0) throw InvalidParams("partition domain must be nonempty");
  Node root;
  root.rect = domain;
  nodes_.push_back(root);
}

int PartitionTree::split(int index, Axis axis, int position) {
  Node& parent = nodes_.at(static_cast<std::size_t>(index));
  if (!parent.is_leaf()) throw InvalidParams("node already split");
  const Rect r = parent.rect;
  Rect lo = r;
  Rect hi = r;
  if (axis == Axis::X) {
    if (position <= r.x0 || position >= r.x0 + r.w) throw InvalidParams("split outside node");
    lo.w = position - r.x0;
    hi.x0 = position;
    hi.w = r.x0 + r.w - position;
  } else {
    if (position <= r.y0 || position >= r.y0 + r.h) throw InvalidParams("split outside node");
    lo.h = position - r.y0;
    hi.y0 = position;
    hi.h = r.y0 + r.h - position;
  }
  const int first = size();
  parent.axis = axis;
  parent.split = position;
  parent.left = first;
  parent.right = first + 1;
  const int depth = parent.depth + 1;
  Node a;
  a.rect = lo;
  a.parent = index;
  a.depth = depth;
  Node b = a;
  b.rect = hi;
  nodes_.push_back(a);
  nodes_.push_back(b);
  return first;
}

void PartitionTree::annotate(const FlagField& flags, int flops_per_cell) {
  for (int i : post_order()) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.is_leaf()) {
      std::int64_t fluid = 0;
      for (int y = n.rect.y0; y < n.rect.y0 + n.rect.h; ++y) {
        for (int x = n.rect.x0; x < n.rect.x0 + n.rect.w; ++x) fluid += lattice::is_fluid(flags.at(x, y));
      }
      n.fluid_cells = fluid;
    } else {
      n.fluid_cells = nodes_[static_cast<std::size_t>(n.left)].fluid_cells +
                      nodes_[static_cast<std::size_t>(n.right)].fluid_cells;
    }
    n.work = static_cast<double>(n.fluid_cells) * flops_per_cell;
  }
}

std::vector<int> PartitionTree::leaves() const {
  std::vector<int> out;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.is_leaf()) {
      out.push_back(i);
    } else {
      stack.push_back(n.right);
      stack.push_back(n.left);
    }
  }
  return out;
}

int PartitionTree::leaf_count() const {
  return static_cast<int>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_leaf(); }));
}

int PartitionTree::height() const {
  int h = 0;
  for (const Node& n : nodes_) h = std::max(h, n.depth);
  return h;
}

std::vector<int> PartitionTree::post_order() const {
  std::vector<int> out;
  if (nodes_.empty()) return out;
  std::vector<std::pair<int, bool>> stack{{0, false}};
  while (!stack.empty()) {
    auto [i, expanded] = stack.back();
    stack.pop_back();
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.is_leaf() || expanded) {
      out.push_back(i);
    } else {
      stack.push_back({i, true});
      stack.push_back({n.right, false});
      stack.push_back({n.left, false});
    }
  }
  return out;
}

bool PartitionTree::operator==(const PartitionTree& other) const {
  if (nodes_.size() != other.nodes_.size()) return false;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& a = nodes_[i];
    const Node& b = other.nodes_[i];
    if (!(a.rect == b.rect) || a.left != b.left || a.right != b.right || a.axis != b.axis ||
        a.split != b.split || a.fluid_cells != b.fluid_cells || a.work != b.work) {
      return false;
    }
  }
  return true;
}

PartitionTree build_tree(const FlagField& flags, int max_leaf_cells, int flops_per_cell) {
  if (max_leaf_cells < 16) throw InvalidParams("max_leaf_cells must be at least 16");
  PartitionTree tree(Rect{0, 0, flags.nx, flags.ny});
  std::vector<int> pending{0};
  while (!pending.empty()) {
    const int i = pending.back();
    pending.pop_back();
    const Rect r = tree.node(i).rect;
    if (r.cells() <= max_leaf_cells) continue;
    const Axis axis = r.w >= r.h ? Axis::X : Axis::Y;
    const int position = axis == Axis::X ? r.x0 + r.w / 2 : r.y0 + r.h / 2;
    const int lo = tree.split(i, axis, position);
    pending.push_back(lo + 1);
    pending.push_back(lo);
  }
  tree.annotate(flags, flops_per_cell);
  return tree;
}

double estimate_work(const PartitionTree& tree, int node, int flops_per_cell) {
  return static_cast<double>(tree.node(node).fluid_cells) * flops_per_cell;
}

bool TaskSpec::contains(int x, int y) const noexcept {
  return std::any_of(rects.begin(), rects.end(), [&](const Rect& r) { return r.contains(x, y); });
}

void compute_halos(std::vector<TaskSpec>& tasks) {
  for (auto& t : tasks) t.halo.clear();
  for (std::size_t a = 0; a < tasks.size(); ++a) {
    for (std::size_t b = a + 1; b < tasks.size(); ++b) {
      int shared = 0;
      for (const Rect& ra : tasks[a].rects) {
        for (const Rect& rb : tasks[b].rects) shared += shared_edge(ra, rb);
      }
      if (shared > 0) {
        tasks[a].halo.push_back({tasks[b].id, shared});
        tasks[b].halo.push_back({tasks[a].id, shared});
      }
    }
  }
  for (auto& t : tasks) {
    std::sort(t.halo.begin(), t.halo.end(), [](const HaloEdge& x, const HaloEdge& y) { return x.neighbor < y.neighbor; });
  }
}

std::vector<TaskSpec> leaf_tasks(const PartitionTree& tree) {
  std::vector<TaskSpec> tasks;
  for (int leaf : tree.leaves()) {
    const Node& n = tree.node(leaf);
    TaskSpec t;
    t.id = static_cast<int>(tasks.size());
    t.rects = {n.rect};
    t.cells = n.rect.cells();
    t.fluid_cells = n.fluid_cells;
    t.work = n.work;
    tasks.push_back(std::move(t));
  }
  compute_halos(tasks);
  return tasks;
}

std::vector<TaskSpec> coalesce(const PartitionTree& tree, double theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) throw InvalidParams("theta must lie in [0, 1]");
  std::vector<TaskSpec> groups = leaf_tasks(tree);
  // adjacency between live groups, keyed by position in `groups`
  std::vector<std::set<int>> adjacent(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (const HaloEdge& e : groups[g].halo) adjacent[g].insert(e.neighbor);
  }
  std::vector<bool> alive(groups.size(), true);
  std::vector<int> first_leaf(groups.size());
  std::iota(first_leaf.begin(), first_leaf.end(), 0);

  auto touches_fluid = [&](std::size_t g) {
    return std::any_of(adjacent[g].begin(), adjacent[g].end(),
                       [&](int nb) { return groups[static_cast<std::size_t>(nb)].fluid_cells > 0; });
  };
  // Needy groups next to fluid go first so obstacle regions peel off layer by
  // layer into the surrounding fluid tasks.
  auto needy_key = [&](std::size_t g) {
    return std::tuple(!touches_fluid(g), groups[g].fluid_fraction(), first_leaf[g]);
  };
  // Receivers that stay at or above theta are preferred, then smaller work.
  auto target_key = [&](std::size_t needy, std::size_t b) {
    const TaskSpec& a = groups[needy];
    const TaskSpec& t = groups[b];
    const double merged = static_cast<double>(a.fluid_cells + t.fluid_cells) /
                          static_cast<double>(a.cells + t.cells);
    return std::tuple(t.fluid_cells == 0, merged < theta, t.work, first_leaf[b]);
  };

  // A merge may never produce a task heavier than the heaviest leaf; a group
  // with no neighbour under that cap is a maximal unit and stays as it is.
  double cap = 0.0;
  for (const TaskSpec& g : groups) cap = std::max(cap, g.work);
  std::vector<bool> maximal(groups.size(), false);

  while (true) {
    int needy = -1;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (!alive[g] || maximal[g] || adjacent[g].empty() || groups[g].fluid_fraction() >= theta) continue;
      if (needy < 0 || needy_key(g) < needy_key(static_cast<std::size_t>(needy))) needy = static_cast<int>(g);
    }
    if (needy < 0) break;
    const auto n = static_cast<std::size_t>(needy);

    int target = -1;
    for (int nb : adjacent[n]) {
      const auto b = static_cast<std::size_t>(nb);
      if (groups[n].work + groups[b].work > cap) continue;
      if (target < 0 || target_key(n, b) < target_key(n, static_cast<std::size_t>(target))) target = nb;
    }
    if (target < 0) {
      maximal[n] = true;
      continue;
    }

    // merge the later-ordered group into the earlier one so ids stay stable
    auto keep = static_cast<std::size_t>(std::min(needy, target));
    auto gone = static_cast<std::size_t>(std::max(needy, target));
    TaskSpec& k = groups[keep];
    TaskSpec& d = groups[gone];
    k.rects.insert(k.rects.end(), d.rects.begin(), d.rects.end());
    k.cells += d.cells;
    k.fluid_cells += d.fluid_cells;
    k.work += d.work;
    alive[gone] = false;
    maximal[keep] = false;
    first_leaf[keep] = std::min(first_leaf[keep], first_leaf[gone]);
    for (int nb : adjacent[gone]) {
      const auto b = static_cast<std::size_t>(nb);
      adjacent[b].erase(static_cast<int>(gone));
      if (b != keep) {
        adjacent[b].insert(static_cast<int>(keep));
        adjacent[keep].insert(nb);
      }
    }
    adjacent[keep].erase(static_cast<int>(gone));
    adjacent[keep].erase(static_cast<int>(keep));
    adjacent[gone].clear();
  }

  std::vector<TaskSpec> out;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (!alive[g]) continue;
    TaskSpec t = std::move(groups[g]);
    t.id = static_cast<int>(out.size());
    out.push_back(std::move(t));
  }
  compute_halos(out);
  return out;
}

std::vector<TaskSpec> block_tasks(const FlagField& flags, int count, int flops_per_cell) {
  if (count < 1) throw InvalidParams("block count must be positive");
  // most square factorisation, more blocks along the longer axis
  int bx = count;
  int by = 1;
  for (int d = 1; d * d <= count; ++d) {
    if (count % d == 0) {
      const int other = count / d;
      if (flags.nx >= flags.ny) {
        bx = other;
        by = d;
      } else {
        bx = d;
        by = other;
      }
    }
  }
  if (bx > flags.nx || by > flags.ny) throw InvalidParams("more blocks than cells");
  std::vector<TaskSpec> tasks;
  for (int j = 0; j < by; ++j) {
    const int y0 = flags.ny * j / by;
    const int y1 = flags.ny * (j + 1) / by;
    for (int i = 0; i < bx; ++i) {
      const int x0 = flags.nx * i / bx;
      const int x1 = flags.nx * (i + 1) / bx;
      TaskSpec t;
      t.id = static_cast<int>(tasks.size());
      t.rects = {Rect{x0, y0, x1 - x0, y1 - y0}};
      t.cells = t.rects[0].cells();
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) t.fluid_cells += lattice::is_fluid(flags.at(x, y));
      }
      t.work = static_cast<double>(t.fluid_cells) * flops_per_cell;
      tasks.push_back(std::move(t));
    }
  }
  compute_halos(tasks);
  return tasks;
}

std::vector<std::int32_t> cell_owners(const std::vector<TaskSpec>& tasks, int nx, int ny) {
  std::vector<std::int32_t> owner(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny), -1);
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    for (const Rect& r : tasks[t].rects) {
      if (r.x0 < 0 || r.y0 < 0 || r.x0 + r.w > nx || r.y0 + r.h > ny) {
        throw InvalidParams("task rectangle outside the domain");
      }
      for (int y = r.y0; y < r.y0 + r.h; ++y) {
        for (int x = r.x0; x < r.x0 + r.w; ++x) {
          auto& o = owner[static_cast<std::size_t>(y * nx + x)];
          if (o >= 0) throw InvalidParams("tasks overlap");
          o = static_cast<std::int32_t>(t);
        }
      }
    }
  }
  if (std::find(owner.begin(), owner.end(), -1) != owner.end()) {
    throw InvalidParams("tasks leave cells uncovered");
  }
  return owner;
}

namespace {

// Cells whose post-collision state the streaming of cell (x, y) may read.
// Geometric: solid sources are included, mirroring the stencil footprint.
template <class Visit>
void stencil_sources(const FlagField& flags, int x, int y, Visit&& visit) {
  const lattice::CellFlag flag = flags.at(x, y);
  if (lattice::is_solid(flag)) return;
  if (flag.kind == lattice::CellKind::Inflow || flag.kind == lattice::CellKind::Outflow) {
    visit(flags.index(lattice::StreamTable::boundary_neighbor_x(flags, x, y), y));
    return;
  }
  for (std::size_t i = 0; i < kQ; ++i) {
    const int sx = (x - lattice::kEx[i] + flags.nx) % flags.nx;
    const int sy = (y - lattice::kEy[i] + flags.ny) % flags.ny;
    visit(flags.index(sx, sy));
  }
}

} // namespace

ExchangeSchedule halo_plan(const std::vector<TaskSpec>& tasks, const FlagField& flags) {
  const auto owner = cell_owners(tasks, flags.nx, flags.ny);
  ExchangeSchedule schedule;
  for (std::size_t d = 0; d < tasks.size(); ++d) {
    std::map<int, std::set<std::int32_t>> needed; // source task -> cells
    for (const Rect& r : tasks[d].rects) {
      for (int y = r.y0; y < r.y0 + r.h; ++y) {
        for (int x = r.x0; x < r.x0 + r.w; ++x) {
          stencil_sources(flags, x, y, [&](int src) {
            const int o = owner[static_cast<std::size_t>(src)];
            if (o != static_cast<int>(d)) needed[o].insert(src);
          });
        }
      }
    }
    for (auto& [source, cells] : needed) {
      schedule.push_back({tasks[static_cast<std::size_t>(source)].id, tasks[d].id,
                          std::vector<std::int32_t>(cells.begin(), cells.end())});
    }
  }
  return schedule;
}

void run_serial(int count, const std::function<void(int)>& body) {
  for (int i = 0; i < count; ++i) body(i);
}

PartitionedSolver::PartitionedSolver(const lattice::DistributionGrid& initial,
                                     std::vector<TaskSpec> tasks)
    : prototype_(initial), table_(initial.flags()), tasks_(std::move(tasks)), time_(initial.time()) {
  const FlagField& flags = initial.flags();
  for (std::size_t t = 0; t < tasks_.size(); ++t) tasks_[t].id = static_cast<int>(t);
  owner_ = cell_owners(tasks_, flags.nx, flags.ny);
  schedule_ = halo_plan(tasks_, flags);
  local_index_.assign(flags.size(), -1);
  locals_.resize(tasks_.size());
  incoming_.resize(tasks_.size());
  for (std::size_t c = 0; c < flags.size(); ++c) {
    Local& l = locals_[static_cast<std::size_t>(owner_[c])];
    local_index_[c] = static_cast<std::int32_t>(l.cells.size());
    l.cells.push_back(static_cast<std::int32_t>(c));
  }
  for (Local& l : locals_) {
    const std::size_t n = l.cells.size();
    l.f.resize(n * kQ);
    l.g.resize(n * kQT);
    l.post_f.resize(n * kQ);
    l.post_g.resize(n * kQT);
    l.next_f.resize(n * kQ);
    l.next_g.resize(n * kQT);
    for (std::size_t k = 0; k < n; ++k) {
      const auto c = static_cast<std::size_t>(l.cells[k]);
      std::copy_n(initial.f_at(c), kQ, l.f.data() + k * kQ);
      std::copy_n(initial.g_at(c), kQT, l.g.data() + k * kQT);
    }
    l.halo_slot.assign(flags.size(), -1);
  }
  for (std::size_t s = 0; s < schedule_.size(); ++s) {
    const StripCopy& copy = schedule_[s];
    Local& l = locals_[static_cast<std::size_t>(copy.dest)];
    incoming_[static_cast<std::size_t>(copy.dest)].push_back(s);
    for (std::int32_t c : copy.cells) {
      l.halo_slot[static_cast<std::size_t>(c)] = static_cast<std::int32_t>(l.halo_cells.size());
      l.halo_cells.push_back(c);
    }
  }
  for (Local& l : locals_) {
    l.halo_f.resize(l.halo_cells.size() * kQ);
    l.halo_g.resize(l.halo_cells.size() * kQT);
  }
}

void PartitionedSolver::collide_task(int t, const lattice::FluidParams& params) {
  Local& l = locals_[static_cast<std::size_t>(t)];
  const FlagField& flags = prototype_.flags();
  for (std::size_t k = 0; k < l.cells.size(); ++k) {
    lattice::kernel::collide(l.f.data() + k * kQ, l.g.data() + k * kQT,
                             flags.cells[static_cast<std::size_t>(l.cells[k])], params,
                             l.post_f.data() + k * kQ, l.post_g.data() + k * kQT);
  }
}

void PartitionedSolver::exchange_into(int dest) {
  Local& d = locals_[static_cast<std::size_t>(dest)];
  for (std::size_t s : incoming_[static_cast<std::size_t>(dest)]) {
    const StripCopy& copy = schedule_[s];
    const Local& src = locals_[static_cast<std::size_t>(copy.source)];
    for (std::int32_t c : copy.cells) {
      const auto from = static_cast<std::size_t>(local_index_[static_cast<std::size_t>(c)]);
      const auto to = static_cast<std::size_t>(d.halo_slot[static_cast<std::size_t>(c)]);
      std::copy_n(src.post_f.data() + from * kQ, kQ, d.halo_f.data() + to * kQ);
      std::copy_n(src.post_g.data() + from * kQT, kQT, d.halo_g.data() + to * kQT);
    }
  }
}

void PartitionedSolver::stream_task(int t, const lattice::FluidParams& params,
                                    const lattice::StepOptions& options) {
  Local& l = locals_[static_cast<std::size_t>(t)];
  const FlagField& flags = prototype_.flags();
  const auto me = static_cast<std::int32_t>(t);
  auto post_f = [&](std::int32_t cell) -> const double* {
    const auto c = static_cast<std::size_t>(cell);
    if (owner_[c] == me) return l.post_f.data() + static_cast<std::size_t>(local_index_[c]) * kQ;
    const std::int32_t slot = l.halo_slot[c];
    if (slot < 0) throw InvalidParams("halo plan is missing a stencil source");
    return l.halo_f.data() + static_cast<std::size_t>(slot) * kQ;
  };
  auto post_g = [&](std::int32_t cell) -> const double* {
    const auto c = static_cast<std::size_t>(cell);
    if (owner_[c] == me) return l.post_g.data() + static_cast<std::size_t>(local_index_[c]) * kQT;
    const std::int32_t slot = l.halo_slot[c];
    if (slot < 0) throw InvalidParams("halo plan is missing a stencil source");
    return l.halo_g.data() + static_cast<std::size_t>(slot) * kQT;
  };
  const std::span<const double> temps = prototype_.surface_temps();
  for (std::size_t k = 0; k < l.cells.size(); ++k) {
    const auto c = static_cast<std::size_t>(l.cells[k]);
    lattice::kernel::stream(c, table_, temps, params, l.f.data() + k * kQ, l.g.data() + k * kQT,
                            post_f, post_g, l.next_f.data() + k * kQ, l.next_g.data() + k * kQT);
  }
  for (std::size_t k = 0; k < l.cells.size(); ++k) {
    const double* f = l.next_f.data() + k * kQ;
    const double rho = f[0] + f[1] + f[2] + f[3] + f[4] + f[5] + f[6] + f[7] + f[8];
    if (options.verify || !(rho > 0.0) || !std::isfinite(rho)) {
      const auto c = static_cast<std::size_t>(l.cells[k]);
      lattice::kernel::check_cell(f, flags.cells[c], options.verify,
                                  static_cast<int>(c % static_cast<std::size_t>(flags.nx)),
                                  static_cast<int>(c / static_cast<std::size_t>(flags.nx)));
    }
  }
}

void PartitionedSolver::step(const lattice::FluidParams& params, const WaveRunner& runner,
                             const lattice::StepOptions& options) {
  const int n = static_cast<int>(tasks_.size());
  runner(n, [&](int t) { collide_task(t, params); });
  runner(n, [&](int t) { exchange_into(t); });
  runner(n, [&](int t) { stream_task(t, params, options); });
  for (Local& l : locals_) {
    std::swap(l.f, l.next_f);
    std::swap(l.g, l.next_g);
  }
  ++time_;
}

void PartitionedSolver::advance(const lattice::FluidParams& params, int steps, const WaveRunner& runner) {
  for (int s = 0; s < steps; ++s) step(params, runner);
}

lattice::DistributionGrid PartitionedSolver::gather() const {
  lattice::DistributionGrid out = prototype_;
  for (const Local& l : locals_) {
    for (std::size_t k = 0; k < l.cells.size(); ++k) {
      const auto c = static_cast<std::size_t>(l.cells[k]);
      std::copy_n(l.f.data() + k * kQ, kQ, out.f_at(c));
      std::copy_n(l.g.data() + k * kQT, kQT, out.g_at(c));
    }
  }
  out.set_time(time_);
  return out;
}

nlohmann::json tree_to_json(const PartitionTree& tree) {
  nlohmann::json nodes = nlohmann::json::array();
  for (int i = 0; i < tree.size(); ++i) {
    const Node& n = tree.node(i);
    nlohmann::json j{{"id", i},
                     {"rect", {n.rect.x0, n.rect.y0, n.rect.w, n.rect.h}},
                     {"depth", n.depth},
                     {"fluid_cells", n.fluid_cells},
                     {"work", n.work},
                     {"leaf", n.is_leaf()}};
    if (!n.is_leaf()) {
      j["axis"] = n.axis == Axis::X ? "x" : "y";
      j["split"] = n.split;
      j["children"] = {n.left, n.right};
    }
    nodes.push_back(std::move(j));
  }
  return nlohmann::json{{"nodes", std::move(nodes)}};
}

nlohmann::json tasks_to_json(const std::vector<TaskSpec>& tasks) {
  nlohmann::json out = nlohmann::json::array();
  for (const TaskSpec& t : tasks) {
    nlohmann::json rects = nlohmann::json::array();
    for (const Rect& r : t.rects) rects.push_back({r.x0, r.y0, r.w, r.h});
    nlohmann::json halo = nlohmann::json::array();
    for (const HaloEdge& e : t.halo) halo.push_back({{"neighbor", e.neighbor}, {"shared_cells", e.shared_cells}});
    out.push_back({{"id", t.id},
                   {"rects", std::move(rects)},
                   {"cells", t.cells},
                   {"fluid_cells", t.fluid_cells},
                   {"work", t.work},
                   {"halo", std::move(halo)}});
  }
  return out;
}

} // namespace steerflow::partition
