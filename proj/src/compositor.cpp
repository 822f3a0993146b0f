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
#include "steerflow/compositor.hpp"

#include <algorithm>
#include <cstring>

#include "steerflow/error.hpp"

namespace steerflow::compositor {

using partition::PartitionTree;
using partition::Rect;
using viz::SubImage;

namespace {

viz::Range resolve(const Style& style, const viz::ScalarField& field) {
  return style.range ? *style.range : viz::auto_range(field);
}

Rect scaled(const Rect& r, int px) { return {r.x0 * px, r.y0 * px, r.w * px, r.h * px}; }

void blit(SubImage& dst, const SubImage& src) {
  const std::size_t row_bytes = static_cast<std::size_t>(src.rect.w) * 4;
  for (int y = 0; y < src.rect.h; ++y) {
    const std::size_t to = (static_cast<std::size_t>(src.rect.y0 - dst.rect.y0 + y) * static_cast<std::size_t>(dst.rect.w) +
                            static_cast<std::size_t>(src.rect.x0 - dst.rect.x0)) * 4;
    std::memcpy(dst.rgba.data() + to, src.rgba.data() + static_cast<std::size_t>(y) * row_bytes, row_bytes);
  }
}

Frame to_frame(SubImage&& img) {
  Frame f;
  f.width = img.rect.w;
  f.height = img.rect.h;
  f.rgba = std::move(img.rgba);
  return f;
}

} // namespace

std::vector<SubImage> render_leaves(const PartitionTree& tree, const viz::ScalarField& field,
                                    const Style& style, scheduler::Engine* engine) {
  const Rect& d = tree.domain();
  if (d.x0 != 0 || d.y0 != 0 || d.w != field.grid.nx || d.h != field.grid.ny)
    throw InvalidParams("partition tree does not cover the field");
  const viz::Range range = resolve(style, field);
  const auto leaves = tree.leaves();
  auto render = [&](int k) {
    const int node = leaves[static_cast<std::size_t>(k)];
    SubImage img = viz::color_map(field, tree.node(node).rect, range, style.map, style.px_per_cell);
    img.node = node;
    return img;
  };
  if (!engine) {
    std::vector<SubImage> out;
    out.reserve(leaves.size());
    for (std::size_t k = 0; k < leaves.size(); ++k) out.push_back(render(static_cast<int>(k)));
    return out;
  }
  scheduler::TaskGraph graph;
  for (int leaf : leaves) graph.add_task(static_cast<double>(tree.node(leaf).rect.cells()), "render");
  return scheduler::run_collect<SubImage>(*engine, graph, render).results;
}

std::vector<std::vector<int>> join_schedule(const PartitionTree& tree) {
  std::vector<std::vector<int>> waves;
  for (int n : tree.post_order()) {
    const auto& node = tree.node(n);
    if (node.is_leaf()) continue;
    if (waves.size() <= static_cast<std::size_t>(node.depth)) waves.resize(static_cast<std::size_t>(node.depth) + 1);
    waves[static_cast<std::size_t>(node.depth)].push_back(n);
  }
  std::reverse(waves.begin(), waves.end());
  for (auto& w : waves) std::sort(w.begin(), w.end());
  return waves;
}

CompositionCost composition_cost(const PartitionTree& tree) {
  return {tree.height(), tree.leaf_count() - 1};
}

Frame compose(const PartitionTree& tree, std::vector<SubImage> tiles, scheduler::Engine* engine,
              scheduler::TaskTrace* trace) {
  std::vector<std::optional<SubImage>> slot(static_cast<std::size_t>(tree.size()));
  for (SubImage& t : tiles) {
    if (t.node < 0 || t.node >= tree.size() || !tree.node(t.node).is_leaf())
      throw InvalidParams("tile " + std::to_string(t.node) + " is not a leaf of the tree");
    slot[static_cast<std::size_t>(t.node)] = std::move(t);
  }
  int px = 0;
  for (int leaf : tree.leaves()) {
    const auto& s = slot[static_cast<std::size_t>(leaf)];
    if (!s) throw MissingTile("no tile for leaf node " + std::to_string(leaf));
    const Rect& cells = tree.node(leaf).rect;
    if (px == 0) px = s->rect.w / cells.w;
    if (px < 1 || s->rect != scaled(cells, px) ||
        s->rgba.size() != static_cast<std::size_t>(s->rect.cells()) * 4)
      throw InvalidParams("tile for node " + std::to_string(leaf) + " does not match its rectangle");
  }
  if (tree.node(0).is_leaf()) return to_frame(std::move(*slot[0]));

  const auto waves = join_schedule(tree);
  std::vector<int> task_node;
  std::vector<int> node_task(static_cast<std::size_t>(tree.size()), -1);
  scheduler::TaskGraph graph;
  for (const auto& w : waves) {
    for (int n : w) {
      node_task[static_cast<std::size_t>(n)] = graph.add_task(static_cast<double>(tree.node(n).rect.cells()), "join");
      task_node.push_back(n);
    }
  }
  for (int t = 0; t < graph.size(); ++t) {
    const auto& node = tree.node(task_node[static_cast<std::size_t>(t)]);
    for (int child : {node.left, node.right}) {
      if (!tree.node(child).is_leaf()) graph.add_dependency(t, node_task[static_cast<std::size_t>(child)]);
    }
  }

  auto join = [&](int t) {
    const int n = task_node[static_cast<std::size_t>(t)];
    const auto& node = tree.node(n);
    SubImage out;
    out.node = n;
    out.rect = scaled(node.rect, px);
    out.rgba.resize(static_cast<std::size_t>(out.rect.cells()) * 4);
    for (int child : {node.left, node.right}) {
      auto& c = slot[static_cast<std::size_t>(child)];
      blit(out, *c);
      c.reset();
    }
    slot[static_cast<std::size_t>(n)] = std::move(out);
  };

  if (engine) {
    auto t = engine->run(graph, join);
    if (trace) *trace = std::move(t);
  } else {
    for (int t = 0; t < graph.size(); ++t) join(t);
  }
  return to_frame(std::move(*slot[0]));
}

Frame render_monolithic(const viz::ScalarField& field, const Style& style) {
  return to_frame(viz::color_map(field, resolve(style, field), style.map, style.px_per_cell));
}

void write_ppm(const std::string& path, const Frame& frame) {
  viz::write_ppm(path, frame.width, frame.height, frame.rgba);
}

} // namespace steerflow::compositor
