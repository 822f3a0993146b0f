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
#include "steerflow/session.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <stop_token>
#include <thread>
#include <variant>

#include "steerflow/compositor.hpp"
#include "steerflow/error.hpp"
#include "steerflow/hierarchy.hpp"
#include "steerflow/thermal.hpp"
#include "steerflow/viz.hpp"

namespace steerflow::steering {

using nlohmann::json;
using protocol::Message;

// --- Client ------------------------------------------------------------------

Client::Client(int id, bool view_only, std::size_t capacity)
    : id_(id), view_only_(view_only), capacity_(std::max<std::size_t>(capacity, 1)) {}

void Client::push(Message message) {
  std::function<void()> notify;
  {
    std::lock_guard lock(mutex_);
    if (closed_) return;
    if (queue_.size() >= capacity_) {
      auto victim = std::find_if(queue_.begin(), queue_.end(),
                                 [](const Message& m) { return protocol::droppable(m); });
      if (victim != queue_.end()) {
        queue_.erase(victim);
        ++dropped_;
      } else if (protocol::droppable(message)) {
        ++dropped_;
        return;
      }
    }
    queue_.push_back(std::move(message));
    notify = notify_;
  }
  cv_.notify_all();
  if (notify) notify();
}

std::optional<Message> Client::try_pop() {
  std::lock_guard lock(mutex_);
  if (queue_.empty()) return std::nullopt;
  Message m = std::move(queue_.front());
  queue_.pop_front();
  return m;
}

std::optional<Message> Client::pop(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  if (!cv_.wait_for(lock, timeout, [&] { return !queue_.empty() || closed_; })) return std::nullopt;
  if (queue_.empty()) return std::nullopt;
  Message m = std::move(queue_.front());
  queue_.pop_front();
  return m;
}

std::size_t Client::pending() const {
  std::lock_guard lock(mutex_);
  return queue_.size();
}

std::uint64_t Client::dropped() const {
  std::lock_guard lock(mutex_);
  return dropped_;
}

void Client::on_ready(std::function<void()> notify) {
  std::lock_guard lock(mutex_);
  notify_ = std::move(notify);
}

void Client::close() {
  std::function<void()> notify;
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
    notify = notify_;
  }
  cv_.notify_all();
  if (notify) notify();
}

bool Client::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

// --- helpers -------------------------------------------------------------------

const char* to_string(BatchState state) {
  switch (state) {
  case BatchState::Queued: return "queued";
  case BatchState::Running: return "running";
  case BatchState::Done: return "done";
  case BatchState::Failed: return "failed";
  }
  return "?";
}

json to_json(const BatchInfo& info) {
  json j = {{"type", "batch"},
            {"job", info.id},
            {"state", to_string(info.state)},
            {"version", info.version},
            {"source_level", info.source_level},
            {"level", info.level},
            {"steps", info.steps},
            {"dump_interval", info.dump_interval},
            {"out_dir", info.out_dir},
            {"dumps", info.dumps}};
  if (!info.error.empty()) j["error"] = info.error;
  return j;
}

namespace {

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

bool is_edit(const std::string& type) {
  return type == "add_geometry" || type == "delete_geometry" || type == "move_geometry" ||
         type == "scale_geometry" || type == "set_params" || type == "set_budget" ||
         type == "set_field" || type == "set_style" || type == "trigger_batch" ||
         type == "run_comfort";
}

constexpr lattice::FieldId kDumpFields[] = {lattice::FieldId::Rho, lattice::FieldId::Ux,
                                            lattice::FieldId::Uy, lattice::FieldId::Temp};

std::vector<std::string> write_dumps(const std::filesystem::path& dir, const std::string& stem,
                                     const lattice::DistributionGrid& grid,
                                     const lattice::FluidParams& params) {
  const auto macro = lattice::macroscopics(grid, params);
  std::vector<std::string> paths;
  for (const auto id : kDumpFields) {
    lattice::FieldDump dump;
    dump.nx = static_cast<std::uint32_t>(grid.nx());
    dump.ny = static_cast<std::uint32_t>(grid.ny());
    dump.field = id;
    dump.values = lattice::extract(macro, id);
    const auto path = dir / (stem + "_" + lattice::to_string(id) + ".stlb");
    lattice::write_field_dump(path.string(), dump);
    paths.push_back(path.string());
  }
  return paths;
}

struct RenderSettings {
  lattice::FieldId field = lattice::FieldId::Speed;
  std::string technique = "colormap";
  json options = json::object();
};

void validate_style(const std::string& technique, const json& options) {
  static const char* known[] = {"colormap", "iso", "streamlines", "streambands", "glyphs"};
  if (std::find(std::begin(known), std::end(known), technique) == std::end(known)) {
    throw InvalidParams("unknown technique '" + technique + "'");
  }
  if (!options.is_object()) throw InvalidParams("style options must be an object");
  if (options.contains("colormap")) viz::Colormap::named(options.at("colormap").get<std::string>());
  if (options.contains("range")) {
    const auto r = options.at("range").get<std::vector<double>>();
    if (r.size() != 2 || !(r[1] > r[0])) throw InvalidParams("range must be [lo, hi] with hi > lo");
  }
  for (const char* key : {"px_per_cell", "levels", "seeds", "stride", "glyph_stride", "max_steps"}) {
    if (options.contains(key) && options.at(key).get<int>() < 0) {
      throw InvalidParams(std::string(key) + " must be nonnegative");
    }
  }
  if (options.value("px_per_cell", 1) > 16) throw InvalidParams("px_per_cell must be <= 16");
  for (const char* key : {"h", "width", "seed_x"}) {
    if (options.contains(key) && !(options.at(key).get<double>() > 0.0)) {
      throw InvalidParams(std::string(key) + " must be positive");
    }
  }
}

struct Rendered {
  compositor::Frame frame;
  std::optional<json> primitives;
};

// --- events --------------------------------------------------------------------

struct Incoming {
  std::shared_ptr<Client> client;
  Message message;
};
struct LevelEvent {
  std::uint64_t version;
  hierarchy::LevelResult result;
};
struct RunEnded {
  std::uint64_t version;
  bool completed;
  std::string code;
  std::string text;
};
struct ComfortEvent {
  std::uint64_t version;
  json record;
  std::shared_ptr<const lattice::DistributionGrid> grid; // set every few exchanges
  lattice::FluidParams params;
};
struct BatchEvent {
  BatchInfo info;
};
using Event = std::variant<Incoming, LevelEvent, RunEnded, ComfortEvent, BatchEvent>;

struct RunRequest {
  enum class Kind { Budgeted, Comfort } kind = Kind::Budgeted;
  std::uint64_t version = 0;
  Scene scene;
  int exchanges = 0;
  int steps_per_exchange = 0;
  std::shared_ptr<const lattice::DistributionGrid> start; // comfort: continue from this grid
  lattice::FluidParams start_params;
};

} // namespace

// --- Session -------------------------------------------------------------------

struct Session::Impl {
  SessionOptions options;

  // inbox
  mutable std::mutex inbox_mutex;
  std::condition_variable inbox_cv;
  std::deque<Event> inbox;
  std::uint64_t posted = 0;
  std::uint64_t handled = 0;
  mutable std::condition_variable handled_cv;
  bool quit = false;

  // shared with readers
  mutable std::mutex state_mutex;
  Scene scene;
  std::atomic<std::uint64_t> version{1};
  SessionStats stats;
  std::map<int, BatchInfo> batches;
  mutable std::condition_variable batch_cv;

  // clients
  std::mutex clients_mutex;
  std::map<int, std::shared_ptr<Client>> clients;
  std::map<int, bool> subscribed;
  int next_client = 1;

  // actor-owned
  RenderSettings render;
  std::optional<hierarchy::LevelResult> latest;
  std::optional<compositor::Frame> latest_frame;
  std::uint64_t seq = 0;
  int next_batch = 1;
  scheduler::Engine render_engine;

  // simulation context
  std::mutex sim_mutex;
  std::condition_variable sim_cv;
  std::optional<RunRequest> pending;
  std::stop_source current_run;
  bool sim_quit = false;
  scheduler::Engine sim_engine;

  std::vector<std::jthread> batch_threads;
  std::jthread sim_thread;
  std::jthread actor_thread;

  Impl(Scene s, SessionOptions o)
      : options(std::move(o)), scene(std::move(s)), render_engine(options.roles),
        sim_engine(options.roles) {
    if (options.snapshot_dir.empty()) {
      options.snapshot_dir = std::filesystem::temp_directory_path() / "steerflow-snapshots";
    }
  }

  void post_event(Event e) {
    {
      std::lock_guard lock(inbox_mutex);
      if (quit) return;
      inbox.push_back(std::move(e));
      ++posted;
    }
    inbox_cv.notify_one();
  }

  // --- actor ---------------------------------------------------------------

  void actor_loop() {
    for (;;) {
      Event e;
      {
        std::unique_lock lock(inbox_mutex);
        inbox_cv.wait(lock, [&] { return quit || !inbox.empty(); });
        if (quit) return;
        e = std::move(inbox.front());
        inbox.pop_front();
      }
      std::visit([&](auto& ev) { on(ev); }, e);
      {
        std::lock_guard lock(inbox_mutex);
        ++handled;
      }
      handled_cv.notify_all();
    }
  }

  std::vector<std::shared_ptr<Client>> subscribers() {
    std::lock_guard lock(clients_mutex);
    std::vector<std::shared_ptr<Client>> out;
    for (const auto& [id, c] : clients) {
      if (subscribed[id]) out.push_back(c);
    }
    return out;
  }

  std::vector<std::shared_ptr<Client>> everyone() {
    std::lock_guard lock(clients_mutex);
    std::vector<std::shared_ptr<Client>> out;
    for (const auto& [id, c] : clients) out.push_back(c);
    return out;
  }

  void broadcast(const Message& m) {
    for (const auto& c : subscribers()) c->push(m);
  }

  static Message with_ref(Message m, const json& request) {
    if (request.contains("ref")) m.header["ref"] = request.at("ref");
    return m;
  }

  void on(Incoming& in) {
    Client& client = *in.client;
    const json& h = in.message.header;
    try {
      try {
        handle(in.client, in.message);
      } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed message: ") + e.what());
      }
    } catch (const Error& e) {
      client.push(with_ref(protocol::error_message(e.code(), e.what(), version.load()), h));
    }
  }

  void ack(Client& client, const json& request) {
    client.push(with_ref(protocol::scene_ack(version.load()), request));
  }

  void handle(const std::shared_ptr<Client>& from, const Message& m) {
    const json& h = m.header;
    const std::string type = m.type();
    if (is_edit(type) && from->view_only()) throw ViewOnly("observers cannot steer ('" + type + "')");

    Scene next = scene_copy();
    if (type == "add_geometry") {
      next.objects.push_back(h.at("object").get<SceneObject>());
    } else if (type == "delete_geometry") {
      const auto id = h.at("id").get<std::string>();
      const auto it = std::find_if(next.objects.begin(), next.objects.end(),
                                   [&](const SceneObject& o) { return o.id == id; });
      if (it == next.objects.end()) throw UnknownId("no object '" + id + "'");
      next.objects.erase(it);
    } else if (type == "move_geometry") {
      SceneObject* o = find(next, h.at("id").get<std::string>());
      const auto c = h.at("center").get<std::vector<double>>();
      if (c.size() != 2) throw InvalidGeometry("center must be [x, y]");
      o->center = {c[0], c[1]};
    } else if (type == "scale_geometry") {
      SceneObject* o = find(next, h.at("id").get<std::string>());
      const double f = h.at("factor").get<double>();
      if (!(f > 0.0) || !std::isfinite(f)) throw InvalidParams("scale factor must be positive");
      o->size = {o->size.x * f, o->size.y * f};
    } else if (type == "set_params") {
      next.params = params_from_json(h.at("params"), next.params);
    } else if (type == "set_budget") {
      const double ms = h.at("ms").get<double>();
      if (!(ms >= 0.0) || !std::isfinite(ms)) throw InvalidParams("budget must be >= 0 ms");
      next.plan.budget_ms = ms;
    } else {
      handle_view(from, type, h);
      return;
    }
    next.validate();
    commit(std::move(next));
    ack(*from, h);
    json note = {{"type", "scene"}, {"version", version.load()}, {"scene", scene_copy()}};
    for (const auto& c : subscribers()) {
      if (c != from) c->push(Message{note, {}});
    }
  }

  void handle_view(const std::shared_ptr<Client>& from, const std::string& type, const json& h) {
    Client& client = *from;
    if (type == "set_field") {
      render.field = lattice::field_from_string(h.at("field").get<std::string>());
      ack(client, h);
      rerender();
    } else if (type == "set_style") {
      const auto technique = h.at("technique").get<std::string>();
      const json options = h.value("options", json::object());
      validate_style(technique, options);
      render.technique = technique;
      render.options = options;
      ack(client, h);
      rerender();
    } else if (type == "subscribe") {
      {
        std::lock_guard lock(clients_mutex);
        subscribed[client.id()] = true;
      }
      ack(client, h);
      if (latest) send(render_result(*latest), {from});
    } else if (type == "snapshot") {
      if (!latest) throw NoInteractiveResult("no result for scene version " + std::to_string(version.load()));
      std::filesystem::create_directories(options.snapshot_dir);
      const std::string stem = "v" + std::to_string(version.load()) + "_l" + std::to_string(latest->level);
      const auto dumps = write_dumps(options.snapshot_dir, stem, *latest->grid, latest->params);
      client.push(with_ref(Message{{{"type", "snapshot"},
                                    {"version", version.load()},
                                    {"level", latest->level},
                                    {"dumps", dumps}},
                                   {}},
                           h));
      ack(client, h);
      send(render_result(*latest), {from});
    } else if (type == "trigger_batch") {
      const BatchInfo info = trigger_batch(h);
      client.push(with_ref(Message{to_json(info), {}}, h));
      ack(client, h);
    } else if (type == "run_comfort") {
      const Scene s = scene_copy();
      if (!s.has_manikin()) throw NoManikin("scene has no manikin");
      RunRequest r;
      r.kind = RunRequest::Kind::Comfort;
      r.version = version.load();
      r.scene = s;
      r.exchanges = h.at("exchanges").get<int>();
      r.steps_per_exchange = h.value("cfd_steps_per_exchange", 10);
      if (r.exchanges < 1 || r.steps_per_exchange < 1) {
        throw InvalidParams("exchanges and cfd_steps_per_exchange must be >= 1");
      }
      if (latest) {
        r.start = latest->grid;
        r.start_params = latest->params;
      }
      submit(std::move(r));
      ack(client, h);
    } else {
      throw ProtocolError("unknown message type '" + type + "'");
    }
  }

  static SceneObject* find(Scene& s, const std::string& id) {
    SceneObject* o = s.find(id);
    if (!o) throw UnknownId("no object '" + id + "'");
    return o;
  }

  Scene scene_copy() const {
    std::lock_guard lock(state_mutex);
    return scene;
  }

  void commit(Scene next) {
    std::uint64_t v = 0;
    {
      std::lock_guard lock(state_mutex);
      scene = std::move(next);
      v = ++version;
    }
    latest.reset();
    latest_frame.reset();
    RunRequest r;
    r.version = v;
    r.scene = scene_copy();
    submit(std::move(r));
  }

  // --- rendering -------------------------------------------------------------

  Rendered render_grid(const lattice::DistributionGrid& grid, const lattice::FluidParams& params, int level) {
    const auto macro = lattice::macroscopics(grid, params);
    const auto& flags = grid.flags();
    const auto field = viz::scalar_field(macro, flags, render.field);
    const json& o = render.options;
    compositor::Style style;
    style.map = viz::Colormap::named(o.value("colormap", std::string("diverging")));
    if (o.contains("range")) {
      const auto r = o.at("range").get<std::vector<double>>();
      style.range = viz::Range{r[0], r[1]};
    }
    style.px_per_cell = std::max(1, o.value("px_per_cell", 1));
    const auto tree = partition::build_tree(flags, std::max(16, options.max_leaf_cells));
    auto tiles = compositor::render_leaves(tree, field, style, &render_engine);
    Rendered out;
    out.frame = compositor::compose(tree, std::move(tiles), &render_engine);
    out.frame.seq = ++seq;
    out.frame.level = level;
    out.frame.field = render.field;
    out.frame.timestamp_ms = now_ms();

    const std::string& t = render.technique;
    const int glyph_stride = t == "glyphs" ? std::max(1, o.value("stride", 4)) : o.value("glyph_stride", 0);
    if (t == "colormap" && glyph_stride == 0) return out;

    json polylines = json::array();
    json arrows = json::array();
    if (t == "iso") {
      const viz::Range r = style.range.value_or(viz::auto_range(field));
      const int n = std::max(1, o.value("levels", 8));
      std::vector<double> levels;
      for (int k = 1; k <= n; ++k) levels.push_back(r.lo + (r.hi - r.lo) * k / (n + 1));
      polylines = viz::iso_lines(field, levels);
    }
    const auto u = viz::vector_field(macro, flags);
    if (t == "streamlines" || t == "streambands") {
      const int n = std::max(1, o.value("seeds", 12));
      const double x = o.value("seed_x", 0.05);
      std::vector<Vec2> seeds;
      for (int k = 0; k < n; ++k) seeds.push_back({x, (k + 0.5) / n});
      double umax = 0.0; // cells per step
      for (std::size_t c = 0; c < macro.size(); ++c) {
        umax = std::max(umax, std::hypot(macro.ux[c], macro.uy[c]));
      }
      // half a cell per integration step at the fastest speed by default
      const double h = o.value("h", 0.5 / std::max(umax, 1e-9));
      const int max_steps = o.value("max_steps", 4 * (grid.nx() + grid.ny()));
      polylines = t == "streamlines" ? viz::streamlines(u, seeds, h, max_steps)
                                     : viz::streambands(u, seeds, o.value("width", 0.02), h, max_steps);
    }
    if (glyph_stride > 0) arrows = viz::glyphs(u, glyph_stride);
    out.primitives = json{{"type", "primitives"},
                          {"seq", out.frame.seq},
                          {"level", level},
                          {"technique", t},
                          {"polylines", std::move(polylines)},
                          {"glyphs", std::move(arrows)}};
    return out;
  }

  Rendered render_result(const hierarchy::LevelResult& r) {
    return render_grid(*r.grid, r.params, r.level);
  }

  void send(const Rendered& r, const std::vector<std::shared_ptr<Client>>& to) {
    const Message frame = protocol::frame_message(r.frame, version.load());
    std::optional<Message> prims;
    if (r.primitives) {
      prims = Message{*r.primitives, {}};
      prims->header["version"] = version.load();
    }
    for (const auto& c : to) {
      c->push(frame);
      if (prims) c->push(*prims);
    }
    std::lock_guard lock(state_mutex);
    stats.frames_sent += to.size();
  }

  void rerender() {
    if (!latest) return;
    auto r = render_result(*latest);
    latest_frame = r.frame;
    send(r, subscribers());
  }

  // --- simulation events -------------------------------------------------------

  bool stale(std::uint64_t v) {
    if (v == version.load()) return false;
    std::lock_guard lock(state_mutex);
    ++stats.stale_results;
    return true;
  }

  void on(LevelEvent& e) {
    if (stale(e.version)) return;
    latest = e.result;
    const auto to = subscribers();
    auto r = render_result(e.result);
    latest_frame = r.frame;
    send(r, to);
    const auto& g = *e.result.grid;
    const Message done{{{"type", "level_done"},
                        {"version", e.version},
                        {"level", e.result.level},
                        {"residual", e.result.residual},
                        {"elapsed_ms", e.result.elapsed_ms},
                        {"steps", e.result.steps},
                        {"converged", e.result.converged},
                        {"nx", g.nx()},
                        {"ny", g.ny()},
                        {"frame_seq", r.frame.seq}},
                       {}};
    for (const auto& c : to) c->push(done);
  }

  void on(RunEnded& e) {
    {
      std::lock_guard lock(state_mutex);
      if (e.completed) ++stats.runs_completed;
      else ++stats.runs_cancelled;
    }
    if (!e.code.empty() && e.version == version.load()) {
      broadcast(protocol::error_message(e.code, e.text, e.version));
    }
  }

  void on(ComfortEvent& e) {
    if (stale(e.version)) return;
    json record = e.record;
    record["type"] = "comfort";
    record["version"] = e.version;
    const auto to = subscribers();
    if (e.grid) send(render_grid(*e.grid, e.params, e.grid->level()), to);
    for (const auto& c : to) c->push(Message{record, {}});
  }

  void on(BatchEvent& e) {
    {
      std::lock_guard lock(state_mutex);
      batches[e.info.id] = e.info;
    }
    batch_cv.notify_all();
    const Message m{to_json(e.info), {}};
    for (const auto& c : everyone()) c->push(m);
  }

  // --- simulation context ------------------------------------------------------

  void submit(RunRequest r) {
    {
      std::lock_guard lock(sim_mutex);
      current_run.request_stop();
      pending = std::move(r);
    }
    sim_cv.notify_one();
  }

  void sim_loop() {
    for (;;) {
      RunRequest r;
      std::stop_token stop;
      {
        std::unique_lock lock(sim_mutex);
        sim_cv.wait(lock, [&] { return sim_quit || pending.has_value(); });
        if (sim_quit) return;
        r = std::move(*pending);
        pending.reset();
        current_run = std::stop_source();
        stop = current_run.get_token();
      }
      {
        std::lock_guard lock(state_mutex);
        ++stats.runs_started;
      }
      RunEnded end{r.version, false, {}, {}};
      try {
        if (r.kind == RunRequest::Kind::Budgeted) {
          budgeted(r, stop);
        } else {
          comfort(r, stop);
        }
        end.completed = !stop.stop_requested();
      } catch (const Error& e) {
        end.code = e.code();
        end.text = e.what();
      }
      post_event(std::move(end));
    }
  }

  void budgeted(const RunRequest& r, std::stop_token stop) {
    hierarchy::RunOptions opt;
    opt.runner = scheduler::wave_runner(sim_engine);
    opt.max_leaf_cells = options.max_leaf_cells;
    opt.stop = stop;
    hierarchy::run_budgeted(
        r.scene, [&](const hierarchy::LevelResult& res) { post_event(LevelEvent{r.version, res}); }, opt);
  }

  void comfort(const RunRequest& r, std::stop_token stop) {
    const lattice::FluidParams params = r.start ? r.start_params : r.scene.params;
    thermal::CouplingLoop loop = r.start ? thermal::CouplingLoop(r.scene, *r.start, params)
                                         : thermal::CouplingLoop(r.scene);
    const int every = std::max(1, options.comfort_frame_every);
    for (int k = 0; k < r.exchanges && !stop.stop_requested(); ++k) {
      const auto ex = loop.step(r.steps_per_exchange);
      ComfortEvent e{r.version, ex, nullptr, params};
      if ((k + 1) % every == 0 || k + 1 == r.exchanges) {
        e.grid = std::make_shared<const lattice::DistributionGrid>(loop.grid());
      }
      post_event(std::move(e));
    }
  }

  // --- batch jobs --------------------------------------------------------------

  BatchInfo trigger_batch(const json& h) {
    if (!latest) {
      throw NoInteractiveResult("no interactive result for scene version " + std::to_string(version.load()));
    }
    BatchInfo info;
    info.level = h.at("level").get<int>();
    info.steps = h.at("steps").get<std::int64_t>();
    info.dump_interval = h.value("dump_interval", std::int64_t{0});
    info.out_dir = h.at("out_path").get<std::string>();
    info.version = version.load();
    info.source_level = latest->level;
    const Scene s = scene_copy();
    if (info.level < info.source_level) {
      throw InvalidParams("batch level " + std::to_string(info.level) + " is below the interactive level " +
                          std::to_string(info.source_level));
    }
    if (static_cast<std::size_t>(s.plan.level_nx(info.level)) * static_cast<std::size_t>(s.plan.level_ny(info.level)) >
        s.plan.max_cells) {
      throw InvalidParams("batch level exceeds the cell cap");
    }
    if (info.steps < 0 || info.dump_interval < 0) throw InvalidParams("steps and dump_interval must be >= 0");
    if (info.out_dir.empty()) throw InvalidParams("out_path must be nonempty");
    {
      std::lock_guard lock(state_mutex);
      const auto active = std::count_if(batches.begin(), batches.end(), [](const auto& b) {
        return b.second.state == BatchState::Queued || b.second.state == BatchState::Running;
      });
      if (active >= options.max_running_batches) {
        throw JobLimitExceeded(std::to_string(active) + " batch job(s) still running");
      }
      info.id = next_batch++;
      batches[info.id] = info;
    }
    batch_threads.emplace_back([this, info, s, grid = latest->grid](std::stop_token stop) {
      run_batch(info, s, grid, stop);
    });
    return info;
  }

  void run_batch(BatchInfo info, const Scene& s, std::shared_ptr<const lattice::DistributionGrid> source,
                 std::stop_token stop) {
    info.state = BatchState::Running;
    post_event(BatchEvent{info});
    try {
      const int ratio = s.plan.refinement_ratio;
      lattice::DistributionGrid grid = *source;
      for (int l = info.source_level; l < info.level; ++l) grid = hierarchy::prolongate(grid, s, ratio);
      const auto params = hierarchy::level_params(s.params, info.level, ratio);
      const std::filesystem::path dir(info.out_dir);
      std::filesystem::create_directories(dir);
      auto dump = [&](std::int64_t step) {
        char stem[32];
        std::snprintf(stem, sizeof stem, "step_%08lld", static_cast<long long>(step));
        for (auto& p : write_dumps(dir, stem, grid, params)) info.dumps.push_back(std::move(p));
      };
      dump(0);
      std::int64_t done = 0;
      const std::int64_t interval = info.dump_interval > 0 ? info.dump_interval : info.steps;
      while (done < info.steps) {
        const std::int64_t target = std::min(info.steps, done + interval);
        while (done < target) {
          if (stop.stop_requested()) throw IoError("batch job cancelled");
          const auto n = static_cast<int>(std::min<std::int64_t>(target - done, 256));
          lattice::advance(grid, params, n);
          done += n;
        }
        dump(done);
      }
      info.state = BatchState::Done;
    } catch (const std::exception& e) {
      info.state = BatchState::Failed;
      info.error = e.what();
    }
    post_event(BatchEvent{info});
  }
};

Session::Session(Scene scene, SessionOptions options)
    : impl_(std::make_unique<Impl>(std::move(scene), std::move(options))) {
  impl_->options.roles.validate();
  impl_->scene.validate();
  impl_->sim_thread = std::jthread([this] { impl_->sim_loop(); });
  impl_->actor_thread = std::jthread([this] { impl_->actor_loop(); });
  RunRequest r;
  r.version = impl_->version.load();
  r.scene = impl_->scene;
  impl_->submit(std::move(r));
}

Session::~Session() {
  {
    std::lock_guard lock(impl_->sim_mutex);
    impl_->sim_quit = true;
    impl_->current_run.request_stop();
  }
  impl_->sim_cv.notify_all();
  if (impl_->sim_thread.joinable()) impl_->sim_thread.join();
  for (auto& t : impl_->batch_threads) t.request_stop();
  impl_->batch_threads.clear(); // joins
  {
    std::lock_guard lock(impl_->inbox_mutex);
    impl_->quit = true;
  }
  impl_->inbox_cv.notify_all();
  if (impl_->actor_thread.joinable()) impl_->actor_thread.join();
  std::lock_guard lock(impl_->clients_mutex);
  for (auto& [id, c] : impl_->clients) c->close();
}

std::shared_ptr<Client> Session::connect(std::string_view token, bool view_only) {
  if (!impl_->options.token.empty() && token != impl_->options.token) {
    throw Unauthorized("invalid session token");
  }
  std::lock_guard lock(impl_->clients_mutex);
  auto c = std::make_shared<Client>(impl_->next_client++, view_only, impl_->options.queue_capacity);
  impl_->clients[c->id()] = c;
  impl_->subscribed[c->id()] = false;
  return c;
}

void Session::disconnect(const std::shared_ptr<Client>& client) {
  if (!client) return;
  {
    std::lock_guard lock(impl_->clients_mutex);
    impl_->clients.erase(client->id());
    impl_->subscribed.erase(client->id());
  }
  client->close();
}

void Session::post(const std::shared_ptr<Client>& client, Message message) {
  impl_->post_event(Incoming{client, std::move(message)});
}

std::uint64_t Session::version() const { return impl_->version.load(); }

Scene Session::scene() const { return impl_->scene_copy(); }

SessionStats Session::stats() const {
  std::lock_guard lock(impl_->state_mutex);
  return impl_->stats;
}

std::optional<BatchInfo> Session::batch(int id) const {
  std::lock_guard lock(impl_->state_mutex);
  const auto it = impl_->batches.find(id);
  if (it == impl_->batches.end()) return std::nullopt;
  return it->second;
}

std::optional<BatchInfo> Session::wait_batch(int id, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(impl_->state_mutex);
  impl_->batch_cv.wait_for(lock, timeout, [&] {
    const auto it = impl_->batches.find(id);
    return it != impl_->batches.end() &&
           (it->second.state == BatchState::Done || it->second.state == BatchState::Failed);
  });
  const auto it = impl_->batches.find(id);
  if (it == impl_->batches.end()) return std::nullopt;
  return it->second;
}

void Session::sync() const {
  std::unique_lock lock(impl_->inbox_mutex);
  const std::uint64_t target = impl_->posted;
  impl_->handled_cv.wait(lock, [&] { return impl_->quit || impl_->handled >= target; });
}

} // namespace steerflow::steering
