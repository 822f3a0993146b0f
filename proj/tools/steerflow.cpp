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
#include <atomic>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "steerflow/compositor.hpp"
#include "steerflow/error.hpp"
#include "steerflow/partition.hpp"
#include "steerflow/scheduler.hpp"
#include "steerflow/server.hpp"
#include "steerflow/session.hpp"
#include "steerflow/thermal.hpp"

using namespace steerflow;
using namespace std::chrono_literals;
using nlohmann::json;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

std::string env_token() {
  const char* t = std::getenv("STEERFLOW_TOKEN");
  return t ? t : "";
}

// "48x48" or "48"
std::pair<int, int> parse_res(const std::string& s) {
  const auto x = s.find_first_of("xX");
  try {
    const int nx = std::stoi(s.substr(0, x));
    const int ny = x == std::string::npos ? nx : std::stoi(s.substr(x + 1));
    return {nx, ny};
  } catch (const std::exception&) {
    throw InvalidParams("resolution must look like NxN, got '" + s + "'");
  }
}

Scene scene_or_default(const std::string& path) { return path.empty() ? Scene{} : load_scene(path); }

// Observer that writes every frame it sees as a PPM.
std::jthread frame_dumper(steering::Session& session, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto client = session.connect(env_token(), true);
  session.post(client, {{{"type", "subscribe"}}, {}});
  return std::jthread([client, dir](std::stop_token stop) {
    while (!stop.stop_requested()) {
      auto m = client->pop(200ms);
      if (!m || m->type() != "frame") continue;
      const auto f = protocol::frame_from_message(*m);
      char name[64];
      std::snprintf(name, sizeof name, "frame_%08llu_v%llu_l%d.ppm", static_cast<unsigned long long>(f.seq),
                    static_cast<unsigned long long>(m->header.value("version", 0ull)), f.level);
      compositor::write_ppm((dir / name).string(), f);
    }
  });
}

int serve(const std::string& scene_path, unsigned short port, unsigned short ws_port, const std::string& res,
          int max_level, int slaves, int traders, const std::string& host, const std::string& assets,
          const std::string& dump_dir) {
  Scene scene = scene_or_default(scene_path);
  if (!res.empty()) std::tie(scene.plan.base_nx, scene.plan.base_ny) = parse_res(res);
  if (max_level >= 0) scene.plan.max_level = max_level;
  steering::SessionOptions so;
  so.token = env_token();
  so.roles = scheduler::RoleConfig{traders > 0 ? traders : scheduler::RoleConfig::for_slaves(slaves).n_traders, slaves};
  steering::Session session(scene, so);
  steering::ServerOptions o;
  o.host = host;
  o.tcp_port = port;
  o.ws_port = ws_port;
  o.assets = assets;
  steering::Server server(session, o);
  std::jthread dumper;
  if (!dump_dir.empty()) dumper = frame_dumper(session, dump_dir);
  std::cout << "steerflow: tcp " << host << ":" << server.tcp_port() << ", ws://" << host << ":"
            << server.ws_port() << "/steer" << (so.token.empty() ? " (no token)" : "") << std::endl;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(100ms);
  server.stop();
  return 0;
}

int batch(const std::string& scene_path, int level, std::int64_t steps, std::int64_t interval,
          const std::string& out) {
  const Scene scene = load_scene(scene_path);
  steering::Session session(scene);
  auto c = session.connect("");
  session.post(c, {{{"type", "subscribe"}}, {}});
  // interactive stage: wait for the budgeted run to finish
  int finest = -1;
  for (;;) {
    const auto st = session.stats();
    if (st.runs_completed + st.runs_cancelled >= 1) break;
    if (auto m = c->pop(100ms); m && m->type() == "level_done") {
      finest = m->header["level"].get<int>();
      std::cerr << "interactive level " << finest << " residual " << m->header["residual"] << "\n";
    }
  }
  session.sync();
  session.post(c, {{{"type", "trigger_batch"}, {"level", level}, {"steps", steps}, {"dump_interval", interval},
                    {"out_path", out}},
                   {}});
  for (;;) {
    auto m = c->pop(1s);
    if (!m) continue;
    if (m->type() == "error") throw Error(m->header["code"].get<std::string>(), m->header["text"].get<std::string>());
    if (m->type() != "batch") continue;
    const auto state = m->header["state"].get<std::string>();
    if (state == "done" || state == "failed") {
      std::cout << m->header.dump() << std::endl;
      return state == "done" ? 0 : 1;
    }
  }
}

int bench_sched(const std::string& scene_path, int slaves, int traders, bool blocks, int steps, int max_leaf,
                double theta, const std::string& trace_path) {
  const Scene scene = scene_or_default(scene_path);
  auto flags = std::make_shared<const lattice::FlagField>(rasterize(scene, scene.plan.base_nx, scene.plan.base_ny));
  const auto tree = partition::build_tree(*flags, max_leaf);
  auto tasks = partition::coalesce(tree, theta);
  if (blocks) tasks = partition::block_tasks(*flags, static_cast<int>(tasks.size()));
  std::vector<double> work;
  for (const auto& t : tasks) work.push_back(t.work);

  const scheduler::RoleConfig roles{traders > 0 ? traders : scheduler::RoleConfig::for_slaves(slaves).n_traders, slaves};
  lattice::DistributionGrid grid(flags);
  lattice::fill_equilibrium(grid, 1.0, scene.params.inflow_velocity(), scene.params.ambient_temp());
  scheduler::Engine engine(roles);
  scheduler::TaskTrace trace;
  partition::PartitionedSolver solver(grid, tasks);
  solver.advance(scene.params, steps, scheduler::wave_runner(engine, &trace, work));

  // the same waves on the virtual clock, task length = estimated work
  scheduler::TaskGraph graph;
  for (double w : work) graph.add_task(w);
  const auto simulated = scheduler::run_simulated(graph, roles, [&](int t) {
    return static_cast<std::int64_t>(work[static_cast<std::size_t>(t)]) + 1;
  });

  if (!trace_path.empty()) {
    std::ofstream out(trace_path);
    if (!out) throw IoError("cannot write " + trace_path);
    scheduler::write_trace_jsonl(out, trace);
  }
  std::cout << json{{"tasks", tasks.size()},
                    {"mode", blocks ? "blocks" : "coalesced"},
                    {"slaves", roles.n_slaves},
                    {"traders", roles.n_traders},
                    {"steps", steps},
                    {"busy_fraction", scheduler::busy_fraction(trace)},
                    {"simulated_busy_fraction", scheduler::busy_fraction(simulated)},
                    {"span_ms", static_cast<double>(trace.span_ns) / 1e6}}
                   .dump()
            << std::endl;
  return 0;
}

int comfort(const std::string& scene_path, int exchanges, int cfd_steps, double tolerance, const std::string& log,
            const std::string& dump_dir) {
  const Scene scene = load_scene(scene_path);
  thermal::CouplingLoop loop(scene);
  std::ofstream file;
  if (!log.empty()) {
    file.open(log);
    if (!file) throw IoError("cannot write " + log);
  }
  std::ostream& out = log.empty() ? std::cout : file;
  const auto last = loop.run(cfd_steps, exchanges, tolerance, [&](const thermal::Exchange& e) {
    out << json(e).dump() << "\n";
  });
  if (!dump_dir.empty()) {
    std::filesystem::create_directories(dump_dir);
    const auto macro = lattice::macroscopics(loop.grid());
    const auto field = viz::scalar_field(macro, loop.grid().flags(), lattice::FieldId::Temp);
    compositor::write_ppm((std::filesystem::path(dump_dir) / "comfort_temp.ppm").string(),
                          compositor::render_monolithic(field, {}));
  }
  std::cerr << "exchanges " << loop.exchanges() << ", mean skin " << last.mean_skin << " C, core "
            << last.mean_core << " C\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"steerflow: interactive lattice-Boltzmann steering server and tools"};
  app.require_subcommand(1);

  std::string scene_path, res, host = "127.0.0.1", assets, dump_dir, out, trace_path, log;
  unsigned short port = 7070, ws_port = 7071;
  int max_level = -1, slaves = 1, traders = 0, level = 1, exchanges = 100, cfd_steps = 10, bench_steps = 10;
  int max_leaf = 1024;
  double theta = partition::kDefaultTheta, tolerance = 0.0;
  std::int64_t steps = 1000, interval = 0;
  bool blocks = false, coalesced = false;

  auto* s = app.add_subcommand("serve", "run a steering session with TCP and WebSocket endpoints");
  s->add_option("--scene", scene_path, "scene JSON")->check(CLI::ExistingFile);
  s->add_option("--port", port, "TCP port");
  s->add_option("--ws-port", ws_port, "WebSocket and static HTTP port");
  s->add_option("--base-res", res, "level-0 resolution, NxN");
  s->add_option("--max-level", max_level, "finest refinement level");
  s->add_option("--slaves", slaves, "worker threads")->check(CLI::PositiveNumber);
  s->add_option("--traders", traders, "work brokers (default: one per four slaves)");
  s->add_option("--host", host, "listen address");
  s->add_option("--assets", assets, "directory of static files")->check(CLI::ExistingDirectory);
  s->add_option("--dump-frames", dump_dir, "write every frame as PPM into this directory");

  auto* b = app.add_subcommand("batch", "interactive run followed by a long run at a finer level");
  b->add_option("--scene", scene_path, "scene JSON")->required()->check(CLI::ExistingFile);
  b->add_option("--level", level, "target level")->required();
  b->add_option("--steps", steps, "steps at the target level")->required();
  b->add_option("--dump-interval", interval, "steps between dumps (0: first and last only)");
  b->add_option("--out", out, "output directory")->required();

  auto* bs = app.add_subcommand("bench-sched", "step a scene through the scheduler and report balance");
  bs->add_option("--scene", scene_path, "scene JSON")->check(CLI::ExistingFile);
  bs->add_option("--slaves", slaves, "worker threads")->check(CLI::PositiveNumber);
  bs->add_option("--traders", traders, "work brokers (default: one per four slaves)");
  auto* fb = bs->add_flag("--blocks", blocks, "uniform blocks");
  auto* fc = bs->add_flag("--coalesced", coalesced, "coalesced partition tasks (default)");
  fb->excludes(fc);
  bs->add_option("--steps", bench_steps, "solver steps")->check(CLI::PositiveNumber);
  bs->add_option("--max-leaf-cells", max_leaf, "partition leaf size");
  bs->add_option("--theta", theta, "coalescing threshold");
  bs->add_option("--trace", trace_path, "write the task trace as JSON lines");

  auto* c = app.add_subcommand("comfort", "coupled flow and thermoregulation run");
  c->add_option("--scene", scene_path, "scene JSON with a manikin")->required()->check(CLI::ExistingFile);
  c->add_option("--exchanges", exchanges, "maximum exchanges")->check(CLI::PositiveNumber);
  c->add_option("--cfd-steps-per-exchange", cfd_steps, "solver steps between exchanges")->check(CLI::PositiveNumber);
  c->add_option("--tolerance", tolerance, "stop once every node changes less than this per exchange");
  c->add_option("--log", log, "JSON lines output (default stdout)");
  c->add_option("--dump-frames", dump_dir, "write the final temperature field as PPM");

  CLI11_PARSE(app, argc, argv);
  try {
    if (s->parsed()) return serve(scene_path, port, ws_port, res, max_level, slaves, traders, host, assets, dump_dir);
    if (b->parsed()) return batch(scene_path, level, steps, interval, out);
    if (bs->parsed()) return bench_sched(scene_path, slaves, traders, blocks, bench_steps, max_leaf, theta, trace_path);
    if (c->parsed()) return comfort(scene_path, exchanges, cfd_steps, tolerance, log, dump_dir);
  } catch (const Error& e) {
    std::cerr << "steerflow: " << e.code() << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "steerflow: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
