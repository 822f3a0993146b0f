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
#include "steerflow/scheduler.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <future>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <queue>
#include <thread>
#include <variant>

#include <json.hpp>

#include "steerflow/error.hpp"

namespace steerflow::scheduler {

// --- configuration and graph ------------------------------------------------

RoleConfig RoleConfig::for_slaves(int n_slaves) {
  RoleConfig r;
  r.n_slaves = n_slaves;
  r.n_traders = std::max(1, (n_slaves + 3) / 4);
  return r;
}

void RoleConfig::validate() const {
  if (n_slaves < 1) throw InvalidParams("need at least one slave");
  if (n_traders < 1) throw InvalidParams("need at least one trader");
  if (n_traders > n_slaves) throw InvalidParams("more traders than slaves");
  if (!(steal_threshold >= 0.0)) throw InvalidParams("steal threshold must be >= 0");
}

TaskGraph::TaskGraph(const std::vector<partition::TaskSpec>& tasks) {
  for (const auto& t : tasks) add_task(t.work, "partition " + std::to_string(t.id));
}

int TaskGraph::add_task(double work, std::string label) {
  if (!(work >= 0.0)) throw InvalidParams("task work must be >= 0");
  const int id = size();
  nodes_.push_back({id, work, std::move(label)});
  prereqs_.emplace_back();
  dependents_.emplace_back();
  return id;
}

void TaskGraph::add_dependency(int task, int prerequisite) {
  if (task < 0 || task >= size() || prerequisite < 0 || prerequisite >= size()) {
    throw UnknownId("dependency names an unknown task");
  }
  auto& p = prereqs_[static_cast<std::size_t>(task)];
  if (std::find(p.begin(), p.end(), prerequisite) != p.end()) return;
  p.push_back(prerequisite);
  dependents_[static_cast<std::size_t>(prerequisite)].push_back(task);
}

double TaskGraph::mean_work() const noexcept {
  if (nodes_.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& n : nodes_) sum += n.work;
  return sum / static_cast<double>(nodes_.size());
}

std::vector<int> TaskGraph::topological_order() const {
  std::vector<int> missing(nodes_.size());
  std::deque<int> ready;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    missing[i] = static_cast<int>(prereqs_[i].size());
    if (missing[i] == 0) ready.push_back(static_cast<int>(i));
  }
  std::vector<int> order;
  while (!ready.empty()) {
    const int t = ready.front();
    ready.pop_front();
    order.push_back(t);
    for (int d : dependents_[static_cast<std::size_t>(t)]) {
      if (--missing[static_cast<std::size_t>(d)] == 0) ready.push_back(d);
    }
  }
  if (order.size() != nodes_.size()) {
    throw DeadlockDetected(std::to_string(nodes_.size() - order.size()) +
                           " tasks can never run: dependency cycle");
  }
  return order;
}

// --- traces -------------------------------------------------------------------

void TaskTrace::append(const TaskTrace& other) {
  n_slaves = std::max(n_slaves, other.n_slaves);
  for (TraceInterval i : other.intervals) {
    i.claim_ns += span_ns;
    i.complete_ns += span_ns;
    intervals.push_back(i);
  }
  span_ns += other.span_ns;
}

std::vector<TraceInterval> TaskTrace::lane(int slave) const {
  std::vector<TraceInterval> out;
  for (const auto& i : intervals) {
    if (i.slave == slave) out.push_back(i);
  }
  std::sort(out.begin(), out.end(), [](const TraceInterval& a, const TraceInterval& b) {
    return a.claim_ns < b.claim_ns;
  });
  return out;
}

double busy_fraction(const TaskTrace& trace) {
  if (trace.span_ns <= 0) throw ZeroSpan("trace has zero span");
  if (trace.n_slaves <= 0) throw InvalidParams("trace has no slaves");
  std::vector<std::int64_t> busy(static_cast<std::size_t>(trace.n_slaves), 0);
  for (const auto& i : trace.intervals) busy.at(static_cast<std::size_t>(i.slave)) += i.complete_ns - i.claim_ns;
  double sum = 0.0;
  for (std::int64_t b : busy) sum += static_cast<double>(b) / static_cast<double>(trace.span_ns);
  return sum / trace.n_slaves;
}

void write_trace_jsonl(std::ostream& out, const TaskTrace& trace) {
  struct Event {
    std::int64_t t;
    int order; // claims before completions at equal times
    const TraceInterval* interval;
  };
  std::vector<Event> events;
  for (const auto& i : trace.intervals) {
    events.push_back({i.claim_ns, 0, &i});
    events.push_back({i.complete_ns, 1, &i});
  }
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    return a.t != b.t ? a.t < b.t : a.order < b.order;
  });
  auto us = [](std::int64_t ns) { return static_cast<double>(ns) / 1000.0; };
  out << nlohmann::json{{"t_us", 0.0}, {"slave", -1}, {"trader", -1}, {"task", -1},
                        {"event", "start"}, {"slaves", trace.n_slaves}}.dump()
      << '\n';
  for (const Event& e : events) {
    nlohmann::json j{{"t_us", us(e.t)},
                     {"slave", e.interval->slave},
                     {"trader", e.interval->trader},
                     {"task", e.interval->task},
                     {"event", e.order == 0 ? "claim" : "complete"}};
    if (e.order == 0) j["stolen"] = e.interval->stolen;
    out << j.dump() << '\n';
  }
  out << nlohmann::json{{"t_us", us(trace.span_ns)}, {"slave", -1}, {"trader", -1}, {"task", -1},
                        {"event", "end"}}.dump()
      << '\n';
}

TaskTrace read_trace_jsonl(std::istream& in) {
  TaskTrace trace;
  std::map<std::pair<int, int>, TraceInterval> open; // (slave, task) -> claim
  std::string line;
  auto ns = [](const nlohmann::json& j) { return std::llround(j.at("t_us").get<double>() * 1000.0); };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const std::string event = j.at("event");
    if (event == "start") {
      trace.n_slaves = j.at("slaves");
    } else if (event == "end") {
      trace.span_ns = ns(j);
    } else if (event == "claim") {
      TraceInterval i;
      i.slave = j.at("slave");
      i.trader = j.at("trader");
      i.task = j.at("task");
      i.claim_ns = ns(j);
      i.stolen = j.value("stolen", false);
      open[{i.slave, i.task}] = i;
    } else if (event == "complete") {
      const auto it = open.find({j.at("slave").get<int>(), j.at("task").get<int>()});
      if (it == open.end()) throw InvalidParams("completion without claim in trace");
      it->second.complete_ns = ns(j);
      trace.intervals.push_back(it->second);
      open.erase(it);
    } else {
      throw InvalidParams("unknown trace event '" + event + "'");
    }
  }
  return trace;
}

// --- trader assignment --------------------------------------------------------

TraderMap contiguous_split(const std::vector<double>& work, int n_traders) {
  if (n_traders < 1) throw InvalidParams("need at least one trader");
  const auto n = work.size();
  const auto k = static_cast<std::size_t>(n_traders);
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + work[i];
  const double inf = std::numeric_limits<double>::infinity();
  // best[j][i]: minimal max-load splitting the first i items into j runs
  std::vector<std::vector<double>> best(k + 1, std::vector<double>(n + 1, inf));
  std::vector<std::vector<std::size_t>> cut(k + 1, std::vector<std::size_t>(n + 1, 0));
  best[0][0] = 0.0;
  for (std::size_t j = 1; j <= k; ++j) {
    for (std::size_t i = 0; i <= n; ++i) {
      for (std::size_t m = 0; m <= i; ++m) {
        const double load = std::max(best[j - 1][m], prefix[i] - prefix[m]);
        if (load < best[j][i]) {
          best[j][i] = load;
          cut[j][i] = m;
        }
      }
    }
  }
  TraderMap out(k);
  std::size_t end = n;
  for (std::size_t j = k; j >= 1; --j) {
    const std::size_t begin = cut[j][end];
    for (std::size_t i = begin; i < end; ++i) out[j - 1].push_back(static_cast<int>(i));
    end = begin;
  }
  return out;
}

TraderMap assign_to_traders(const TaskGraph& graph, int n_traders) {
  std::vector<double> work;
  for (int t = 0; t < graph.size(); ++t) work.push_back(graph.task(t).work);
  return contiguous_split(work, n_traders);
}

TraderMap assign_to_traders(const partition::PartitionTree& tree,
                            const std::vector<partition::TaskSpec>& tasks, int n_traders) {
  const auto leaves = tree.leaves();
  auto rank_of = [&](const partition::Rect& r) {
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      if (tree.node(leaves[i]).rect == r) return static_cast<int>(i);
    }
    throw UnknownId("task rectangle is not a leaf of the tree");
  };
  std::vector<std::pair<int, int>> ranked; // (first leaf rank, position)
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    int rank = std::numeric_limits<int>::max();
    for (const auto& r : tasks[t].rects) rank = std::min(rank, rank_of(r));
    ranked.push_back({rank, static_cast<int>(t)});
  }
  std::sort(ranked.begin(), ranked.end());
  std::vector<double> work;
  for (const auto& [rank, t] : ranked) work.push_back(tasks[static_cast<std::size_t>(t)].work);
  TraderMap split = contiguous_split(work, n_traders);
  for (auto& run : split) {
    for (int& i : run) i = tasks[static_cast<std::size_t>(ranked[static_cast<std::size_t>(i)].second)].id;
  }
  return split;
}

namespace {

std::vector<int> owners_from(const TraderMap& map, int n_tasks, int n_traders) {
  if (static_cast<int>(map.size()) != n_traders) throw InvalidParams("assignment has the wrong trader count");
  std::vector<int> owner(static_cast<std::size_t>(n_tasks), -1);
  for (std::size_t tr = 0; tr < map.size(); ++tr) {
    for (int t : map[tr]) {
      if (t < 0 || t >= n_tasks) throw UnknownId("assignment names an unknown task");
      if (owner[static_cast<std::size_t>(t)] >= 0) throw InvalidParams("task assigned twice");
      owner[static_cast<std::size_t>(t)] = static_cast<int>(tr);
    }
  }
  if (std::find(owner.begin(), owner.end(), -1) != owner.end()) throw InvalidParams("task left unassigned");
  return owner;
}

// --- actors -----------------------------------------------------------------

template <class T>
class Mailbox {
public:
  void push(T message) {
    {
      std::lock_guard lock(mutex_);
      queue_.push_back(std::move(message));
    }
    ready_.notify_one();
  }
  T pop() {
    std::unique_lock lock(mutex_);
    ready_.wait(lock, [&] { return !queue_.empty(); });
    T message = std::move(queue_.front());
    queue_.pop_front();
    return message;
  }

private:
  std::mutex mutex_;
  std::condition_variable ready_;
  std::deque<T> queue_;
};

struct Shutdown {};

struct RunSpec {
  const TaskGraph* graph = nullptr;
  const Executor* executor = nullptr;
  std::vector<int> owner;
  std::promise<TaskTrace> done;
};

namespace msg {
struct Begin { std::uint64_t epoch; RunSpec* run; };
struct Completed { std::uint64_t epoch; int task; int slave; std::optional<std::string> error; };
struct StealRequest { std::uint64_t epoch; int slave; };
struct Advertise { std::uint64_t epoch; int task; };
struct Request { std::uint64_t epoch; int slave; };
struct Steal { std::uint64_t epoch; int slave; };
struct Assign { std::uint64_t epoch; int task; int trader; bool stolen; };
} // namespace msg

using MasterMsg = std::variant<Shutdown, msg::Begin, msg::Completed, msg::StealRequest>;
using TraderMsg = std::variant<Shutdown, msg::Begin, msg::Advertise, msg::Request, msg::Steal>;
using SlaveMsg = std::variant<Shutdown, msg::Begin, msg::Assign>;

// A zero threshold steals any advertised task; otherwise the victim's
// pending work must exceed the floor.
bool stealable(double pending, double floor) { return floor <= 0.0 || pending > floor; }

template <class... F>
struct Overloaded : F... {
  using F::operator()...;
};

} // namespace

struct Engine::Impl {
  RoleConfig roles;
  Mailbox<MasterMsg> master_box;
  std::vector<std::unique_ptr<Mailbox<TraderMsg>>> trader_box;
  std::vector<std::unique_ptr<Mailbox<SlaveMsg>>> slave_box;
  // advertisement board: pending work per trader
  std::vector<std::unique_ptr<std::atomic<double>>> board;
  std::vector<std::unique_ptr<std::atomic<int>>> queued;
  std::vector<std::jthread> threads;
  std::mutex run_mutex; // one run at a time
  std::uint64_t next_epoch = 0;

  // shared per-run state written before Begin and read by actors afterwards
  std::chrono::steady_clock::time_point start;
  std::vector<std::vector<TraceInterval>> lanes;

  explicit Impl(RoleConfig r) : roles(r) {
    roles.validate();
    for (int t = 0; t < roles.n_traders; ++t) {
      trader_box.push_back(std::make_unique<Mailbox<TraderMsg>>());
      board.push_back(std::make_unique<std::atomic<double>>(0.0));
      queued.push_back(std::make_unique<std::atomic<int>>(0));
    }
    for (int s = 0; s < roles.n_slaves; ++s) slave_box.push_back(std::make_unique<Mailbox<SlaveMsg>>());
    lanes.resize(static_cast<std::size_t>(roles.n_slaves));
    threads.emplace_back([this] { master_loop(); });
    for (int t = 0; t < roles.n_traders; ++t) threads.emplace_back([this, t] { trader_loop(t); });
    for (int s = 0; s < roles.n_slaves; ++s) threads.emplace_back([this, s] { slave_loop(s); });
  }

  ~Impl() {
    master_box.push(Shutdown{});
    for (auto& b : trader_box) b->push(Shutdown{});
    for (auto& b : slave_box) b->push(Shutdown{});
    threads.clear(); // joins
  }

  std::int64_t now_ns() const {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start).count();
  }

  void master_loop() {
    std::uint64_t epoch = 0;
    RunSpec* run = nullptr;
    std::vector<int> missing;
    std::vector<int> parked;
    int completed = 0;
    int advertised = 0;
    std::optional<std::pair<int, std::string>> failure;
    double steal_floor = 0.0;

    auto advertise = [&](int task) {
      const int owner = run->owner[static_cast<std::size_t>(task)];
      board[static_cast<std::size_t>(owner)]->fetch_add(run->graph->task(task).work);
      queued[static_cast<std::size_t>(owner)]->fetch_add(1);
      trader_box[static_cast<std::size_t>(owner)]->push(msg::Advertise{epoch, task});
      ++advertised;
    };
    auto broker = [&](int slave) {
      const auto home = static_cast<std::size_t>(roles.home_trader(slave));
      if (queued[home]->load() > 0) {
        trader_box[home]->push(msg::Request{epoch, slave});
        return;
      }
      int victim = -1;
      double most = 0.0;
      for (int t = 0; t < roles.n_traders; ++t) {
        const auto i = static_cast<std::size_t>(t);
        const double pending = board[i]->load();
        if (queued[i]->load() > 0 && stealable(pending, steal_floor) && (victim < 0 || pending > most)) {
          victim = t;
          most = pending;
        }
      }
      if (victim < 0) {
        parked.push_back(slave);
      } else {
        trader_box[static_cast<std::size_t>(victim)]->push(msg::Steal{epoch, slave});
      }
    };
    auto finish = [&] {
      TaskTrace trace;
      trace.n_slaves = roles.n_slaves;
      trace.span_ns = run->graph->size() == 0 ? 0 : now_ns();
      for (auto& lane : lanes) {
        trace.intervals.insert(trace.intervals.end(), lane.begin(), lane.end());
        lane.clear();
      }
      std::sort(trace.intervals.begin(), trace.intervals.end(),
                [](const TraceInterval& a, const TraceInterval& b) { return a.complete_ns < b.complete_ns; });
      if (failure) {
        run->done.set_exception(std::make_exception_ptr(TaskFailed(failure->first, failure->second)));
      } else if (completed < run->graph->size()) {
        run->done.set_exception(std::make_exception_ptr(DeadlockDetected(
            std::to_string(run->graph->size() - completed) + " tasks never became runnable")));
      } else {
        run->done.set_value(std::move(trace));
      }
      run = nullptr;
      parked.clear();
    };

    while (true) {
      MasterMsg m = master_box.pop();
      if (std::holds_alternative<Shutdown>(m)) return;
      if (auto* b = std::get_if<msg::Begin>(&m)) {
        epoch = b->epoch;
        run = b->run;
        completed = 0;
        advertised = 0;
        failure.reset();
        parked.clear();
        steal_floor = roles.steal_threshold * run->graph->mean_work();
        for (auto& t : trader_box) t->push(msg::Begin{epoch, nullptr});
        for (auto& s : slave_box) s->push(msg::Begin{epoch, nullptr});
        if (run->graph->size() == 0) {
          finish();
          continue;
        }
        missing.assign(static_cast<std::size_t>(run->graph->size()), 0);
        for (int t = 0; t < run->graph->size(); ++t) {
          missing[static_cast<std::size_t>(t)] = static_cast<int>(run->graph->prerequisites(t).size());
        }
        for (int t = 0; t < run->graph->size(); ++t) {
          if (missing[static_cast<std::size_t>(t)] == 0) advertise(t);
        }
        for (int s = 0; s < roles.n_slaves; ++s) {
          trader_box[static_cast<std::size_t>(roles.home_trader(s))]->push(msg::Request{epoch, s});
        }
        continue;
      }
      if (run == nullptr) continue;
      if (auto* c = std::get_if<msg::Completed>(&m)) {
        if (c->epoch != epoch) continue;
        ++completed;
        if (c->error && !failure) failure = std::make_pair(c->task, *c->error);
        if (!failure) {
          for (int d : run->graph->dependents(c->task)) {
            if (--missing[static_cast<std::size_t>(d)] == 0) advertise(d);
          }
          std::vector<int> retry;
          retry.swap(parked);
          for (int s : retry) broker(s);
        }
        if (completed == advertised) {
          finish();
        }
        continue;
      }
      if (auto* r = std::get_if<msg::StealRequest>(&m)) {
        if (r->epoch != epoch || failure) continue;
        broker(r->slave);
      }
    }
  }

  void trader_loop(int self) {
    std::uint64_t epoch = 0;
    std::deque<int> queue;
    const TaskGraph* graph = nullptr;
    auto& pending = *board[static_cast<std::size_t>(self)];
    auto hand_out = [&](int slave, bool from_back) {
      const int task = from_back ? queue.back() : queue.front();
      if (from_back) {
        queue.pop_back();
      } else {
        queue.pop_front();
      }
      pending.fetch_sub(graph->task(task).work);
      queued[static_cast<std::size_t>(self)]->fetch_sub(1);
      slave_box[static_cast<std::size_t>(slave)]->push(
          msg::Assign{epoch, task, self, roles.home_trader(slave) != self});
    };
    while (true) {
      TraderMsg m = trader_box[static_cast<std::size_t>(self)]->pop();
      if (std::holds_alternative<Shutdown>(m)) return;
      std::visit(Overloaded{
                     [](Shutdown) {},
                     [&](const msg::Begin& b) {
                       epoch = b.epoch;
                       queue.clear();
                       graph = current_graph;
                     },
                     [&](const msg::Advertise& a) {
                       if (a.epoch == epoch) queue.push_back(a.task);
                     },
                     [&](const msg::Request& r) {
                       if (r.epoch != epoch) return;
                       if (!queue.empty()) {
                         hand_out(r.slave, false);
                       } else {
                         master_box.push(msg::StealRequest{epoch, r.slave});
                       }
                     },
                     [&](const msg::Steal& s) {
                       if (s.epoch != epoch) return;
                       if (!queue.empty()) {
                         hand_out(s.slave, true);
                       } else {
                         master_box.push(msg::StealRequest{epoch, s.slave});
                       }
                     },
                 },
                 m);
    }
  }

  void slave_loop(int self) {
    std::uint64_t epoch = 0;
    const Executor* executor = nullptr;
    auto& lane = lanes[static_cast<std::size_t>(self)];
    const int home = roles.home_trader(self);
    while (true) {
      SlaveMsg m = slave_box[static_cast<std::size_t>(self)]->pop();
      if (std::holds_alternative<Shutdown>(m)) return;
      if (auto* b = std::get_if<msg::Begin>(&m)) {
        epoch = b->epoch;
        executor = current_executor;
        continue;
      }
      const auto& a = std::get<msg::Assign>(m);
      if (a.epoch != epoch) continue;
      TraceInterval interval;
      interval.slave = self;
      interval.trader = a.trader;
      interval.task = a.task;
      interval.stolen = a.stolen;
      interval.claim_ns = now_ns();
      std::optional<std::string> error;
      try {
        (*executor)(a.task);
      } catch (const std::exception& e) {
        error = e.what();
      } catch (...) {
        error = "unknown exception";
      }
      interval.complete_ns = now_ns();
      lane.push_back(interval);
      master_box.push(msg::Completed{epoch, a.task, self, std::move(error)});
      trader_box[static_cast<std::size_t>(home)]->push(msg::Request{epoch, self});
    }
  }

  // published before Begin, read by actors on Begin
  const TaskGraph* current_graph = nullptr;
  const Executor* current_executor = nullptr;
};

Engine::Engine(RoleConfig roles) : impl_(std::make_unique<Impl>(roles)) {}
Engine::~Engine() = default;

const RoleConfig& Engine::roles() const noexcept { return impl_->roles; }

TaskTrace Engine::run(const TaskGraph& graph, const Executor& executor, const TraderMap* assignment) {
  graph.topological_order(); // rejects cycles before anything runs
  std::lock_guard lock(impl_->run_mutex);
  RunSpec spec;
  spec.graph = &graph;
  spec.executor = &executor;
  spec.owner = assignment ? owners_from(*assignment, graph.size(), impl_->roles.n_traders)
                          : owners_from(assign_to_traders(graph, impl_->roles.n_traders), graph.size(),
                                        impl_->roles.n_traders);
  auto result = spec.done.get_future();
  impl_->current_graph = &graph;
  impl_->current_executor = &executor;
  for (auto& b : impl_->board) b->store(0.0);
  for (auto& q : impl_->queued) q->store(0);
  impl_->start = std::chrono::steady_clock::now();
  impl_->master_box.push(msg::Begin{++impl_->next_epoch, &spec});
  return result.get();
}

TaskTrace run(const TaskGraph& graph, const RoleConfig& roles, const Executor& executor) {
  Engine engine(roles);
  return engine.run(graph, executor);
}

// --- simulated mode -------------------------------------------------------------

TaskTrace run_simulated(const TaskGraph& graph, const RoleConfig& roles,
                        const std::function<std::int64_t(int)>& duration, const Executor& executor,
                        const TraderMap* assignment) {
  roles.validate();
  graph.topological_order();
  const int n = graph.size();
  const auto owner = owners_from(assignment ? *assignment : assign_to_traders(graph, roles.n_traders), n,
                                 roles.n_traders);
  const auto traders = static_cast<std::size_t>(roles.n_traders);
  std::vector<std::deque<int>> queue(traders);
  std::vector<double> pending(traders, 0.0);
  std::vector<int> missing(static_cast<std::size_t>(n));
  std::vector<bool> idle(static_cast<std::size_t>(roles.n_slaves), true);
  const double floor = roles.steal_threshold * graph.mean_work();
  std::optional<std::pair<int, std::string>> failure;

  auto advertise = [&](int t) {
    const auto o = static_cast<std::size_t>(owner[static_cast<std::size_t>(t)]);
    queue[o].push_back(t);
    pending[o] += graph.task(t).work;
  };
  for (int t = 0; t < n; ++t) {
    missing[static_cast<std::size_t>(t)] = static_cast<int>(graph.prerequisites(t).size());
    if (missing[static_cast<std::size_t>(t)] == 0) advertise(t);
  }

  using Event = std::tuple<std::int64_t, int, std::size_t>; // (time, slave, interval index)
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events;
  TaskTrace trace;
  trace.n_slaves = roles.n_slaves;
  std::int64_t now = 0;
  int completed = 0;

  auto dispatch = [&] {
    for (int s = 0; s < roles.n_slaves; ++s) {
      if (!idle[static_cast<std::size_t>(s)] || failure) continue;
      const auto home = static_cast<std::size_t>(roles.home_trader(s));
      int trader = -1;
      bool from_back = false;
      if (!queue[home].empty()) {
        trader = static_cast<int>(home);
      } else {
        double most = 0.0;
        for (std::size_t t = 0; t < traders; ++t) {
          if (!queue[t].empty() && stealable(pending[t], floor) && (trader < 0 || pending[t] > most)) {
            trader = static_cast<int>(t);
            most = pending[t];
          }
        }
        from_back = true;
      }
      if (trader < 0) continue;
      auto& q = queue[static_cast<std::size_t>(trader)];
      const int task = from_back ? q.back() : q.front();
      if (from_back) {
        q.pop_back();
      } else {
        q.pop_front();
      }
      pending[static_cast<std::size_t>(trader)] -= graph.task(task).work;
      idle[static_cast<std::size_t>(s)] = false;
      if (executor) {
        try {
          executor(task);
        } catch (const std::exception& e) {
          if (!failure) failure = std::make_pair(task, std::string(e.what()));
        }
      }
      const std::int64_t length = std::max<std::int64_t>(0, duration(task));
      trace.intervals.push_back({s, trader, task, now, now + length, static_cast<std::size_t>(trader) != home});
      events.push({now + length, s, trace.intervals.size() - 1});
    }
  };

  dispatch();
  while (!events.empty()) {
    const auto [time, slave, index] = events.top();
    events.pop();
    now = time;
    idle[static_cast<std::size_t>(slave)] = true;
    ++completed;
    if (!failure) {
      for (int d : graph.dependents(trace.intervals[index].task)) {
        if (--missing[static_cast<std::size_t>(d)] == 0) advertise(d);
      }
    }
    dispatch();
  }
  trace.span_ns = now;
  std::stable_sort(trace.intervals.begin(), trace.intervals.end(),
                   [](const TraceInterval& a, const TraceInterval& b) { return a.complete_ns < b.complete_ns; });
  if (failure) throw TaskFailed(failure->first, failure->second);
  if (completed < n) throw DeadlockDetected(std::to_string(n - completed) + " tasks never became runnable");
  return trace;
}

partition::WaveRunner wave_runner(Engine& engine, TaskTrace* trace, std::vector<double> work) {
  return [&engine, trace, work = std::move(work)](int count, const std::function<void(int)>& body) {
    TaskGraph graph;
    for (int i = 0; i < count; ++i) {
      graph.add_task(static_cast<std::size_t>(i) < work.size() ? work[static_cast<std::size_t>(i)] : 1.0);
    }
    const TaskTrace wave = engine.run(graph, body);
    if (trace) trace->append(wave);
  };
}

} // namespace steerflow::scheduler
