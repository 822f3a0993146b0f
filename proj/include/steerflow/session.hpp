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

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "steerflow/protocol.hpp"
#include "steerflow/scene.hpp"
#include "steerflow/scheduler.hpp"

namespace steerflow::steering {

// Outbound queue of one connected client. When full, the oldest droppable
// message (frame, primitives, comfort record) is evicted; other messages are
// always kept, even past the capacity.
class Client {
public:
  Client(int id, bool view_only, std::size_t capacity);

  int id() const noexcept { return id_; }
  bool view_only() const noexcept { return view_only_; }

  std::optional<protocol::Message> try_pop();
  std::optional<protocol::Message> pop(std::chrono::milliseconds timeout);
  std::size_t pending() const;
  std::uint64_t dropped() const;

  // Called without the queue lock after every push, e.g. to wake a writer.
  void on_ready(std::function<void()> notify);

  void push(protocol::Message message);
  void close();
  bool closed() const;

private:
  const int id_;
  const bool view_only_;
  const std::size_t capacity_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<protocol::Message> queue_;
  std::function<void()> notify_;
  std::uint64_t dropped_ = 0;
  bool closed_ = false;
};

struct SessionOptions {
  std::string token;                  // empty: any token is accepted
  scheduler::RoleConfig roles;        // workers for stepping and composition
  std::size_t queue_capacity = 64;
  std::filesystem::path snapshot_dir; // empty: a directory under the system temp dir
  int max_running_batches = 1;
  int max_leaf_cells = 1024;
  int comfort_frame_every = 10;       // exchanges between coupling frames
};

enum class BatchState { Queued, Running, Done, Failed };
const char* to_string(BatchState state);

struct BatchInfo {
  int id = 0;
  BatchState state = BatchState::Queued;
  std::uint64_t version = 0; // scene version the job was seeded from
  int source_level = 0;
  int level = 0;
  std::int64_t steps = 0;
  std::int64_t dump_interval = 0;
  std::string out_dir;
  std::vector<std::string> dumps;
  std::string error;
};

nlohmann::json to_json(const BatchInfo& info);

struct SessionStats {
  std::uint64_t runs_started = 0;
  std::uint64_t runs_completed = 0; // ran to the end of their plan
  std::uint64_t runs_cancelled = 0;
  std::uint64_t frames_sent = 0;
  std::uint64_t stale_results = 0;  // results of superseded versions, never sent
};

// One steering session. Client messages, simulation results and batch
// updates are handled in order by a single actor thread that owns the scene;
// budgeted runs and coupling loops execute on a separate simulation thread,
// batch jobs on threads of their own.
//
// Client message types: add_geometry, delete_geometry, move_geometry,
// scale_geometry, set_params, set_budget, set_field, set_style, subscribe,
// snapshot, trigger_batch, run_comfort. Every message is answered with a
// scene_ack or an error carrying the current scene version; a "ref" member
// of the request is echoed.
class Session {
public:
  explicit Session(Scene scene, SessionOptions options = {});
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  // Throws Unauthorized on a token mismatch.
  std::shared_ptr<Client> connect(std::string_view token, bool view_only = false);
  void disconnect(const std::shared_ptr<Client>& client);
  void post(const std::shared_ptr<Client>& client, protocol::Message message);

  std::uint64_t version() const;
  Scene scene() const;
  SessionStats stats() const;
  std::optional<BatchInfo> batch(int id) const;
  // Blocks until the job is Done or Failed or the timeout passes.
  std::optional<BatchInfo> wait_batch(int id, std::chrono::milliseconds timeout) const;
  // Blocks until every message posted so far has been handled.
  void sync() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

} // namespace steerflow::steering
