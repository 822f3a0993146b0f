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

#include <filesystem>
#include <memory>
#include <string>

#include "steerflow/session.hpp"

namespace steerflow::steering {

struct ServerOptions {
  std::string host = "127.0.0.1";
  unsigned short tcp_port = 0; // 0 picks a free port
  unsigned short ws_port = 0;
  std::filesystem::path assets; // static files on the WebSocket port; empty serves none
};

// Network front end of a session.
//
// TCP: length-prefixed messages; the first must be
//   {"type":"hello","token":...,"view_only":false}
// and is answered like any other message.
// WebSocket: ws://host:ws_port/steer?token=...&mode=view, one protocol
// message per binary WebSocket message. Other GET requests on the same port
// are answered from the asset directory.
class Server {
public:
  Server(Session& session, ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  unsigned short tcp_port() const noexcept;
  unsigned short ws_port() const noexcept;
  void stop();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

} // namespace steerflow::steering
