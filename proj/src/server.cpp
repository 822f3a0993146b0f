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
#include "steerflow/server.hpp"

#include <array>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "steerflow/error.hpp"

namespace steerflow::steering {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using protocol::Message;

namespace {

// Lets session threads wake a connection on the io thread, and lets the
// server cut that path before the io_context goes away.
struct Waker {
  std::mutex mutex;
  asio::io_context* io = nullptr;

  void post(std::function<void()> fn) {
    std::lock_guard lock(mutex);
    if (io) asio::post(*io, std::move(fn));
  }
  void detach() {
    std::lock_guard lock(mutex);
    io = nullptr;
  }
};

struct Registry {
  std::vector<std::weak_ptr<Client>> clients; // io thread only
};

std::string percent_decode(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      out += static_cast<char>(std::stoi(std::string(s.substr(i + 1, 2)), nullptr, 16));
      i += 2;
    } else if (s[i] == '+') {
      out += ' ';
    } else {
      out += s[i];
    }
  }
  return out;
}

std::map<std::string, std::string> query_params(std::string_view target) {
  std::map<std::string, std::string> out;
  const auto q = target.find('?');
  if (q == std::string_view::npos) return out;
  std::string_view rest = target.substr(q + 1);
  while (!rest.empty()) {
    const auto amp = rest.find('&');
    const std::string_view item = rest.substr(0, amp);
    const auto eq = item.find('=');
    try {
      out[percent_decode(item.substr(0, eq))] =
          eq == std::string_view::npos ? std::string{} : percent_decode(item.substr(eq + 1));
    } catch (const std::exception&) {
      // malformed escape: ignore the item
    }
    if (amp == std::string_view::npos) break;
    rest = rest.substr(amp + 1);
  }
  return out;
}

std::string_view path_of(std::string_view target) { return target.substr(0, target.find('?')); }

const char* mime_type(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html";
  if (ext == ".js" || ext == ".mjs") return "text/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  if (ext == ".wasm") return "application/wasm";
  if (ext == ".txt") return "text/plain";
  return "application/octet-stream";
}

// --- TCP -----------------------------------------------------------------------

class TcpConnection : public std::enable_shared_from_this<TcpConnection> {
public:
  TcpConnection(tcp::socket socket, Session& session, std::shared_ptr<Waker> waker, Registry& registry)
      : socket_(std::move(socket)), session_(session), waker_(std::move(waker)), registry_(registry) {}

  void start() { read(); }

private:
  void read() {
    socket_.async_read_some(asio::buffer(buffer_), [self = shared_from_this()](beast::error_code ec, std::size_t n) {
      if (ec) return self->shutdown();
      self->received(n);
    });
  }

  void received(std::size_t n) {
    try {
      decoder_.feed({buffer_.data(), n});
      while (auto m = decoder_.next()) {
        if (!client_) {
          hello(*m);
          if (closing_) return pump();
        } else {
          session_.post(client_, std::move(*m));
        }
      }
    } catch (const Error& e) {
      fail(protocol::error_message(e.code(), e.what(), session_.version()));
      return;
    }
    read();
  }

  void hello(const Message& m) {
    if (m.type() != "hello") {
      fail(protocol::error_message("Unauthorized", "first message must be hello", session_.version()));
      return;
    }
    try {
      client_ = session_.connect(m.header.value("token", std::string{}), m.header.value("view_only", false));
    } catch (const Unauthorized& e) {
      fail(protocol::error_message(e.code(), e.what(), session_.version()));
      return;
    }
    registry_.clients.push_back(client_);
    std::weak_ptr<TcpConnection> weak = shared_from_this();
    client_->on_ready([waker = waker_, weak] {
      waker->post([weak] {
        if (auto self = weak.lock()) self->pump();
      });
    });
    Message ack = protocol::scene_ack(session_.version());
    if (m.header.contains("ref")) ack.header["ref"] = m.header.at("ref");
    client_->push(std::move(ack));
  }

  // Final message, then close once written.
  void fail(Message m) {
    direct_.push_back(protocol::encode(m));
    closing_ = true;
    pump();
  }

  void pump() {
    if (writing_ || closed_) return;
    if (!direct_.empty()) {
      out_ = std::move(direct_.front());
      direct_.pop_front();
    } else if (client_ && !closing_) {
      auto m = client_->try_pop();
      if (!m) {
        if (client_->closed()) shutdown();
        return;
      }
      out_ = protocol::encode(*m);
    } else {
      if (closing_) shutdown();
      return;
    }
    writing_ = true;
    asio::async_write(socket_, asio::buffer(out_), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->writing_ = false;
      if (ec) return self->shutdown();
      self->pump();
    });
  }

  void shutdown() {
    if (closed_) return;
    closed_ = true;
    beast::error_code ignored;
    socket_.shutdown(tcp::socket::shutdown_both, ignored);
    socket_.close(ignored);
    if (client_) session_.disconnect(client_);
  }

  tcp::socket socket_;
  Session& session_;
  std::shared_ptr<Waker> waker_;
  Registry& registry_;
  std::shared_ptr<Client> client_;
  protocol::Decoder decoder_;
  std::array<std::uint8_t, 1 << 16> buffer_{};
  std::deque<std::vector<std::uint8_t>> direct_;
  std::vector<std::uint8_t> out_;
  bool writing_ = false;
  bool closing_ = false;
  bool closed_ = false;
};

// --- WebSocket -----------------------------------------------------------------

class WsConnection : public std::enable_shared_from_this<WsConnection> {
public:
  WsConnection(beast::tcp_stream stream, Session& session, std::shared_ptr<Waker> waker,
               std::shared_ptr<Client> client)
      : ws_(std::move(stream)), session_(session), waker_(std::move(waker)), client_(std::move(client)) {}

  void start(http::request<http::string_body> request) {
    ws_.binary(true);
    ws_.async_accept(request, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return self->shutdown();
      std::weak_ptr<WsConnection> weak = self;
      self->client_->on_ready([waker = self->waker_, weak] {
        waker->post([weak] {
          if (auto s = weak.lock()) s->pump();
        });
      });
      self->client_->push(protocol::scene_ack(self->session_.version()));
      self->read();
    });
  }

private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->shutdown();
      self->received();
    });
  }

  void received() {
    const auto data = buffer_.cdata();
    std::span<const std::uint8_t> bytes(static_cast<const std::uint8_t*>(data.data()), data.size());
    try {
      session_.post(client_, protocol::decode(bytes));
    } catch (const Error& e) {
      // message boundaries survive a bad message, so the connection stays up
      client_->push(protocol::error_message(e.code(), e.what(), session_.version()));
    }
    buffer_.consume(buffer_.size());
    read();
  }

  void pump() {
    if (writing_ || closed_) return;
    auto m = client_->try_pop();
    if (!m) {
      if (client_->closed()) shutdown();
      return;
    }
    out_ = protocol::encode(*m);
    writing_ = true;
    ws_.async_write(asio::buffer(out_), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->writing_ = false;
      if (ec) return self->shutdown();
      self->pump();
    });
  }

  void shutdown() {
    if (closed_) return;
    closed_ = true;
    beast::error_code ignored;
    beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ignored);
    beast::get_lowest_layer(ws_).socket().close(ignored);
    session_.disconnect(client_);
  }

  websocket::stream<beast::tcp_stream> ws_;
  Session& session_;
  std::shared_ptr<Waker> waker_;
  std::shared_ptr<Client> client_;
  beast::flat_buffer buffer_;
  std::vector<std::uint8_t> out_;
  bool writing_ = false;
  bool closed_ = false;
};

// HTTP side of the WebSocket port: upgrades /steer, serves assets otherwise.
class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
public:
  HttpConnection(tcp::socket socket, Session& session, std::shared_ptr<Waker> waker, Registry& registry,
                 const std::filesystem::path& assets)
      : stream_(std::move(socket)), session_(session), waker_(std::move(waker)), registry_(registry),
        assets_(assets) {}

  void start() { read(); }

private:
  void read() {
    request_ = {};
    http::async_read(stream_, buffer_, request_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->close();
      self->route();
    });
  }

  void route() {
    const std::string target(request_.target());
    if (websocket::is_upgrade(request_)) {
      if (path_of(target) != "/steer") return respond(http::status::not_found, "no such endpoint\n", "text/plain");
      auto q = query_params(target);
      std::shared_ptr<Client> client;
      try {
        client = session_.connect(q["token"], q["mode"] == "view");
      } catch (const Unauthorized& e) {
        return respond(http::status::unauthorized, std::string(e.what()) + "\n", "text/plain");
      }
      registry_.clients.push_back(client);
      std::make_shared<WsConnection>(std::move(stream_), session_, waker_, std::move(client))
          ->start(std::move(request_));
      return;
    }
    if (request_.method() != http::verb::get && request_.method() != http::verb::head) {
      return respond(http::status::method_not_allowed, "method not allowed\n", "text/plain");
    }
    serve_file(std::string(path_of(target)));
  }

  void serve_file(std::string path) {
    if (assets_.empty() || path.empty() || path[0] != '/' || path.find("..") != std::string::npos) {
      return respond(http::status::not_found, "not found\n", "text/plain");
    }
    if (path.back() == '/') path += "index.html";
    const auto file = assets_ / path.substr(1);
    std::ifstream in(file, std::ios::binary);
    if (!in || std::filesystem::is_directory(file)) return respond(http::status::not_found, "not found\n", "text/plain");
    std::ostringstream body;
    body << in.rdbuf();
    respond(http::status::ok, body.str(), mime_type(file));
  }

  void respond(http::status status, std::string body, const char* type) {
    auto res = std::make_shared<http::response<http::string_body>>(status, request_.version());
    res->set(http::field::server, "steerflow");
    res->set(http::field::content_type, type);
    res->keep_alive(request_.keep_alive() && status == http::status::ok);
    if (request_.method() == http::verb::head) {
      res->content_length(body.size());
    } else {
      res->body() = std::move(body);
      res->prepare_payload();
    }
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
      if (ec || !res->keep_alive()) return self->close();
      self->read();
    });
  }

  void close() {
    beast::error_code ignored;
    stream_.socket().shutdown(tcp::socket::shutdown_both, ignored);
    stream_.socket().close(ignored);
  }

  beast::tcp_stream stream_;
  Session& session_;
  std::shared_ptr<Waker> waker_;
  Registry& registry_;
  const std::filesystem::path& assets_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> request_;
};

} // namespace

struct Server::Impl {
  Session& session;
  ServerOptions options;
  asio::io_context io;
  tcp::acceptor tcp_acceptor{io};
  tcp::acceptor ws_acceptor{io};
  std::shared_ptr<Waker> waker = std::make_shared<Waker>();
  Registry registry;
  std::thread thread;
  bool stopped = false;

  Impl(Session& s, ServerOptions o) : session(s), options(std::move(o)) {}

  void listen(tcp::acceptor& acceptor, unsigned short port) {
    const tcp::endpoint ep(asio::ip::make_address(options.host), port);
    acceptor.open(ep.protocol());
    acceptor.set_option(asio::socket_base::reuse_address(true));
    acceptor.bind(ep);
    acceptor.listen();
  }

  void accept_tcp() {
    tcp_acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      socket.set_option(tcp::no_delay(true));
      std::make_shared<TcpConnection>(std::move(socket), session, waker, registry)->start();
      accept_tcp();
    });
  }

  void accept_ws() {
    ws_acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      socket.set_option(tcp::no_delay(true));
      std::make_shared<HttpConnection>(std::move(socket), session, waker, registry, options.assets)->start();
      accept_ws();
    });
  }
};

Server::Server(Session& session, ServerOptions options)
    : impl_(std::make_unique<Impl>(session, std::move(options))) {
  try {
    impl_->listen(impl_->tcp_acceptor, impl_->options.tcp_port);
    impl_->listen(impl_->ws_acceptor, impl_->options.ws_port);
  } catch (const boost::system::system_error& e) {
    throw IoError(std::string("cannot listen: ") + e.what());
  }
  impl_->waker->io = &impl_->io;
  impl_->accept_tcp();
  impl_->accept_ws();
  impl_->thread = std::thread([this] { impl_->io.run(); });
}

Server::~Server() { stop(); }

unsigned short Server::tcp_port() const noexcept { return impl_->tcp_acceptor.local_endpoint().port(); }
unsigned short Server::ws_port() const noexcept { return impl_->ws_acceptor.local_endpoint().port(); }

void Server::stop() {
  if (impl_->stopped) return;
  impl_->stopped = true;
  impl_->waker->detach();
  impl_->io.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
  for (auto& weak : impl_->registry.clients) {
    if (auto c = weak.lock()) {
      c->on_ready(nullptr);
      impl_->session.disconnect(c);
    }
  }
}

} // namespace steerflow::steering
