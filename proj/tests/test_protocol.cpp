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
#include <doctest.h>

#include <random>

#include "steerflow/error.hpp"
#include "steerflow/protocol.hpp"

using namespace steerflow;
using namespace steerflow::protocol;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& header, const std::vector<std::uint8_t>& payload = {}) {
  std::vector<std::uint8_t> out;
  const auto n = header.size();
  out.push_back(static_cast<std::uint8_t>(n & 0xff));
  out.push_back(static_cast<std::uint8_t>((n >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((n >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((n >> 24) & 0xff));
  out.insert(out.end(), header.begin(), header.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

} // namespace

TEST_CASE("encoding is length, header, payload") {
  Message m{{{"type", "scene_ack"}, {"version", 2}}, {}};
  CHECK(encode(m) == bytes_of(R"({"type":"scene_ack","version":2})"));

  Message p{{{"type", "blob"}}, {1, 2, 3}};
  CHECK(encode(p) == bytes_of(R"({"payload_bytes":3,"type":"blob"})", {1, 2, 3}));
}

TEST_CASE("decoder reassembles arbitrarily split streams") {
  std::mt19937 rng(5);
  std::vector<Message> sent;
  std::vector<std::uint8_t> stream;
  for (int k = 0; k < 30; ++k) {
    Message m{{{"type", k % 3 == 0 ? "frame" : "level_done"}, {"k", k}}, {}};
    if (k % 3 == 0) {
      m.payload.resize(static_cast<std::size_t>(rng() % 300));
      for (auto& b : m.payload) b = static_cast<std::uint8_t>(rng());
      m.header["payload_bytes"] = m.payload.size();
    }
    const auto b = encode(m);
    stream.insert(stream.end(), b.begin(), b.end());
    sent.push_back(std::move(m));
  }
  for (std::size_t chunk : {std::size_t{1}, std::size_t{3}, std::size_t{64}, stream.size()}) {
    Decoder d;
    std::vector<Message> got;
    for (std::size_t at = 0; at < stream.size(); at += chunk) {
      d.feed({stream.data() + at, std::min(chunk, stream.size() - at)});
      while (auto m = d.next()) got.push_back(std::move(*m));
    }
    REQUIRE(got.size() == sent.size());
    for (std::size_t k = 0; k < got.size(); ++k) {
      CHECK(got[k].header == sent[k].header);
      CHECK(got[k].payload == sent[k].payload);
    }
    CHECK(d.buffered() == 0);
  }
}

TEST_CASE("malformed input is rejected") {
  auto fails = [](const std::vector<std::uint8_t>& b) {
    Decoder d;
    d.feed(b);
    CHECK_THROWS_AS(d.next(), ProtocolError);
  };
  fails(bytes_of("{nope"));
  fails(bytes_of("[1,2]"));
  fails(bytes_of(R"({"kind":"x"})"));
  fails(bytes_of(R"({"type":"x","payload_bytes":-1})"));
  fails(bytes_of(R"({"type":"x","payload_bytes":"3"})"));
  fails({0xff, 0xff, 0xff, 0x7f});

  CHECK_THROWS_AS(decode(bytes_of(R"({"type":"x","payload_bytes":4})", {1, 2})), ProtocolError);
  auto extra = bytes_of(R"({"type":"x"})");
  extra.push_back(0);
  CHECK_THROWS_AS(decode(extra), ProtocolError);
  CHECK(decode(bytes_of(R"({"type":"x"})")).type() == "x");

  Decoder partial;
  const auto b = bytes_of(R"({"type":"x"})");
  partial.feed({b.data(), b.size() - 1});
  CHECK_FALSE(partial.next().has_value());
}

TEST_CASE("frame messages carry rows top first") {
  compositor::Frame f;
  f.width = 3;
  f.height = 4;
  f.seq = 9;
  f.level = 1;
  f.field = lattice::FieldId::Temp;
  f.timestamp_ms = 1234;
  f.rgba.resize(4 * 3 * 4);
  for (int y = 0; y < 4; ++y) {
    for (int k = 0; k < 12; ++k) f.rgba[static_cast<std::size_t>(y * 12 + k)] = static_cast<std::uint8_t>(10 * y + k);
  }
  const Message m = frame_message(f, 7);
  CHECK(m.type() == "frame");
  CHECK(m.header["seq"] == 9);
  CHECK(m.header["level"] == 1);
  CHECK(m.header["field"] == "temp");
  CHECK(m.header["w"] == 3);
  CHECK(m.header["h"] == 4);
  CHECK(m.header["version"] == 7);
  REQUIRE(m.payload.size() == 48);
  CHECK(m.payload[0] == 30); // first wire row is the highest frame row
  CHECK(m.payload[47] == 11);

  const auto wire = decode(encode(m));
  CHECK(wire.header["payload_bytes"] == 4 * 3 * 4);
  const auto back = frame_from_message(wire);
  CHECK(back.rgba == f.rgba);
  CHECK(back.seq == 9);
  CHECK(back.field == lattice::FieldId::Temp);

  Message cut = m;
  cut.payload.pop_back();
  CHECK_THROWS_AS(frame_from_message(cut), ProtocolError);
}

TEST_CASE("only visual messages are droppable") {
  CHECK(droppable(Message{{{"type", "frame"}}, {}}));
  CHECK(droppable(Message{{{"type", "primitives"}}, {}}));
  CHECK(droppable(Message{{{"type", "comfort"}}, {}}));
  CHECK_FALSE(droppable(scene_ack(1)));
  CHECK_FALSE(droppable(Message{{{"type", "level_done"}}, {}}));
  CHECK_FALSE(droppable(error_message("UnknownId", "x", 1)));
  CHECK(error_message("UnknownId", "x", 4).header["code"] == "UnknownId");
}
