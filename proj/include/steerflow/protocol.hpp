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

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "steerflow/compositor.hpp"

// Wire format shared by the TCP and WebSocket transports:
//   u32 little-endian header length | JSON header | payload
// The payload is present when the header carries payload_bytes > 0.
namespace steerflow::protocol {

inline constexpr std::uint32_t kMaxHeaderBytes = 1u << 20;
inline constexpr std::uint64_t kMaxPayloadBytes = 1ull << 28;

struct Message {
  nlohmann::json header = nlohmann::json::object();
  std::vector<std::uint8_t> payload;

  std::string type() const;
};

// Sets header.payload_bytes when a payload is attached.
std::vector<std::uint8_t> encode(const Message& message);

// Incremental decoder for a byte stream. Throws ProtocolError on malformed
// input; the stream is unusable afterwards.
class Decoder {
public:
  void feed(std::span<const std::uint8_t> bytes);
  std::optional<Message> next();
  std::size_t buffered() const noexcept { return buffer_.size(); }

private:
  std::deque<std::uint8_t> buffer_;
};

// Exactly one message occupying all of `bytes` (one WebSocket message).
Message decode(std::span<const std::uint8_t> bytes);

// Frames, primitives and exchange records may be dropped under backpressure;
// everything else must reach the client.
bool droppable(const Message& message);

// FrameMsg. The payload is RGBA8 row-major with the top image row first.
Message frame_message(const compositor::Frame& frame, std::uint64_t version);
compositor::Frame frame_from_message(const Message& message);

Message scene_ack(std::uint64_t version);
Message error_message(const std::string& code, const std::string& text, std::uint64_t version);

} // namespace steerflow::protocol
