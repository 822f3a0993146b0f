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
#include "steerflow/protocol.hpp"

#include <algorithm>
#include <cstring>

#include "steerflow/error.hpp"

namespace steerflow::protocol {

std::string Message::type() const {
  const auto it = header.find("type");
  return it != header.end() && it->is_string() ? it->get<std::string>() : std::string{};
}

std::vector<std::uint8_t> encode(const Message& message) {
  nlohmann::json header = message.header;
  if (!message.payload.empty() || header.contains("payload_bytes")) {
    header["payload_bytes"] = message.payload.size();
  }
  const std::string text = header.dump();
  if (text.size() > kMaxHeaderBytes) throw ProtocolError("header exceeds size limit");
  const auto n = static_cast<std::uint32_t>(text.size());
  std::vector<std::uint8_t> out;
  out.reserve(4 + text.size() + message.payload.size());
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(n >> (8 * k)));
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), message.payload.begin(), message.payload.end());
  return out;
}

namespace {

std::uint32_t read_u32(auto first) {
  std::uint32_t n = 0;
  for (int k = 0; k < 4; ++k, ++first) n |= static_cast<std::uint32_t>(*first) << (8 * k);
  return n;
}

nlohmann::json parse_header(const std::string& text) {
  nlohmann::json header = nlohmann::json::parse(text, nullptr, false);
  if (header.is_discarded()) throw ProtocolError("header is not valid JSON");
  if (!header.is_object()) throw ProtocolError("header must be a JSON object");
  const auto type = header.find("type");
  if (type == header.end() || !type->is_string()) throw ProtocolError("header lacks a type");
  return header;
}

std::uint64_t payload_size(const nlohmann::json& header) {
  const auto it = header.find("payload_bytes");
  if (it == header.end()) return 0;
  if (!it->is_number_unsigned()) throw ProtocolError("payload_bytes must be a nonnegative integer");
  const auto n = it->get<std::uint64_t>();
  if (n > kMaxPayloadBytes) throw ProtocolError("payload exceeds size limit");
  return n;
}

} // namespace

void Decoder::feed(std::span<const std::uint8_t> bytes) {
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<Message> Decoder::next() {
  if (buffer_.size() < 4) return std::nullopt;
  const std::uint32_t n = read_u32(buffer_.begin());
  if (n > kMaxHeaderBytes) throw ProtocolError("header exceeds size limit");
  if (buffer_.size() < 4 + std::size_t{n}) return std::nullopt;
  const std::string text(buffer_.begin() + 4, buffer_.begin() + 4 + n);
  Message m;
  m.header = parse_header(text);
  const std::uint64_t p = payload_size(m.header);
  if (buffer_.size() < 4 + n + p) return std::nullopt;
  const auto first = buffer_.begin() + 4 + n;
  m.payload.assign(first, first + static_cast<std::ptrdiff_t>(p));
  buffer_.erase(buffer_.begin(), first + static_cast<std::ptrdiff_t>(p));
  return m;
}

Message decode(std::span<const std::uint8_t> bytes) {
  Decoder d;
  d.feed(bytes);
  auto m = d.next();
  if (!m) throw ProtocolError("truncated message");
  if (d.buffered() != 0) throw ProtocolError("trailing bytes after message");
  return std::move(*m);
}

bool droppable(const Message& message) {
  const std::string t = message.type();
  return t == "frame" || t == "primitives" || t == "comfort";
}

Message frame_message(const compositor::Frame& frame, std::uint64_t version) {
  Message m;
  m.header = {{"type", "frame"},
              {"seq", frame.seq},
              {"level", frame.level},
              {"field", lattice::to_string(frame.field)},
              {"w", frame.width},
              {"h", frame.height},
              {"version", version},
              {"timestamp_ms", frame.timestamp_ms}};
  const std::size_t row = 4 * static_cast<std::size_t>(frame.width);
  m.payload.resize(frame.rgba.size());
  for (int y = 0; y < frame.height; ++y) {
    std::memcpy(m.payload.data() + static_cast<std::size_t>(frame.height - 1 - y) * row,
                frame.rgba.data() + static_cast<std::size_t>(y) * row, row);
  }
  return m;
}

compositor::Frame frame_from_message(const Message& message) {
  if (message.type() != "frame") throw ProtocolError("not a frame message");
  compositor::Frame f;
  try {
    f.width = message.header.at("w").get<int>();
    f.height = message.header.at("h").get<int>();
    f.seq = message.header.at("seq").get<std::uint64_t>();
    f.level = message.header.at("level").get<int>();
    f.field = lattice::field_from_string(message.header.at("field").get<std::string>());
    f.timestamp_ms = message.header.value("timestamp_ms", std::int64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("bad frame header: ") + e.what());
  }
  const std::size_t row = 4 * static_cast<std::size_t>(std::max(f.width, 0));
  if (f.width < 0 || f.height < 0 || message.payload.size() != row * static_cast<std::size_t>(f.height)) {
    throw ProtocolError("frame payload does not match 4 * w * h");
  }
  f.rgba.resize(message.payload.size());
  for (int y = 0; y < f.height; ++y) {
    std::memcpy(f.rgba.data() + static_cast<std::size_t>(y) * row,
                message.payload.data() + static_cast<std::size_t>(f.height - 1 - y) * row, row);
  }
  return f;
}

Message scene_ack(std::uint64_t version) {
  return {{{"type", "scene_ack"}, {"version", version}}, {}};
}

Message error_message(const std::string& code, const std::string& text, std::uint64_t version) {
  return {{{"type", "error"}, {"code", code}, {"text", text}, {"version", version}}, {}};
}

} // namespace steerflow::protocol
