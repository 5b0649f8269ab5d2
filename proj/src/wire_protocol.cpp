// Copyright 2026 The safety_layer Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "safety_layer/wire_protocol.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <utility>

#include <json.hpp>

#include "safety_layer/errors.hpp"

namespace safety_layer::wire {
namespace {

using nlohmann::json;

constexpr double kMaxExactInteger = 9007199254740992.0;  // 2^53

constexpr std::array<std::pair<MessageKind, std::string_view>, 6> kKinds{{
    {MessageKind::kHello, "hello"},
    {MessageKind::kObs, "obs"},
    {MessageKind::kAction, "action"},
    {MessageKind::kReset, "reset"},
    {MessageKind::kBye, "bye"},
    {MessageKind::kError, "error"},
}};

bool is_reserved(std::string_view key) {
  return key == "kind" || key == "episode" || key == "step" || key == "message";
}

void append_number(std::string& out, double v) {
  if (!std::isfinite(v)) throw ContractViolation("encode_message: payload values must be finite");
  out += format_double(v);
}

// Offending bytes are truncated so error messages stay printable.
std::string excerpt(std::string_view line) {
  constexpr std::size_t kMax = 256;
  return std::string(line.substr(0, kMax));
}

std::uint64_t read_counter(const json& obj, const char* key, std::string_view line) {
  const auto it = obj.find(key);
  if (it == obj.end())
    throw ProtocolError(std::string("wire message lacks '") + key + "'", excerpt(line));
  if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0))
    throw ProtocolError(std::string("wire counter '") + key + "' must be a non-negative integer",
                        excerpt(line));
  return it->get<std::uint64_t>();
}

}  // namespace

std::string_view kind_name(MessageKind kind) {
  for (const auto& [k, name] : kKinds)
    if (k == kind) return name;
  return "unknown";
}

std::optional<MessageKind> parse_kind(std::string_view name) {
  for (const auto& [k, n] : kKinds)
    if (n == name) return k;
  return std::nullopt;
}

std::string format_double(double value) {
  if (value == std::trunc(value) && std::abs(value) <= kMaxExactInteger) {
    // Integral: print without exponent or fraction. -0.0 keeps its sign.
    if (value == 0.0 && std::signbit(value)) return "-0.0";
    return std::to_string(static_cast<std::int64_t>(value));
  }
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), res.ptr);
}

std::string encode_message(const WireMessage& msg) {
  std::string out = "{\"kind\":\"";
  out += kind_name(msg.kind);
  out += "\",\"episode\":" + std::to_string(msg.episode);
  out += ",\"step\":" + std::to_string(msg.step);
  for (const auto& [key, value] : msg.payload) {
    if (is_reserved(key)) throw ContractViolation("encode_message: reserved payload key '" + key + "'");
    out += ',';
    out += json(key).dump();
    out += ':';
    if (const double* scalar = std::get_if<double>(&value)) {
      append_number(out, *scalar);
    } else {
      const auto& arr = std::get<std::vector<double>>(value);
      out += '[';
      for (std::size_t i = 0; i < arr.size(); ++i) {
        if (i) out += ',';
        append_number(out, arr[i]);
      }
      out += ']';
    }
  }
  if (!msg.message.empty()) {
    out += ",\"message\":";
    out += json(msg.message).dump(-1, ' ', false, json::error_handler_t::replace);
  }
  out += '}';
  return out;
}

WireMessage decode_message(std::string_view line) {
  if (line.size() > kMaxLineBytes)
    throw ProtocolError("wire message exceeds 64 KiB", excerpt(line));
  if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

  json obj;
  try {
    // Flat objects only: reject anything nested deeper than one array.
    obj = json::parse(line.begin(), line.end(),
                      [line](int depth, json::parse_event_t, json&) {
                        if (depth > 2) throw ProtocolError("wire message nested too deeply", excerpt(line));
                        return true;
                      });
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed wire message: ") + e.what(), excerpt(line));
  }
  if (!obj.is_object()) throw ProtocolError("wire message must be a JSON object", excerpt(line));

  WireMessage msg;
  const auto kind_it = obj.find("kind");
  if (kind_it == obj.end() || !kind_it->is_string())
    throw ProtocolError("wire message lacks a string 'kind'", excerpt(line));
  const auto kind = parse_kind(kind_it->get_ref<const std::string&>());
  if (!kind) throw ProtocolError("unknown wire message kind", excerpt(line));
  msg.kind = *kind;
  msg.episode = read_counter(obj, "episode", line);
  msg.step = read_counter(obj, "step", line);

  for (const auto& [key, value] : obj.items()) {
    if (key == "kind" || key == "episode" || key == "step") continue;
    if (key == "message") {
      if (!value.is_string()) throw ProtocolError("'message' must be a string", excerpt(line));
      msg.message = value.get<std::string>();
      continue;
    }
    if (value.is_number()) {
      msg.payload.emplace(key, value.get<double>());
    } else if (value.is_array()) {
      std::vector<double> arr;
      arr.reserve(value.size());
      for (const auto& x : value) {
        if (!x.is_number())
          throw ProtocolError("payload array '" + key + "' must hold numbers", excerpt(line));
        arr.push_back(x.get<double>());
      }
      msg.payload.emplace(key, std::move(arr));
    } else {
      throw ProtocolError("payload field '" + key + "' must be a number or array", excerpt(line));
    }
  }
  return msg;
}

WireMessage MessageDecoder::decode(std::string_view line) {
  WireMessage msg = decode_message(line);
  if (seen_ && (msg.episode < last_episode_ ||
                (msg.episode == last_episode_ && msg.step < last_step_))) {
    throw DesyncError("wire counters went backwards", excerpt(line));
  }
  seen_ = true;
  last_episode_ = msg.episode;
  last_step_ = msg.step;
  return msg;
}

WireMessage make_hello() {
  WireMessage m;
  m.kind = MessageKind::kHello;
  m.payload["protocol_version"] = static_cast<double>(kProtocolVersion);
  m.payload["action_dim"] = static_cast<double>(kActionDim);
  m.payload["obs_dim"] = static_cast<double>(kObsDim);
  return m;
}

WireMessage make_reset(std::uint64_t episode, std::uint64_t seed) {
  WireMessage m;
  m.kind = MessageKind::kReset;
  m.episode = episode;
  m.payload["seed"] = static_cast<double>(seed);
  return m;
}

WireMessage make_obs(std::uint64_t episode, std::uint64_t step, const Observation& obs) {
  WireMessage m;
  m.kind = MessageKind::kObs;
  m.episode = episode;
  m.step = step;
  m.payload["q"] = std::vector<double>(obs.q.begin(), obs.q.end());
  m.payload["qd"] = std::vector<double>(obs.qd.begin(), obs.qd.end());
  m.payload["puck_p"] = std::vector<double>{obs.puck_p.x, obs.puck_p.y};
  m.payload["puck_v"] = std::vector<double>{obs.puck_v.x, obs.puck_v.y};
  return m;
}

WireMessage make_action(std::uint64_t episode, std::uint64_t step, Vec2 v_ee) {
  WireMessage m;
  m.kind = MessageKind::kAction;
  m.episode = episode;
  m.step = step;
  m.payload["v_ee"] = std::vector<double>{v_ee.x, v_ee.y};
  return m;
}

WireMessage make_bye(std::uint64_t episode, std::uint64_t step) {
  WireMessage m;
  m.kind = MessageKind::kBye;
  m.episode = episode;
  m.step = step;
  return m;
}

WireMessage make_error(std::uint64_t episode, std::uint64_t step, std::string text) {
  WireMessage m;
  m.kind = MessageKind::kError;
  m.episode = episode;
  m.step = step;
  m.message = std::move(text);
  return m;
}

std::vector<double> require_array(const WireMessage& msg, const std::string& key,
                                  std::size_t length) {
  const auto it = msg.payload.find(key);
  if (it == msg.payload.end()) throw ProtocolError("wire message lacks '" + key + "'");
  const auto* arr = std::get_if<std::vector<double>>(&it->second);
  if (arr == nullptr || arr->size() != length)
    throw ProtocolError("'" + key + "' must be an array of " + std::to_string(length) + " numbers");
  return *arr;
}

double require_scalar(const WireMessage& msg, const std::string& key) {
  const auto it = msg.payload.find(key);
  if (it == msg.payload.end()) throw ProtocolError("wire message lacks '" + key + "'");
  const auto* v = std::get_if<double>(&it->second);
  if (v == nullptr) throw ProtocolError("'" + key + "' must be a number");
  return *v;
}

void check_hello(const WireMessage& msg) {
  if (msg.kind == MessageKind::kError)
    throw ProtocolError("peer rejected the handshake: " + msg.message);
  if (msg.kind != MessageKind::kHello) throw ProtocolError("expected hello");
  if (require_scalar(msg, "protocol_version") != kProtocolVersion)
    throw ProtocolError("unsupported protocol_version");
  if (msg.payload.contains("action_dim") && require_scalar(msg, "action_dim") != kActionDim)
    throw ProtocolError("peer action_dim mismatch");
  if (msg.payload.contains("obs_dim") && require_scalar(msg, "obs_dim") != kObsDim)
    throw ProtocolError("peer obs_dim mismatch");
}

Vec2 parse_action(const WireMessage& msg) {
  if (msg.kind != MessageKind::kAction) throw ProtocolError("expected an action message");
  const auto v = require_array(msg, "v_ee", 2);
  if (!std::isfinite(v[0]) || !std::isfinite(v[1])) throw ProtocolError("non-finite action");
  return {v[0], v[1]};
}

Observation parse_obs(const WireMessage& msg, const ArmModel& arm) {
  if (msg.kind != MessageKind::kObs) throw ProtocolError("expected an obs message");
  WorldState w;
  const auto q = require_array(msg, "q", 3);
  const auto qd = require_array(msg, "qd", 3);
  const auto pp = require_array(msg, "puck_p", 2);
  const auto pv = require_array(msg, "puck_v", 2);
  w.q = {q[0], q[1], q[2]};
  w.qd = {qd[0], qd[1], qd[2]};
  w.puck_p = {pp[0], pp[1]};
  w.puck_v = {pv[0], pv[1]};
  return observe(w, arm);
}

}  // namespace safety_layer::wire
