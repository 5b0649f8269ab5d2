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

// Newline-delimited JSON protocol between the harness and an external
// policy process.
//
// Each line is one flat JSON object:
//
//   {"kind":"obs","episode":3,"step":17,"q":[...],"qd":[...],
//    "puck_p":[x,y],"puck_v":[vx,vy]}
//
// Kinds and direction:
//   hello   both ways   protocol_version, action_dim, obs_dim
//   reset   harness ->  seed                         (not answered)
//   obs     harness ->  q[3], qd[3], puck_p[2], puck_v[2]
//   action  -> harness  v_ee[2], counters echo the obs being answered
//   bye     both ways   (no payload)
//   error   both ways   "message" string
//
// Numbers are written in their shortest round-trip decimal form, so a value
// survives encode/decode bit-exactly. Integral values up to 2^53 are written
// as JSON integers.

#ifndef SAFETY_LAYER_WIRE_PROTOCOL_HPP_
#define SAFETY_LAYER_WIRE_PROTOCOL_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "safety_layer/airhockey.hpp"

namespace safety_layer::wire {

inline constexpr int kProtocolVersion = 1;
inline constexpr int kActionDim = 2;
inline constexpr int kObsDim = 10;
inline constexpr std::size_t kMaxLineBytes = 64 * 1024;

enum class MessageKind { kHello, kObs, kAction, kReset, kBye, kError };

std::string_view kind_name(MessageKind kind);
std::optional<MessageKind> parse_kind(std::string_view name);

using PayloadValue = std::variant<double, std::vector<double>>;

struct WireMessage {
  MessageKind kind = MessageKind::kHello;
  std::uint64_t episode = 0;
  std::uint64_t step = 0;
  std::map<std::string, PayloadValue> payload;
  std::string message;  // error text; empty otherwise

  friend bool operator==(const WireMessage&, const WireMessage&) = default;
};

// One line, without the trailing newline. Throws ContractViolation for
// non-finite payload values or reserved payload keys.
std::string encode_message(const WireMessage& msg);

// Throws ProtocolError (carrying the offending bytes) for anything that is
// not a well-formed message: invalid JSON, lines over kMaxLineBytes, unknown
// kinds, nested objects, non-numeric payloads, negative counters.
WireMessage decode_message(std::string_view line);

// Stateful decoder for one direction of a session: additionally rejects
// (episode, step) pairs that go backwards with DesyncError.
class MessageDecoder {
 public:
  WireMessage decode(std::string_view line);

 private:
  std::uint64_t last_episode_ = 0;
  std::uint64_t last_step_ = 0;
  bool seen_ = false;
};

// Typed constructors and accessors.
WireMessage make_hello();
WireMessage make_reset(std::uint64_t episode, std::uint64_t seed);
WireMessage make_obs(std::uint64_t episode, std::uint64_t step, const Observation& obs);
WireMessage make_action(std::uint64_t episode, std::uint64_t step, Vec2 v_ee);
WireMessage make_bye(std::uint64_t episode, std::uint64_t step);
WireMessage make_error(std::uint64_t episode, std::uint64_t step, std::string text);

// Fetch a fixed-length array / scalar field; ProtocolError if absent or of
// the wrong shape.
std::vector<double> require_array(const WireMessage& msg, const std::string& key,
                                  std::size_t length);
double require_scalar(const WireMessage& msg, const std::string& key);

// Verifies the peer's hello (version, dimensions).
void check_hello(const WireMessage& msg);
Vec2 parse_action(const WireMessage& msg);
// Observation fields carried on the wire; ee_p / ee_v are recomputed from the
// arm model.
Observation parse_obs(const WireMessage& msg, const ArmModel& arm);

// Shortest round-trip decimal form of a double.
std::string format_double(double value);

}  // namespace safety_layer::wire

#endif  // SAFETY_LAYER_WIRE_PROTOCOL_HPP_
