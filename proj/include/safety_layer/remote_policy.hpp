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

// Policy adapter for an external process speaking the wire protocol over a
// stream socket or a pair of pipes. Strictly request/response: one obs out,
// one action back, with a per-action deadline.

#ifndef SAFETY_LAYER_REMOTE_POLICY_HPP_
#define SAFETY_LAYER_REMOTE_POLICY_HPP_

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <sys/types.h>

#include "safety_layer/policies.hpp"
#include "safety_layer/wire_protocol.hpp"

namespace safety_layer {

// Owns a read and a write file descriptor (possibly the same socket) and
// frames newline-terminated lines on them.
class LineChannel {
 public:
  LineChannel() = default;
  LineChannel(int read_fd, int write_fd);
  ~LineChannel();
  LineChannel(LineChannel&& other) noexcept;
  LineChannel& operator=(LineChannel&& other) noexcept;
  LineChannel(const LineChannel&) = delete;
  LineChannel& operator=(const LineChannel&) = delete;

  // Both end-points of a connected socketpair, for in-process peers.
  static std::pair<LineChannel, LineChannel> socket_pair();
  // "tcp:HOST:PORT"
  static LineChannel connect_tcp(const std::string& host, std::uint16_t port,
                                 std::chrono::milliseconds timeout);

  bool is_open() const noexcept { return read_fd_ >= 0; }
  void send_line(std::string_view line);
  // Blocks up to `timeout`. Throws TimeoutError on expiry, ProtocolError on
  // EOF or when a line exceeds wire::kMaxLineBytes.
  std::string receive_line(std::chrono::milliseconds timeout);
  void close();

 private:
  int read_fd_ = -1;
  int write_fd_ = -1;
  std::string buffer_;
};

class RemotePolicy final : public Policy {
 public:
  // Performs the hello handshake on `channel`.
  RemotePolicy(LineChannel channel, ArmModel arm, double v_ee_max,
               std::chrono::milliseconds timeout = std::chrono::seconds(1), pid_t child = -1);
  ~RemotePolicy() override;

  // address: "tcp:HOST:PORT" connects to a listening policy server;
  // "exec:COMMAND" spawns `/bin/sh -c COMMAND` and talks over its stdio.
  static std::unique_ptr<RemotePolicy> connect(const std::string& address, const ArmModel& arm,
                                               double v_ee_max,
                                               std::chrono::milliseconds timeout);

  void reset(std::uint64_t seed) override;
  // Sends obs(episode, step) and waits for the matching action. Throws
  // TimeoutError, DesyncError or ProtocolError.
  Vec2 act(const Observation& obs) override;
  double v_ee_max() const override { return v_ee_max_; }
  std::string_view name() const override { return "remote"; }

  // Sends bye and closes the channel.
  void close();

 private:
  LineChannel channel_;
  ArmModel arm_;
  double v_ee_max_;
  std::chrono::milliseconds timeout_;
  pid_t child_;
  std::uint64_t episode_ = 0;
  std::uint64_t step_ = 0;
  bool started_ = false;
  wire::MessageDecoder decoder_;
};

// Reference server loop for the peer side: answers hello, then each obs with
// policy.act(), until bye or EOF. Used by tests and as protocol
// documentation.
void serve_policy(LineChannel& channel, Policy& policy, const ArmModel& arm,
                  std::chrono::milliseconds timeout = std::chrono::seconds(10));

}  // namespace safety_layer

#endif  // SAFETY_LAYER_REMOTE_POLICY_HPP_
