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

#include <doctest.h>

#include <chrono>
#include <functional>
#include <thread>

#include "safety_layer/errors.hpp"
#include "safety_layer/harness.hpp"
#include "safety_layer/remote_policy.hpp"

using namespace safety_layer;
using namespace std::chrono_literals;

namespace {

// Runs `body` on the far end of a socket pair for the lifetime of the object.
class Peer {
 public:
  explicit Peer(std::function<void(LineChannel&)> body) {
    auto [near, far] = LineChannel::socket_pair();
    near_ = std::move(near);
    far_ = std::move(far);
    thread_ = std::thread([this, body = std::move(body)] {
      try {
        body(far_);
      } catch (const std::exception&) {
      }
      far_.close();
    });
  }
  ~Peer() {
    if (thread_.joinable()) thread_.join();
  }
  LineChannel take() { return std::move(near_); }

 private:
  LineChannel near_;
  LineChannel far_;
  std::thread thread_;
};

// Answers the handshake, then runs `on_obs` per obs until the channel dies.
std::function<void(LineChannel&)> scripted_peer(
    std::function<void(LineChannel&, const wire::WireMessage&)> on_obs) {
  return [on_obs](LineChannel& ch) {
    for (;;) {
      const wire::WireMessage m = wire::decode_message(ch.receive_line(5s));
      if (m.kind == wire::MessageKind::kHello) {
        ch.send_line(wire::encode_message(wire::make_hello()));
      } else if (m.kind == wire::MessageKind::kObs) {
        on_obs(ch, m);
      } else if (m.kind == wire::MessageKind::kBye) {
        return;
      }
    }
  };
}

ExperimentConfig short_config() {
  ExperimentConfig cfg;
  cfg.world.horizon = 1.0;
  return cfg;
}

WorldState world_for(const ExperimentConfig& cfg, std::uint64_t seed) {
  EpisodeConfig ep = cfg.world;
  ep.seed = seed;
  return reset_episode(ep, cfg.arm, cfg.table);
}

}  // namespace

TEST_CASE("line channel frames lines") {
  auto [a, b] = LineChannel::socket_pair();
  a.send_line("one");
  a.send_line("two");
  CHECK(b.receive_line(1s) == "one");
  CHECK(b.receive_line(1s) == "two");
  CHECK_THROWS_AS(b.receive_line(20ms), TimeoutError);
  a.close();
  CHECK_THROWS_AS(b.receive_line(1s), ConnectionClosed);
}

TEST_CASE("oversize lines are rejected") {
  auto [a, b] = LineChannel::socket_pair();
  std::thread writer([&a] {
    try {
      a.send_line(std::string(wire::kMaxLineBytes + 10, 'x'));
    } catch (const std::exception&) {
    }
  });
  CHECK_THROWS_AS(b.receive_line(2s), ProtocolError);
  b.close();
  writer.join();
}

TEST_CASE("remote expert reproduces the in-process expert") {
  const ExperimentConfig cfg = short_config();
  ScriptedExpertPolicy served(cfg.table, cfg.policy_params);
  Peer peer([&](LineChannel& ch) { serve_policy(ch, served, cfg.arm, 5s); });
  RemotePolicy remote(peer.take(), cfg.arm, cfg.policy_params.v_ee_max, 2s);
  ScriptedExpertPolicy local(cfg.table, cfg.policy_params);

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const WorldState w0 = world_for(cfg, seed);
    SafetyFilter f1 = make_filter(cfg);
    SafetyFilter f2 = make_filter(cfg);
    std::vector<TrajectoryRecord> log1, log2;
    const EpisodeResult a = run_episode(cfg, local, w0, seed, &f1, &log1);
    const EpisodeResult b = run_episode(cfg, remote, w0, seed, &f2, &log2);
    CHECK(a == b);
    REQUIRE(log1.size() == log2.size());
    for (std::size_t i = 0; i < log1.size(); ++i) {
      CHECK(trajectory_record_json(log1[i]) == trajectory_record_json(log2[i]));
    }
  }
  remote.close();
}

TEST_CASE("counters advance per episode and step") {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> seen;
  Peer peer(scripted_peer([&](LineChannel& ch, const wire::WireMessage& m) {
    seen.emplace_back(m.episode, m.step);
    ch.send_line(wire::encode_message(wire::make_action(m.episode, m.step, {})));
  }));
  RemotePolicy remote(peer.take(), ArmModel{}, 1.5, 1s);
  const Observation obs = observe(WorldState{}, ArmModel{});
  remote.reset(10);
  remote.act(obs);
  remote.act(obs);
  remote.reset(11);
  remote.act(obs);
  remote.close();
  const std::vector<std::pair<std::uint64_t, std::uint64_t>> want = {{0, 0}, {0, 1}, {1, 0}};
  CHECK(seen == want);
}

TEST_CASE("silent peer times out") {
  Peer peer(scripted_peer([](LineChannel&, const wire::WireMessage&) {}));
  RemotePolicy remote(peer.take(), ArmModel{}, 1.5, 50ms);
  remote.reset(0);
  CHECK_THROWS_AS(remote.act(observe(WorldState{}, ArmModel{})), TimeoutError);
  remote.close();
}

TEST_CASE("wrong step in the reply is a desync") {
  Peer peer(scripted_peer([](LineChannel& ch, const wire::WireMessage& m) {
    ch.send_line(wire::encode_message(wire::make_action(m.episode, m.step + 1, {})));
  }));
  RemotePolicy remote(peer.take(), ArmModel{}, 1.5, 1s);
  remote.reset(0);
  CHECK_THROWS_AS(remote.act(observe(WorldState{}, ArmModel{})), DesyncError);
  remote.close();
}

TEST_CASE("error replies and hangups") {
  SUBCASE("error message") {
    Peer peer(scripted_peer([](LineChannel& ch, const wire::WireMessage& m) {
      ch.send_line(wire::encode_message(wire::make_error(m.episode, m.step, "boom")));
    }));
    RemotePolicy remote(peer.take(), ArmModel{}, 1.5, 1s);
    CHECK_THROWS_AS(remote.act(observe(WorldState{}, ArmModel{})), ProtocolError);
  }
  SUBCASE("hangup") {
    Peer peer(scripted_peer([](LineChannel&, const wire::WireMessage&) {
      throw std::runtime_error("drop");
    }));
    RemotePolicy remote(peer.take(), ArmModel{}, 1.5, 1s);
    CHECK_THROWS_AS(remote.act(observe(WorldState{}, ArmModel{})), ConnectionClosed);
  }
}

TEST_CASE("handshake failures") {
  SUBCASE("wrong version") {
    Peer peer([](LineChannel& ch) {
      ch.receive_line(5s);
      wire::WireMessage h = wire::make_hello();
      h.payload["protocol_version"] = 7.0;
      ch.send_line(wire::encode_message(h));
    });
    CHECK_THROWS_AS(RemotePolicy(peer.take(), ArmModel{}, 1.5, 1s), ProtocolError);
  }
  SUBCASE("garbage") {
    Peer peer([](LineChannel& ch) {
      ch.receive_line(5s);
      ch.send_line("HTTP/1.1 400 Bad Request");
    });
    CHECK_THROWS_AS(RemotePolicy(peer.take(), ArmModel{}, 1.5, 1s), ProtocolError);
  }
}

TEST_CASE("exec addresses") {
  const ArmModel arm;
  SUBCASE("echoing child completes the handshake but never sends an action") {
    auto remote = RemotePolicy::connect("exec:cat", arm, 1.5, 1000ms);
    CHECK_THROWS_AS(remote->act(observe(WorldState{}, arm)), ProtocolError);
    remote->close();
  }
  SUBCASE("child with a bad hello") {
    CHECK_THROWS_AS(RemotePolicy::connect(
                        "exec:read line; echo '{\"kind\":\"hello\",\"episode\":0,\"step\":0}'",
                        arm, 1.5, 1000ms),
                    ProtocolError);
  }
  SUBCASE("child that exits") {
    CHECK_THROWS_AS(RemotePolicy::connect("exec:true", arm, 1.5, 1000ms), ConnectionClosed);
  }
  CHECK_THROWS_AS(RemotePolicy::connect("udp:1.2.3.4:5", arm, 1.5, 100ms), ConfigError);
  CHECK_THROWS_AS(RemotePolicy::connect("tcp:localhost:99999", arm, 1.5, 100ms), ConfigError);
  CHECK_THROWS_AS(RemotePolicy::connect("tcp:localhost", arm, 1.5, 100ms), ConfigError);
}

TEST_CASE("harness tags protocol failures instead of throwing") {
  const ExperimentConfig cfg = short_config();
  const WorldState w0 = world_for(cfg, 0);
  SUBCASE("desync") {
    Peer peer(scripted_peer([](LineChannel& ch, const wire::WireMessage& m) {
      ch.send_line(wire::encode_message(
          wire::make_action(m.episode, m.step == 3 ? 0 : m.step, {0.1, 0.0})));
    }));
    RemotePolicy remote(peer.take(), cfg.arm, 1.5, 1s);
    SafetyFilter f = make_filter(cfg);
    const EpisodeResult r = run_episode(cfg, remote, w0, 0, &f);
    CHECK(r.protocol_error == "desync");
    CHECK(r.steps == 3);
    CHECK_FALSE(r.success);
  }
  SUBCASE("timeout") {
    Peer peer(scripted_peer([](LineChannel&, const wire::WireMessage&) {}));
    RemotePolicy remote(peer.take(), cfg.arm, 1.5, 30ms);
    const EpisodeResult r = run_episode(cfg, remote, w0, 0, nullptr);
    CHECK(r.protocol_error == "timeout");
    CHECK(r.steps == 0);
  }
}
