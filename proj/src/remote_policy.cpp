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

#include "safety_layer/remote_policy.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>
#include <utility>

#include "safety_layer/errors.hpp"

namespace safety_layer {
namespace {

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

// write(2) on a pipe without SIGPIPE: block it for this thread and swallow a
// pending one before unblocking.
ssize_t write_no_sigpipe(int fd, const char* data, std::size_t size) {
  sigset_t pipe_set, old_set;
  sigemptyset(&pipe_set);
  sigaddset(&pipe_set, SIGPIPE);
  const bool already_pending = [&] {
    sigset_t pending;
    sigpending(&pending);
    return sigismember(&pending, SIGPIPE) == 1;
  }();
  pthread_sigmask(SIG_BLOCK, &pipe_set, &old_set);
  const ssize_t n = ::write(fd, data, size);
  const int saved = errno;
  if (n < 0 && saved == EPIPE && !already_pending) {
    const timespec zero{0, 0};
    while (sigtimedwait(&pipe_set, nullptr, &zero) < 0 && errno == EINTR) {
    }
  }
  pthread_sigmask(SIG_SETMASK, &old_set, nullptr);
  errno = saved;
  return n;
}

void close_fd(int& fd) {
  if (fd >= 0) ::close(fd);
  fd = -1;
}

}  // namespace

LineChannel::LineChannel(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) {}

LineChannel::~LineChannel() { close(); }

LineChannel::LineChannel(LineChannel&& other) noexcept
    : read_fd_(std::exchange(other.read_fd_, -1)),
      write_fd_(std::exchange(other.write_fd_, -1)),
      buffer_(std::move(other.buffer_)) {}

LineChannel& LineChannel::operator=(LineChannel&& other) noexcept {
  if (this != &other) {
    close();
    read_fd_ = std::exchange(other.read_fd_, -1);
    write_fd_ = std::exchange(other.write_fd_, -1);
    buffer_ = std::move(other.buffer_);
  }
  return *this;
}

std::pair<LineChannel, LineChannel> LineChannel::socket_pair() {
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0)
    throw IoError(errno_text("socketpair"));
  return {LineChannel(fds[0], fds[0]), LineChannel(fds[1], fds[1])};
}

LineChannel LineChannel::connect_tcp(const std::string& host, std::uint16_t port,
                                     std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0)
    throw IoError("cannot resolve " + host + ": " + ::gai_strerror(rc));
  std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(res, ::freeaddrinfo);

  std::string last_error = "no addresses";
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC | SOCK_NONBLOCK, ai->ai_protocol);
    if (fd < 0) {
      last_error = errno_text("socket");
      continue;
    }
    int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
    if (rc != 0 && errno == EINPROGRESS) {
      pollfd p{fd, POLLOUT, 0};
      rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
      int err = 0;
      socklen_t len = sizeof(err);
      if (rc == 1 && ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len) == 0 && err == 0) {
        rc = 0;
      } else {
        errno = rc == 0 ? ETIMEDOUT : (err ? err : errno);
        rc = -1;
      }
    }
    if (rc == 0) {
      ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) & ~O_NONBLOCK);
      return LineChannel(fd, fd);
    }
    last_error = errno_text("connect");
    ::close(fd);
  }
  throw IoError("cannot connect to " + host + ":" + service + " (" + last_error + ")");
}

void LineChannel::send_line(std::string_view line) {
  if (write_fd_ < 0) throw ConnectionClosed("channel is closed");
  std::string data(line);
  data += '\n';
  std::size_t sent = 0;
  while (sent < data.size()) {
    ssize_t n = ::send(write_fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == ENOTSOCK)
      n = write_no_sigpipe(write_fd_, data.data() + sent, data.size() - sent);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EPIPE || errno == ECONNRESET) throw ConnectionClosed("peer closed the connection");
      throw IoError(errno_text("send"));
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::string LineChannel::receive_line(std::chrono::milliseconds timeout) {
  if (read_fd_ < 0) throw ConnectionClosed("channel is closed");
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    if (const auto pos = buffer_.find('\n'); pos != std::string::npos) {
      std::string line = buffer_.substr(0, pos);
      buffer_.erase(0, pos + 1);
      if (line.size() > wire::kMaxLineBytes)
        throw ProtocolError("wire line exceeds 64 KiB", line.substr(0, 256));
      return line;
    }
    if (buffer_.size() > wire::kMaxLineBytes)
      throw ProtocolError("wire line exceeds 64 KiB", buffer_.substr(0, 256));

    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw TimeoutError("timed out waiting for the peer");
    pollfd p{read_fd_, POLLIN, 0};
    const int rc = ::poll(&p, 1, static_cast<int>(left.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw IoError(errno_text("poll"));
    }
    if (rc == 0) throw TimeoutError("timed out waiting for the peer");

    char chunk[4096];
    const ssize_t n = ::read(read_fd_, chunk, sizeof(chunk));
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      if (errno == ECONNRESET) throw ConnectionClosed("peer reset the connection");
      throw IoError(errno_text("read"));
    }
    if (n == 0) throw ConnectionClosed("peer closed the connection", buffer_.substr(0, 256));
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

void LineChannel::close() {
  if (write_fd_ == read_fd_) write_fd_ = -1;
  close_fd(read_fd_);
  close_fd(write_fd_);
  buffer_.clear();
}

RemotePolicy::RemotePolicy(LineChannel channel, ArmModel arm, double v_ee_max,
                           std::chrono::milliseconds timeout, pid_t child)
    : channel_(std::move(channel)),
      arm_(std::move(arm)),
      v_ee_max_(v_ee_max),
      timeout_(timeout),
      child_(child) {
  try {
    channel_.send_line(wire::encode_message(wire::make_hello()));
    wire::check_hello(decoder_.decode(channel_.receive_line(timeout_)));
  } catch (...) {
    close();
    throw;
  }
}

RemotePolicy::~RemotePolicy() { close(); }

std::unique_ptr<RemotePolicy> RemotePolicy::connect(const std::string& address,
                                                    const ArmModel& arm, double v_ee_max,
                                                    std::chrono::milliseconds timeout) {
  if (address.starts_with("tcp:")) {
    const std::string rest = address.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos) throw ConfigError("remote address must be tcp:HOST:PORT");
    int port = 0;
    try {
      port = std::stoi(rest.substr(colon + 1));
    } catch (const std::exception&) {
      port = -1;
    }
    if (port <= 0 || port > 65535) throw ConfigError("invalid port in remote address " + address);
    return std::make_unique<RemotePolicy>(
        LineChannel::connect_tcp(rest.substr(0, colon), static_cast<std::uint16_t>(port), timeout),
        arm, v_ee_max, timeout);
  }
  if (address.starts_with("exec:")) {
    const std::string command = address.substr(5);
    int to_child[2];
    int from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) throw IoError(errno_text("pipe"));
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw IoError(errno_text("pipe"));
    }
    const pid_t pid = ::fork();
    if (pid < 0) throw IoError(errno_text("fork"));
    if (pid == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    return std::make_unique<RemotePolicy>(LineChannel(from_child[0], to_child[1]), arm, v_ee_max,
                                          timeout, pid);
  }
  throw ConfigError("remote address must start with tcp: or exec: (got '" + address + "')");
}

void RemotePolicy::reset(std::uint64_t seed) {
  if (started_) ++episode_;
  started_ = true;
  step_ = 0;
  channel_.send_line(wire::encode_message(wire::make_reset(episode_, seed)));
}

Vec2 RemotePolicy::act(const Observation& obs) {
  started_ = true;
  channel_.send_line(wire::encode_message(wire::make_obs(episode_, step_, obs)));
  const wire::WireMessage reply = decoder_.decode(channel_.receive_line(timeout_));
  if (reply.kind == wire::MessageKind::kError)
    throw ProtocolError("remote policy reported an error: " + reply.message);
  if (reply.kind == wire::MessageKind::kBye) throw ConnectionClosed("remote policy said bye");
  if (reply.episode != episode_ || reply.step != step_) {
    throw DesyncError("action counters (" + std::to_string(reply.episode) + ", " +
                      std::to_string(reply.step) + ") do not match obs (" +
                      std::to_string(episode_) + ", " + std::to_string(step_) + ")");
  }
  const Vec2 v = wire::parse_action(reply);
  ++step_;
  return v;
}

void RemotePolicy::close() {
  if (channel_.is_open()) {
    try {
      channel_.send_line(wire::encode_message(wire::make_bye(episode_, step_)));
    } catch (const std::exception&) {
    }
    channel_.close();
  }
  if (child_ > 0) {
    int status = 0;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(1);
    while (::waitpid(child_, &status, WNOHANG) == 0) {
      if (std::chrono::steady_clock::now() > deadline) {
        ::kill(child_, SIGKILL);
        ::waitpid(child_, &status, 0);
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    child_ = -1;
  }
}

void serve_policy(LineChannel& channel, Policy& policy, const ArmModel& arm,
                  std::chrono::milliseconds timeout) {
  wire::MessageDecoder decoder;
  for (;;) {
    std::string line;
    try {
      line = channel.receive_line(timeout);
    } catch (const ConnectionClosed&) {
      return;
    }
    wire::WireMessage msg;
    try {
      msg = decoder.decode(line);
    } catch (const ProtocolError& e) {
      channel.send_line(wire::encode_message(wire::make_error(0, 0, e.what())));
      return;
    }
    switch (msg.kind) {
      case wire::MessageKind::kHello:
        try {
          wire::check_hello(msg);
        } catch (const ProtocolError& e) {
          channel.send_line(wire::encode_message(wire::make_error(msg.episode, msg.step, e.what())));
          return;
        }
        channel.send_line(wire::encode_message(wire::make_hello()));
        break;
      case wire::MessageKind::kReset:
        policy.reset(static_cast<std::uint64_t>(wire::require_scalar(msg, "seed")));
        break;
      case wire::MessageKind::kObs: {
        const Observation obs = wire::parse_obs(msg, arm);
        channel.send_line(
            wire::encode_message(wire::make_action(msg.episode, msg.step, policy.act(obs))));
        break;
      }
      case wire::MessageKind::kBye:
      case wire::MessageKind::kError:
        return;
      case wire::MessageKind::kAction:
        channel.send_line(wire::encode_message(
            wire::make_error(msg.episode, msg.step, "unexpected action message")));
        return;
    }
  }
}

}  // namespace safety_layer
