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

#ifndef SAFETY_LAYER_ERRORS_HPP_
#define SAFETY_LAYER_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace safety_layer {

// Caller broke a documented precondition (dimension mismatch, empty
// selection, invalid bounds).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A computation produced NaN/Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A linear system that had to be inverted was numerically singular.
class SingularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid experiment / world configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed wire message. Carries the offending bytes.
class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(const std::string& what, std::string offending = {})
      : std::runtime_error(what), offending_(std::move(offending)) {}

  const std::string& offending() const noexcept { return offending_; }

 private:
  std::string offending_;
};

// Episode/step counters of a reply do not match the pending request.
class DesyncError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

// The remote side did not answer within the deadline.
class TimeoutError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

// The peer closed the connection.
class ConnectionClosed : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

}  // namespace safety_layer

#endif  // SAFETY_LAYER_ERRORS_HPP_
