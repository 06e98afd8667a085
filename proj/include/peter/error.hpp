// Copyright 2026 The PETER Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace peter {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// A tag sequence that breaks the schema, or a label outside the label set.
class TagError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or arguments. The CLI maps this to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Gold and predicted corpora do not line up.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

/// The external scorer sent something that violates the wire protocol,
/// or answered with a typed error response.
class ProtocolError : public Error {
 public:
  ProtocolError(const std::string& type, const std::string& what)
      : Error(type + ": " + what), type_(type) {}

  const std::string& type() const { return type_; }

 private:
  std::string type_;
};

/// The external scorer could not be reached.
class ConnectionError : public Error {
 public:
  ConnectionError(const std::string& address, const std::string& what)
      : Error("cannot reach scorer bridge at " + address + ": " + what), address_(address) {}

  const std::string& address() const { return address_; }

 private:
  std::string address_;
};

/// A pipeline stage failed; `stage()` names it.
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& what)
      : Error("stage '" + stage + "' failed: " + what), stage_(stage) {}

  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace peter
