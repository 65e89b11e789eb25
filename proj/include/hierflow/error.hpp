// Copyright 2026 The Hierflow Authors.
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

#ifndef HIERFLOW_ERROR_HPP
#define HIERFLOW_ERROR_HPP

#include <stdexcept>
#include <string>

namespace hierflow {

enum class ErrorKind {
  Parse,        // malformed input text
  Validation,   // well-formed but violates an invariant
  Degenerate,   // numerical degeneracy during evaluation or fitting
  Unsupported,  // configuration accepted by the types but not by the runtime
  Io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(ErrorKind::Parse,
              line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct ValidationError : Error {
  explicit ValidationError(const std::string& what)
      : Error(ErrorKind::Validation, what) {}
};

struct DegenerateError : Error {
  explicit DegenerateError(const std::string& what)
      : Error(ErrorKind::Degenerate, what) {}
};

struct UnsupportedError : Error {
  explicit UnsupportedError(const std::string& what)
      : Error(ErrorKind::Unsupported, what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

}  // namespace hierflow

#endif  // HIERFLOW_ERROR_HPP
