/**
 * Copyright 2026 The SludgeVision Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace svx {

inline constexpr const char* kVersion = "0.1.0";

// Error categories, kept in sync with the svx_status codes of the C API.
enum class ErrorKind : int {
  validation = 1,  // bad arguments, violated preconditions
  parse = 2,       // malformed CSV / config / JSON input
  integrity = 3,   // duplicate ids, conflicting labels, missing files
  io = 4,          // filesystem and image codec failures
  train = 5,       // training diverged or aborted
  unavailable = 6, // requested resource (e.g. pretrained weights) not present
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

struct ValidationError : Error {
  explicit ValidationError(const std::string& m) : Error(ErrorKind::validation, m) {}
};
struct ParseError : Error {
  explicit ParseError(const std::string& m) : Error(ErrorKind::parse, m) {}
};
struct IntegrityError : Error {
  explicit IntegrityError(const std::string& m) : Error(ErrorKind::integrity, m) {}
};
struct IoError : Error {
  explicit IoError(const std::string& m) : Error(ErrorKind::io, m) {}
};
struct TrainError : Error {
  explicit TrainError(const std::string& m) : Error(ErrorKind::train, m) {}
};
struct UnavailableError : Error {
  explicit UnavailableError(const std::string& m) : Error(ErrorKind::unavailable, m) {}
};

[[noreturn]] inline void throw_error(ErrorKind kind, const std::string& msg) {
  switch (kind) {
    case ErrorKind::validation: throw ValidationError(msg);
    case ErrorKind::parse: throw ParseError(msg);
    case ErrorKind::integrity: throw IntegrityError(msg);
    case ErrorKind::io: throw IoError(msg);
    case ErrorKind::train: throw TrainError(msg);
    case ErrorKind::unavailable: throw UnavailableError(msg);
  }
  throw Error(kind, msg);
}

#define SVX_CHECK(cond, kind, msg)                                            \
  do {                                                                        \
    if (!(cond)) ::svx::throw_error(::svx::kind, (msg));                      \
  } while (0)

// Closed intervals used across synth and augment parameter blocks.
struct IntRange {
  int lo = 0;
  int hi = 0;
};

struct RealRange {
  double lo = 0.0;
  double hi = 0.0;
};

} // namespace svx
