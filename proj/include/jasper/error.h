/* Copyright 2026 The JasperCpp Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef JASPER_ERROR_H_
#define JASPER_ERROR_H_

#include <stdexcept>
#include <string>

namespace jasper {

// Base class for all toolkit errors.  The CLI maps the subclasses below to
// process exit codes (usage -> 1, data -> 2, numeric -> 3).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed shapes, incompatible operands, bad op arguments.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Bad user input: unreadable files, malformed formats, mismatched ids.
class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error(msg) {}
};

// Parse failure in a text format; carries a 1-based line number when known.
class ParseError : public DataError {
 public:
  ParseError(const std::string& msg, long line)
      : DataError(line > 0 ? msg + " (line " + std::to_string(line) + ")"
                           : msg),
        line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

// Invalid configuration: unknown keys, out-of-range values.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// NaN/Inf encountered where finite values are required.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

}  // namespace jasper

#endif  // JASPER_ERROR_H_
