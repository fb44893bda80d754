// Copyright 2026 The FusionDeepMF Authors.
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

#ifndef FUSIONDEEPMF_ERRORS_HPP_
#define FUSIONDEEPMF_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace fdmf {

// Broad failure classes. The C API maps each one onto a status code and the
// CLI prints the category name next to the message.
enum class ErrorCategory {
  kInvalidArgument,
  kIo,
  kParse,
  kNotFound,
  kDiverged,
  kInternal,
};

const char* CategoryName(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& message)
      : Error(ErrorCategory::kInvalidArgument, message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message)
      : Error(ErrorCategory::kIo, message) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& message)
      : Error(ErrorCategory::kParse, message) {}
};

class NotFound : public Error {
 public:
  explicit NotFound(const std::string& message)
      : Error(ErrorCategory::kNotFound, message) {}
};

// Raised when a training loss turns NaN or infinite.
class Diverged : public Error {
 public:
  explicit Diverged(const std::string& message)
      : Error(ErrorCategory::kDiverged, message) {}
};

}  // namespace fdmf

#endif  // FUSIONDEEPMF_ERRORS_HPP_
