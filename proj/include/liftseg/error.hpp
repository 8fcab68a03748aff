// Copyright 2026 The liftseg Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef LIFTSEG_ERROR_HPP
#define LIFTSEG_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace liftseg {

enum class ErrorKind {
  kConfig,
  kShape,
  kInvalidDepth,
  kBounds,
  kBehindCamera,
  kSize,
  kDegenerateMask,
  kEmptyInput,
  kUndefinedLoss,
  kValidation,
  kIo,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Raised by the pipeline driver; wraps the failing stage's error.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.kind(), stage + ": " + cause.what()), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace liftseg

#endif  // LIFTSEG_ERROR_HPP
