#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace crashxai {

/// Error categories surfaced by the library and reported by the CLI as
/// machine-readable `{"error": kind, ...}` objects.
enum class ErrorKind {
  Io,
  MissingColumn,
  DuplicateKey,
  Parse,
  InsufficientMajority,
  MissingRequiredSlot,
  InvalidConfig,
  InvalidArgument,
  Unavailable,
  EmptyCompletion,
  TrainingDiverged,
  Validation,
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

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error(ErrorKind::Parse, "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DuplicateKeyError : public Error {
 public:
  explicit DuplicateKeyError(std::string key)
      : Error(ErrorKind::DuplicateKey, "duplicate key '" + key + "'"), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class TrainingDivergedError : public Error {
 public:
  explicit TrainingDivergedError(int epoch)
      : Error(ErrorKind::TrainingDiverged,
              "training loss became non-finite at epoch " + std::to_string(epoch)),
        epoch_(epoch) {}

  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace crashxai
