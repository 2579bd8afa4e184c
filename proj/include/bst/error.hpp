#pragma once

#include <stdexcept>
#include <string>

namespace bst {

enum class ErrorCode {
  kDimension = 1,
  kFormat = 2,
  kConfig = 3,
  kIngestion = 4,
  kIo = 5,
  kInvalidArgument = 6,
  kState = 7,
};

/// Base of every exception thrown by the library. The code maps 1:1 onto the
/// status values of the C API.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error(ErrorCode::kDimension, what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(ErrorCode::kFormat, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCode::kConfig, what) {}
};

class IngestionError : public Error {
 public:
  explicit IngestionError(const std::string& what) : Error(ErrorCode::kIngestion, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCode::kIo, what) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(ErrorCode::kInvalidArgument, what) {}
};

class StateError : public Error {
 public:
  explicit StateError(const std::string& what) : Error(ErrorCode::kState, what) {}
};

}  // namespace bst
