#pragma once

#include <stdexcept>
#include <string>

namespace hanet {

// Base class for everything the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes or an invalid graph construction.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (files, annotations, ids).
class DataError : public Error {
 public:
  enum class Code {
    kBadMagic,
    kBadVersion,
    kTruncated,
    kTrailingData,
    kDuplicateId,
    kInvalidHeader,
    kIo,
    kInvalidRecord,
    kMissing,
  };

  DataError(Code code, const std::string& what)
      : Error(what), code_(code) {}

  Code code() const { return code_; }

 private:
  Code code_;
};

const char* to_string(DataError::Code code);

// Invalid configuration values or unknown keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite values during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace hanet
