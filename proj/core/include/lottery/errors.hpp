#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lottery {

// Every failure raised by the library derives from Error so callers (the CLI in
// particular) can map categories to exit codes without string matching.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
  using Error::Error;
};
class IndexError : public Error {
  using Error::Error;
};
class StateError : public Error {
  using Error::Error;
};
class ArgumentError : public Error {
  using Error::Error;
};
class ConfigError : public Error {
  using Error::Error;
};
class InputError : public Error {
  using Error::Error;
};
class NumericError : public Error {
  using Error::Error;
};
class DataError : public Error {
  using Error::Error;
};
class DegeneracyError : public ArgumentError {
  using ArgumentError::ArgumentError;
};
class IngestionError : public Error {
  using Error::Error;
};

// Schema violations carry the JSON pointer of the offending key.
class SchemaError : public ConfigError {
 public:
  SchemaError(std::string path, const std::string& message)
      : ConfigError(path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// Artifact decoding failures carry the byte offset at which decoding stopped.
class LoadError : public Error {
 public:
  LoadError(const std::string& message, std::uint64_t offset)
      : Error(message + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace lottery
