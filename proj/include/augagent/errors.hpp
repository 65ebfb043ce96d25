#pragma once

#include <stdexcept>
#include <string>

namespace augagent {

// Bad or inconsistent dataset content: manifests, records, images.
// The CLI maps these to exit status 1.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Manifest line that failed to parse.
class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Well-formed record that breaks a manifest invariant.
class InvariantError : public DataError {
 public:
  InvariantError(std::string record_id, const std::string& what)
      : DataError("record '" + record_id + "': " + what),
        record_id_(std::move(record_id)) {}
  const std::string& record_id() const { return record_id_; }

 private:
  std::string record_id_;
};

// Remote or mock backend failed, or violated its contract. Exit status 2.
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Transport-level failure (connection refused, timeout, 5xx). Retried.
class TransportError : public BackendError {
 public:
  using BackendError::BackendError;
};

// Invalid configuration or flags. Exit status 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace augagent
