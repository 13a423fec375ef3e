#pragma once

#include <stdexcept>
#include <string>

namespace spxnet {

// Base of every error the library throws. `kind()` is a short stable token
// used by the CLI to produce machine-parseable diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& message) : Error("shape", message) {}
};

class TapeError : public Error {
 public:
  explicit TapeError(const std::string& message) : Error("tape", message) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& message) : Error("format", message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config", message) {}
};

class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& message) : Error("training", message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("io", message) {}
};

// Rethrows `e` as the same error type with `context` prefixed to the message.
[[noreturn]] inline void rethrow_with_context(const Error& e, const std::string& context) {
  const std::string msg = context + ": " + e.what();
  const std::string& k = e.kind();
  if (k == "shape") throw ShapeError(msg);
  if (k == "tape") throw TapeError(msg);
  if (k == "format") throw FormatError(msg);
  if (k == "config") throw ConfigError(msg);
  if (k == "training") throw TrainingError(msg);
  if (k == "io") throw IoError(msg);
  throw Error(k, msg);
}

}  // namespace spxnet
