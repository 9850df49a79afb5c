#pragma once

#include <stdexcept>
#include <string>

namespace vstory {

/// Malformed or out-of-contract input (empty sets, dimension mismatch, bad files).
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// A computation produced a NaN or infinity.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// The problem has no well-defined answer (single-class ROC, disconnected comparisons).
class IllPosed : public std::runtime_error {
 public:
  explicit IllPosed(const std::string& what) : std::runtime_error(what) {}
};

/// File could not be opened, read or written. Carries the offending path.
class IoError : public std::runtime_error {
 public:
  IoError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace vstory
