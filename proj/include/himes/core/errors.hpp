#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace himes {

/// Root of every error the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input or a violated precondition. Carries every offending entry
/// so callers can report them all at once.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message) : Error(message), issues_{message} {}
  ValidationError(const std::string& message, std::vector<std::string> issues)
      : Error(message + ": " + join(issues)), issues_(std::move(issues)) {}

  const std::vector<std::string>& issues() const noexcept { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& item : items) {
      if (!out.empty()) out += "; ";
      out += item;
    }
    return out;
  }

  std::vector<std::string> issues_;
};

/// Embedding dimension disagreement between two vectors or a vector and a store.
class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A zero-norm embedding reached a similarity computation.
class ZeroVectorError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A partition key that is not part of the active taxonomy.
class TaxonomyError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A remote (or stub) client could not complete a call.
class TransportError : public Error {
 public:
  TransportError(const std::string& message, bool retryable) : Error(message), retryable_(retryable) {}
  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

/// The memory store could not be opened or written.
class StoreUnavailableError : public Error {
 public:
  using Error::Error;
};

}  // namespace himes
