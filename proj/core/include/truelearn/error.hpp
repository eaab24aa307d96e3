#pragma once

#include <stdexcept>
#include <string>

namespace truelearn {

// Base for every error raised by the library. Each subclass maps to one CLI
// exit status (see tools/cli).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside an operation's mathematical domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Evidence whose probability mass underflows; the caller must widen beliefs.
class DegenerateEvidence : public Error {
 public:
  using Error::Error;
};

// Malformed, inconsistent or missing input data.
class DataError : public Error {
 public:
  using Error::Error;
};

// Entity-linking service failure. `retryable()` is true for transport errors.
class ServiceError : public Error {
 public:
  ServiceError(const std::string& what, bool retryable)
      : Error(what), retryable_(retryable) {}
  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

// Invalid command-line usage or configuration.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace truelearn
