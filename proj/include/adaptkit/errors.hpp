#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace adaptkit {

// Root of every error raised by the library. The CLI maps subclasses onto
// stable exit codes (see cli.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Caller supplied something malformed: unknown names, bad flags, schema violations.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Artifact built for a different backbone or adapter architecture.
class CompatibilityError : public Error {
 public:
  using Error::Error;
};

// Digest or checksum mismatch.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  NotFoundError(const std::string& what, std::vector<std::string> nearest = {})
      : Error(what), nearest_(std::move(nearest)) {}
  const std::vector<std::string>& nearest() const { return nearest_; }

 private:
  std::vector<std::string> nearest_;
};

class AmbiguityError : public Error {
 public:
  AmbiguityError(const std::string& what, std::vector<std::string> candidates)
      : Error(what), candidates_(std::move(candidates)) {}
  const std::vector<std::string>& candidates() const { return candidates_; }

 private:
  std::vector<std::string> candidates_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Network or transport failure. Distinct from IntegrityError: retrying may help.
class TransportError : public Error {
 public:
  using Error::Error;
  bool retriable() const { return true; }
};

std::string join(const std::vector<std::string>& parts, const std::string& sep);

}  // namespace adaptkit
