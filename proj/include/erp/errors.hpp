#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace erp {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Vocabulary construction received no corpus lines.
class CorpusEmpty : public Error {
 public:
  CorpusEmpty() : Error("corpus is empty") {}
};

/// A surface unit or token id outside the vocabulary.
/// position() is the index of the offending unit (or id) in its sequence.
class UnknownToken : public Error {
 public:
  UnknownToken(const std::string& unit, std::size_t position)
      : Error("unknown token '" + unit + "' at position " + std::to_string(position)),
        position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// An operation that needs a continuable state was given a terminal one.
class TerminalState : public Error {
 public:
  TerminalState() : Error("state is terminal") {}
};

/// Temperature must be strictly positive.
class InvalidTemperature : public Error {
 public:
  explicit InvalidTemperature(double tau)
      : Error("invalid temperature " + std::to_string(tau) + " (must be > 0)") {}
};

/// Top-PK filter parameters out of range.
class InvalidFilter : public Error {
 public:
  explicit InvalidFilter(const std::string& what) : Error(what) {}
};

/// Unknown critic kind or malformed critic parameters.
class InvalidCritic : public Error {
 public:
  explicit InvalidCritic(const std::string& what) : Error(what) {}
};

/// Exhaustive enumeration would exceed the safety guard.
class SpaceTooLarge : public Error {
 public:
  explicit SpaceTooLarge(const std::string& what) : Error(what) {}
};

/// A report or result file could not be written.
class ReportWriteError : public Error {
 public:
  explicit ReportWriteError(const std::string& what) : Error(what) {}
};

/// A remote endpoint could not be reached after all retries.
class RemoteUnavailable : public Error {
 public:
  explicit RemoteUnavailable(const std::string& what) : Error(what) {}
};

/// A remote endpoint answered, but not with the agreed wire format.
class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& what) : Error(what) {}
};

/// Malformed or invalid configuration (file format, field values, versions).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace erp
