#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace stylefool {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Wrong magic number or unknown record layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Header and payload disagree (truncated or padded file).
class CorruptFileError : public Error {
 public:
  using Error::Error;
};

/// A value violates a documented precondition or invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// The query budget does not allow another classifier call.
class BudgetError : public Error {
 public:
  BudgetError(const std::string& what, std::uint64_t spent)
      : Error(what), spent_(spent) {}
  std::uint64_t spent() const noexcept { return spent_; }

 private:
  std::uint64_t spent_;
};

/// Transport-level failure talking to a classifier; the query is not counted.
class QueryError : public Error {
 public:
  using Error::Error;
};

/// A remote classifier answered with something we cannot parse.
class ProtocolError : public Error {
 public:
  ProtocolError(const std::string& what, std::string raw)
      : Error(what + ": " + raw), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int iteration)
      : Error(what), iteration_(iteration) {}
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace stylefool
