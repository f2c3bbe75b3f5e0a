#pragma once

#include <stdexcept>
#include <string>

namespace diag {

/// Base of every error raised by the toolkit. `kind()` is a stable
/// machine-readable tag used by the CLI's structured error output.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define DIAG_DEFINE_ERROR(Name, tag)                                   \
  class Name : public Error {                                          \
   public:                                                             \
    explicit Name(const std::string& message) : Error(tag, message) {} \
  };

DIAG_DEFINE_ERROR(ParseError, "parse_error")
DIAG_DEFINE_ERROR(EmptyInputError, "empty_input")
DIAG_DEFINE_ERROR(LengthError, "length_error")
DIAG_DEFINE_ERROR(ConfigError, "config_error")
DIAG_DEFINE_ERROR(PreconditionError, "precondition_error")
DIAG_DEFINE_ERROR(DegenerateInputError, "degenerate_input")
DIAG_DEFINE_ERROR(RankError, "rank_error")
DIAG_DEFINE_ERROR(ConvergenceError, "convergence_error")
DIAG_DEFINE_ERROR(InsufficientDataError, "insufficient_data")
DIAG_DEFINE_ERROR(IoError, "io_error")
DIAG_DEFINE_ERROR(ScoringError, "scoring_error")

#undef DIAG_DEFINE_ERROR

/// Throws the concrete error type registered for `kind`; used to re-raise an
/// error with extra context without losing its type.
[[noreturn]] inline void throw_error(const std::string& kind, const std::string& message) {
  if (kind == "parse_error") throw ParseError(message);
  if (kind == "empty_input") throw EmptyInputError(message);
  if (kind == "length_error") throw LengthError(message);
  if (kind == "config_error") throw ConfigError(message);
  if (kind == "precondition_error") throw PreconditionError(message);
  if (kind == "degenerate_input") throw DegenerateInputError(message);
  if (kind == "rank_error") throw RankError(message);
  if (kind == "convergence_error") throw ConvergenceError(message);
  if (kind == "insufficient_data") throw InsufficientDataError(message);
  if (kind == "io_error") throw IoError(message);
  if (kind == "scoring_error") throw ScoringError(message);
  throw Error(kind, message);
}

}  // namespace diag
