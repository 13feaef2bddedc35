#pragma once

#include <stdexcept>
#include <string>

namespace council {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& message) : std::runtime_error(message) {}
};

// domain
class IndexGapError : public Error {
 public:
  IndexGapError(std::size_t expected, std::size_t got)
      : Error("turn index gap: expected " + std::to_string(expected) + ", got " + std::to_string(got)),
        expected(expected),
        got(got) {}
  std::size_t expected;
  std::size_t got;
};

class ConfigViolationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line)
      : Error(message + " (line " + std::to_string(line) + ")"), line(line) {}
  std::size_t line;
};

// gateway
class AuthMissingError : public Error {
 public:
  using Error::Error;
};

class ProviderError : public Error {
 public:
  ProviderError(const std::string& message, int status) : Error(message), status(status) {}
  int status;
};

class RetriesExhaustedError : public Error {
 public:
  using Error::Error;
};

class ScriptExhaustedError : public Error {
 public:
  using Error::Error;
};

// prompts
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// knowledge base
class DanglingEdgeError : public Error {
 public:
  using Error::Error;
};

class UntranslatableQueryError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

class SolverUnavailableError : public SolverError {
 public:
  using SolverError::SolverError;
};

class SolverSyntaxError : public SolverError {
 public:
  SolverSyntaxError(const std::string& message, std::string stderr_text)
      : SolverError(message), stderr_text(std::move(stderr_text)) {}
  std::string stderr_text;
};

// evaluation
class BlindnessViolationError : public Error {
 public:
  using Error::Error;
};

class JudgeUnparsableError : public Error {
 public:
  using Error::Error;
};

class CoverageGapError : public Error {
 public:
  using Error::Error;
};

// cli
class MissingCellError : public Error {
 public:
  explicit MissingCellError(const std::string& label)
      : Error("no score records for configuration " + label), label(label) {}
  std::string label;
};

}  // namespace council
