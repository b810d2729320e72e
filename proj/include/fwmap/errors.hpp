#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fwmap {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DuplicateIndexInTerm : public Error {
 public:
  using Error::Error;
};

class VariableUncovered : public Error {
 public:
  explicit VariableUncovered(std::size_t var)
      : Error("variable " + std::to_string(var) + " is not covered by any term"), variable(var) {}
  std::size_t variable;
};

class OracleFailure : public Error {
 public:
  using Error::Error;
};

class EmptyCache : public Error {
 public:
  using Error::Error;
};

class ZeroGradient : public Error {
 public:
  ZeroGradient() : Error("supergradient is zero; multipliers are optimal") {}
};

class InfeasibleRow : public Error {
 public:
  using Error::Error;
};

class InfeasibleMatching : public Error {
 public:
  using Error::Error;
};

/// Input format error with a 1-based line number (0 when unknown).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line_no)
      : Error("line " + std::to_string(line_no) + ": " + what), line(line_no) {}
  std::size_t line;
};

class ArityError : public ParseError {
 public:
  using ParseError::ParseError;
};

}  // namespace fwmap
