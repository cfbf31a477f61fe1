#pragma once

#include <stdexcept>
#include <string>

namespace plasticgraph {

enum class ErrorCode {
  IndexOutOfRange,
  ArityMismatch,
  InvertedElement,
  InvalidDivisions,
  UnsupportedOrder,
  InvalidPoisson,
  ModeParameterMismatch,
  EmptyFacetSet,
  LengthMismatch,
  SchemaError,
  DanglingReference,
  ConflictingBC,
  IoError,
  SingularSystem,
  NotConverged,
  IndefiniteOperator,
  NonFiniteObjective,
  ZeroReference,
};

const char* to_string(ErrorCode code);

/// Exception carrying a machine-readable code next to the human-readable message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

}  // namespace plasticgraph
