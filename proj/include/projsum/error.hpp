#pragma once

#include <stdexcept>
#include <string>

namespace projsum {

enum class ErrorCode {
  InvalidArgument,   // precondition on an argument violated
  InvalidSpectrum,   // malformed spectrum or tail declaration
  Infeasible,        // no decomposition into projections exists
  Precondition,      // operation-specific precondition (sum mismatch, ordering, ...)
  Indeterminate,     // routing cannot be decided within the given budget
  BudgetExhausted,   // truncation budget ran out before a required index was found
  NotRepresentable,  // trace value cannot be realized at the allowed matrix size
  Parse              // input file could not be parsed
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::InvalidSpectrum: return "invalid_spectrum";
    case ErrorCode::Infeasible: return "infeasible";
    case ErrorCode::Precondition: return "precondition";
    case ErrorCode::Indeterminate: return "indeterminate";
    case ErrorCode::BudgetExhausted: return "budget_exhausted";
    case ErrorCode::NotRepresentable: return "not_representable";
    case ErrorCode::Parse: return "parse";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace projsum
