#pragma once

#include <stdexcept>
#include <string>

namespace ncsiegel {

// Machine-readable error kinds; the CLI maps them onto exit codes.
enum class ErrorCode {
  DivisionByIndistinguishableZero,
  PrecisionExhausted,
  ShapeMismatch,
  ConstantTermNonzero,
  NotNormalized,
  NormTooLarge,
  RadiusViolation,
  BackendUnsupported,
  NotDiagonal,
  Undecidable,
  ResonantObstruction,
  ScheduleViolation,
  ContractionFailure,
  NoFeasibleB,
  ScheduleDivergence,
  EmptyGrid,
  InconsistentWeights,
  ParseError,
  InvalidArgument,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DivisionByIndistinguishableZero: return "DivisionByIndistinguishableZero";
    case ErrorCode::PrecisionExhausted: return "PrecisionExhausted";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::ConstantTermNonzero: return "ConstantTermNonzero";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::NormTooLarge: return "NormTooLarge";
    case ErrorCode::RadiusViolation: return "RadiusViolation";
    case ErrorCode::BackendUnsupported: return "BackendUnsupported";
    case ErrorCode::NotDiagonal: return "NotDiagonal";
    case ErrorCode::Undecidable: return "Undecidable";
    case ErrorCode::ResonantObstruction: return "ResonantObstruction";
    case ErrorCode::ScheduleViolation: return "ScheduleViolation";
    case ErrorCode::ContractionFailure: return "ContractionFailure";
    case ErrorCode::NoFeasibleB: return "NoFeasibleB";
    case ErrorCode::ScheduleDivergence: return "ScheduleDivergence";
    case ErrorCode::EmptyGrid: return "EmptyGrid";
    case ErrorCode::InconsistentWeights: return "InconsistentWeights";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace ncsiegel
