#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sketchprag {

enum class ErrorKind {
  kEmptyCorpus,
  kMissingCategory,
  kDegenerateCosts,
  kSplitInfeasible,
  kShapeError,
  kMissingFeature,
  kTrainingDiverged,
  kDegenerateLikelihood,
  kOffGridPoint,
  kDegenerateWeights,
  kSpecError,
  kOracleTooLarge,
  kParseError,
  kIoError,
  kConfigError,
  kInvalidArgument,
};

// Every library failure is reported through this type; `kind()` is what
// callers and the CLI dispatch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kEmptyCorpus: return "EmptyCorpus";
    case ErrorKind::kMissingCategory: return "MissingCategory";
    case ErrorKind::kDegenerateCosts: return "DegenerateCosts";
    case ErrorKind::kSplitInfeasible: return "SplitInfeasible";
    case ErrorKind::kShapeError: return "ShapeError";
    case ErrorKind::kMissingFeature: return "MissingFeature";
    case ErrorKind::kTrainingDiverged: return "TrainingDiverged";
    case ErrorKind::kDegenerateLikelihood: return "DegenerateLikelihood";
    case ErrorKind::kOffGridPoint: return "OffGridPoint";
    case ErrorKind::kDegenerateWeights: return "DegenerateWeights";
    case ErrorKind::kSpecError: return "SpecError";
    case ErrorKind::kOracleTooLarge: return "OracleTooLarge";
    case ErrorKind::kParseError: return "ParseError";
    case ErrorKind::kIoError: return "IoError";
    case ErrorKind::kConfigError: return "ConfigError";
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace sketchprag
