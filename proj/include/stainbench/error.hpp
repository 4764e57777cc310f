#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stainbench {

// Error taxonomy shared by every module. The names are part of the public
// contract: they appear in reports, on stderr, and across language bindings.
enum class ErrorKind {
  InvalidArgument,
  DegenerateBasis,
  InsufficientTissue,
  DegeneratePlane,
  EmptyInput,
  AchromaticColor,
  TooFewConditions,
  UnknownCondition,
  InvalidSelection,
  InsufficientPassingTiles,
  ZeroSourceIntensity,
  MissingProfile,
  SingleClass,
  IncompleteConditions,
  InconsistentTable,
  DegenerateCohort,
  DegenerateVariance,
  TooFewPoints,
  DegenerateCovariance,
  InvalidSpec,
  IoError,
  FormatError,
  ConfigError,
};

constexpr std::string_view error_name(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DegenerateBasis: return "DegenerateBasis";
    case ErrorKind::InsufficientTissue: return "InsufficientTissue";
    case ErrorKind::DegeneratePlane: return "DegeneratePlane";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::AchromaticColor: return "AchromaticColor";
    case ErrorKind::TooFewConditions: return "TooFewConditions";
    case ErrorKind::UnknownCondition: return "UnknownCondition";
    case ErrorKind::InvalidSelection: return "InvalidSelection";
    case ErrorKind::InsufficientPassingTiles: return "InsufficientPassingTiles";
    case ErrorKind::ZeroSourceIntensity: return "ZeroSourceIntensity";
    case ErrorKind::MissingProfile: return "MissingProfile";
    case ErrorKind::SingleClass: return "SingleClass";
    case ErrorKind::IncompleteConditions: return "IncompleteConditions";
    case ErrorKind::InconsistentTable: return "InconsistentTable";
    case ErrorKind::DegenerateCohort: return "DegenerateCohort";
    case ErrorKind::DegenerateVariance: return "DegenerateVariance";
    case ErrorKind::TooFewPoints: return "TooFewPoints";
    case ErrorKind::DegenerateCovariance: return "DegenerateCovariance";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(error_name(kind)) + ": " + detail), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::string_view name() const noexcept { return error_name(kind_); }

 private:
  ErrorKind kind_;
};

}  // namespace stainbench
