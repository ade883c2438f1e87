#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bbayes {

enum class Errc {
  MalformedHeader,
  ArityMismatch,
  NonNumericCell,
  UnsupportedAttributeType,
  AllMissingColumn,
  EmptyResult,
  ZeroVarianceColumn,
  DimensionMismatch,
  TooFewClassMembers,
  UnknownFeature,
  InvalidArgument,
  NonFiniteGradient,
  StepSizeCollapse,
  ChainFailed,
  DegenerateDraws,
  EmptyDraws,
  LengthMismatch,
  FoldFitFailed,
  MisalignedFolds,
  MissingRatio,
  SingularSystem,
  SchemaMismatch,
  ConfigError,
  IoError,
};

inline std::string_view errc_name(Errc e) {
  switch (e) {
    case Errc::MalformedHeader: return "MalformedHeader";
    case Errc::ArityMismatch: return "ArityMismatch";
    case Errc::NonNumericCell: return "NonNumericCell";
    case Errc::UnsupportedAttributeType: return "UnsupportedAttributeType";
    case Errc::AllMissingColumn: return "AllMissingColumn";
    case Errc::EmptyResult: return "EmptyResult";
    case Errc::ZeroVarianceColumn: return "ZeroVarianceColumn";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::TooFewClassMembers: return "TooFewClassMembers";
    case Errc::UnknownFeature: return "UnknownFeature";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::NonFiniteGradient: return "NonFiniteGradient";
    case Errc::StepSizeCollapse: return "StepSizeCollapse";
    case Errc::ChainFailed: return "ChainFailed";
    case Errc::DegenerateDraws: return "DegenerateDraws";
    case Errc::EmptyDraws: return "EmptyDraws";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::FoldFitFailed: return "FoldFitFailed";
    case Errc::MisalignedFolds: return "MisalignedFolds";
    case Errc::MissingRatio: return "MissingRatio";
    case Errc::SingularSystem: return "SingularSystem";
    case Errc::SchemaMismatch: return "SchemaMismatch";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

/// Single exception type for the library; `code()` tells callers what failed.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code), message_(what) {}

  Errc code() const noexcept { return code_; }
  /// The message without the leading error-code name.
  const std::string& message() const noexcept { return message_; }

 private:
  Errc code_;
  std::string message_;
};

/// Parse failures carry the 1-based source line (and column when known, else 0).
class ParseError : public Error {
 public:
  ParseError(Errc code, std::size_t line, std::size_t column, const std::string& what)
      : Error(code, "line " + std::to_string(line) +
                        (column ? ", column " + std::to_string(column) : std::string()) + ": " +
                        what),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace bbayes
