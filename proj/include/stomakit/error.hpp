#pragma once

#include <stdexcept>
#include <string>

namespace stomakit {

enum class ErrorCode {
  // input / parse failures
  MalformedXml,
  MalformedJson,
  MalformedCsv,
  MissingField,
  UnknownLabel,
  NonPositiveExtent,
  ScoreOutOfRange,
  CenterOutOfBounds,
  BadParams,
  ImageTooSmall,
  IoFailure,
  // computation failures
  DimensionMismatch,
  ShapeMismatch,
  WeightOutOfRange,
  DegenerateAlpha,
  NoGroundTruth,
  AllClassesSkipped,
  DegenerateSeries,
  NonPositiveReference,
  SampleTooSmall,
  NoStomata,
  NonPositiveInput,
  PackingInfeasible,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  // Input/parse failures map to CLI exit code 2, computation failures to 3.
  bool is_input_error() const noexcept {
    switch (code_) {
      case ErrorCode::MalformedXml:
      case ErrorCode::MalformedJson:
      case ErrorCode::MalformedCsv:
      case ErrorCode::MissingField:
      case ErrorCode::UnknownLabel:
      case ErrorCode::NonPositiveExtent:
      case ErrorCode::ScoreOutOfRange:
      case ErrorCode::CenterOutOfBounds:
      case ErrorCode::BadParams:
      case ErrorCode::ImageTooSmall:
      case ErrorCode::IoFailure:
        return true;
      default:
        return false;
    }
  }

 private:
  ErrorCode code_;
};

}  // namespace stomakit
