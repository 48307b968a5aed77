#pragma once

#include <stdexcept>
#include <string>

namespace ngplus {

enum class Errc {
  NotSymmetric,
  NotPositiveDefinite,
  DimensionMismatch,
  NoConvergence,
  EmptyBatch,
  UnsupportedLoss,
  KappaNotOne,
  SketchTooLarge,
  NotDivisible,
  HorizonExceeded,
  NonFiniteLoss,
  InvalidArgument,
  InvalidSpec,
  ParseError,
  RaggedRow,
  UnknownKey,
  TypeError,
  MissingRequired,
  IoError,
};

inline const char* to_string(Errc code) {
  switch (code) {
    case Errc::NotSymmetric: return "NotSymmetric";
    case Errc::NotPositiveDefinite: return "NotPositiveDefinite";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::EmptyBatch: return "EmptyBatch";
    case Errc::UnsupportedLoss: return "UnsupportedLoss";
    case Errc::KappaNotOne: return "KappaNotOne";
    case Errc::SketchTooLarge: return "SketchTooLarge";
    case Errc::NotDivisible: return "NotDivisible";
    case Errc::HorizonExceeded: return "HorizonExceeded";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::ParseError: return "ParseError";
    case Errc::RaggedRow: return "RaggedRow";
    case Errc::UnknownKey: return "UnknownKey";
    case Errc::TypeError: return "TypeError";
    case Errc::MissingRequired: return "MissingRequired";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure in the library is reported as an Error carrying a code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace ngplus
