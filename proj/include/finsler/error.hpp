#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace finsler {

/// Failure categories raised across the library. Each maps to one named
/// error condition of a public operation.
enum class ErrorKind {
  InvalidSplice,
  InvalidBand,
  ZeroCovector,
  ConvexityLost,
  SeamMismatch,
  PoleProximity,
  InvariantDrift,
  StepFailure,
  ConeViolation,
  LiftAmbiguity,
  NoCrossing,
  NonTransverse,
  NotVanishing,
  ExtrapolationUnstable,
  MapFailure,
  NotConverged,
  InsufficientCloud,
  EmptySample,
  UnknownScenario,
  ConfigInvalid,
  EmptyInput,
  IoFailure,
  InvalidArgument,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace finsler
