#include "finsler/error.hpp"

namespace finsler {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidSplice: return "InvalidSplice";
    case ErrorKind::InvalidBand: return "InvalidBand";
    case ErrorKind::ZeroCovector: return "ZeroCovector";
    case ErrorKind::ConvexityLost: return "ConvexityLost";
    case ErrorKind::SeamMismatch: return "SeamMismatch";
    case ErrorKind::PoleProximity: return "PoleProximity";
    case ErrorKind::InvariantDrift: return "InvariantDrift";
    case ErrorKind::StepFailure: return "StepFailure";
    case ErrorKind::ConeViolation: return "ConeViolation";
    case ErrorKind::LiftAmbiguity: return "LiftAmbiguity";
    case ErrorKind::NoCrossing: return "NoCrossing";
    case ErrorKind::NonTransverse: return "NonTransverse";
    case ErrorKind::NotVanishing: return "NotVanishing";
    case ErrorKind::ExtrapolationUnstable: return "ExtrapolationUnstable";
    case ErrorKind::MapFailure: return "MapFailure";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::InsufficientCloud: return "InsufficientCloud";
    case ErrorKind::EmptySample: return "EmptySample";
    case ErrorKind::UnknownScenario: return "UnknownScenario";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace finsler
