#include "defsc/error.hpp"

namespace defsc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonIntegrable: return "NonIntegrable";
    case ErrorCode::NonPositiveDensity: return "NonPositiveDensity";
    case ErrorCode::NoDensity: return "NoDensity";
    case ErrorCode::PoleOnSupport: return "PoleOnSupport";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NegativeLambda: return "NegativeLambda";
    case ErrorCode::MultiIntervalUnsupported: return "MultiIntervalUnsupported";
    case ErrorCode::DegenerateFit: return "DegenerateFit";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SupportViolation: return "SupportViolation";
    case ErrorCode::EigenFailure: return "EigenFailure";
    case ErrorCode::MissingVectors: return "MissingVectors";
    case ErrorCode::SingularResolvent: return "SingularResolvent";
    case ErrorCode::EdgeDegeneracy: return "EdgeDegeneracy";
    case ErrorCode::BranchAmbiguity: return "BranchAmbiguity";
    case ErrorCode::UnknownKind: return "UnknownKind";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace defsc
