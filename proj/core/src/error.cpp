#include "smlrt/error.hpp"

namespace smlrt {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::SemanticError: return "SemanticError";
    case ErrorCode::UnboundVariable: return "UnboundVariable";
    case ErrorCode::EmptyRange: return "EmptyRange";
    case ErrorCode::MissingClause: return "MissingClause";
    case ErrorCode::UnsupportedConstruct: return "UnsupportedConstruct";
    case ErrorCode::ArityMismatch: return "ArityMismatch";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::FeatureMismatch: return "FeatureMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonInjectiveScatter: return "NonInjectiveScatter";
    case ErrorCode::DtypeMismatch: return "DtypeMismatch";
    case ErrorCode::DuplicateRegion: return "DuplicateRegion";
    case ErrorCode::DuplicateFunctor: return "DuplicateFunctor";
    case ErrorCode::UnknownFunctor: return "UnknownFunctor";
    case ErrorCode::UnknownRegion: return "UnknownRegion";
    case ErrorCode::UnresolvedReference: return "UnresolvedReference";
    case ErrorCode::MissingPredicate: return "MissingPredicate";
    case ErrorCode::InvalidSchedule: return "InvalidSchedule";
    case ErrorCode::ModelLoadError: return "ModelLoadError";
    case ErrorCode::ModelShapeMismatch: return "ModelShapeMismatch";
    case ErrorCode::CorruptManifest: return "CorruptManifest";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::ShapeDrift: return "ShapeDrift";
    case ErrorCode::RangeOutOfBounds: return "RangeOutOfBounds";
    case ErrorCode::DatabaseLocked: return "DatabaseLocked";
    case ErrorCode::ManifestError: return "ManifestError";
    case ErrorCode::DimChainError: return "DimChainError";
    case ErrorCode::NonFiniteWeights: return "NonFiniteWeights";
    case ErrorCode::NonFiniteOutput: return "NonFiniteOutput";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

bool is_io_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::IoError:
    case ErrorCode::CorruptManifest:
    case ErrorCode::VersionMismatch:
    case ErrorCode::DatabaseLocked:
    case ErrorCode::ModelLoadError:
    case ErrorCode::ManifestError:
      return true;
    default:
      return false;
  }
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

SyntaxError::SyntaxError(std::size_t offset, const std::string& message)
    : Error(ErrorCode::SyntaxError, message + " (at byte " + std::to_string(offset) + ")"),
      offset_(offset) {}

}  // namespace smlrt
