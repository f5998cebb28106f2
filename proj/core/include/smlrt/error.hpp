#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace smlrt {

enum class ErrorCode {
  // directive parsing
  SyntaxError,
  SemanticError,
  UnboundVariable,
  EmptyRange,
  MissingClause,
  UnsupportedConstruct,
  // data bridge
  ArityMismatch,
  OutOfBounds,
  FeatureMismatch,
  ShapeMismatch,
  NonInjectiveScatter,
  DtypeMismatch,
  // execution runtime
  DuplicateRegion,
  DuplicateFunctor,
  UnknownFunctor,
  UnknownRegion,
  UnresolvedReference,
  MissingPredicate,
  InvalidSchedule,
  ModelLoadError,
  ModelShapeMismatch,
  // srdb
  CorruptManifest,
  VersionMismatch,
  ShapeDrift,
  RangeOutOfBounds,
  DatabaseLocked,
  // inference engine
  ManifestError,
  DimChainError,
  NonFiniteWeights,
  NonFiniteOutput,
  // metrics
  LengthMismatch,
  EmptyInput,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// True for errors caused by the filesystem or persisted artifacts rather
/// than by invalid arguments. The CLI maps these to exit code 2.
bool is_io_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Parse error anchored at the byte offset where the offending token begins.
class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t offset, const std::string& message);

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace smlrt
