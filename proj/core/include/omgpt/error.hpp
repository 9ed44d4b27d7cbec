#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace omgpt {

enum class ErrorCode {
  // skeleton
  CycleError,
  MultipleRoots,
  LengthMismatch,
  EndEffectorNotLeaf,
  NameNotFound,
  NotPrimal,
  DuplicateSlot,
  // io
  ParseError,
  ValidationError,
  VersionMismatch,
  CheckpointMissing,
  // rotmath
  DegenerateRotation,
  NotARotation,
  SkeletonMismatch,
  TooFewFrames,
  // tensorcore
  ShapeMismatch,
  InvalidAxis,
  NotScalar,
  StateMismatch,
  // textembed
  EmptyText,
  SubjectNotFound,
  DimensionMismatch,
  UnknownCaption,
  // model
  ConfigMismatch,
  EndEffectorCountMismatch,
  // datagen / trainer
  UnknownFamily,
  DataEmpty,
  NanLoss,
  // metrics
  NonFiniteStats,
  PoolTooLarge,
  TooFewSamples,
  // cli
  ConfigError,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception. Every failure the library reports carries one of
/// the codes above so callers (and the CLI exit-code mapping) can dispatch on
/// the kind of failure rather than on message text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace omgpt
