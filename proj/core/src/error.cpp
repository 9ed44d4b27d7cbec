#include "omgpt/error.hpp"

namespace omgpt {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::CycleError: return "CycleError";
    case ErrorCode::MultipleRoots: return "MultipleRoots";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EndEffectorNotLeaf: return "EndEffectorNotLeaf";
    case ErrorCode::NameNotFound: return "NameNotFound";
    case ErrorCode::NotPrimal: return "NotPrimal";
    case ErrorCode::DuplicateSlot: return "DuplicateSlot";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CheckpointMissing: return "CheckpointMissing";
    case ErrorCode::DegenerateRotation: return "DegenerateRotation";
    case ErrorCode::NotARotation: return "NotARotation";
    case ErrorCode::SkeletonMismatch: return "SkeletonMismatch";
    case ErrorCode::TooFewFrames: return "TooFewFrames";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InvalidAxis: return "InvalidAxis";
    case ErrorCode::NotScalar: return "NotScalar";
    case ErrorCode::StateMismatch: return "StateMismatch";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::SubjectNotFound: return "SubjectNotFound";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::UnknownCaption: return "UnknownCaption";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::EndEffectorCountMismatch: return "EndEffectorCountMismatch";
    case ErrorCode::UnknownFamily: return "UnknownFamily";
    case ErrorCode::DataEmpty: return "DataEmpty";
    case ErrorCode::NanLoss: return "NanLoss";
    case ErrorCode::NonFiniteStats: return "NonFiniteStats";
    case ErrorCode::PoolTooLarge: return "PoolTooLarge";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "UnknownError";
}

}  // namespace omgpt
