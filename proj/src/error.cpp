#include "gmatch/error.hpp"

namespace gmatch {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidDepth: return "InvalidDepth";
    case ErrorCode::InvalidPixel: return "InvalidPixel";
    case ErrorCode::InvalidIntrinsics: return "InvalidIntrinsics";
    case ErrorCode::NotRotation: return "NotRotation";
    case ErrorCode::InsufficientCorrespondences: return "InsufficientCorrespondences";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::NotConsistent: return "NotConsistent";
    case ErrorCode::ChiralityViolation: return "ChiralityViolation";
    case ErrorCode::MetricMismatch: return "MetricMismatch";
    case ErrorCode::InvalidKeypoints: return "InvalidKeypoints";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::PoolTooLarge: return "PoolTooLarge";
    case ErrorCode::NoConsensus: return "NoConsensus";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MetricUnknown: return "MetricUnknown";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace gmatch
