#include "pedfusion/error.hpp"

#include "pedfusion/detection.hpp"

namespace pedfusion {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kTooFewSamples: return "TooFewSamples";
    case ErrorCode::kDegenerateDesign: return "DegenerateDesign";
    case ErrorCode::kOutOfCalibratedRange: return "OutOfCalibratedRange";
    case ErrorCode::kNonMonotone: return "NonMonotone";
    case ErrorCode::kTooFewAnchors: return "TooFewAnchors";
    case ErrorCode::kNoScanAvailable: return "NoScanAvailable";
    case ErrorCode::kDegeneratePolygon: return "DegeneratePolygon";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kInfeasibleGeometry: return "InfeasibleGeometry";
    case ErrorCode::kBehindCamera: return "BehindCamera";
    case ErrorCode::kSchemaError: return "SchemaError";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kMissingCalibration: return "MissingCalibration";
  }
  return "Unknown";
}

std::string_view to_string(Source source) {
  return source == Source::kLidar ? "lidar" : "camera";
}

Source source_from_string(std::string_view text) {
  if (text == "lidar") return Source::kLidar;
  if (text == "camera") return Source::kCamera;
  throw Error(ErrorCode::kSchemaError, "unknown source '" + std::string(text) + "'");
}

}  // namespace pedfusion
