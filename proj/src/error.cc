#include "lidarpipe/error.h"

namespace lidarpipe {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedCloud: return "MalformedCloud";
    case ErrorCode::kNonFiniteValue: return "NonFiniteValue";
    case ErrorCode::kReflectanceOutOfRange: return "ReflectanceOutOfRange";
    case ErrorCode::kMalformedLabel: return "MalformedLabel";
    case ErrorCode::kMissingCalibEntry: return "MissingCalibEntry";
    case ErrorCode::kMalformedCalib: return "MalformedCalib";
    case ErrorCode::kNotAPhysicalBox: return "NotAPhysicalBox";
    case ErrorCode::kBadBox: return "BadBox";
    case ErrorCode::kBadConfig: return "BadConfig";
    case ErrorCode::kBadWeights: return "BadWeights";
    case ErrorCode::kCoordOutOfGrid: return "CoordOutOfGrid";
    case ErrorCode::kOutOfRangeAngle: return "OutOfRangeAngle";
    case ErrorCode::kFrameSetMismatch: return "FrameSetMismatch";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + detail),
      code_(code) {}

}  // namespace lidarpipe
