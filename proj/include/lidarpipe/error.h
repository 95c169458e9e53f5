#ifndef LIDARPIPE_ERROR_H_
#define LIDARPIPE_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace lidarpipe {

enum class ErrorCode {
  kMalformedCloud,
  kNonFiniteValue,
  kReflectanceOutOfRange,
  kMalformedLabel,
  kMissingCalibEntry,
  kMalformedCalib,
  kNotAPhysicalBox,
  kBadBox,
  kBadConfig,
  kBadWeights,
  kCoordOutOfGrid,
  kOutOfRangeAngle,
  kFrameSetMismatch,
  kIo,
};

std::string_view error_code_name(ErrorCode code);

// All library failures are reported through this exception. The code is the
// stable part; the message carries context (line number, entry name, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lidarpipe

#endif  // LIDARPIPE_ERROR_H_
