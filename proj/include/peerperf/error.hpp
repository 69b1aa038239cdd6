#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace peerperf {

enum class ErrorCode {
  kBlockTooLarge,
  kNotFound,
  kIntegrityFailure,
  kDanglingParent,
  kPayloadMissing,
  kSchemaViolation,
  kMixedSubjects,
  kAuthFailure,
  kTimeout,
  kProtocolViolation,
  kValidationFailedPrePublish,
  kNotFoundAnywhere,
  kConfigInvalid,
  kBindFailure,
  kBootstrapFailure,
  kScenarioInvalid,
  kInsufficientData,
  kRankDeficient,
  kIo,
};

std::string_view to_string(ErrorCode code);

// Every recoverable failure in the library is reported as an Error carrying
// one of the codes above; `detail` holds the subject (a cid, a field name).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code),
        detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace peerperf
