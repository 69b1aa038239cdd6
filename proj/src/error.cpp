#include "peerperf/error.hpp"

namespace peerperf {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kBlockTooLarge: return "BlockTooLarge";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kIntegrityFailure: return "IntegrityFailure";
    case ErrorCode::kDanglingParent: return "DanglingParent";
    case ErrorCode::kPayloadMissing: return "PayloadMissing";
    case ErrorCode::kSchemaViolation: return "SchemaViolation";
    case ErrorCode::kMixedSubjects: return "MixedSubjects";
    case ErrorCode::kAuthFailure: return "AuthFailure";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kProtocolViolation: return "ProtocolViolation";
    case ErrorCode::kValidationFailedPrePublish: return "ValidationFailedPrePublish";
    case ErrorCode::kNotFoundAnywhere: return "NotFoundAnywhere";
    case ErrorCode::kConfigInvalid: return "ConfigInvalid";
    case ErrorCode::kBindFailure: return "BindFailure";
    case ErrorCode::kBootstrapFailure: return "BootstrapFailure";
    case ErrorCode::kScenarioInvalid: return "ScenarioInvalid";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kRankDeficient: return "RankDeficient";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

}  // namespace peerperf
