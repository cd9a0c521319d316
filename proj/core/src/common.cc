#include "volstream/common.h"

namespace volstream {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedInput: return "malformed-input";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kUndecodable: return "undecodable";
    case ErrorCode::kPrecondition: return "precondition";
    case ErrorCode::kUnrecoverable: return "unrecoverable";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kRange: return "range";
    case ErrorCode::kEmptyTrace: return "empty-trace";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kBackendFault: return "backend-fault";
    case ErrorCode::kSocket: return "socket";
  }
  return "unknown";
}

}  // namespace volstream
