#ifndef VOLSTREAM_COMMON_H_
#define VOLSTREAM_COMMON_H_

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace volstream {

using Bytes = std::vector<uint8_t>;

enum class ErrorCode {
  kMalformedInput,
  kDimensionMismatch,
  kUndecodable,
  kPrecondition,
  kUnrecoverable,
  kInvalidArgument,
  kParse,
  kRange,
  kEmptyTrace,
  kIo,
  kConfig,
  kBackendFault,
  kSocket,
};

std::string_view ErrorCodeName(ErrorCode code);

// All library failures are reported through this exception type. Callers
// that need to branch on the failure class inspect code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Half-open byte interval [begin, end).
struct ByteRange {
  size_t begin = 0;
  size_t end = 0;

  size_t size() const { return end > begin ? end - begin : 0; }
  bool Intersects(const ByteRange& other) const {
    return begin < other.end && other.begin < end;
  }
  friend bool operator==(const ByteRange&, const ByteRange&) = default;
};

// Little-endian helpers shared by the wire formats.
inline void PutU16(Bytes& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

inline void PutU32(Bytes& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

inline uint16_t GetU16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

inline uint32_t GetU32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace volstream

#endif  // VOLSTREAM_COMMON_H_
