#ifndef VOLSTREAM_EXTERNAL_CODEC_H_
#define VOLSTREAM_EXTERNAL_CODEC_H_

#include <sys/types.h>

#include <mutex>
#include <string>

#include "volstream/codec.h"

namespace volstream {

// Byte protocol spoken over the child's stdin/stdout. Every message is
// u32 LE body length followed by the body.
//
// Encode request:  u8 op=1 | u8 kind | u8 channels | u16 w | u16 h |
//                  u8 has_ref | plane | [reference plane]
// Decode request:  u8 op=2 | u8 kind | u8 channels | u16 w | u16 h |
//                  u8 has_ref | u32 header_len | u32 payload_len | header |
//                  payload | u16 n_ranges | n x (u32 begin, u32 end) |
//                  [reference plane]
// Reply:           u8 status (0 ok) then either the result or a UTF-8 error.
//   encode result: u32 header_len | header | u32 payload_len | payload |
//                  reconstruction plane
//   decode result: plane | u16 blocks_x | u16 blocks_y | one byte per block
//
// The codec header must start with its own u32 LE length.
namespace codec_wire {
inline constexpr uint8_t kEncode = 1;
inline constexpr uint8_t kDecode = 2;
}  // namespace codec_wire

// Runs |command| through /bin/sh and forwards every call to it. Decoded
// planes have the geometry given here.
class ExternalCodec final : public PlaneCodec {
 public:
  ExternalCodec(const std::string& command, int width, int height, int channels);
  ~ExternalCodec() override;
  ExternalCodec(const ExternalCodec&) = delete;
  ExternalCodec& operator=(const ExternalCodec&) = delete;

  EncodeResult Encode(FrameKind kind, const Plane& plane, const Plane* reference) override;
  DecodeResult Decode(const EncodedFrame& enc, const Plane* reference,
                      std::span<const ByteRange> zero_fill_ranges) override;

 private:
  Bytes Call(const Bytes& request);

  Plane geometry_;
  std::mutex mu_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
};

// Serves |codec| on the given descriptors until EOF. Returns the number of
// requests handled.
size_t ServeCodec(int in_fd, int out_fd, PlaneCodec& codec);

}  // namespace volstream

#endif  // VOLSTREAM_EXTERNAL_CODEC_H_
