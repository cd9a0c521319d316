#ifndef VOLSTREAM_CODEC_H_
#define VOLSTREAM_CODEC_H_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "volstream/common.h"
#include "volstream/frame.h"

namespace volstream {

struct CodecConfig {
  int block = 16;
  int quant = 4;
  GopSpec gop;

  void Validate() const;
  void ValidatePlane(const Plane& plane) const;
};

// Every codec used by the pipeline emits a header whose first four bytes are
// its own total length (u32 LE). The receiver relies on this to locate the
// header/body boundary of a partially received P-frame.
inline constexpr size_t kHeaderLengthPrefix = 4;

struct EncodedFrame {
  uint32_t frame_id = 0;
  uint32_t gop_id = 0;
  FrameKind kind = FrameKind::kI;
  Modality modality = Modality::kRgb;
  Bytes header;
  Bytes payload;
  uint32_t encoded_len = 0;  // header.size() + payload.size()

  Bytes Serialize() const;  // header ++ payload
  static EncodedFrame FromBytes(std::span<const uint8_t> bytes, uint32_t frame_id,
                                uint32_t gop_id, FrameKind kind, Modality modality);
  friend bool operator==(const EncodedFrame&, const EncodedFrame&) = default;
};

// Reads the u32 header-length prefix. Returns nullopt when fewer than four
// bytes are available.
std::optional<uint32_t> PeekHeaderLength(std::span<const uint8_t> bytes);

// Per-block flag grid; true marks a block whose decoded content is untrusted.
class CorruptionMask {
 public:
  CorruptionMask() = default;
  CorruptionMask(int blocks_x, int blocks_y, bool value = false)
      : blocks_x_(blocks_x), blocks_y_(blocks_y),
        flags_(static_cast<size_t>(blocks_x) * blocks_y, value ? 1 : 0) {}

  static CorruptionMask ForPlane(int width, int height, int block, bool value = false) {
    return CorruptionMask((width + block - 1) / block, (height + block - 1) / block, value);
  }

  int blocks_x() const { return blocks_x_; }
  int blocks_y() const { return blocks_y_; }
  size_t block_count() const { return flags_.size(); }

  bool at(int bx, int by) const { return flags_[Index(bx, by)] != 0; }
  void set(int bx, int by, bool v) { flags_[Index(bx, by)] = v ? 1 : 0; }
  bool at_index(size_t i) const { return flags_[i] != 0; }
  void set_index(size_t i, bool v) { flags_[i] = v ? 1 : 0; }

  size_t Count() const;
  bool Any() const { return Count() > 0; }
  void MergeFrom(const CorruptionMask& other);  // logical or
  void Fill(bool v);

  friend bool operator==(const CorruptionMask&, const CorruptionMask&) = default;

 private:
  size_t Index(int bx, int by) const { return static_cast<size_t>(by) * blocks_x_ + bx; }

  int blocks_x_ = 0;
  int blocks_y_ = 0;
  std::vector<uint8_t> flags_;
};

struct DecodeResult {
  Plane plane;
  CorruptionMask mask;
};

struct EncodeResult {
  EncodedFrame frame;
  Plane reconstruction;  // what a decoder produces on clean delivery
};

// Parsed view of the reference codec header.
struct CodecHeader {
  FrameKind kind = FrameKind::kI;
  int channels = 1;
  int block = 16;
  int width = 0;
  int height = 0;
  int quant = 1;
  uint32_t header_len = 0;
  uint32_t payload_len = 0;
  std::vector<bool> present;           // per block, row-major
  std::vector<ByteRange> block_ranges;  // per block; empty range when absent

  int blocks_x() const { return width / block; }
  int blocks_y() const { return height / block; }

  static CodecHeader Parse(std::span<const uint8_t> header);
};

// Reference block codec. I-frames carry quantized samples; P-frames carry
// quantized deltas against the previous reconstruction. Blocks whose
// quantized content is all zero are marked absent in the header bitmap.
EncodeResult EncodeIFrame(const Plane& plane, const CodecConfig& cfg);
EncodeResult EncodePFrame(const Plane& plane, const Plane& reference,
                          const CodecConfig& cfg);

inline EncodedFrame EncodeI(const Plane& plane, const CodecConfig& cfg) {
  return EncodeIFrame(plane, cfg).frame;
}
inline EncodedFrame EncodeP(const Plane& plane, const Plane& reference,
                            const CodecConfig& cfg) {
  return EncodePFrame(plane, reference, cfg).frame;
}

// zero_fill_ranges are offsets into enc.payload. Blocks whose payload range
// intersects one of them decode as zero delta (P) or zero content (I) and are
// flagged in the returned mask.
DecodeResult Decode(const EncodedFrame& enc, const Plane* reference,
                    std::span<const ByteRange> zero_fill_ranges);

// Codec seam used by the sender and receiver. The reference codec is the
// default; ExternalCodec (external_codec.h) forwards to another process.
class PlaneCodec {
 public:
  virtual ~PlaneCodec() = default;

  virtual EncodeResult Encode(FrameKind kind, const Plane& plane, const Plane* reference) = 0;
  virtual DecodeResult Decode(const EncodedFrame& enc, const Plane* reference,
                              std::span<const ByteRange> zero_fill_ranges) = 0;
};

class ReferenceCodec : public PlaneCodec {
 public:
  explicit ReferenceCodec(CodecConfig cfg) : cfg_(cfg) { cfg_.Validate(); }

  EncodeResult Encode(FrameKind kind, const Plane& plane, const Plane* reference) override;
  DecodeResult Decode(const EncodedFrame& enc, const Plane* reference,
                      std::span<const ByteRange> zero_fill_ranges) override;

  const CodecConfig& config() const { return cfg_; }

 private:
  CodecConfig cfg_;
};

}  // namespace volstream

#endif  // VOLSTREAM_CODEC_H_
