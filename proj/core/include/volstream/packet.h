#ifndef VOLSTREAM_PACKET_H_
#define VOLSTREAM_PACKET_H_

#include <cstdint>
#include <span>
#include <vector>

#include "volstream/codec.h"
#include "volstream/common.h"
#include "volstream/fec.h"
#include "volstream/frame.h"

namespace volstream {

inline constexpr uint8_t kDescMagic = 0x52;
inline constexpr uint8_t kDescVersion = 1;
inline constexpr size_t kDescHeaderSize = 24;
inline constexpr size_t kRgbPayloadLen = 1024;
inline constexpr size_t kDepthPayloadLen = 512;

// Wire layout, little-endian:
//   0 magic u8 | 1 version u8 | 2 modality u8 | 3 frame_kind u8
//   4 frame_id u32 | 8 gop_id u32 | 12 shard_index u16 | 14 n_data u16
//   16 n_parity u16 | 18 encoded_frame_len u32 | 22 payload_len u16
//   24 payload
struct DescPacket {
  Modality modality = Modality::kRgb;
  FrameKind frame_kind = FrameKind::kI;
  uint32_t frame_id = 0;
  uint32_t gop_id = 0;
  uint16_t shard_index = 0;
  uint16_t n_data = 0;
  uint16_t n_parity = 0;
  uint32_t encoded_frame_len = 0;
  Bytes payload;

  bool is_parity() const { return shard_index >= n_data; }
  size_t wire_size() const { return kDescHeaderSize + payload.size(); }
  friend bool operator==(const DescPacket&, const DescPacket&) = default;
};

struct PayloadLimits {
  size_t rgb = kRgbPayloadLen;
  size_t depth = kDepthPayloadLen;

  size_t For(Modality m) const { return m == Modality::kRgb ? rgb : depth; }
};

Bytes SerializePacket(const DescPacket& p);
// Throws kParse on short input, bad magic/version, bad enum bytes, payload
// length disagreeing with the buffer, or shard_index out of range.
DescPacket ParsePacket(std::span<const uint8_t> bytes);

struct PacketizeStats {
  size_t data_bytes = 0;    // first transmission of every data shard
  size_t parity_bytes = 0;  // RS parity shards
  size_t dup_bytes = 0;     // extra header copies
};

// Splits |enc| into DESC packets following |plan|. Header-split frames emit
// each header shard plan.header_copies times back to back, then the body.
// Contiguous frames emit n_data data shards (last one short) then parity.
std::vector<DescPacket> Packetize(const EncodedFrame& enc, const ShardPlan& plan,
                                  size_t payload_len, PacketizeStats* stats = nullptr);

struct ScheduledPacket {
  double send_offset_ms = 0.0;
  DescPacket packet;
};

using PacketSchedule = std::vector<ScheduledPacket>;

// Merges the two modality packet lists of one frame. Each list is spread
// evenly over the merged order (packet k of m lands at fraction (k+1)/(m+1));
// ties alternate modality, starting with RGB. Slots are spaced uniformly
// over [0, frame_interval_ms).
PacketSchedule Interleave(const std::vector<DescPacket>& rgb,
                          const std::vector<DescPacket>& depth, double frame_interval_ms);

}  // namespace volstream

#endif  // VOLSTREAM_PACKET_H_
