#include "volstream/packet.h"

#include <algorithm>
#include <string>

namespace volstream {
namespace {

DescPacket BasePacket(const EncodedFrame& enc, const ShardPlan& plan) {
  DescPacket p;
  p.modality = enc.modality;
  p.frame_kind = enc.kind;
  p.frame_id = enc.frame_id;
  p.gop_id = enc.gop_id;
  p.n_data = static_cast<uint16_t>(plan.n_data);
  p.n_parity = static_cast<uint16_t>(plan.n_parity);
  p.encoded_frame_len = enc.encoded_len;
  return p;
}

Bytes Slice(const Bytes& src, size_t begin, size_t len) {
  const size_t end = std::min(src.size(), begin + len);
  return begin < end ? Bytes(src.begin() + static_cast<std::ptrdiff_t>(begin),
                             src.begin() + static_cast<std::ptrdiff_t>(end))
                     : Bytes{};
}

}  // namespace

Bytes SerializePacket(const DescPacket& p) {
  if (p.payload.size() > 0xFFFF) throw Error(ErrorCode::kInvalidArgument, "payload too long");
  Bytes out;
  out.reserve(p.wire_size());
  out.push_back(kDescMagic);
  out.push_back(kDescVersion);
  out.push_back(static_cast<uint8_t>(p.modality));
  out.push_back(static_cast<uint8_t>(p.frame_kind));
  PutU32(out, p.frame_id);
  PutU32(out, p.gop_id);
  PutU16(out, p.shard_index);
  PutU16(out, p.n_data);
  PutU16(out, p.n_parity);
  PutU32(out, p.encoded_frame_len);
  PutU16(out, static_cast<uint16_t>(p.payload.size()));
  out.insert(out.end(), p.payload.begin(), p.payload.end());
  return out;
}

DescPacket ParsePacket(std::span<const uint8_t> bytes) {
  if (bytes.size() < kDescHeaderSize) throw Error(ErrorCode::kParse, "packet shorter than header");
  if (bytes[0] != kDescMagic) throw Error(ErrorCode::kParse, "bad packet magic");
  if (bytes[1] != kDescVersion) throw Error(ErrorCode::kParse, "unsupported packet version");
  if (bytes[2] > 1) throw Error(ErrorCode::kParse, "bad modality byte");
  if (bytes[3] > 1) throw Error(ErrorCode::kParse, "bad frame kind byte");
  DescPacket p;
  p.modality = static_cast<Modality>(bytes[2]);
  p.frame_kind = static_cast<FrameKind>(bytes[3]);
  p.frame_id = GetU32(&bytes[4]);
  p.gop_id = GetU32(&bytes[8]);
  p.shard_index = GetU16(&bytes[12]);
  p.n_data = GetU16(&bytes[14]);
  p.n_parity = GetU16(&bytes[16]);
  p.encoded_frame_len = GetU32(&bytes[18]);
  const uint16_t payload_len = GetU16(&bytes[22]);
  if (bytes.size() != kDescHeaderSize + payload_len) {
    throw Error(ErrorCode::kParse, "payload length disagrees with datagram size");
  }
  if (p.n_data == 0 || p.shard_index >= static_cast<uint32_t>(p.n_data) + p.n_parity) {
    throw Error(ErrorCode::kParse, "shard index out of range");
  }
  p.payload.assign(bytes.begin() + kDescHeaderSize, bytes.end());
  return p;
}

std::vector<DescPacket> Packetize(const EncodedFrame& enc, const ShardPlan& plan,
                                  size_t payload_len, PacketizeStats* stats) {
  if (enc.encoded_len == 0) throw Error(ErrorCode::kInvalidArgument, "zero-length frame");
  if (payload_len == 0 || payload_len > 0xFFFF) {
    throw Error(ErrorCode::kInvalidArgument, "payload_len out of range");
  }
  if (static_cast<size_t>(plan.n_data) + plan.n_parity > 0xFFFF) {
    throw Error(ErrorCode::kInvalidArgument,
                "frame needs " + std::to_string(plan.n_data + plan.n_parity) +
                    " shards, more than 65535");
  }
  if (plan.n_data < 1 || plan.header_copies < 1) {
    throw Error(ErrorCode::kInvalidArgument, "shard plan is empty");
  }
  PacketizeStats local;
  PacketizeStats& st = stats ? *stats : local;
  std::vector<DescPacket> out;
  const DescPacket base = BasePacket(enc, plan);

  if (plan.header_split()) {
    const int body_shards = plan.n_data - plan.header_shards;
    if (static_cast<size_t>(plan.header_shards) != (enc.header.size() + payload_len - 1) / payload_len ||
        static_cast<size_t>(body_shards) != (enc.payload.size() + payload_len - 1) / payload_len) {
      throw Error(ErrorCode::kInvalidArgument, "shard plan does not match frame layout");
    }
    out.reserve(static_cast<size_t>(plan.header_shards) * plan.header_copies + body_shards);
    for (int h = 0; h < plan.header_shards; ++h) {
      DescPacket p = base;
      p.shard_index = static_cast<uint16_t>(h);
      p.payload = Slice(enc.header, static_cast<size_t>(h) * payload_len, payload_len);
      st.data_bytes += p.payload.size();
      st.dup_bytes += p.payload.size() * (plan.header_copies - 1);
      for (int c = 0; c < plan.header_copies; ++c) out.push_back(p);
    }
    for (int b = 0; b < body_shards; ++b) {
      DescPacket p = base;
      p.shard_index = static_cast<uint16_t>(plan.header_shards + b);
      p.payload = Slice(enc.payload, static_cast<size_t>(b) * payload_len, payload_len);
      st.data_bytes += p.payload.size();
      out.push_back(std::move(p));
    }
    return out;
  }

  const Bytes bytes = enc.Serialize();
  if (static_cast<size_t>(plan.n_data) != (bytes.size() + payload_len - 1) / payload_len) {
    throw Error(ErrorCode::kInvalidArgument, "shard plan does not match frame length");
  }
  out.reserve(static_cast<size_t>(plan.n_data) + plan.n_parity);
  for (int i = 0; i < plan.n_data; ++i) {
    DescPacket p = base;
    p.shard_index = static_cast<uint16_t>(i);
    p.payload = Slice(bytes, static_cast<size_t>(i) * payload_len, payload_len);
    st.data_bytes += p.payload.size();
    out.push_back(std::move(p));
  }
  if (plan.n_parity > 0) {
    std::vector<Bytes> shards = EncodeFrameShards(bytes, plan.n_data, plan.n_parity, payload_len);
    for (int j = 0; j < plan.n_parity; ++j) {
      DescPacket p = base;
      p.shard_index = static_cast<uint16_t>(plan.n_data + j);
      p.payload = std::move(shards[plan.n_data + j]);
      st.parity_bytes += p.payload.size();
      out.push_back(std::move(p));
    }
  }
  return out;
}

PacketSchedule Interleave(const std::vector<DescPacket>& rgb,
                          const std::vector<DescPacket>& depth, double frame_interval_ms) {
  const size_t mr = rgb.size();
  const size_t md = depth.size();
  const size_t total = mr + md;
  PacketSchedule out;
  out.reserve(total);
  size_t kr = 0, kd = 0;
  bool last_was_rgb = false;
  while (kr < mr || kd < md) {
    bool take_rgb;
    if (kd == md) {
      take_rgb = true;
    } else if (kr == mr) {
      take_rgb = false;
    } else {
      // Compare (kr+1)/(mr+1) with (kd+1)/(md+1) exactly.
      const size_t lhs = (kr + 1) * (md + 1);
      const size_t rhs = (kd + 1) * (mr + 1);
      take_rgb = lhs < rhs || (lhs == rhs && (out.empty() || !last_was_rgb));
    }
    const double offset = frame_interval_ms * static_cast<double>(out.size()) /
                          static_cast<double>(total);
    out.push_back({offset, take_rgb ? rgb[kr++] : depth[kd++]});
    last_was_rgb = take_rgb;
  }
  return out;
}

}  // namespace volstream
