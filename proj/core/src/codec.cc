#include "volstream/codec.h"

#include <algorithm>
#include <cstring>
#include <string>

#include "volstream/packbits.h"

namespace volstream {
namespace {

constexpr uint8_t kCodecMagic = 0xC5;
constexpr size_t kFixedHeaderLen = 18;

void PutVarint(Bytes& out, uint32_t v) {
  while (v >= 0x80) {
    out.push_back(static_cast<uint8_t>(v | 0x80));
    v >>= 7;
  }
  out.push_back(static_cast<uint8_t>(v));
}

uint32_t GetVarint(std::span<const uint8_t> in, size_t& pos) {
  uint32_t v = 0;
  for (int shift = 0; shift < 35; shift += 7) {
    if (pos >= in.size()) throw Error(ErrorCode::kUndecodable, "codec header truncated");
    const uint8_t b = in[pos++];
    v |= static_cast<uint32_t>(b & 0x7F) << shift;
    if ((b & 0x80) == 0) return v;
  }
  throw Error(ErrorCode::kUndecodable, "codec header varint too long");
}

// Copies block (bx, by) out of |plane| into |dst| (block*block*channels samples).
void GatherBlock(const Plane& plane, int block, int bx, int by, uint8_t* dst) {
  const size_t row = static_cast<size_t>(block) * plane.channels;
  for (int y = 0; y < block; ++y) {
    const uint8_t* src = &plane.data[static_cast<size_t>(by * block + y) * plane.stride() +
                                     static_cast<size_t>(bx * block) * plane.channels];
    std::memcpy(dst + y * row, src, row);
  }
}

void ScatterBlock(Plane& plane, int block, int bx, int by, const uint8_t* src) {
  const size_t row = static_cast<size_t>(block) * plane.channels;
  for (int y = 0; y < block; ++y) {
    uint8_t* dst = &plane.data[static_cast<size_t>(by * block + y) * plane.stride() +
                               static_cast<size_t>(bx * block) * plane.channels];
    std::memcpy(dst, src + y * row, row);
  }
}

struct BlockCodes {
  std::vector<bool> present;
  std::vector<Bytes> compressed;
};

Bytes BuildHeader(FrameKind kind, const Plane& plane, const CodecConfig& cfg,
                  const BlockCodes& codes) {
  const size_t blocks = codes.present.size();
  Bytes header;
  header.reserve(kFixedHeaderLen + (blocks + 7) / 8 + blocks * 2);
  PutU32(header, 0);  // patched below
  header.push_back(kCodecMagic);
  header.push_back(static_cast<uint8_t>(kind));
  header.push_back(static_cast<uint8_t>(plane.channels));
  header.push_back(static_cast<uint8_t>(cfg.block));
  PutU16(header, static_cast<uint16_t>(plane.width));
  PutU16(header, static_cast<uint16_t>(plane.height));
  header.push_back(static_cast<uint8_t>(cfg.quant));
  header.push_back(0);
  uint32_t payload_len = 0;
  for (const auto& c : codes.compressed) payload_len += static_cast<uint32_t>(c.size());
  PutU32(header, payload_len);

  const size_t bitmap_at = header.size();
  header.resize(bitmap_at + (blocks + 7) / 8, 0);
  for (size_t i = 0; i < blocks; ++i) {
    if (codes.present[i]) header[bitmap_at + i / 8] |= static_cast<uint8_t>(1u << (i % 8));
  }
  for (size_t i = 0; i < blocks; ++i) {
    if (codes.present[i]) PutVarint(header, static_cast<uint32_t>(codes.compressed[i].size()));
  }
  const auto len = static_cast<uint32_t>(header.size());
  header[0] = static_cast<uint8_t>(len);
  header[1] = static_cast<uint8_t>(len >> 8);
  header[2] = static_cast<uint8_t>(len >> 16);
  header[3] = static_cast<uint8_t>(len >> 24);
  return header;
}

EncodeResult Assemble(FrameKind kind, const Plane& plane, const CodecConfig& cfg,
                      BlockCodes codes, Plane recon) {
  EncodeResult out;
  out.frame.kind = kind;
  out.frame.modality = plane.channels == 3 ? Modality::kRgb : Modality::kDepth;
  out.frame.header = BuildHeader(kind, plane, cfg, codes);
  for (const auto& c : codes.compressed) {
    out.frame.payload.insert(out.frame.payload.end(), c.begin(), c.end());
  }
  out.frame.encoded_len =
      static_cast<uint32_t>(out.frame.header.size() + out.frame.payload.size());
  out.reconstruction = std::move(recon);
  return out;
}

// Rounds half toward zero so a residual of exactly q/2 does not flip sign on
// every frame of a static region.
int QuantizeDelta(int d, int q) {
  if (q == 1) return d;
  const int c = d >= 0 ? (d + (q - 1) / 2) / q : -((-d + (q - 1) / 2) / q);
  return std::clamp(c, -128, 127);
}

}  // namespace

void CodecConfig::Validate() const {
  if (block < 1 || block > 255) throw Error(ErrorCode::kInvalidArgument, "block must be in [1,255]");
  if (quant < 1 || quant > 255) throw Error(ErrorCode::kInvalidArgument, "quant must be in [1,255]");
  gop.Validate();
}

void CodecConfig::ValidatePlane(const Plane& plane) const {
  if (plane.width <= 0 || plane.height <= 0 || plane.width % block != 0 ||
      plane.height % block != 0 || plane.width > 0xFFFF || plane.height > 0xFFFF) {
    throw Error(ErrorCode::kDimensionMismatch,
                "plane " + std::to_string(plane.width) + "x" + std::to_string(plane.height) +
                    " is not a multiple of block " + std::to_string(block));
  }
  if ((plane.channels != 1 && plane.channels != 3) || plane.size() != plane.stride() * plane.height) {
    throw Error(ErrorCode::kDimensionMismatch, "plane buffer does not match its shape");
  }
}

Bytes EncodedFrame::Serialize() const {
  Bytes out;
  out.reserve(header.size() + payload.size());
  out.insert(out.end(), header.begin(), header.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

EncodedFrame EncodedFrame::FromBytes(std::span<const uint8_t> bytes, uint32_t frame_id,
                                     uint32_t gop_id, FrameKind kind, Modality modality) {
  const auto header_len = PeekHeaderLength(bytes);
  if (!header_len || *header_len < kHeaderLengthPrefix || *header_len > bytes.size()) {
    throw Error(ErrorCode::kUndecodable, "encoded frame header truncated");
  }
  EncodedFrame f;
  f.frame_id = frame_id;
  f.gop_id = gop_id;
  f.kind = kind;
  f.modality = modality;
  f.header.assign(bytes.begin(), bytes.begin() + *header_len);
  f.payload.assign(bytes.begin() + *header_len, bytes.end());
  f.encoded_len = static_cast<uint32_t>(bytes.size());
  return f;
}

std::optional<uint32_t> PeekHeaderLength(std::span<const uint8_t> bytes) {
  if (bytes.size() < kHeaderLengthPrefix) return std::nullopt;
  return GetU32(bytes.data());
}

size_t CorruptionMask::Count() const {
  return static_cast<size_t>(std::count(flags_.begin(), flags_.end(), 1));
}

void CorruptionMask::MergeFrom(const CorruptionMask& other) {
  if (other.blocks_x_ != blocks_x_ || other.blocks_y_ != blocks_y_) {
    throw Error(ErrorCode::kDimensionMismatch, "mask grids differ");
  }
  for (size_t i = 0; i < flags_.size(); ++i) flags_[i] |= other.flags_[i];
}

void CorruptionMask::Fill(bool v) { std::fill(flags_.begin(), flags_.end(), v ? 1 : 0); }

CodecHeader CodecHeader::Parse(std::span<const uint8_t> header) {
  if (header.size() < kFixedHeaderLen) {
    throw Error(ErrorCode::kUndecodable, "codec header truncated");
  }
  CodecHeader h;
  h.header_len = GetU32(header.data());
  if (header[4] != kCodecMagic) throw Error(ErrorCode::kUndecodable, "bad codec header magic");
  if (header[5] > 1) throw Error(ErrorCode::kUndecodable, "bad frame kind in codec header");
  h.kind = static_cast<FrameKind>(header[5]);
  h.channels = header[6];
  h.block = header[7];
  h.width = GetU16(header.data() + 8);
  h.height = GetU16(header.data() + 10);
  h.quant = header[12];
  h.payload_len = GetU32(header.data() + 14);
  if (h.header_len > header.size()) throw Error(ErrorCode::kUndecodable, "codec header truncated");
  if (h.block == 0 || h.quant == 0 || (h.channels != 1 && h.channels != 3) ||
      h.width % h.block != 0 || h.height % h.block != 0) {
    throw Error(ErrorCode::kUndecodable, "inconsistent codec header geometry");
  }
  const size_t blocks = static_cast<size_t>(h.blocks_x()) * h.blocks_y();
  const size_t bitmap_len = (blocks + 7) / 8;
  if (kFixedHeaderLen + bitmap_len > h.header_len) {
    throw Error(ErrorCode::kUndecodable, "codec header truncated");
  }
  const auto body = header.first(h.header_len);
  h.present.resize(blocks);
  h.block_ranges.resize(blocks);
  size_t pos = kFixedHeaderLen + bitmap_len;
  size_t offset = 0;
  for (size_t i = 0; i < blocks; ++i) {
    h.present[i] = (body[kFixedHeaderLen + i / 8] >> (i % 8)) & 1;
    if (!h.present[i]) {
      h.block_ranges[i] = {offset, offset};
      continue;
    }
    const uint32_t len = GetVarint(body, pos);
    h.block_ranges[i] = {offset, offset + len};
    offset += len;
  }
  if (offset != h.payload_len) {
    throw Error(ErrorCode::kUndecodable, "block lengths disagree with payload length");
  }
  return h;
}

EncodeResult EncodeIFrame(const Plane& plane, const CodecConfig& cfg) {
  cfg.ValidatePlane(plane);
  const int bxn = plane.width / cfg.block;
  const int byn = plane.height / cfg.block;
  const size_t samples = static_cast<size_t>(cfg.block) * cfg.block * plane.channels;
  const int q = cfg.quant;

  BlockCodes codes;
  codes.present.resize(static_cast<size_t>(bxn) * byn);
  codes.compressed.resize(codes.present.size());
  Plane recon(plane.width, plane.height, plane.channels);
  Bytes raw(samples), code(samples);
  for (int by = 0; by < byn; ++by) {
    for (int bx = 0; bx < bxn; ++bx) {
      const size_t idx = static_cast<size_t>(by) * bxn + bx;
      GatherBlock(plane, cfg.block, bx, by, raw.data());
      bool any = false;
      for (size_t s = 0; s < samples; ++s) {
        code[s] = static_cast<uint8_t>((raw[s] + q / 2) / q);
        any |= code[s] != 0;
        raw[s] = static_cast<uint8_t>(std::min(255, code[s] * q));
      }
      ScatterBlock(recon, cfg.block, bx, by, raw.data());
      if (!any) continue;
      codes.present[idx] = true;
      PackBitsEncode(code, codes.compressed[idx]);
    }
  }
  return Assemble(FrameKind::kI, plane, cfg, std::move(codes), std::move(recon));
}

EncodeResult EncodePFrame(const Plane& plane, const Plane& reference, const CodecConfig& cfg) {
  cfg.ValidatePlane(plane);
  if (!plane.SameShape(reference) || reference.size() != plane.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "reference plane shape differs from input");
  }
  const int bxn = plane.width / cfg.block;
  const int byn = plane.height / cfg.block;
  const size_t samples = static_cast<size_t>(cfg.block) * cfg.block * plane.channels;
  const int q = cfg.quant;

  BlockCodes codes;
  codes.present.resize(static_cast<size_t>(bxn) * byn);
  codes.compressed.resize(codes.present.size());
  Plane recon = reference;
  Bytes cur(samples), ref(samples), code(samples);
  for (int by = 0; by < byn; ++by) {
    for (int bx = 0; bx < bxn; ++bx) {
      const size_t idx = static_cast<size_t>(by) * bxn + bx;
      GatherBlock(plane, cfg.block, bx, by, cur.data());
      GatherBlock(reference, cfg.block, bx, by, ref.data());
      bool any = false;
      for (size_t s = 0; s < samples; ++s) {
        const int c = QuantizeDelta(static_cast<int>(cur[s]) - ref[s], q);
        code[s] = static_cast<uint8_t>(c & 0xFF);
        any |= code[s] != 0;
        cur[s] = q == 1 ? static_cast<uint8_t>((ref[s] + c) & 0xFF)
                        : static_cast<uint8_t>(std::clamp(ref[s] + c * q, 0, 255));
      }
      if (!any) continue;
      ScatterBlock(recon, cfg.block, bx, by, cur.data());
      codes.present[idx] = true;
      PackBitsEncode(code, codes.compressed[idx]);
    }
  }
  return Assemble(FrameKind::kP, plane, cfg, std::move(codes), std::move(recon));
}

DecodeResult Decode(const EncodedFrame& enc, const Plane* reference,
                    std::span<const ByteRange> zero_fill_ranges) {
  if (enc.header.size() < kFixedHeaderLen) {
    throw Error(ErrorCode::kUndecodable, "codec header truncated");
  }
  const CodecHeader h = CodecHeader::Parse(enc.header);
  if (enc.encoded_len != enc.header.size() + enc.payload.size() ||
      enc.payload.size() < h.payload_len) {
    throw Error(ErrorCode::kUndecodable, "encoded length disagrees with frame bytes");
  }
  if (h.kind == FrameKind::kP) {
    if (reference == nullptr) {
      throw Error(ErrorCode::kPrecondition, "P-frame decode requires a reference plane");
    }
    if (reference->width != h.width || reference->height != h.height ||
        reference->channels != h.channels) {
      throw Error(ErrorCode::kDimensionMismatch, "reference plane shape differs from frame");
    }
  }

  DecodeResult out;
  out.plane = h.kind == FrameKind::kP ? *reference : Plane(h.width, h.height, h.channels);
  out.mask = CorruptionMask(h.blocks_x(), h.blocks_y());
  const size_t samples = static_cast<size_t>(h.block) * h.block * h.channels;
  Bytes code(samples), ref(samples);
  const std::span<const uint8_t> payload(enc.payload);

  for (int by = 0; by < h.blocks_y(); ++by) {
    for (int bx = 0; bx < h.blocks_x(); ++bx) {
      const size_t idx = static_cast<size_t>(by) * h.blocks_x() + bx;
      if (!h.present[idx]) continue;  // zero content (I) or reference (P) already in place
      const ByteRange range = h.block_ranges[idx];
      const bool corrupted = std::any_of(
          zero_fill_ranges.begin(), zero_fill_ranges.end(),
          [&](const ByteRange& z) { return range.Intersects(z); });
      if (corrupted) {
        out.mask.set(bx, by, true);
        continue;
      }
      PackBitsDecode(payload.subspan(range.begin, range.size()), code);
      if (h.kind == FrameKind::kI) {
        for (auto& c : code) c = static_cast<uint8_t>(std::min(255, c * h.quant));
        ScatterBlock(out.plane, h.block, bx, by, code.data());
        continue;
      }
      GatherBlock(out.plane, h.block, bx, by, ref.data());
      for (size_t s = 0; s < samples; ++s) {
        if (h.quant == 1) {
          ref[s] = static_cast<uint8_t>((ref[s] + code[s]) & 0xFF);
        } else {
          const int c = static_cast<int8_t>(code[s]);
          ref[s] = static_cast<uint8_t>(std::clamp(ref[s] + c * h.quant, 0, 255));
        }
      }
      ScatterBlock(out.plane, h.block, bx, by, ref.data());
    }
  }
  return out;
}

EncodeResult ReferenceCodec::Encode(FrameKind kind, const Plane& plane, const Plane* reference) {
  if (kind == FrameKind::kI) return EncodeIFrame(plane, cfg_);
  if (reference == nullptr) {
    throw Error(ErrorCode::kPrecondition, "P-frame encode requires a reference plane");
  }
  return EncodePFrame(plane, *reference, cfg_);
}

DecodeResult ReferenceCodec::Decode(const EncodedFrame& enc, const Plane* reference,
                                    std::span<const ByteRange> zero_fill_ranges) {
  return volstream::Decode(enc, reference, zero_fill_ranges);
}

}  // namespace volstream
