#include "volstream/receiver.h"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <nlohmann/json.hpp>

namespace volstream {
namespace {

double ElapsedMs(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

bool AllData(const ShardBuffer& b) {
  for (int i = 0; i < b.n_data; ++i) {
    if (!b.present[i]) return false;
  }
  return true;
}

size_t CeilDiv(size_t a, size_t b) { return (a + b - 1) / b; }

}  // namespace

FrameClock::FrameClock(double fps) : fps_(fps) {
  if (!(fps > 0.0)) throw Error(ErrorCode::kConfig, "fps must be positive");
}

void FrameClock::SetAnchor(double t0_ms) {
  if (t0_) throw Error(ErrorCode::kPrecondition, "t0 is already set");
  t0_ = t0_ms;
}

double FrameClock::t0() const {
  if (!t0_) throw Error(ErrorCode::kPrecondition, "t0 is not set");
  return *t0_;
}

double FrameClock::DeadlineFor(uint32_t frame_index) const {
  return t0() + static_cast<double>(frame_index) * 1000.0 / fps_;
}

bool ShardBuffer::Complete() const {
  if (AllData(*this)) return true;
  return !header_split() && n_parity > 0 && FrameShardsRecoverable(present, n_data, n_parity);
}

FrameAssembler::IngestResult FrameAssembler::Ingest(const DescPacket& p, double now_ms) {
  const int mi = static_cast<int>(p.modality);
  if (static_cast<int64_t>(p.frame_id) <= finalized_through_[mi]) {
    ++late_;
    return {};
  }
  if (p.payload.size() > limits_.For(p.modality) || p.n_data == 0) {
    ++inconsistent_;
    return {};
  }
  auto [it, inserted] = buffers_.try_emplace(Key(p.frame_id, p.modality));
  ShardBuffer& b = it->second;
  if (inserted) {
    b.kind = p.frame_kind;
    b.gop_id = p.gop_id;
    b.n_data = p.n_data;
    b.n_parity = p.n_parity;
    b.encoded_len = p.encoded_frame_len;
    b.shards.resize(static_cast<size_t>(b.n_data) + b.n_parity);
    b.present.assign(b.shards.size(), false);
    b.first_packet_ms = now_ms;
  } else if (b.kind != p.frame_kind || b.n_data != p.n_data || b.n_parity != p.n_parity ||
             b.encoded_len != p.encoded_frame_len || b.gop_id != p.gop_id) {
    ++inconsistent_;
    return {};
  }
  if (p.shard_index >= b.shards.size()) {
    ++inconsistent_;
    return {};
  }
  if (b.present[p.shard_index]) {
    ++duplicates_;
    return {};
  }
  b.shards[p.shard_index] = p.payload;
  b.present[p.shard_index] = true;
  ++b.received;
  IngestResult r{true, false};
  if (!b.complete_ms && b.Complete()) {
    b.complete_ms = now_ms;
    r.completed_now = true;
  }
  if (b.received == b.n_data + b.n_parity) b.all_received_ms = now_ms;
  return r;
}

const ShardBuffer* FrameAssembler::Find(uint32_t frame_id, Modality m) const {
  const auto it = buffers_.find(Key(frame_id, m));
  return it == buffers_.end() ? nullptr : &it->second;
}

std::optional<ShardBuffer> FrameAssembler::Take(uint32_t frame_id, Modality m) {
  auto& fin = finalized_through_[static_cast<int>(m)];
  fin = std::max(fin, static_cast<int64_t>(frame_id));
  auto node = buffers_.extract(Key(frame_id, m));
  if (node.empty()) return std::nullopt;
  return std::move(node.mapped());
}

AssembledFrame ClassifyFrame(const ShardBuffer* buffer, uint32_t frame_id, FrameKind kind,
                             uint32_t gop_id, Modality m, size_t payload_len) {
  AssembledFrame out;
  out.outcome = kind == FrameKind::kI ? Outcome::kLostGop : Outcome::kLostFrame;
  if (buffer == nullptr || buffer->received == 0) return out;
  const ShardBuffer& b = *buffer;
  const size_t total = b.encoded_len;
  const size_t pl = payload_len;

  auto finish = [&](const Bytes& bytes, std::vector<ByteRange> fill) {
    try {
      out.frame = EncodedFrame::FromBytes(bytes, frame_id, gop_id, kind, m);
    } catch (const Error&) {
      return;
    }
    out.zero_fill = std::move(fill);
    out.outcome = out.zero_fill.empty() ? Outcome::kClean : Outcome::kPartialRecoverable;
  };
  // Copies a present shard into place; false when its size is inconsistent.
  auto place = [&](Bytes& dst, int s, size_t at, size_t len) {
    if (b.shards[s].size() != len) return false;
    std::copy(b.shards[s].begin(), b.shards[s].end(), dst.begin() + static_cast<std::ptrdiff_t>(at));
    return true;
  };

  if (!b.header_split()) {
    if (CeilDiv(total, pl) != static_cast<size_t>(b.n_data)) return out;
    const bool all_data = AllData(b);
    if (all_data || (b.n_parity > 0 && FrameShardsRecoverable(b.present, b.n_data, b.n_parity))) {
      Bytes bytes;
      if (all_data) {
        bytes.assign(total, 0);
        for (int s = 0; s < b.n_data; ++s) {
          const size_t at = s * pl;
          if (!place(bytes, s, at, std::min(pl, total - at))) return out;
        }
      } else {
        std::vector<Bytes> padded(b.shards.size());
        for (size_t s = 0; s < padded.size(); ++s) {
          if (!b.present[s]) continue;
          if (b.shards[s].size() > pl) return out;
          padded[s] = b.shards[s];
          padded[s].resize(pl, 0);
        }
        bytes = ReconstructFrameShards(padded, b.present, b.n_data, b.n_parity, pl);
        bytes.resize(total);
      }
      finish(bytes, {});
      return out;
    }
    if (kind == FrameKind::kI || !b.present[0]) return out;
    const auto header_len = PeekHeaderLength(b.shards[0]);
    if (!header_len || *header_len > total) return out;
    for (size_t s = 0; s < CeilDiv(*header_len, pl); ++s) {
      if (!b.present[s]) return out;
    }
    Bytes bytes(total, 0);
    std::vector<ByteRange> fill;
    for (int s = 0; s < b.n_data; ++s) {
      const size_t begin = s * pl, end = std::min(begin + pl, total);
      if (b.present[s]) {
        if (!place(bytes, s, begin, end - begin)) return out;
      } else {
        fill.push_back({begin - *header_len, end - *header_len});
      }
    }
    finish(bytes, std::move(fill));
    return out;
  }

  // Header-split P-frame: header shards first, then the body from offset 0.
  if (!b.present[0]) return out;
  const auto header_len = PeekHeaderLength(b.shards[0]);
  if (!header_len || *header_len > total) return out;
  const size_t h = CeilDiv(*header_len, pl);
  const size_t body_len = total - *header_len;
  if (h + CeilDiv(body_len, pl) != static_cast<size_t>(b.n_data)) return out;
  Bytes bytes(total, 0);
  for (size_t s = 0; s < h; ++s) {
    const size_t at = s * pl;
    if (!b.present[s] || !place(bytes, static_cast<int>(s), at, std::min(pl, *header_len - at))) {
      return out;
    }
  }
  std::vector<ByteRange> fill;
  for (int s = static_cast<int>(h); s < b.n_data; ++s) {
    const size_t begin = (s - h) * pl, end = std::min(begin + pl, body_len);
    if (b.present[s]) {
      if (!place(bytes, s, *header_len + begin, end - begin)) return out;
    } else {
      fill.push_back({begin, end});
    }
  }
  finish(bytes, std::move(fill));
  return out;
}

ModalityDecoder::ModalityDecoder(Modality m, PlaneCodec& codec, ProtectionMode mode, GopSpec gop)
    : modality_(m), codec_(codec), mode_(mode), gop_(gop) {
  gop_.Validate();
}

DecodeOutput ModalityDecoder::Lose(Outcome o) {
  DecodeOutput out;
  out.outcome = o;
  out.taint = taint_;
  return out;
}

DecodeOutput ModalityDecoder::Process(uint32_t frame_id, const AssembledFrame& in) {
  const GopPosition pos = GetGopPosition(frame_id, gop_);
  if (pos.gop_id != gop_id_) {
    gop_id_ = pos.gop_id;
    gop_lost_ = false;
  }
  if (gop_lost_) return Lose(Outcome::kLostGop);
  const bool l7 = ModeUsesRecovery(mode_);
  // Damage to a P-frame that cannot be repaired downstream breaks every later
  // frame of the GoP.
  auto lose_p = [&] {
    if (!l7) {
      gop_lost_ = true;
      return Lose(Outcome::kLostGop);
    }
    taint_.Fill(true);
    return Lose(Outcome::kLostFrame);
  };

  switch (in.outcome) {
    case Outcome::kLostGop:
      gop_lost_ = true;
      return Lose(Outcome::kLostGop);
    case Outcome::kLostFrame:
      return lose_p();
    case Outcome::kPartialRecoverable:
      if (!l7) {
        gop_lost_ = true;
        return Lose(Outcome::kLostGop);
      }
      break;
    case Outcome::kClean:
      break;
  }
  if (pos.kind == FrameKind::kP && !reference_) {
    gop_lost_ = true;
    return Lose(Outcome::kLostGop);
  }

  const auto start = std::chrono::steady_clock::now();
  DecodeResult r;
  try {
    r = codec_.Decode(*in.frame, pos.kind == FrameKind::kP ? &*reference_ : nullptr, in.zero_fill);
  } catch (const Error&) {
    if (pos.kind == FrameKind::kI) {
      gop_lost_ = true;
      return Lose(Outcome::kLostGop);
    }
    return lose_p();
  }
  if (pos.kind == FrameKind::kI) {
    taint_ = CorruptionMask(r.mask.blocks_x(), r.mask.blocks_y());
  } else if (taint_.block_count() != r.mask.block_count()) {
    taint_ = r.mask;
  } else {
    taint_.MergeFrom(r.mask);
  }
  reference_ = r.plane;
  DecodeOutput out;
  out.outcome = in.outcome;
  out.displayable = true;
  out.plane = std::move(r.plane);
  out.taint = taint_;
  out.decode_ms = ElapsedMs(start);
  return out;
}

CorruptionMask ResampleMask(const CorruptionMask& mask, int from_block, int to_block, int width,
                            int height) {
  CorruptionMask out = CorruptionMask::ForPlane(width, height, to_block);
  if (from_block == to_block && out.block_count() == mask.block_count()) return mask;
  for (int ty = 0; ty < out.blocks_y(); ++ty) {
    for (int tx = 0; tx < out.blocks_x(); ++tx) {
      const int x0 = tx * to_block, x1 = std::min((tx + 1) * to_block, width) - 1;
      const int y0 = ty * to_block, y1 = std::min((ty + 1) * to_block, height) - 1;
      bool hit = false;
      for (int sy = y0 / from_block; sy <= y1 / from_block && !hit; ++sy) {
        for (int sx = x0 / from_block; sx <= x1 / from_block && !hit; ++sx) {
          hit = sx < mask.blocks_x() && sy < mask.blocks_y() && mask.at(sx, sy);
        }
      }
      out.set(tx, ty, hit);
    }
  }
  return out;
}

Playback::Tick Playback::Show(double tick_ms, const Plane* rgb, const Plane* depth) {
  if (rgb != nullptr && depth != nullptr) {
    rgb_ = *rgb;
    depth_ = *depth;
    has_shown_ = true;
    if (open_) {
      log_.push_back(*open_);
      open_.reset();
    }
    return {true};
  }
  if (!open_) open_ = FreezeEvent{tick_ms, 0.0};
  open_->duration_ms += interval_ms_;
  return {false};
}

void Playback::Finish() {
  if (open_) {
    log_.push_back(*open_);
    open_.reset();
  }
}

std::string OutcomeLogLine(const FrameRecord& r) {
  nlohmann::ordered_json j;
  j["frame_id"] = r.frame_id;
  j["modality"] = ModalityName(r.modality);
  j["outcome"] = OutcomeName(r.outcome);
  j["decode_ms"] = std::round(r.decode_ms * 1000.0) / 1000.0;
  j["recover_ms"] = std::round(r.recover_ms * 1000.0) / 1000.0;
  j["deadline_miss"] = r.deadline_miss;
  return j.dump();
}

Receiver::Receiver(const ReceiverConfig& cfg, PlaneCodec& rgb_codec, PlaneCodec& depth_codec,
                   RecoveryBackend* backend)
    : cfg_(cfg),
      clock_(cfg.gop.fps),
      assembler_(cfg.payload),
      decoders_{ModalityDecoder(Modality::kRgb, rgb_codec, cfg.mode, cfg.gop),
                ModalityDecoder(Modality::kDepth, depth_codec, cfg.mode, cfg.gop)},
      rings_{ReferenceRing(cfg.reference_frames), ReferenceRing(cfg.reference_frames)},
      backend_(backend),
      playback_(clock_.interval_ms()) {}

FrameAssembler::IngestResult Receiver::OnPacket(const DescPacket& p, double now_ms) {
  return assembler_.Ingest(p, now_ms);
}

std::optional<double> Receiver::FrameZeroCompleteTime() const {
  double t = 0.0;
  for (Modality m : kModalities) {
    const ShardBuffer* b = assembler_.Find(0, m);
    if (b == nullptr || !b->all_received_ms) return std::nullopt;
    t = std::max(t, *b->all_received_ms);
  }
  return t;
}

bool Receiver::FrameZeroComplete() const { return FrameZeroCompleteTime().has_value(); }

Receiver::DecodedFrame Receiver::DecodeFrame(uint32_t frame_id) {
  if (frame_id != next_frame_) {
    throw Error(ErrorCode::kPrecondition, "frames must be processed in order");
  }
  ++next_frame_;
  const GopPosition pos = GetGopPosition(frame_id, cfg_.gop);
  const double interval = clock_.interval_ms();
  const double deadline = clock_.DeadlineFor(frame_id);
  DecodedFrame result;
  result.frame_id = frame_id;
  result.tick_ms = deadline + interval;
  auto& shown = result.planes;
  auto& ok = result.ok;
  std::array<std::optional<double>, 2> complete;

  for (Modality m : kModalities) {
    const int mi = static_cast<int>(m);
    FrameRecord& rec = result.records[mi];
    rec.frame_id = frame_id;
    rec.modality = m;
    rec.kind = pos.kind;
    rec.display_ms = result.tick_ms;

    const auto buf = assembler_.Take(frame_id, m);
    if (buf && buf->complete_ms) {
      complete[mi] = buf->complete_ms;
      rec.early_complete = *buf->complete_ms < deadline;
    }
    const AssembledFrame a = ClassifyFrame(buf ? &*buf : nullptr, frame_id, pos.kind, pos.gop_id,
                                           m, cfg_.payload.For(m));
    DecodeOutput d = decoders_[mi].Process(frame_id, a);
    rec.outcome = d.outcome;
    rec.decode_ms = d.decode_ms;
    if (!d.displayable) continue;
    if (cfg_.realtime_budget && d.decode_ms > interval) {
      rec.deadline_miss = true;
      rec.outcome = Outcome::kLostFrame;
      ++deadline_misses_;
      continue;
    }
    shown[mi] = std::move(d.plane);
    if (backend_ != nullptr && ModeUsesRecovery(cfg_.mode) && d.taint.Any()) {
      RecoveryRequest req;
      req.frame_id = frame_id;
      req.modality = m;
      req.plane = shown[mi];
      req.mask = ResampleMask(d.taint, cfg_.codec_block, kRecoveryBlock, req.plane.width,
                              req.plane.height);
      req.references = rings_[mi].Snapshot();
      const double budget = std::max(1.0, interval - (cfg_.realtime_budget ? d.decode_ms : 0.0));
      RecoveryResponse resp = backend_->Recover(req, budget);
      rec.recover_ms = resp.latency_ms;
      if (cfg_.realtime_budget && d.decode_ms + resp.latency_ms > interval) {
        // Late recovery: show the corrupted decode rather than freezing.
        rec.deadline_miss = true;
        ++deadline_misses_;
      } else if (resp.status != RecoveryStatus::kPassthrough) {
        shown[mi] = std::move(resp.plane);
        rec.recovered = true;
      }
    }
    rings_[mi].Push(shown[mi]);
    ok[mi] = true;
  }

  if (complete[0] && complete[1]) result.skew_ms = std::abs(*complete[0] - *complete[1]);
  return result;
}

Receiver::FrameResult Receiver::DisplayFrame(DecodedFrame&& d) {
  FrameResult result;
  result.records = d.records;
  result.tick_ms = d.tick_ms;
  result.skew_ms = d.skew_ms;
  result.displayed = playback_.Show(d.tick_ms, d.ok[0] ? &d.planes[0] : nullptr,
                                    d.ok[1] ? &d.planes[1] : nullptr)
                         .displayed;
  for (auto& rec : result.records) rec.displayed = result.displayed;
  return result;
}

}  // namespace volstream
