#ifndef VOLSTREAM_TESTS_SCRIPTED_STREAM_H_
#define VOLSTREAM_TESTS_SCRIPTED_STREAM_H_

// Encodes a clip into per-frame packet lists and replays a chosen subset
// into a Receiver, frame by frame, with every delivered packet arriving
// half an interval before its deadline.

#include <array>
#include <functional>
#include <vector>

#include "volstream/codec.h"
#include "volstream/fec.h"
#include "volstream/packet.h"
#include "volstream/receiver.h"
#include "volstream/synthetic.h"

namespace volstream::testing {

struct ScriptedStream {
  GopSpec gop{30, 30.0};
  CodecConfig codec;
  ProtectionPolicy policy;
  PayloadLimits payload{256, 128};
  std::vector<RgbdFrame> frames;
  // packets[frame][modality] in send order.
  std::vector<std::array<std::vector<DescPacket>, 2>> packets;
  std::array<std::vector<EncodedFrame>, 2> encoded;
  PacketizeStats stats;

  void Encode() {
    codec.gop = gop;
    ReferenceCodec rc(codec);
    packets.assign(frames.size(), {});
    encoded[0].clear();
    encoded[1].clear();
    std::array<Plane, 2> ref;
    for (uint32_t i = 0; i < frames.size(); ++i) {
      const GopPosition pos = GetGopPosition(i, gop);
      for (Modality m : kModalities) {
        const int mi = static_cast<int>(m);
        EncodeResult er = rc.Encode(pos.kind, frames[i].plane(m), pos.kind == FrameKind::kP ? &ref[mi] : nullptr);
        er.frame.frame_id = i;
        er.frame.gop_id = pos.gop_id;
        er.frame.modality = m;
        ref[mi] = er.reconstruction;
        const ShardPlan plan = PlanProtection(er.frame, policy, payload.For(m));
        packets[i][mi] = Packetize(er.frame, plan, payload.For(m), &stats);
        encoded[mi].push_back(er.frame);
      }
    }
  }

  ReceiverConfig ReceiverCfg() const {
    ReceiverConfig rc;
    rc.gop = gop;
    rc.mode = policy.mode;
    rc.payload = payload;
    rc.codec_block = codec.block;
    return rc;
  }
};

// Translating texture clip; every P-frame touches most blocks.
inline ScriptedStream MakeStream(ProtectionMode mode, int frames = 30, int w = 64, int h = 64,
                                 uint64_t seed = 3) {
  ScriptedStream s;
  s.policy.mode = mode;
  SyntheticOptions o;
  o.width = w;
  o.height = h;
  o.frames = frames;
  o.seed = seed;
  s.frames = TranslatingTextureClip(o);
  s.Encode();
  return s;
}

// (frame, modality, index in send order, packet) -> keep?
using KeepFn = std::function<bool(uint32_t, Modality, size_t, const DescPacket&)>;

struct ReplayResult {
  std::vector<Receiver::FrameResult> frames;
  std::vector<FreezeEvent> freezes;
};

inline ReplayResult Replay(const ScriptedStream& s, const KeepFn& keep,
                           RecoveryBackend* backend = nullptr, double t0 = 100.0) {
  ReferenceCodec rgb(s.codec), depth(s.codec);
  Receiver rx(s.ReceiverCfg(), rgb, depth, backend);
  rx.clock().SetAnchor(t0);
  const double interval = rx.clock().interval_ms();
  ReplayResult out;
  for (uint32_t i = 0; i < s.packets.size(); ++i) {
    const double arrive = rx.clock().DeadlineFor(i) - interval / 2;
    for (Modality m : kModalities) {
      const auto& list = s.packets[i][static_cast<int>(m)];
      for (size_t k = 0; k < list.size(); ++k) {
        if (keep(i, m, k, list[k])) rx.OnPacket(list[k], arrive + 0.001 * static_cast<double>(k));
      }
    }
    out.frames.push_back(rx.ProcessFrame(i));
  }
  rx.Finish();
  out.freezes = rx.playback().freeze_log();
  return out;
}

inline bool KeepAll(uint32_t, Modality, size_t, const DescPacket&) { return true; }

}  // namespace volstream::testing

#endif  // VOLSTREAM_TESTS_SCRIPTED_STREAM_H_
