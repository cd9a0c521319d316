#ifndef VOLSTREAM_STREAM_SENDER_H_
#define VOLSTREAM_STREAM_SENDER_H_

#include <array>
#include <optional>

#include "volstream/codec.h"
#include "volstream/config.h"
#include "volstream/fec.h"
#include "volstream/packet.h"

namespace volstream {

// Encoder side of a session: encode both modalities, plan protection,
// packetize and interleave one frame at a time.
class StreamSender {
 public:
  StreamSender(const ExperimentConfig& cfg, PlaneCodec& rgb, PlaneCodec& depth)
      : cfg_(cfg), policy_(cfg.protection), codecs_{&rgb, &depth} {}

  PacketSchedule Prepare(const RgbdFrame& frame, uint32_t frame_id) {
    const GopPosition pos = GetGopPosition(frame_id, cfg_.gop);
    if (pos.kind == FrameKind::kI && frame_id > 0 &&
        policy_.mode == ProtectionMode::kReactive) {
      const double observed =
          gop_sent_ ? static_cast<double>(gop_lost_) / static_cast<double>(gop_sent_) : 0.0;
      policy_.reactive_ratio = ReactiveParityRatio(observed);
      gop_sent_ = gop_lost_ = 0;
    }
    std::array<std::vector<DescPacket>, 2> packets;
    for (Modality m : kModalities) {
      const int mi = static_cast<int>(m);
      const Plane* ref = pos.kind == FrameKind::kP ? &*references_[mi] : nullptr;
      EncodeResult er = codecs_[mi]->Encode(pos.kind, frame.plane(m), ref);
      er.frame.frame_id = frame_id;
      er.frame.gop_id = pos.gop_id;
      er.frame.modality = m;
      references_[mi] = std::move(er.reconstruction);
      const size_t payload = cfg_.payload.For(m);
      const ShardPlan plan = PlanProtection(er.frame, policy_, payload);
      packets[mi] = Packetize(er.frame, plan, payload, &stats_);
    }
    return Interleave(packets[0], packets[1], cfg_.gop.frame_interval_ms());
  }

  // Loss feedback for the reactive mode.
  void Observe(size_t sent, size_t lost) {
    gop_sent_ += sent;
    gop_lost_ += lost;
  }

  const PacketizeStats& stats() const { return stats_; }
  double reactive_ratio() const { return policy_.reactive_ratio; }

 private:
  const ExperimentConfig& cfg_;
  ProtectionPolicy policy_;
  std::array<PlaneCodec*, 2> codecs_;
  std::array<std::optional<Plane>, 2> references_;
  PacketizeStats stats_;
  size_t gop_sent_ = 0;
  size_t gop_lost_ = 0;
};

}  // namespace volstream

#endif  // VOLSTREAM_STREAM_SENDER_H_
