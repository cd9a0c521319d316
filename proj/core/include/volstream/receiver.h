#ifndef VOLSTREAM_RECEIVER_H_
#define VOLSTREAM_RECEIVER_H_

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "volstream/codec.h"
#include "volstream/fec.h"
#include "volstream/outcome.h"
#include "volstream/packet.h"
#include "volstream/recovery.h"

namespace volstream {

// Decode deadlines anchored at the complete arrival of frame 0:
// deadline(i) = t0 + i * 1000 / fps.
class FrameClock {
 public:
  explicit FrameClock(double fps);

  void SetAnchor(double t0_ms);  // once only; kPrecondition otherwise
  bool anchored() const { return t0_.has_value(); }
  double t0() const;
  double DeadlineFor(uint32_t frame_index) const;  // kPrecondition before anchoring
  double DisplayTickFor(uint32_t frame_index) const { return DeadlineFor(frame_index) + interval_ms(); }
  double interval_ms() const { return 1000.0 / fps_; }
  double fps() const { return fps_; }

 private:
  double fps_;
  std::optional<double> t0_;
};

// Shards received so far for one (frame, modality).
struct ShardBuffer {
  FrameKind kind = FrameKind::kI;
  uint32_t gop_id = 0;
  int n_data = 0;
  int n_parity = 0;
  uint32_t encoded_len = 0;
  std::vector<Bytes> shards;
  std::vector<bool> present;
  int received = 0;
  double first_packet_ms = 0.0;
  std::optional<double> complete_ms;      // decodable (RS may still be waiting on parity)
  std::optional<double> all_received_ms;  // every distinct shard present

  // P-frames without parity use the header-split layout.
  bool header_split() const { return kind == FrameKind::kP && n_parity == 0; }
  bool Complete() const;
};

class FrameAssembler {
 public:
  explicit FrameAssembler(PayloadLimits limits = {}) : limits_(limits) {}

  struct IngestResult {
    bool accepted = false;
    bool completed_now = false;  // this packet made the frame complete
  };

  // Duplicates are ignored; packets for finalized frames are discarded.
  IngestResult Ingest(const DescPacket& p, double now_ms);
  const ShardBuffer* Find(uint32_t frame_id, Modality m) const;
  // Removes the buffer and marks every frame <= frame_id of |m| finalized.
  std::optional<ShardBuffer> Take(uint32_t frame_id, Modality m);

  uint64_t duplicates() const { return duplicates_; }
  uint64_t late_discards() const { return late_; }
  uint64_t inconsistent() const { return inconsistent_; }

 private:
  static uint64_t Key(uint32_t frame_id, Modality m) {
    return (static_cast<uint64_t>(frame_id) << 1) | static_cast<uint64_t>(m);
  }

  PayloadLimits limits_;
  std::map<uint64_t, ShardBuffer> buffers_;
  std::array<int64_t, 2> finalized_through_{-1, -1};
  uint64_t duplicates_ = 0;
  uint64_t late_ = 0;
  uint64_t inconsistent_ = 0;
};

// Result of applying the loss rules to whatever arrived by the deadline.
struct AssembledFrame {
  Outcome outcome = Outcome::kLostFrame;
  std::optional<EncodedFrame> frame;  // set for kClean and kPartialRecoverable
  std::vector<ByteRange> zero_fill;   // payload offsets replaced by zeros
};

// |buffer| may be null (nothing arrived). I-frames are clean when RS can
// rebuild them and LostGop otherwise. P-frames are clean when complete,
// partial when the whole header arrived, and lost otherwise.
AssembledFrame ClassifyFrame(const ShardBuffer* buffer, uint32_t frame_id, FrameKind kind,
                             uint32_t gop_id, Modality m, size_t payload_len);

struct DecodeOutput {
  Outcome outcome = Outcome::kClean;
  bool displayable = false;
  Plane plane;           // decoder output when displayable
  CorruptionMask taint;  // codec-block grid; accumulated within the GoP
  double decode_ms = 0.0;
};

// Per-modality decode stage. Keeps the decoder reference and the GoP state.
// In modes without application-layer recovery any damaged P-frame ends the
// GoP; otherwise damaged blocks accumulate in the taint mask until the next
// I-frame.
class ModalityDecoder {
 public:
  ModalityDecoder(Modality m, PlaneCodec& codec, ProtectionMode mode, GopSpec gop);

  DecodeOutput Process(uint32_t frame_id, const AssembledFrame& in);

 private:
  DecodeOutput Lose(Outcome o);

  Modality modality_;
  PlaneCodec& codec_;
  ProtectionMode mode_;
  GopSpec gop_;
  std::optional<Plane> reference_;
  uint32_t gop_id_ = UINT32_MAX;
  bool gop_lost_ = false;
  CorruptionMask taint_;
};

// Re-expresses a mask on a different block grid; a target block is flagged
// when it overlaps any flagged source block.
CorruptionMask ResampleMask(const CorruptionMask& mask, int from_block, int to_block, int width,
                            int height);

// Display clock. Shows a pair only when both modalities are displayable;
// otherwise repeats the last pair and accounts a freeze.
class Playback {
 public:
  explicit Playback(double interval_ms) : interval_ms_(interval_ms) {}

  struct Tick {
    bool displayed = false;
  };

  Tick Show(double tick_ms, const Plane* rgb, const Plane* depth);
  void Finish();

  const std::vector<FreezeEvent>& freeze_log() const { return log_; }
  const Plane& shown(Modality m) const { return m == Modality::kRgb ? rgb_ : depth_; }
  bool has_shown() const { return has_shown_; }

 private:
  double interval_ms_;
  Plane rgb_;
  Plane depth_;
  bool has_shown_ = false;
  std::optional<FreezeEvent> open_;
  std::vector<FreezeEvent> log_;
};

struct FrameRecord {
  uint32_t frame_id = 0;
  Modality modality = Modality::kRgb;
  FrameKind kind = FrameKind::kI;
  Outcome outcome = Outcome::kClean;
  bool recovered = false;  // recovery rewrote at least one block
  bool displayed = false;  // false when the tick repeated an older frame
  bool deadline_miss = false;
  bool early_complete = false;
  double decode_ms = 0.0;
  double recover_ms = 0.0;
  double display_ms = 0.0;
  double ssim = 0.0;
  double psnr = 0.0;
};

// One line of the per-frame outcome log.
std::string OutcomeLogLine(const FrameRecord& r);

struct ReceiverConfig {
  GopSpec gop;
  ProtectionMode mode = ProtectionMode::kRevo;
  PayloadLimits payload;
  int codec_block = 16;
  int reference_frames = kDefaultReferenceFrames;
  // Enforce the one-interval decode+recovery budget against wall-clock time.
  bool realtime_budget = false;
};

// Assembly, decode, recovery and display for both modalities. Time is
// supplied by the caller so the same object serves simulation and live runs.
class Receiver {
 public:
  Receiver(const ReceiverConfig& cfg, PlaneCodec& rgb_codec, PlaneCodec& depth_codec,
           RecoveryBackend* backend);

  FrameAssembler::IngestResult OnPacket(const DescPacket& p, double now_ms);
  // True once every shard of frame 0 arrived in both modalities; the session
  // anchor is the later of the two arrival times.
  bool FrameZeroComplete() const;
  std::optional<double> FrameZeroCompleteTime() const;

  FrameClock& clock() { return clock_; }
  const FrameClock& clock() const { return clock_; }

  struct FrameResult {
    std::array<FrameRecord, 2> records;
    bool displayed = false;
    double tick_ms = 0.0;
    std::optional<double> skew_ms;  // |complete(rgb) - complete(depth)|
  };

  // Output of the decode stage, waiting for its display tick.
  struct DecodedFrame {
    uint32_t frame_id = 0;
    double tick_ms = 0.0;
    std::array<FrameRecord, 2> records;
    std::array<Plane, 2> planes;
    std::array<bool, 2> ok{false, false};
    std::optional<double> skew_ms;
  };

  // Finalize, decode and recovery. Frames must be decoded in order from 0.
  DecodedFrame DecodeFrame(uint32_t frame_id);
  // Display tick; the only writer of the playback state.
  FrameResult DisplayFrame(DecodedFrame&& decoded);
  FrameResult ProcessFrame(uint32_t frame_id) { return DisplayFrame(DecodeFrame(frame_id)); }
  void Finish() { playback_.Finish(); }

  const Playback& playback() const { return playback_; }
  const FrameAssembler& assembler() const { return assembler_; }
  uint64_t deadline_misses() const { return deadline_misses_; }

 private:
  ReceiverConfig cfg_;
  FrameClock clock_;
  FrameAssembler assembler_;
  std::array<ModalityDecoder, 2> decoders_;
  std::array<ReferenceRing, 2> rings_;
  RecoveryBackend* backend_;
  Playback playback_;
  uint32_t next_frame_ = 0;
  uint64_t deadline_misses_ = 0;
};

}  // namespace volstream

#endif  // VOLSTREAM_RECEIVER_H_
