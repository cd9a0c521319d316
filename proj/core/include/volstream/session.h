#ifndef VOLSTREAM_SESSION_H_
#define VOLSTREAM_SESSION_H_

#include <functional>
#include <memory>
#include <vector>

#include "volstream/config.h"
#include "volstream/frame.h"
#include "volstream/receiver.h"
#include "volstream/recovery.h"
#include "volstream/report.h"

namespace volstream {

// Observation points for tests and tools. All times are simulated ms.
struct SessionHooks {
  std::function<void(const DescPacket&, double arrival_ms,
                     const FrameAssembler::IngestResult&)>
      on_packet;
  // Called right before frame |i| is finalized.
  std::function<void(uint32_t frame_id, double now_ms)> on_finalize;
  std::function<void(uint32_t frame_id, const Receiver::FrameResult&)> on_frame;
  // Ground truth and displayed planes after each display tick.
  std::function<void(uint32_t frame_id, const RgbdFrame& truth, const Plane& rgb,
                     const Plane& depth)>
      on_display;
};

// Loads the configured clip or generates the synthetic one. For clip input
// the descriptor's fps replaces cfg.gop.fps.
std::vector<RgbdFrame> LoadInput(ExperimentConfig& cfg);

std::unique_ptr<PlaneCodec> MakeCodec(const ExperimentConfig& cfg, Modality m, int width,
                                      int height);
// Null for BackendKind::kNone. Remote backends handshake here.
std::unique_ptr<RecoveryBackend> MakeBackend(const BackendConfig& cfg);
// Loads the trace (if any) and applies the session seed.
ChannelConfig EffectiveChannel(const ExperimentConfig& cfg);

// Trace-driven run: sender, simulated link and receiver share one simulated
// clock. Deterministic for a given config.
SessionReport RunSimulated(const ExperimentConfig& cfg, const std::vector<RgbdFrame>& frames,
                           RecoveryBackend* backend, const SessionHooks* hooks = nullptr);

// Sender and/or receiver over UDP in wall-clock time (udp.role).
SessionReport RunLive(const ExperimentConfig& cfg, const std::vector<RgbdFrame>& frames,
                      RecoveryBackend* backend);

// Full run: input, backend, transport, report and outcome log files.
SessionReport RunExperiment(ExperimentConfig cfg);

// One run per mode on the same input, seed and channel.
std::vector<SessionReport> RunSweep(ExperimentConfig cfg, const std::vector<ProtectionMode>& modes);

}  // namespace volstream

#endif  // VOLSTREAM_SESSION_H_
