#ifndef VOLSTREAM_SESSION_INTERNAL_H_
#define VOLSTREAM_SESSION_INTERNAL_H_

#include <array>

#include "volstream/session.h"

namespace volstream {

ReceiverConfig MakeReceiverConfig(const ExperimentConfig& cfg);
SessionReport EmptyReport(const ExperimentConfig& cfg);
// Fills ssim/psnr of both records from what the playback currently shows.
void ScoreRecords(const ExperimentConfig& cfg, const RgbdFrame& truth, const Playback& playback,
                  std::array<FrameRecord, 2>& records);

}  // namespace volstream

#endif  // VOLSTREAM_SESSION_INTERNAL_H_
