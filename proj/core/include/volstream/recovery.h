#ifndef VOLSTREAM_RECOVERY_H_
#define VOLSTREAM_RECOVERY_H_

#include <cstdint>
#include <deque>
#include <string_view>
#include <vector>

#include "volstream/codec.h"
#include "volstream/frame.h"

namespace volstream {

inline constexpr int kDefaultReferenceFrames = 5;
inline constexpr int kRecoveryBlock = 16;

struct RecoveryRequest {
  uint32_t frame_id = 0;
  Modality modality = Modality::kRgb;
  Plane plane;           // decoded, possibly corrupted
  CorruptionMask mask;   // kRecoveryBlock-pixel blocks
  std::vector<Plane> references;  // most recent last

  // Throws kDimensionMismatch when mask or references disagree with plane.
  void Validate() const;
};

enum class RecoveryStatus : uint8_t {
  kOk,
  kPassthrough,      // nothing to reference; input returned unchanged
  kTimeoutFallback,  // remote backend missed its budget; baseline used
  kFaultFallback,    // remote backend broke protocol; baseline used
};

std::string_view RecoveryStatusName(RecoveryStatus s);

struct RecoveryResponse {
  Plane plane;
  double latency_ms = 0.0;
  RecoveryStatus status = RecoveryStatus::kOk;
};

// Holds the k most recent displayable planes of one modality.
class ReferenceRing {
 public:
  explicit ReferenceRing(int k = kDefaultReferenceFrames);

  void Push(const Plane& plane);
  void Reset() { planes_.clear(); }
  size_t size() const { return planes_.size(); }
  bool empty() const { return planes_.empty(); }
  int capacity() const { return k_; }
  const std::deque<Plane>& planes() const { return planes_; }
  std::vector<Plane> Snapshot() const { return {planes_.begin(), planes_.end()}; }

 private:
  int k_;
  std::deque<Plane> planes_;
};

class RecoveryBackend {
 public:
  virtual ~RecoveryBackend() = default;

  virtual std::string_view name() const = 0;
  // |budget_ms| <= 0 means unbounded. Pixels outside the mask are returned
  // unchanged by every implementation.
  virtual RecoveryResponse Recover(const RecoveryRequest& req, double budget_ms) = 0;
};

// Block-matching temporal concealment. Each masked block is replaced by the
// reference block at the offset (within +-8 px) whose surroundings best match
// the block's intact one-pixel neighbour ring under SAD.
RecoveryResponse RecoverBaselineRgb(const RecoveryRequest& req);
// Block matching, then a 3x3 median over masked pixels near the mask edge and
// a clamp that keeps cross-boundary steps within the interior P95 gradient.
RecoveryResponse RecoverBaselineDepth(const RecoveryRequest& req);
RecoveryResponse RecoverBaseline(const RecoveryRequest& req);

class BaselineBackend final : public RecoveryBackend {
 public:
  std::string_view name() const override { return "baseline"; }
  RecoveryResponse Recover(const RecoveryRequest& req, double budget_ms) override;
};

// Copies masked blocks of |candidate| over |original|.
Plane MergeMasked(const Plane& original, const Plane& candidate, const CorruptionMask& mask,
                  int block = kRecoveryBlock);

// Largest absolute step between 4-adjacent pixels on opposite sides of the
// mask boundary (single-channel planes). 0 without a boundary.
int MaxBoundaryStep(const Plane& plane, const CorruptionMask& mask, int block = kRecoveryBlock);
// Nearest-rank 95th percentile of absolute steps between 4-adjacent unmasked
// pixels. 255 when there are no such pairs.
int InteriorGradientP95(const Plane& plane, const CorruptionMask& mask,
                        int block = kRecoveryBlock);

}  // namespace volstream

#endif  // VOLSTREAM_RECOVERY_H_
