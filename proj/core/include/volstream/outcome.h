#ifndef VOLSTREAM_OUTCOME_H_
#define VOLSTREAM_OUTCOME_H_

#include <cstdint>
#include <string_view>

namespace volstream {

// Per (frame, modality) delivery outcome at the decode deadline.
enum class Outcome : uint8_t {
  kClean,                // fully received or RS-recoverable
  kPartialRecoverable,   // P-frame decoded with zero-filled body ranges
  kLostFrame,            // P-frame undecodable; freeze for this frame only
  kLostGop,              // I-frame lost (or GoP broken without recovery)
};

std::string_view OutcomeName(Outcome o);
Outcome ParseOutcome(std::string_view name);

inline bool IsNonRecovered(Outcome o) {
  return o == Outcome::kLostFrame || o == Outcome::kLostGop;
}
inline bool IsCorrupted(Outcome o) { return o != Outcome::kClean; }

struct FreezeEvent {
  double start_ms = 0.0;
  double duration_ms = 0.0;
  friend bool operator==(const FreezeEvent&, const FreezeEvent&) = default;
};

}  // namespace volstream

#endif  // VOLSTREAM_OUTCOME_H_
