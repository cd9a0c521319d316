#ifndef VOLSTREAM_CHANNEL_H_
#define VOLSTREAM_CHANNEL_H_

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <variant>
#include <vector>

#include "volstream/packet.h"

namespace volstream {

inline constexpr double kTraceStepMs = 15.0;

struct TraceEntry {
  double ts_ms = 0.0;
  double bandwidth_kbps = 0.0;
  double rtt_ms = 0.0;
  double loss_rate = 0.0;
  friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

// CSV lines "ts_ms,bandwidth_kbps,rtt_ms,loss_rate". Blank lines, '#'
// comments, and a leading header row starting with "ts_ms" are skipped.
std::vector<TraceEntry> LoadTrace(const std::filesystem::path& path);
std::vector<TraceEntry> ParseTrace(std::string_view text);
void ValidateTrace(const std::vector<TraceEntry>& trace);

struct GeModel {
  double p_gb = 0.01;  // good -> bad, per packet
  double p_bg = 0.3;   // bad -> good, per packet
  double loss_good = 0.0;
  double loss_bad = 1.0;
  uint64_t seed = 1;

  void Validate() const;
  double StationaryBad() const { return p_gb + p_bg > 0 ? p_gb / (p_gb + p_bg) : 0.0; }
  double StationaryLoss() const {
    return StationaryBad() * loss_bad + (1.0 - StationaryBad()) * loss_good;
  }
};

struct PerfectSource {};
struct TraceSource {
  std::vector<TraceEntry> entries;
};
struct GeSource {
  GeModel model;
};

using ChannelSource = std::variant<PerfectSource, TraceSource, GeSource>;

// Deterministic drop applied on top of the source. Negative fields match
// anything; copy counts repeated transmissions of the same shard.
struct DropRule {
  int64_t frame_id = -1;
  int modality = -1;  // 0 rgb, 1 depth
  int shard_index = -1;
  int copy = -1;

  bool Matches(const DescPacket& p, int copy_index) const;
};

struct ChannelConfig {
  double prop_delay_ms = 40.0;
  size_t queue_bytes = 1 << 20;
  // Link rate for perfect and Gilbert-Elliott sources; traces carry their own.
  double bandwidth_kbps = 1'000'000.0;
  ChannelSource source = PerfectSource{};
  std::vector<DropRule> forced_drops;
  uint64_t seed = 1;

  void Validate() const;
};

enum class DropReason : uint8_t { kNone, kRandomLoss, kQueueOverflow, kForced };

struct Delivery {
  double send_ts_ms = 0.0;
  std::optional<double> arrival_ts_ms;  // nullopt when dropped
  DropReason reason = DropReason::kNone;
  DescPacket packet;

  bool delivered() const { return arrival_ts_ms.has_value(); }
};

// Single bottleneck link: FIFO queue served at the current bandwidth, loss
// applied as packets leave the queue, then a fixed propagation delay.
// Packets must be offered in non-decreasing send time.
class LinkSimulator {
 public:
  explicit LinkSimulator(ChannelConfig cfg);

  // |protect| exempts the packet from random loss and overflow (used for the
  // session's first frame); the RNG advances identically either way.
  Delivery Send(const DescPacket& packet, double send_ts_ms, bool protect = false);

  const ChannelConfig& config() const { return cfg_; }

 private:
  double BandwidthAt(double t_ms) const;
  double LossRateAt(double t_ms) const;
  const TraceEntry* EntryAt(double t_ms) const;
  double Uniform();
  int CopyIndex(const DescPacket& p);

  ChannelConfig cfg_;
  std::mt19937_64 rng_;
  bool ge_bad_ = false;
  double link_free_ms_ = 0.0;
  std::deque<std::pair<double, size_t>> in_flight_;  // (departure, bytes)
  size_t queued_bytes_ = 0;
  double last_send_ms_ = 0.0;
  std::map<uint64_t, int> copies_;  // (frame, modality, shard) -> times seen
};

// Runs a whole absolute-time schedule through a fresh simulator.
std::vector<Delivery> Transmit(const PacketSchedule& schedule, const ChannelConfig& cfg);

}  // namespace volstream

#endif  // VOLSTREAM_CHANNEL_H_
