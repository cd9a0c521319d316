#include "volstream/channel.h"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

namespace volstream {
namespace {

bool Probability(double p) { return p >= 0.0 && p <= 1.0; }

std::string Trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  const auto e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

uint64_t ShardKey(const DescPacket& p) {
  return (static_cast<uint64_t>(p.frame_id) << 17) |
         (static_cast<uint64_t>(p.modality) << 16) | p.shard_index;
}

}  // namespace

std::vector<TraceEntry> ParseTrace(std::string_view text) {
  std::vector<TraceEntry> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = Trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (out.empty() && line.rfind("ts_ms", 0) == 0) continue;
    double v[4];
    std::istringstream fields(line);
    std::string field;
    int n = 0;
    while (std::getline(fields, field, ',')) {
      if (n == 4) {
        n = 5;
        break;
      }
      try {
        size_t used = 0;
        const std::string f = Trim(field);
        v[n] = std::stod(f, &used);
        if (used != f.size()) throw std::invalid_argument(f);
      } catch (const std::exception&) {
        throw Error(ErrorCode::kParse, "trace line " + std::to_string(lineno) + ": bad number");
      }
      ++n;
    }
    if (n != 4) {
      throw Error(ErrorCode::kParse, "trace line " + std::to_string(lineno) + ": expected 4 fields");
    }
    out.push_back({v[0], v[1], v[2], v[3]});
  }
  ValidateTrace(out);
  return out;
}

std::vector<TraceEntry> LoadTrace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open trace " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseTrace(buf.str());
}

void ValidateTrace(const std::vector<TraceEntry>& trace) {
  if (trace.empty()) throw Error(ErrorCode::kEmptyTrace, "trace has no entries");
  for (size_t i = 0; i < trace.size(); ++i) {
    const auto& e = trace[i];
    if (!Probability(e.loss_rate)) {
      throw Error(ErrorCode::kRange, "trace entry " + std::to_string(i) + ": loss_rate outside [0,1]");
    }
    if (!(e.bandwidth_kbps >= 0.0) || !(e.rtt_ms >= 0.0)) {
      throw Error(ErrorCode::kRange, "trace entry " + std::to_string(i) + ": negative field");
    }
    if (i > 0 && std::abs(e.ts_ms - trace[i - 1].ts_ms - kTraceStepMs) > 1e-6) {
      throw Error(ErrorCode::kRange,
                  "trace entry " + std::to_string(i) + ": spacing is not 15 ms");
    }
  }
}

void GeModel::Validate() const {
  if (!Probability(p_gb) || !Probability(p_bg) || !Probability(loss_good) ||
      !Probability(loss_bad)) {
    throw Error(ErrorCode::kConfig, "Gilbert-Elliott probabilities must lie in [0,1]");
  }
}

bool DropRule::Matches(const DescPacket& p, int copy_index) const {
  return (frame_id < 0 || frame_id == static_cast<int64_t>(p.frame_id)) &&
         (modality < 0 || modality == static_cast<int>(p.modality)) &&
         (shard_index < 0 || shard_index == p.shard_index) &&
         (copy < 0 || copy == copy_index);
}

void ChannelConfig::Validate() const {
  if (!(prop_delay_ms >= 0.0)) throw Error(ErrorCode::kConfig, "prop_delay_ms must be >= 0");
  if (!(bandwidth_kbps > 0.0)) throw Error(ErrorCode::kConfig, "bandwidth_kbps must be > 0");
  if (queue_bytes == 0) throw Error(ErrorCode::kConfig, "queue_bytes must be > 0");
  if (const auto* ge = std::get_if<GeSource>(&source)) ge->model.Validate();
  if (const auto* tr = std::get_if<TraceSource>(&source)) ValidateTrace(tr->entries);
}

LinkSimulator::LinkSimulator(ChannelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.Validate();
  uint64_t seed = cfg_.seed;
  if (const auto* ge = std::get_if<GeSource>(&cfg_.source)) seed ^= ge->model.seed * 0x9E3779B97F4A7C15ull;
  rng_.seed(seed);
}

double LinkSimulator::Uniform() {
  return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
}

const TraceEntry* LinkSimulator::EntryAt(double t_ms) const {
  const auto* tr = std::get_if<TraceSource>(&cfg_.source);
  if (tr == nullptr) return nullptr;
  const auto n = static_cast<int64_t>(tr->entries.size());
  auto idx = static_cast<int64_t>(std::floor(std::max(0.0, t_ms) / kTraceStepMs));
  return &tr->entries[static_cast<size_t>(idx % n)];
}

double LinkSimulator::BandwidthAt(double t_ms) const {
  const TraceEntry* e = EntryAt(t_ms);
  return e ? e->bandwidth_kbps : cfg_.bandwidth_kbps;
}

double LinkSimulator::LossRateAt(double t_ms) const {
  const TraceEntry* e = EntryAt(t_ms);
  return e ? e->loss_rate : 0.0;
}

int LinkSimulator::CopyIndex(const DescPacket& p) {
  const uint64_t key = ShardKey(p);
  const int copy = copies_[key]++;
  // Forget frames far behind the one being sent.
  if (p.frame_id > 256) {
    const uint64_t floor_key = static_cast<uint64_t>(p.frame_id - 256) << 17;
    copies_.erase(copies_.begin(), copies_.lower_bound(floor_key));
  }
  return copy;
}

Delivery LinkSimulator::Send(const DescPacket& packet, double send_ts_ms, bool protect) {
  if (send_ts_ms + 1e-9 < last_send_ms_) {
    throw Error(ErrorCode::kPrecondition, "packets must be offered in send-time order");
  }
  last_send_ms_ = send_ts_ms;
  while (!in_flight_.empty() && in_flight_.front().first <= send_ts_ms) {
    queued_bytes_ -= in_flight_.front().second;
    in_flight_.pop_front();
  }

  Delivery d;
  d.send_ts_ms = send_ts_ms;
  d.packet = packet;
  const size_t bytes = packet.wire_size();
  const int copy = CopyIndex(packet);
  bool forced = false;
  for (const auto& rule : cfg_.forced_drops) forced |= rule.Matches(packet, copy);

  // Draws happen unconditionally so outcomes of later packets do not depend
  // on whether this one was protected or overflowed.
  double loss_p = 0.0;
  if (auto* ge = std::get_if<GeSource>(&cfg_.source)) {
    const double u = Uniform();
    ge_bad_ = ge_bad_ ? !(u < ge->model.p_bg) : (u < ge->model.p_gb);
    loss_p = ge_bad_ ? ge->model.loss_bad : ge->model.loss_good;
  }
  const double u_loss = Uniform();

  if (!protect && queued_bytes_ + bytes > cfg_.queue_bytes) {
    d.reason = DropReason::kQueueOverflow;
    return d;
  }

  double start = std::max(send_ts_ms, link_free_ms_);
  double bw = BandwidthAt(start);
  if (const auto* tr = std::get_if<TraceSource>(&cfg_.source)) {
    for (size_t i = 0; bw <= 0.0 && i < tr->entries.size(); ++i) {
      start = (std::floor(start / kTraceStepMs) + 1.0) * kTraceStepMs;
      bw = BandwidthAt(start);
    }
  }
  if (bw <= 0.0) {
    d.reason = DropReason::kQueueOverflow;
    return d;
  }
  const double depart = start + static_cast<double>(bytes) * 8.0 / bw;
  link_free_ms_ = depart;
  in_flight_.emplace_back(depart, bytes);
  queued_bytes_ += bytes;

  if (std::holds_alternative<TraceSource>(cfg_.source)) loss_p = LossRateAt(depart);
  if (!protect && u_loss < loss_p) {
    d.reason = DropReason::kRandomLoss;
    return d;
  }
  if (!protect && forced) {
    d.reason = DropReason::kForced;
    return d;
  }
  d.arrival_ts_ms = depart + cfg_.prop_delay_ms;
  return d;
}

std::vector<Delivery> Transmit(const PacketSchedule& schedule, const ChannelConfig& cfg) {
  LinkSimulator link(cfg);
  std::vector<Delivery> out;
  out.reserve(schedule.size());
  for (const auto& s : schedule) out.push_back(link.Send(s.packet, s.send_offset_ms));
  return out;
}

}  // namespace volstream
