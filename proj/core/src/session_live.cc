#include <atomic>
#include <chrono>
#include <cstring>
#include <mutex>
#include <thread>

#include "bounded_queue.h"
#include "session_internal.h"
#include "stream_sender.h"
#include "volstream/session.h"
#include "volstream/udp.h"

namespace volstream {
namespace {

using Clock = std::chrono::steady_clock;

constexpr uint8_t kAck[] = {'V', 'S', 'A', 'C', 'K', '0'};
constexpr double kFrameZeroRetryMs = 200.0;
constexpr int kFrameZeroAttempts = 50;
constexpr double kAnchorTimeoutMs = 15000.0;
constexpr size_t kIngestQueue = 1 << 16;
constexpr size_t kDisplayQueue = 4;

class WallClock {
 public:
  WallClock() : epoch_(Clock::now()) {}
  double NowMs() const {
    return std::chrono::duration<double, std::milli>(Clock::now() - epoch_).count();
  }
  Clock::time_point At(double ms) const {
    return epoch_ + std::chrono::duration_cast<Clock::duration>(
                        std::chrono::duration<double, std::milli>(ms));
  }

 private:
  Clock::time_point epoch_;
};

bool IsAck(const Bytes& b) {
  return b.size() == sizeof(kAck) && std::memcmp(b.data(), kAck, sizeof(kAck)) == 0;
}

struct SendResult {
  PacketizeStats stats;
  size_t sent = 0;
  size_t dropped = 0;
  bool acked = false;
};

// Paces frame i over [i*interval, (i+1)*interval) and repeats frame 0 until
// the receiver acknowledges it.
SendResult SendStream(const ExperimentConfig& cfg, const std::vector<RgbdFrame>& frames,
                      UdpSocket& sock, const Endpoint& peer, const WallClock& clock,
                      const std::atomic<bool>& stop) {
  SendResult out;
  const int w = frames[0].width();
  const int h = frames[0].height();
  auto rgb = MakeCodec(cfg, Modality::kRgb, w, h);
  auto depth = MakeCodec(cfg, Modality::kDepth, w, h);
  StreamSender sender(cfg, *rgb, *depth);
  ImpairedSender impaired(sock, cfg.udp.drop_probability, cfg.seed);
  const double interval = cfg.gop.frame_interval_ms();
  std::vector<Bytes> frame_zero;
  double last_f0 = 0.0;
  int attempts = 0;

  auto poll_ack = [&] {
    while (!out.acked) {
      auto d = sock.Receive(0);
      if (!d) break;
      if (IsAck(*d)) out.acked = true;
    }
  };
  auto resend_f0 = [&] {
    for (const auto& b : frame_zero) sock.SendTo(b, peer);
    last_f0 = clock.NowMs();
    ++attempts;
  };

  for (uint32_t i = 0; i < frames.size() && !stop; ++i) {
    const double base = static_cast<double>(i) * interval;
    PacketSchedule sched = sender.Prepare(frames[i], i);
    if (i == 0 && !sched.empty()) {
      const double shift = interval / static_cast<double>(sched.size());
      for (auto& sp : sched) sp.send_offset_ms += shift;
    }
    size_t dropped = 0;
    for (const auto& sp : sched) {
      std::this_thread::sleep_until(clock.At(base + sp.send_offset_ms));
      const Bytes wire = SerializePacket(sp.packet);
      if (i == 0) {
        sock.SendTo(wire, peer);
        frame_zero.push_back(wire);
      } else if (!impaired.Send(wire, peer)) {
        ++dropped;
      }
    }
    if (i == 0) {
      last_f0 = clock.NowMs();
      attempts = 1;
    }
    sender.Observe(sched.size(), dropped);
    out.sent += sched.size();
    out.dropped += dropped;
    poll_ack();
    if (!out.acked && attempts < kFrameZeroAttempts && clock.NowMs() - last_f0 >= kFrameZeroRetryMs) {
      resend_f0();
    }
  }
  while (!out.acked && !stop && attempts < kFrameZeroAttempts) {
    if (auto d = sock.Receive(static_cast<int>(kFrameZeroRetryMs)); d && IsAck(*d)) {
      out.acked = true;
    } else if (!out.acked) {
      resend_f0();
    }
  }
  out.stats = sender.stats();
  return out;
}

struct Arrived {
  DescPacket packet;
  double t_ms = 0.0;
  Endpoint from;
};

struct ReceiveResult {
  std::vector<FrameRecord> records;
  std::vector<FreezeEvent> freezes;
  uint64_t late = 0;
  uint64_t queue_drops = 0;
  uint64_t malformed = 0;
};

// Three stages: ingest (socket to queue), decode+recover (deadline driven)
// and display (tick driven, sole owner of the playback state).
ReceiveResult ReceiveStream(const ExperimentConfig& cfg, const std::vector<RgbdFrame>& frames,
                            UdpSocket& sock, RecoveryBackend* backend, const WallClock& clock,
                            std::atomic<bool>& stop) {
  ReceiveResult out;
  const int w = frames[0].width();
  const int h = frames[0].height();
  auto rgb = MakeCodec(cfg, Modality::kRgb, w, h);
  auto depth = MakeCodec(cfg, Modality::kDepth, w, h);
  Receiver rx(MakeReceiverConfig(cfg), *rgb, *depth, backend);
  const auto n = static_cast<uint32_t>(frames.size());

  BoundedQueue<Arrived> ingest_q(kIngestQueue);
  BoundedQueue<Receiver::DecodedFrame> display_q(kDisplayQueue);
  std::atomic<uint64_t> queue_drops{0}, malformed{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto fail = [&](std::exception_ptr e) {
    std::lock_guard<std::mutex> lock(failure_mu);
    if (!failure) failure = e;
    stop = true;
    ingest_q.Close();
    display_q.Close();
  };

  std::thread ingest([&] {
    try {
      while (!stop) {
        Endpoint from;
        auto d = sock.Receive(20, &from);
        if (!d) continue;
        const double t = clock.NowMs();
        try {
          if (!ingest_q.TryPush({ParsePacket(*d), t, from})) ++queue_drops;
        } catch (const Error&) {
          ++malformed;
        }
      }
    } catch (...) {
      fail(std::current_exception());
    }
  });

  std::thread decode([&] {
    try {
      std::optional<Arrived> held;
      std::optional<Endpoint> sender;
      uint32_t next = 0;
      auto ingest_one = [&](const Arrived& a) {
        sender = a.from;
        rx.OnPacket(a.packet, a.t_ms);
        if (a.packet.frame_id == 0 && rx.FrameZeroComplete()) {
          if (!rx.clock().anchored()) rx.clock().SetAnchor(*rx.FrameZeroCompleteTime());
          sock.SendTo(kAck, *sender);  // repeated for every late frame-0 copy
        }
      };
      while (next < n && !stop) {
        const double due = rx.clock().anchored() ? rx.clock().DeadlineFor(next)
                                                 : clock.NowMs() + 20.0;
        if (!rx.clock().anchored() && clock.NowMs() > kAnchorTimeoutMs) {
          throw Error(ErrorCode::kSocket, "frame 0 did not arrive; live session not anchored");
        }
        if (held && held->t_ms <= due) {
          ingest_one(*held);
          held.reset();
          continue;
        }
        if (!held) {
          if (auto a = ingest_q.PopUntil(clock.At(due))) {
            if (a->t_ms <= due || !rx.clock().anchored()) {
              ingest_one(*a);
            } else {
              held = std::move(a);
            }
            continue;
          }
        }
        if (rx.clock().anchored() && clock.NowMs() >= due) {
          display_q.Push(rx.DecodeFrame(next++));
        } else if (held) {
          std::this_thread::sleep_until(clock.At(due));
        }
      }
      display_q.Close();
      // Keep acknowledging stray frame-0 copies until shutdown.
      while (!stop && !ingest_q.closed()) {
        if (auto a = ingest_q.PopUntil(Clock::now() + std::chrono::milliseconds(20))) {
          if (a->packet.frame_id == 0) sock.SendTo(kAck, a->from);
        }
      }
    } catch (...) {
      fail(std::current_exception());
    }
  });

  std::thread display([&] {
    try {
      while (true) {
        auto d = display_q.PopUntil(Clock::now() + std::chrono::seconds(3600));
        if (!d) break;
        std::this_thread::sleep_until(clock.At(d->tick_ms));
        const uint32_t id = d->frame_id;
        Receiver::FrameResult fr = rx.DisplayFrame(std::move(*d));
        ScoreRecords(cfg, frames[id], rx.playback(), fr.records);
        out.records.push_back(fr.records[0]);
        out.records.push_back(fr.records[1]);
      }
      rx.Finish();
    } catch (...) {
      fail(std::current_exception());
    }
  });

  display.join();
  // A short grace period lets the sender see the final acknowledgement.
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  stop = true;
  ingest_q.Close();
  decode.join();
  ingest.join();
  if (failure) std::rethrow_exception(failure);
  out.freezes = rx.playback().freeze_log();
  out.late = rx.assembler().late_discards();
  out.queue_drops = queue_drops;
  out.malformed = malformed;
  return out;
}

}  // namespace

SessionReport RunLive(const ExperimentConfig& cfg, const std::vector<RgbdFrame>& frames,
                      RecoveryBackend* backend) {
  SessionReport rep = EmptyReport(cfg);
  if (frames.empty()) return rep;
  const std::string& role = cfg.udp.role;
  const WallClock clock;
  std::atomic<bool> stop{false};

  if (role == "sender") {
    UdpSocket sock(Endpoint{"0.0.0.0", 0});
    const SendResult s = SendStream(cfg, frames, sock, cfg.udp.peer, clock, stop);
    if (!s.acked) throw Error(ErrorCode::kSocket, "receiver never acknowledged frame 0");
    rep.bytes_data = s.stats.data_bytes;
    rep.bytes_parity = s.stats.parity_bytes;
    rep.bytes_dup = s.stats.dup_bytes;
    rep.packets_sent = s.sent;
    rep.packets_lost = s.dropped;
    rep.summary = Summarize(rep);
    return rep;
  }

  UdpSocket rx_sock(role == "both" ? Endpoint{"127.0.0.1", cfg.udp.peer.port} : cfg.udp.peer);
  std::optional<SendResult> sent;
  std::exception_ptr send_error;
  std::thread sender_thread;
  if (role == "both") {
    sender_thread = std::thread([&] {
      try {
        UdpSocket tx(Endpoint{"127.0.0.1", 0});
        sent = SendStream(cfg, frames, tx, rx_sock.local_endpoint(), clock, stop);
      } catch (...) {
        send_error = std::current_exception();
      }
    });
  }
  ReceiveResult r;
  try {
    r = ReceiveStream(cfg, frames, rx_sock, backend, clock, stop);
  } catch (...) {
    stop = true;
    if (sender_thread.joinable()) sender_thread.join();
    throw;
  }
  if (sender_thread.joinable()) sender_thread.join();
  if (send_error) std::rethrow_exception(send_error);

  rep.records = std::move(r.records);
  rep.freeze_log = std::move(r.freezes);
  rep.packets_late = r.late;
  if (sent) {
    rep.bytes_data = sent->stats.data_bytes;
    rep.bytes_parity = sent->stats.parity_bytes;
    rep.bytes_dup = sent->stats.dup_bytes;
    rep.packets_sent = sent->sent;
    rep.packets_lost = sent->dropped + r.queue_drops;
  }
  rep.summary = Summarize(rep);
  return rep;
}

}  // namespace volstream
