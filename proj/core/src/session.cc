#include "volstream/session.h"

#include <limits>
#include <queue>

#include "session_internal.h"
#include "stream_sender.h"
#include "volstream/external_codec.h"
#include "volstream/metrics.h"
#include "volstream/recovery_protocol.h"
#include "volstream/synthetic.h"

namespace volstream {
namespace {

struct Arrival {
  double t = 0.0;
  uint64_t seq = 0;
  DescPacket packet;
  bool operator>(const Arrival& o) const { return t != o.t ? t > o.t : seq > o.seq; }
};

}  // namespace

void ScoreRecords(const ExperimentConfig& cfg, const RgbdFrame& truth, const Playback& playback,
                  std::array<FrameRecord, 2>& records) {
  if (!cfg.compute_quality) return;
  const SsimOptions opts{cfg.ssim_window};
  for (Modality m : kModalities) {
    const Plane& gt = truth.plane(m);
    FrameRecord& rec = records[static_cast<int>(m)];
    if (playback.has_shown()) {
      rec.ssim = Ssim(playback.shown(m), gt, opts);
      rec.psnr = Psnr(playback.shown(m), gt);
    } else {
      const Plane blank(gt.width, gt.height, gt.channels);
      rec.ssim = Ssim(blank, gt, opts);
      rec.psnr = Psnr(blank, gt);
    }
  }
}

std::vector<RgbdFrame> LoadInput(ExperimentConfig& cfg) {
  if (cfg.input.kind == InputKind::kClip) {
    const ClipDescriptor desc = LoadClipDescriptor(cfg.Resolve(cfg.input.descriptor));
    cfg.gop.fps = desc.fps;
    cfg.codec.gop = cfg.gop;
    return LoadRawVideo(cfg.Resolve(cfg.input.clip), desc.width, desc.height, desc.fps,
                        cfg.codec.block);
  }
  SyntheticOptions opts;
  opts.width = cfg.input.width;
  opts.height = cfg.input.height;
  opts.frames = cfg.input.frames;
  opts.fps = cfg.gop.fps;
  opts.seed = cfg.input.seed;
  return cfg.input.kind == InputKind::kTalking ? TalkingMotionClip(opts)
                                               : TranslatingTextureClip(opts);
}

std::unique_ptr<PlaneCodec> MakeCodec(const ExperimentConfig& cfg, Modality m, int width,
                                      int height) {
  if (!cfg.external_codec.empty()) {
    return std::make_unique<ExternalCodec>(cfg.external_codec, width, height, ChannelsFor(m));
  }
  CodecConfig c = cfg.codec;
  c.gop = cfg.gop;
  return std::make_unique<ReferenceCodec>(c);
}

std::unique_ptr<RecoveryBackend> MakeBackend(const BackendConfig& cfg) {
  switch (cfg.kind) {
    case BackendKind::kNone: return nullptr;
    case BackendKind::kBaseline: return std::make_unique<BaselineBackend>();
    case BackendKind::kRemote: return std::make_unique<RemoteBackend>(cfg.endpoint);
  }
  return nullptr;
}

ChannelConfig EffectiveChannel(const ExperimentConfig& cfg) {
  ChannelConfig ch = cfg.channel;
  ch.seed = cfg.seed;
  if (auto* tr = std::get_if<TraceSource>(&ch.source)) tr->entries = LoadTrace(cfg.Resolve(cfg.trace));
  if (auto* ge = std::get_if<GeSource>(&ch.source)) ge->model.seed = cfg.seed;
  return ch;
}

ReceiverConfig MakeReceiverConfig(const ExperimentConfig& cfg) {
  ReceiverConfig rc;
  rc.gop = cfg.gop;
  rc.mode = cfg.protection.mode;
  rc.payload = cfg.payload;
  rc.codec_block = cfg.codec.block;
  rc.reference_frames = cfg.backend.reference_frames;
  rc.realtime_budget = cfg.realtime_budget;
  return rc;
}

SessionReport EmptyReport(const ExperimentConfig& cfg) {
  SessionReport rep;
  rep.mode = std::string(ProtectionModeName(cfg.protection.mode));
  rep.seed = cfg.seed;
  rep.config = ConfigEcho(cfg);
  rep.filter_corrupted = cfg.filter_corrupted;
  rep.quality = cfg.compute_quality;
  return rep;
}

SessionReport RunSimulated(const ExperimentConfig& cfg, const std::vector<RgbdFrame>& frames,
                           RecoveryBackend* backend, const SessionHooks* hooks) {
  SessionReport rep = EmptyReport(cfg);
  if (frames.empty()) return rep;
  const int w = frames[0].width();
  const int h = frames[0].height();
  auto enc_rgb = MakeCodec(cfg, Modality::kRgb, w, h);
  auto enc_depth = MakeCodec(cfg, Modality::kDepth, w, h);
  auto dec_rgb = MakeCodec(cfg, Modality::kRgb, w, h);
  auto dec_depth = MakeCodec(cfg, Modality::kDepth, w, h);
  StreamSender sender(cfg, *enc_rgb, *enc_depth);
  LinkSimulator link(EffectiveChannel(cfg));
  Receiver rx(MakeReceiverConfig(cfg), *dec_rgb, *dec_depth, backend);

  const double interval = cfg.gop.frame_interval_ms();
  const auto n = static_cast<uint32_t>(frames.size());
  std::priority_queue<Arrival, std::vector<Arrival>, std::greater<>> pending;
  uint64_t seq = 0;
  uint32_t next_final = 0;
  rep.records.reserve(2 * frames.size());

  auto finalize_before = [&](double t) {
    while (next_final < n && rx.clock().anchored() && rx.clock().DeadlineFor(next_final) < t) {
      const uint32_t i = next_final++;
      if (hooks && hooks->on_finalize) hooks->on_finalize(i, rx.clock().DeadlineFor(i));
      Receiver::FrameResult fr = rx.ProcessFrame(i);
      ScoreRecords(cfg, frames[i], rx.playback(), fr.records);
      if (hooks && hooks->on_frame) hooks->on_frame(i, fr);
      if (hooks && hooks->on_display) {
        hooks->on_display(i, frames[i], rx.playback().shown(Modality::kRgb),
                          rx.playback().shown(Modality::kDepth));
      }
      rep.records.push_back(fr.records[0]);
      rep.records.push_back(fr.records[1]);
    }
  };
  // Arrivals strictly before |t|. A deadline equal to an arrival time still
  // accepts that packet.
  auto deliver_before = [&](double t) {
    while (!pending.empty() && pending.top().t < t) {
      Arrival a = pending.top();
      pending.pop();
      finalize_before(a.t);
      const auto r = rx.OnPacket(a.packet, a.t);
      if (hooks && hooks->on_packet) hooks->on_packet(a.packet, a.t, r);
      if (!rx.clock().anchored() && rx.FrameZeroComplete()) {
        rx.clock().SetAnchor(*rx.FrameZeroCompleteTime());
      }
    }
  };

  for (uint32_t i = 0; i < n; ++i) {
    const double base = static_cast<double>(i) * interval;
    // Nothing sent from here on can arrive before |base|.
    deliver_before(base);
    finalize_before(base);
    PacketSchedule sched = sender.Prepare(frames[i], i);
    if (i == 0 && !sched.empty()) {
      // Frame 0 ends its slots at the interval boundary, so t0 trails every
      // later frame's last slot.
      const double shift = interval / static_cast<double>(sched.size());
      for (auto& sp : sched) sp.send_offset_ms += shift;
    }
    size_t lost = 0;
    for (auto& sp : sched) {
      Delivery d = link.Send(sp.packet, base + sp.send_offset_ms, i == 0);
      if (d.delivered()) {
        pending.push({*d.arrival_ts_ms, seq++, std::move(sp.packet)});
      } else {
        ++lost;
      }
    }
    sender.Observe(sched.size(), lost);
    rep.packets_sent += sched.size();
    rep.packets_lost += lost;
  }
  deliver_before(std::numeric_limits<double>::infinity());
  if (!rx.clock().anchored()) {
    throw Error(ErrorCode::kPrecondition, "frame 0 never arrived complete; no session anchor");
  }
  finalize_before(std::numeric_limits<double>::infinity());
  rx.Finish();

  rep.freeze_log = rx.playback().freeze_log();
  rep.bytes_data = sender.stats().data_bytes;
  rep.bytes_parity = sender.stats().parity_bytes;
  rep.bytes_dup = sender.stats().dup_bytes;
  rep.packets_late = rx.assembler().late_discards();
  rep.summary = Summarize(rep);
  return rep;
}

namespace {

SessionReport Dispatch(const ExperimentConfig& cfg, const std::vector<RgbdFrame>& frames,
                       RecoveryBackend* backend) {
  return cfg.transport == Transport::kSim ? RunSimulated(cfg, frames, backend)
                                          : RunLive(cfg, frames, backend);
}

void WriteOutputs(const ExperimentConfig& cfg, const SessionReport& rep,
                  const std::string& suffix) {
  auto with_suffix = [&](const std::string& p) {
    if (suffix.empty()) return cfg.Resolve(p);
    std::filesystem::path path = cfg.Resolve(p);
    return path.parent_path() / (path.stem().string() + "_" + suffix + path.extension().string());
  };
  if (!cfg.output.empty()) WriteReport(rep, with_suffix(cfg.output), cfg.format);
  if (!cfg.outcome_log.empty()) {
    std::string log;
    for (const auto& r : rep.records) log += OutcomeLogLine(r) + "\n";
    WriteTextFile(with_suffix(cfg.outcome_log), log);
  }
}

}  // namespace

SessionReport RunExperiment(ExperimentConfig cfg) {
  cfg.Validate();
  const auto frames = LoadInput(cfg);
  auto backend = MakeBackend(cfg.backend);
  SessionReport rep = Dispatch(cfg, frames, backend.get());
  WriteOutputs(cfg, rep, "");
  return rep;
}

std::vector<SessionReport> RunSweep(ExperimentConfig cfg, const std::vector<ProtectionMode>& modes) {
  cfg.Validate();
  const auto frames = LoadInput(cfg);
  auto backend = MakeBackend(cfg.backend);
  std::vector<SessionReport> out;
  for (ProtectionMode m : modes) {
    cfg.protection.mode = m;
    out.push_back(Dispatch(cfg, frames, backend.get()));
    WriteOutputs(cfg, out.back(), modes.size() > 1 ? std::string(ProtectionModeName(m)) : "");
  }
  return out;
}

}  // namespace volstream
