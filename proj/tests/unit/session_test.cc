#include <set>

#include <gtest/gtest.h>

#include "test_support.h"
#include "volstream/metrics.h"
#include "volstream/session.h"

namespace volstream {
namespace {

ExperimentConfig Small(const std::string& extra = "") {
  return ParseConfig(R"({"input": {"synthetic": {"kind": "talking", "width": 96, "height": 64, "frames": 60}},
                         "payload": {"rgb": 512, "depth": 256}, "seed": 3)" +
                     extra + "}");
}

std::string GeLoss(double p_gb, double p_bg) {
  return R"(, "channel": {"loss": {"type": "ge", "p_gb": )" + std::to_string(p_gb) +
         R"(, "p_bg": )" + std::to_string(p_bg) + R"(, "loss_good": 0.0, "loss_bad": 1.0}})";
}

SessionReport Simulate(ExperimentConfig cfg, const SessionHooks* hooks = nullptr) {
  const auto frames = LoadInput(cfg);
  auto backend = MakeBackend(cfg.backend);
  return RunSimulated(cfg, frames, backend.get(), hooks);
}

TEST(Session, PerfectChannelWithoutProtectionIsClean) {
  ExperimentConfig cfg = Small(R"(, "protection": {"mode": "none"}, "recovery": {"backend": "none"})");
  const SessionReport r = Simulate(cfg);
  ASSERT_EQ(r.records.size(), 120u);
  for (const auto& rec : r.records) {
    EXPECT_EQ(rec.outcome, Outcome::kClean);
    EXPECT_TRUE(rec.displayed);
  }
  EXPECT_TRUE(r.freeze_log.empty());
  EXPECT_EQ(r.bytes_parity, 0u);
  EXPECT_EQ(r.bytes_dup, 0u);
  EXPECT_DOUBLE_EQ(r.summary.overhead, 0.0);
  EXPECT_EQ(r.packets_lost, 0u);
  // Quantization bounds the reconstruction error.
  EXPECT_GT(r.summary.median_psnr_rgb, 35.0);
  EXPECT_GT(r.summary.median_ssim_depth, 0.9);
}

TEST(Session, DisplayTicksFollowTheAnchoredClock) {
  ExperimentConfig cfg = Small();
  double first_deadline = -1;
  SessionHooks hooks;
  hooks.on_finalize = [&](uint32_t i, double t) {
    if (i == 0) first_deadline = t;
  };
  const SessionReport r = Simulate(cfg, &hooks);
  // t0 = complete arrival of frame 0: one interval of sending plus the
  // propagation delay, at most.
  EXPECT_GE(first_deadline, 40.0);
  EXPECT_LE(first_deadline, 40.0 + 1000.0 / 30.0 + 1.0);
  for (size_t k = 0; k < r.records.size(); k += 2) {
    EXPECT_NEAR(r.records[k].display_ms, first_deadline + (k / 2 + 1) * 1000.0 / 30.0, 1e-6);
  }
}

TEST(Session, DeterministicForAConfig) {
  ExperimentConfig cfg = Small(GeLoss(0.03, 0.3));
  EXPECT_EQ(ReportToJson(Simulate(cfg)), ReportToJson(Simulate(cfg)));
  ExperimentConfig other = cfg;
  other.seed = 4;
  EXPECT_NE(ReportToJson(Simulate(other)), ReportToJson(Simulate(cfg)));
}

TEST(Session, PacketsNeverArriveAfterTheirFrameIsFinalized) {
  ExperimentConfig cfg = Small(GeLoss(0.03, 0.3));
  std::vector<double> finalized(60, -1);
  bool late_accepted = false;
  SessionHooks hooks;
  hooks.on_finalize = [&](uint32_t i, double t) { finalized[i] = t; };
  hooks.on_packet = [&](const DescPacket& p, double, const FrameAssembler::IngestResult& r) {
    if (finalized[p.frame_id] >= 0 && r.accepted) late_accepted = true;
  };
  Simulate(cfg, &hooks);
  EXPECT_FALSE(late_accepted);
}

TEST(Session, SweepOfOneModeEqualsRun) {
  ExperimentConfig cfg = Small(GeLoss(0.02, 0.3));
  const auto sweep = RunSweep(cfg, {ProtectionMode::kRevo});
  ASSERT_EQ(sweep.size(), 1u);
  EXPECT_EQ(ReportToJson(sweep[0]), ReportToJson(RunExperiment(cfg)));
}

TEST(Session, PerfectChannelSweepHasIdenticalOutcomes) {
  const auto sweep = RunSweep(Small(), {ProtectionMode::kRevo, ProtectionMode::kL3Only,
                                        ProtectionMode::kL7Only, ProtectionMode::kNone});
  for (const auto& r : sweep) {
    EXPECT_TRUE(r.freeze_log.empty()) << r.mode;
    EXPECT_DOUBLE_EQ(r.summary.non_recovered_pct, 0.0);
    EXPECT_DOUBLE_EQ(r.summary.median_ssim_rgb, sweep[0].summary.median_ssim_rgb);
  }
  EXPECT_GT(sweep[0].summary.overhead, sweep[2].summary.overhead);
  EXPECT_DOUBLE_EQ(sweep[3].summary.overhead, 0.0);
}

TEST(Session, CorruptedFilterSelectsExactlyCorruptedRecords) {
  ExperimentConfig cfg = Small(GeLoss(0.05, 0.3) + R"(, "filter_corrupted": true)");
  const SessionReport r = Simulate(cfg);
  const auto corrupted = CorruptedRecords(r.records);
  ASSERT_FALSE(corrupted.empty());
  std::set<std::pair<uint32_t, int>> a, b;
  for (const auto& rec : corrupted) a.insert({rec.frame_id, static_cast<int>(rec.modality)});
  for (const auto& rec : r.records) {
    if (rec.outcome != Outcome::kClean) b.insert({rec.frame_id, static_cast<int>(rec.modality)});
  }
  EXPECT_EQ(a, b);
  EXPECT_EQ(r.summary.quality_records, corrupted.size());
}

TEST(Session, RevoLosesLessThanL3OnlyUnderBursts) {
  ExperimentConfig cfg = Small(GeLoss(0.02, 0.25));
  cfg.input.frames = 300;
  cfg.compute_quality = false;
  const auto sweep = RunSweep(cfg, {ProtectionMode::kRevo, ProtectionMode::kL3Only});
  EXPECT_LT(sweep[0].summary.non_recovered_pct, sweep[1].summary.non_recovered_pct);
  EXPECT_LE(sweep[0].summary.total_freeze_ms, sweep[1].summary.total_freeze_ms);
}

TEST(Session, ForcedHeaderDropFreezesOneFrame) {
  // Both header copies of frame 7's RGB frame are dropped.
  ExperimentConfig cfg = Small(R"(, "channel": {"forced_drops": [
      {"frame_id": 7, "modality": "rgb", "shard_index": 0, "copy": 0},
      {"frame_id": 7, "modality": "rgb", "shard_index": 0, "copy": 1}]})");
  const SessionReport r = Simulate(cfg);
  EXPECT_EQ(r.records[14].outcome, Outcome::kLostFrame);
  ASSERT_EQ(r.freeze_log.size(), 1u);
  EXPECT_NEAR(r.freeze_log[0].duration_ms, 1000.0 / 30.0, 1e-9);
  EXPECT_EQ(r.packets_lost, 2u);
}

TEST(Session, OutputFilesAreWritten) {
  testing::TempDir dir;
  ExperimentConfig cfg = Small(R"(, "output": "out/r.json", "outcome_log": "out/log.jsonl")");
  cfg.base_dir = dir.path();
  cfg.input.frames = 10;
  RunSweep(cfg, {ProtectionMode::kRevo, ProtectionMode::kL3Only});
  for (const char* f : {"out/r_revo.json", "out/r_l3_only.json", "out/log_revo.jsonl"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  const std::string log = ReadTextFile(dir / "out/log_l3_only.jsonl");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 20);
}

TEST(Session, ClipInputUsesDescriptorFps) {
  testing::TempDir dir;
  std::vector<RgbdFrame> frames;
  for (uint32_t i = 0; i < 8; ++i) {
    frames.push_back(testing::MakeFrame(i, testing::GradientPlane(32, 32, 3, i),
                                        testing::GradientPlane(32, 32, 1, 2 * i), 15.0));
  }
  WriteRawVideo(dir / "c.rgbd", frames);
  WriteClipDescriptor(dir / "c.rgbd.desc", {32, 32, 15.0});
  ExperimentConfig cfg = ParseConfig(R"({"input": {"clip": "c.rgbd"}, "codec": {"quant": 1}})", dir.path());
  cfg.Validate();
  const SessionReport r = RunExperiment(cfg);
  EXPECT_EQ(r.records.size(), 16u);
  EXPECT_NEAR(r.records[2].display_ms - r.records[0].display_ms, 1000.0 / 15.0, 1e-9);
  EXPECT_TRUE(std::isinf(r.summary.median_psnr_rgb));
}

TEST(Session, UdpLoopbackBothRoles) {
  ExperimentConfig cfg = Small(R"(, "transport": "udp", "udp": {"peer": "127.0.0.1:0"})");
  cfg.input.frames = 30;
  const SessionReport r = RunExperiment(cfg);
  EXPECT_EQ(r.records.size(), 60u);
  EXPECT_GT(r.packets_sent, 0u);
  size_t clean = 0;
  for (const auto& rec : r.records) clean += rec.outcome == Outcome::kClean;
  EXPECT_GE(clean, 54u);  // loopback may still drop under load
}

}  // namespace
}  // namespace volstream
