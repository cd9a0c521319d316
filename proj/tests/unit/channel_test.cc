#include <cmath>
#include <fstream>

#include <gtest/gtest.h>

#include "test_support.h"
#include "volstream/channel.h"

namespace volstream {
namespace {

using testing::Rng;

void ExpectCode(ErrorCode code, const std::function<void()>& fn) {
  try {
    fn();
    FAIL() << "no error raised";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

DescPacket Pkt(uint32_t frame, uint16_t shard, size_t payload = 976) {
  DescPacket p;
  p.frame_id = frame;
  p.shard_index = shard;
  p.n_data = 1000;
  p.payload.assign(payload, 0);
  return p;
}

TEST(Trace, ThreeLinesUniformSpacing) {
  const auto t = ParseTrace("ts_ms,bandwidth_kbps,rtt_ms,loss_rate\n"
                            "# comment\n"
                            "0,20000,30,0\n15,18000,31,0.1\n\n30, 25000 ,29,1\n");
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t[1], (TraceEntry{15, 18000, 31, 0.1}));
  for (size_t i = 1; i < t.size(); ++i) EXPECT_DOUBLE_EQ(t[i].ts_ms - t[i - 1].ts_ms, 15.0);
}

TEST(Trace, Errors) {
  ExpectCode(ErrorCode::kRange, [] { ParseTrace("0,1000,10,1.2\n"); });
  ExpectCode(ErrorCode::kEmptyTrace, [] { ParseTrace(""); });
  ExpectCode(ErrorCode::kEmptyTrace, [] { ParseTrace("ts_ms,bw,rtt,loss\n"); });
  ExpectCode(ErrorCode::kRange, [] { ParseTrace("0,1000,10,0\n20,1000,10,0\n"); });
  ExpectCode(ErrorCode::kRange, [] { ParseTrace("0,-5,10,0\n"); });
  ExpectCode(ErrorCode::kParse, [] { ParseTrace("0,abc,10,0\n"); });
  ExpectCode(ErrorCode::kParse, [] { ParseTrace("0,1000,10\n"); });
  ExpectCode(ErrorCode::kParse, [] { ParseTrace("0,1000,10,0,9\n"); });
  ExpectCode(ErrorCode::kIo, [] { LoadTrace("/nonexistent/trace.csv"); });
}

TEST(Trace, LoadFromFile) {
  testing::TempDir dir;
  std::ofstream(dir / "t.csv") << "0,1000,10,0\n15,1000,10,0.5\n";
  EXPECT_EQ(LoadTrace(dir / "t.csv").size(), 2u);
}

TEST(Link, PerfectSourceAddsPropAndSerialization) {
  ChannelConfig cfg;
  cfg.prop_delay_ms = 40.0;
  cfg.bandwidth_kbps = 8000.0;  // 1 byte per microsecond
  LinkSimulator link(cfg);
  for (int i = 0; i < 50; ++i) {
    const DescPacket p = Pkt(1, static_cast<uint16_t>(i));
    const double t = i * 2.0;  // link idle between packets
    const Delivery d = link.Send(p, t);
    ASSERT_TRUE(d.delivered());
    EXPECT_DOUBLE_EQ(*d.arrival_ts_ms, t + 40.0 + p.wire_size() * 8.0 / 8000.0);
  }
}

TEST(Link, BackToBackPacketsQueue) {
  ChannelConfig cfg;
  cfg.bandwidth_kbps = 8000.0;
  LinkSimulator link(cfg);
  const Delivery a = link.Send(Pkt(1, 0), 0.0);
  const Delivery b = link.Send(Pkt(1, 1), 0.0);
  EXPECT_DOUBLE_EQ(*b.arrival_ts_ms - *a.arrival_ts_ms, 1000 * 8.0 / 8000.0);
}

TEST(Link, FullLossIntervalDropsEverything) {
  ChannelConfig cfg;
  cfg.source = TraceSource{ParseTrace("0,100000,10,0\n15,100000,10,1.0\n30,100000,10,0\n")};
  LinkSimulator link(cfg);
  for (int i = 0; i < 450; ++i) {
    const double t = i * 0.1;
    const Delivery d = link.Send(Pkt(1, static_cast<uint16_t>(i)), t);
    if (d.delivered()) {
      const double depart = *d.arrival_ts_ms - cfg.prop_delay_ms;
      EXPECT_TRUE(depart < 15.0 || depart >= 30.0) << "t=" << t;
    } else {
      EXPECT_EQ(d.reason, DropReason::kRandomLoss);
    }
    if (t >= 15.0 && t < 29.0) {
      EXPECT_FALSE(d.delivered()) << "t=" << t;
    } else if (t < 14.0 || t >= 30.0) {
      EXPECT_TRUE(d.delivered()) << "t=" << t;
    }
  }
}

TEST(Link, GilbertElliottLongRunLoss) {
  ChannelConfig cfg;
  GeModel ge;
  ge.p_gb = 0.01;
  ge.p_bg = 0.3;
  ge.seed = 42;
  cfg.source = GeSource{ge};
  cfg.seed = 42;
  LinkSimulator link(cfg);
  const DescPacket p = Pkt(0, 0, 100);
  const int n = 1'000'000;
  int dropped = 0;
  for (int i = 0; i < n; ++i) dropped += link.Send(p, i * 0.01).delivered() ? 0 : 1;
  // Two-state chain: stationary bad probability p_gb / (p_gb + p_bg); the
  // sample mean's variance is inflated by (1 + l) / (1 - l), l = 1 - p_gb - p_bg.
  const double pi = 0.01 / 0.31;
  const double lambda = 1.0 - 0.31;
  const double sigma = std::sqrt(pi * (1 - pi) / n * (1 + lambda) / (1 - lambda));
  EXPECT_NEAR(pi, 0.032258, 1e-6);
  EXPECT_NEAR(static_cast<double>(dropped) / n, pi, 3 * sigma);
  EXPECT_NEAR(ge.StationaryLoss(), pi, 1e-12);
}

ChannelConfig RandomConfig(Rng& rng) {
  ChannelConfig cfg;
  cfg.prop_delay_ms = testing::UniformInt(rng, 0, 100);
  cfg.queue_bytes = static_cast<size_t>(testing::UniformInt(rng, 2000, 200000));
  cfg.bandwidth_kbps = testing::UniformInt(rng, 500, 50000);
  cfg.seed = rng();
  switch (testing::UniformInt(rng, 0, 2)) {
    case 0: break;
    case 1: {
      GeModel ge;
      ge.p_gb = testing::UniformInt(rng, 0, 100) / 1000.0;
      ge.p_bg = testing::UniformInt(rng, 1, 100) / 100.0;
      ge.loss_good = testing::UniformInt(rng, 0, 10) / 100.0;
      ge.seed = rng();
      cfg.source = GeSource{ge};
      break;
    }
    default: {
      std::vector<TraceEntry> t;
      for (int i = 0; i < 20; ++i) {
        t.push_back({i * 15.0, static_cast<double>(testing::UniformInt(rng, 0, 20000)), 20,
                     testing::UniformInt(rng, 0, 100) / 100.0});
      }
      t[0].bandwidth_kbps = 1000;
      cfg.source = TraceSource{t};
    }
  }
  return cfg;
}

PacketSchedule RandomSchedule(Rng& rng) {
  PacketSchedule s;
  double t = 0.0;
  const int n = testing::UniformInt(rng, 1, 400);
  for (int i = 0; i < n; ++i) {
    t += testing::UniformInt(rng, 0, 100) / 50.0;
    s.push_back({t, Pkt(static_cast<uint32_t>(i / 10), static_cast<uint16_t>(i % 10),
                        static_cast<size_t>(testing::UniformInt(rng, 0, 1024)))});
  }
  return s;
}

TEST(Transmit, DeterministicCausalConservative) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const ChannelConfig cfg = RandomConfig(rng);
    const PacketSchedule s = RandomSchedule(rng);
    const auto a = Transmit(s, cfg);
    const auto b = Transmit(s, cfg);
    ASSERT_EQ(a.size(), s.size());
    size_t delivered = 0, dropped = 0;
    for (size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].arrival_ts_ms, b[i].arrival_ts_ms);
      EXPECT_EQ(a[i].reason, b[i].reason);
      EXPECT_EQ(a[i].packet, s[i].packet);
      if (a[i].delivered()) {
        ++delivered;
        EXPECT_GE(*a[i].arrival_ts_ms, s[i].send_offset_ms + cfg.prop_delay_ms);
        EXPECT_EQ(a[i].reason, DropReason::kNone);
      } else {
        ++dropped;
        EXPECT_NE(a[i].reason, DropReason::kNone);
      }
    }
    EXPECT_EQ(delivered + dropped, s.size());
  }
}

TEST(Transmit, SeedChangesOutcome) {
  ChannelConfig cfg;
  cfg.source = GeSource{GeModel{0.2, 0.2, 0.1, 0.9, 1}};
  PacketSchedule s;
  for (int i = 0; i < 500; ++i) s.push_back({i * 0.5, Pkt(0, static_cast<uint16_t>(i), 100)});
  auto pattern = [&](uint64_t seed) {
    cfg.seed = seed;
    std::vector<bool> v;
    for (const auto& d : Transmit(s, cfg)) v.push_back(d.delivered());
    return v;
  };
  EXPECT_EQ(pattern(3), pattern(3));
  EXPECT_NE(pattern(3), pattern(4));
}

TEST(Link, QueueOverflowAndProtection) {
  ChannelConfig cfg;
  cfg.bandwidth_kbps = 800.0;  // 10 us per byte
  cfg.queue_bytes = 3000;
  LinkSimulator link(cfg);
  int overflow = 0;
  for (int i = 0; i < 10; ++i) {
    const Delivery d = link.Send(Pkt(1, static_cast<uint16_t>(i)), 0.0);
    if (d.reason == DropReason::kQueueOverflow) ++overflow;
  }
  EXPECT_EQ(overflow, 7);  // three 1000-byte packets fit

  LinkSimulator protected_link(cfg);
  for (int i = 0; i < 10; ++i) {
    EXPECT_TRUE(protected_link.Send(Pkt(1, static_cast<uint16_t>(i)), 0.0, true).delivered());
  }
}

TEST(Link, ForcedDropMatchesCopy) {
  ChannelConfig cfg;
  cfg.forced_drops.push_back({5, 0, 0, 0});
  LinkSimulator link(cfg);
  DescPacket p = Pkt(5, 0);
  EXPECT_EQ(link.Send(p, 0.0).reason, DropReason::kForced);
  EXPECT_TRUE(link.Send(p, 0.1).delivered());  // second copy of the same shard
  p.modality = Modality::kDepth;
  EXPECT_TRUE(link.Send(p, 0.2).delivered());
  EXPECT_TRUE(link.Send(Pkt(5, 0), 0.3, true).delivered());
}

TEST(Link, RejectsOutOfOrderSends) {
  LinkSimulator link(ChannelConfig{});
  link.Send(Pkt(0, 0), 10.0);
  ExpectCode(ErrorCode::kPrecondition, [&] { link.Send(Pkt(0, 1), 5.0); });
}

TEST(ChannelConfig, Validation) {
  ChannelConfig cfg;
  cfg.prop_delay_ms = -1;
  ExpectCode(ErrorCode::kConfig, [&] { cfg.Validate(); });
  cfg = {};
  cfg.source = GeSource{GeModel{1.5, 0.1, 0, 1, 1}};
  ExpectCode(ErrorCode::kConfig, [&] { cfg.Validate(); });
  cfg = {};
  cfg.queue_bytes = 0;
  ExpectCode(ErrorCode::kConfig, [&] { cfg.Validate(); });
}

}  // namespace
}  // namespace volstream
