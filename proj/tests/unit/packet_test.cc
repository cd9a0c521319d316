#include <fstream>

#include <gtest/gtest.h>

#include "test_support.h"
#include "volstream/packet.h"

namespace volstream {
namespace {

using testing::Rng;

Bytes ReadGolden(const std::string& name) {
  std::ifstream in(std::string(VOLSTREAM_GOLDEN_DIR) + "/" + name, std::ios::binary);
  return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

DescPacket GoldenPacket() {
  DescPacket p;
  p.modality = Modality::kDepth;
  p.frame_kind = FrameKind::kP;
  p.frame_id = 0x01020304;
  p.gop_id = 7;
  p.shard_index = 3;
  p.n_data = 5;
  p.n_parity = 2;
  p.encoded_frame_len = 4200;
  for (int i = 0; i < 40; ++i) p.payload.push_back(static_cast<uint8_t>((i * 37 + 11) & 0xFF));
  return p;
}

TEST(DescPacket, GoldenBytes) {
  const Bytes golden = ReadGolden("desc_packet.bin");
  ASSERT_EQ(golden.size(), 64u);
  EXPECT_EQ(SerializePacket(GoldenPacket()), golden);
  EXPECT_EQ(ParsePacket(golden), GoldenPacket());
}

TEST(DescPacket, LayoutByHand) {
  const Bytes b = SerializePacket(GoldenPacket());
  EXPECT_EQ(b[0], 0x52);
  EXPECT_EQ(b[1], 1);
  EXPECT_EQ(b[2], 1);  // depth
  EXPECT_EQ(b[3], 1);  // P
  EXPECT_EQ((Bytes{b.begin() + 4, b.begin() + 8}), (Bytes{4, 3, 2, 1}));
  EXPECT_EQ(GetU16(&b[22]), 40);
  EXPECT_EQ(GetU32(&b[18]), 4200u);
}

TEST(DescPacket, RandomRoundTrip) {
  Rng rng(1);
  for (int t = 0; t < 500; ++t) {
    const DescPacket p = testing::RandomPacket(rng);
    const Bytes b = SerializePacket(p);
    ASSERT_EQ(b.size(), p.wire_size());
    ASSERT_EQ(ParsePacket(b), p);
  }
}

void ExpectParseError(Bytes b) {
  try {
    ParsePacket(b);
    FAIL() << "parsed malformed packet";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
  }
}

TEST(DescPacket, ParseRejectsMalformed) {
  const Bytes good = SerializePacket(GoldenPacket());
  Bytes b = good;
  b[0] = 0x00;
  ExpectParseError(b);
  b = good;
  b[1] = 2;
  ExpectParseError(b);
  b = good;
  b[2] = 2;
  ExpectParseError(b);
  b = good;
  b[3] = 9;
  ExpectParseError(b);
  ExpectParseError(Bytes(good.begin(), good.begin() + 20));
  ExpectParseError(Bytes(good.begin(), good.end() - 1));
  b = good;
  b[12] = 7;  // shard_index 7 with n_data 5 + n_parity 2
  ExpectParseError(b);
  b = good;
  b[14] = 0;  // n_data 0
  ExpectParseError(b);
}

EncodedFrame Frame(FrameKind kind, size_t header, size_t body) {
  EncodedFrame f;
  f.kind = kind;
  f.frame_id = 12;
  f.gop_id = 0;
  f.modality = Modality::kRgb;
  f.header.resize(header);
  for (size_t i = 0; i < header; ++i) f.header[i] = static_cast<uint8_t>(i);
  if (header >= 4) {
    f.header[0] = static_cast<uint8_t>(header);
    f.header[1] = static_cast<uint8_t>(header >> 8);
    f.header[2] = f.header[3] = 0;
  }
  f.payload.resize(body);
  for (size_t i = 0; i < body; ++i) f.payload[i] = static_cast<uint8_t>(i * 7);
  f.encoded_len = static_cast<uint32_t>(header + body);
  return f;
}

TEST(Packetize, PFrameHeaderCopiesThenBody) {
  const EncodedFrame f = Frame(FrameKind::kP, 300, 2000);
  const ShardPlan plan = PlanProtection(f, {}, 1024);
  PacketizeStats st;
  const auto pkts = Packetize(f, plan, 1024, &st);
  ASSERT_EQ(pkts.size(), 4u);
  EXPECT_EQ(pkts[0].shard_index, 0);
  EXPECT_EQ(pkts[1].shard_index, 0);
  EXPECT_EQ(pkts[0].payload, f.header);
  EXPECT_EQ(pkts[1].payload, f.header);
  EXPECT_EQ(pkts[2].shard_index, 1);
  EXPECT_EQ(pkts[2].payload, Bytes(f.payload.begin(), f.payload.begin() + 1024));
  EXPECT_EQ(pkts[3].shard_index, 2);
  EXPECT_EQ(pkts[3].payload, Bytes(f.payload.begin() + 1024, f.payload.end()));
  for (const auto& p : pkts) {
    EXPECT_EQ(p.n_data, 3);
    EXPECT_EQ(p.n_parity, 0);
    EXPECT_EQ(p.encoded_frame_len, 2300u);
  }
  EXPECT_EQ(st.data_bytes, 2300u);
  EXPECT_EQ(st.dup_bytes, 300u);
  EXPECT_EQ(st.parity_bytes, 0u);
}

TEST(Packetize, IFrameShortLastShardAndParity) {
  const EncodedFrame f = Frame(FrameKind::kI, 100, 4900);
  const ShardPlan plan = PlanProtection(f, {}, 1024);
  ASSERT_EQ(plan.n_data, 5);
  ASSERT_EQ(plan.n_parity, 3);
  PacketizeStats st;
  const auto pkts = Packetize(f, plan, 1024, &st);
  ASSERT_EQ(pkts.size(), 8u);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(pkts[i].payload.size(), 1024u);
  EXPECT_EQ(pkts[4].payload.size(), 904u);
  for (int i = 5; i < 8; ++i) {
    EXPECT_EQ(pkts[i].payload.size(), 1024u);
    EXPECT_TRUE(pkts[i].is_parity());
  }
  // Reassembling the data shards yields the serialized frame.
  Bytes joined;
  for (int i = 0; i < 5; ++i) joined.insert(joined.end(), pkts[i].payload.begin(), pkts[i].payload.end());
  EXPECT_EQ(joined, f.Serialize());
  EXPECT_EQ(st.data_bytes, 5000u);
  EXPECT_EQ(st.parity_bytes, 3u * 1024u);
}

TEST(Packetize, ZeroLengthFrameIsError) {
  EncodedFrame f;
  EXPECT_THROW(Packetize(f, ShardPlan{1, 0, 1, 0}, 1024), Error);
}

TEST(Packetize, PlanMismatchIsError) {
  const EncodedFrame f = Frame(FrameKind::kI, 100, 4900);
  EXPECT_THROW(Packetize(f, ShardPlan{4, 0, 1, 0}, 1024), Error);
}

std::vector<DescPacket> Numbered(Modality m, int n) {
  std::vector<DescPacket> v(n);
  for (int i = 0; i < n; ++i) {
    v[i].modality = m;
    v[i].shard_index = static_cast<uint16_t>(i);
  }
  return v;
}

std::string Pattern(const PacketSchedule& s) {
  std::string out;
  for (const auto& sp : s) out += sp.packet.modality == Modality::kRgb ? 'R' : 'D';
  return out;
}

TEST(Interleave, EqualCountsAlternate) {
  const auto s = Interleave(Numbered(Modality::kRgb, 4), Numbered(Modality::kDepth, 4), 40.0);
  EXPECT_EQ(Pattern(s), "RDRDRDRD");
  for (size_t k = 0; k < s.size(); ++k) EXPECT_DOUBLE_EQ(s[k].send_offset_ms, 5.0 * k);
}

TEST(Interleave, SixRgbTwoDepthSplitsEvenly) {
  // Depth packets land at fractions 1/3 and 2/3 of the RGB run.
  const auto s = Interleave(Numbered(Modality::kRgb, 6), Numbered(Modality::kDepth, 2), 33.0);
  EXPECT_EQ(Pattern(s), "RRDRRDRR");
}

TEST(Interleave, PreservesPerModalityOrder) {
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    const int a = testing::UniformInt(rng, 0, 40), b = testing::UniformInt(rng, 0, 40);
    const auto s = Interleave(Numbered(Modality::kRgb, a), Numbered(Modality::kDepth, b), 33.3);
    ASSERT_EQ(s.size(), static_cast<size_t>(a + b));
    int next[2] = {0, 0};
    for (size_t k = 0; k < s.size(); ++k) {
      const int m = static_cast<int>(s[k].packet.modality);
      EXPECT_EQ(s[k].packet.shard_index, next[m]++);
      EXPECT_GE(s[k].send_offset_ms, 0.0);
      EXPECT_LT(s[k].send_offset_ms, 33.3);
    }
  }
}

TEST(Interleave, EmptyDepthIsRgbOnly) {
  const auto s = Interleave(Numbered(Modality::kRgb, 3), {}, 30.0);
  EXPECT_EQ(Pattern(s), "RRR");
  EXPECT_TRUE(Interleave({}, {}, 30.0).empty());
}

}  // namespace
}  // namespace volstream
