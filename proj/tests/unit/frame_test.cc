#include <fstream>

#include <gtest/gtest.h>

#include "test_support.h"
#include "volstream/frame.h"

namespace volstream {
namespace {

using testing::TempDir;

void WriteBytes(const std::filesystem::path& p, const Bytes& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

TEST(LoadRawVideo, TwoFramesOf64x64) {
  TempDir dir;
  // Frame k, byte j holds (k * 7 + j) mod 251 so planes are distinguishable.
  const size_t frame_bytes = 64 * 64 * 4;
  Bytes raw(2 * frame_bytes);
  for (size_t j = 0; j < raw.size(); ++j) raw[j] = static_cast<uint8_t>((j / frame_bytes * 7 + j) % 251);
  WriteBytes(dir / "clip.raw", raw);

  const auto frames = LoadRawVideo(dir / "clip.raw", 64, 64, 30.0);
  ASSERT_EQ(frames.size(), 2u);
  EXPECT_EQ(frames[0].frame_id, 0u);
  EXPECT_EQ(frames[1].frame_id, 1u);
  EXPECT_DOUBLE_EQ(frames[0].capture_ts_ms, 0.0);
  EXPECT_NEAR(frames[1].capture_ts_ms, 33.33, 0.01);
  for (int k = 0; k < 2; ++k) {
    const uint8_t* base = raw.data() + k * frame_bytes;
    EXPECT_TRUE(std::equal(frames[k].rgb.data.begin(), frames[k].rgb.data.end(), base));
    EXPECT_TRUE(std::equal(frames[k].depth.data.begin(), frames[k].depth.data.end(),
                           base + 64 * 64 * 3));
  }
}

TEST(LoadRawVideo, EmptyFileHasNoFrames) {
  TempDir dir;
  WriteBytes(dir / "empty.raw", {});
  EXPECT_TRUE(LoadRawVideo(dir / "empty.raw", 64, 64, 30.0).empty());
}

TEST(LoadRawVideo, FractionalFrameIsMalformed) {
  TempDir dir;
  WriteBytes(dir / "half.raw", Bytes(64 * 64 * 4 * 3 / 2, 1));
  try {
    LoadRawVideo(dir / "half.raw", 64, 64, 30.0);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedInput);
  }
}

TEST(LoadRawVideo, MissingFileIsIoError) {
  try {
    LoadRawVideo("/nonexistent/clip.raw", 64, 64, 30.0);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
}

TEST(LoadRawVideo, PadsToBlockMultiple) {
  TempDir dir;
  Bytes raw(20 * 10 * 4);
  for (size_t j = 0; j < raw.size(); ++j) raw[j] = static_cast<uint8_t>(j);
  WriteBytes(dir / "odd.raw", raw);
  const auto frames = LoadRawVideo(dir / "odd.raw", 20, 10, 30.0, 16);
  ASSERT_EQ(frames.size(), 1u);
  EXPECT_EQ(frames[0].width(), 32);
  EXPECT_EQ(frames[0].height(), 16);
  // Replicated edge.
  EXPECT_EQ(frames[0].depth.at(31, 15), frames[0].depth.at(19, 9));
  EXPECT_EQ(frames[0].rgb.at(25, 3, 2), frames[0].rgb.at(19, 3, 2));
}

TEST(RawVideo, WriteThenLoadRoundTrips) {
  TempDir dir;
  testing::Rng rng(3);
  std::vector<RgbdFrame> frames;
  for (uint32_t i = 0; i < 3; ++i) {
    frames.push_back(testing::MakeFrame(i, testing::RandomPlane(rng, 32, 16, 3),
                                        testing::RandomPlane(rng, 32, 16, 1), 24.0));
  }
  WriteRawVideo(dir / "rt.raw", frames);
  EXPECT_EQ(LoadRawVideo(dir / "rt.raw", 32, 16, 24.0), frames);
}

TEST(ClipDescriptor, RoundTripsAndRejectsGarbage) {
  TempDir dir;
  WriteClipDescriptor(dir / "a.desc", {320, 240, 24.0});
  const ClipDescriptor d = LoadClipDescriptor(dir / "a.desc");
  EXPECT_EQ(d.width, 320);
  EXPECT_EQ(d.height, 240);
  EXPECT_DOUBLE_EQ(d.fps, 24.0);

  std::ofstream(dir / "bad.desc") << "width=320\nheight\n";
  EXPECT_THROW(LoadClipDescriptor(dir / "bad.desc"), Error);
  std::ofstream(dir / "nofps.desc") << "width=320\nheight=240\nfps=0\n";
  EXPECT_THROW(LoadClipDescriptor(dir / "nofps.desc"), Error);
}

TEST(GopPosition, SpecExamples) {
  const GopSpec spec{30, 30.0};
  EXPECT_EQ(GetGopPosition(0, spec), (GopPosition{0, FrameKind::kI}));
  EXPECT_EQ(GetGopPosition(30, spec), (GopPosition{1, FrameKind::kI}));
  EXPECT_EQ(GetGopPosition(31, spec), (GopPosition{1, FrameKind::kP}));
}

TEST(GopPosition, MatchesDivMod) {
  testing::Rng rng(11);
  for (int t = 0; t < 1000; ++t) {
    const int len = testing::UniformInt(rng, 1, 120);
    const auto id = static_cast<uint32_t>(testing::UniformInt(rng, 0, 1 << 20));
    const GopPosition pos = GetGopPosition(id, {len, 30.0});
    EXPECT_EQ(pos.gop_id, id / len);
    EXPECT_EQ(pos.kind == FrameKind::kI, id % len == 0);
  }
}

TEST(GopSpec, RejectsNonPositive) {
  EXPECT_THROW((GopSpec{0, 30.0}).Validate(), Error);
  EXPECT_THROW((GopSpec{30, 0.0}).Validate(), Error);
  EXPECT_NO_THROW((GopSpec{1, 0.5}).Validate());
}

TEST(SplitModalities, ZeroDepthStaysZero) {
  testing::Rng rng(5);
  const RgbdFrame f = testing::MakeFrame(0, testing::RandomPlane(rng, 16, 16, 3), Plane(16, 16, 1));
  const auto [rgb, depth] = SplitModalities(f);
  EXPECT_TRUE(std::all_of(depth.data.begin(), depth.data.end(), [](uint8_t v) { return v == 0; }));
  EXPECT_EQ(rgb, f.rgb);
}

TEST(SplitModalities, TwoByTwoKnownBytes) {
  Plane rgb(2, 2, 3);
  for (size_t i = 0; i < rgb.size(); ++i) rgb.data[i] = static_cast<uint8_t>(10 + i);
  Plane depth(2, 2, 1);
  depth.data = {200, 201, 202, 203};
  const RgbdFrame f = MergeModalities(7, rgb, depth, 1.0);
  const auto [r, d] = SplitModalities(f);
  EXPECT_EQ(r.data, (Bytes{10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21}));
  EXPECT_EQ(d.data, (Bytes{200, 201, 202, 203}));
  EXPECT_EQ(r.at(1, 1, 2), 21);
  EXPECT_EQ(d.at(0, 1), 202);
}

TEST(SplitModalities, MergeOfSplitIsIdentity) {
  testing::Rng rng(9);
  for (int t = 0; t < 20; ++t) {
    const int w = testing::UniformInt(rng, 1, 40), h = testing::UniformInt(rng, 1, 40);
    const RgbdFrame f = testing::MakeFrame(static_cast<uint32_t>(t), testing::RandomPlane(rng, w, h, 3),
                                           testing::RandomPlane(rng, w, h, 1));
    auto [rgb, depth] = SplitModalities(f);
    EXPECT_EQ(MergeModalities(f.frame_id, rgb, depth, f.capture_ts_ms), f);
  }
}

TEST(MergeModalities, RejectsMismatchedPlanes) {
  EXPECT_THROW(MergeModalities(0, Plane(4, 4, 3), Plane(4, 2, 1), 0.0), Error);
  EXPECT_THROW(MergeModalities(0, Plane(4, 4, 1), Plane(4, 4, 1), 0.0), Error);
}

}  // namespace
}  // namespace volstream
