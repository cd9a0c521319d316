#include <gtest/gtest.h>

#include "test_support.h"
#include "volstream/external_codec.h"
#include "volstream/session.h"

namespace volstream {
namespace {

std::string ServeCommand() { return std::string(VOLSTREAM_CLI_PATH) + " codec-serve --quant 4"; }

TEST(ExternalCodec, MatchesReferenceCodecThroughAChain) {
  CodecConfig cfg;
  ReferenceCodec ref(cfg);
  for (int c : {3, 1}) {
    ExternalCodec ext(ServeCommand(), 64, 48, c);
    Plane prev_ref, prev_ext;
    for (int i = 0; i < 6; ++i) {
      const Plane p = testing::GradientPlane(64, 48, c, 7 * i);
      const FrameKind k = i == 0 ? FrameKind::kI : FrameKind::kP;
      const EncodeResult a = ref.Encode(k, p, i ? &prev_ref : nullptr);
      const EncodeResult b = ext.Encode(k, p, i ? &prev_ext : nullptr);
      ASSERT_EQ(a.frame.Serialize(), b.frame.Serialize()) << i;
      ASSERT_EQ(a.reconstruction, b.reconstruction);
      prev_ref = a.reconstruction;
      prev_ext = b.reconstruction;
    }
  }
}

TEST(ExternalCodec, ZeroFillDecodeMatchesReference) {
  CodecConfig cfg;
  ReferenceCodec ref(cfg);
  ExternalCodec ext(ServeCommand(), 64, 48, 3);
  const Plane base = testing::GradientPlane(64, 48, 3, 0);
  const Plane next = testing::GradientPlane(64, 48, 3, 9);
  const EncodeResult i = ref.Encode(FrameKind::kI, base, nullptr);
  const EncodeResult p = ref.Encode(FrameKind::kP, next, &i.reconstruction);
  ASSERT_GT(p.frame.payload.size(), 40u);
  const ByteRange zero[] = {{10, 30}};
  const DecodeResult a = ref.Decode(p.frame, &i.reconstruction, zero);
  const DecodeResult b = ext.Decode(p.frame, &i.reconstruction, zero);
  EXPECT_EQ(a.plane, b.plane);
  EXPECT_EQ(a.mask, b.mask);
  EXPECT_TRUE(b.mask.Any());
}

TEST(ExternalCodec, ChildErrorsSurface) {
  ExternalCodec ext(ServeCommand(), 64, 48, 3);
  // A P-frame without a reference is rejected by the child.
  EXPECT_THROW(ext.Encode(FrameKind::kP, Plane(64, 48, 3), nullptr), Error);
  // The connection stays usable afterwards.
  EXPECT_NO_THROW(ext.Encode(FrameKind::kI, Plane(64, 48, 3), nullptr));
}

TEST(ExternalCodec, MissingCommandFails) {
  ExternalCodec ext("/nonexistent/codec-binary", 16, 16, 1);
  EXPECT_THROW(ext.Encode(FrameKind::kI, Plane(16, 16, 1), nullptr), Error);
}

TEST(ExternalCodec, SessionResultsIdenticalToReference) {
  ExperimentConfig cfg = ParseConfig(R"({
    "input": {"synthetic": {"kind": "talking", "width": 64, "height": 48, "frames": 40}},
    "payload": {"rgb": 256, "depth": 128},
    "channel": {"loss": {"type": "ge", "p_gb": 0.05, "p_bg": 0.3, "loss_good": 0.0, "loss_bad": 1.0}},
    "seed": 2})");
  const auto frames = LoadInput(cfg);
  BaselineBackend backend;
  const std::string a = ReportToJson(RunSimulated(cfg, frames, &backend));
  cfg.external_codec = ServeCommand();
  SessionReport ext = RunSimulated(cfg, frames, &backend);
  cfg.external_codec.clear();
  ext.config = ConfigEcho(cfg);  // only the codec command differs
  EXPECT_EQ(ReportToJson(ext), a);
}

}  // namespace
}  // namespace volstream
