#include <cmath>

#include <gtest/gtest.h>

#include "test_support.h"
#include "volstream/recovery.h"

namespace volstream {
namespace {

using testing::Rng;

Plane Numbered(uint8_t v) { return Plane(16, 16, 1, v); }

TEST(ReferenceRing, KeepsMostRecentK) {
  ReferenceRing ring(5);
  for (uint8_t i = 1; i <= 7; ++i) ring.Push(Numbered(i));
  ASSERT_EQ(ring.size(), 5u);
  const auto snap = ring.Snapshot();
  for (int i = 0; i < 5; ++i) EXPECT_EQ(snap[i].data[0], i + 3);
  ring.Reset();
  EXPECT_EQ(ring.size(), 0u);
  EXPECT_THROW(ReferenceRing(0), Error);
}

RecoveryRequest Request(Plane plane, CorruptionMask mask, std::vector<Plane> refs,
                        Modality m = Modality::kRgb) {
  RecoveryRequest r;
  r.modality = m;
  r.plane = std::move(plane);
  r.mask = std::move(mask);
  r.references = std::move(refs);
  return r;
}

TEST(Baseline, EmptyMaskIsIdentity) {
  Rng rng(1);
  const Plane p = testing::RandomPlane(rng, 64, 48, 3);
  const Plane ref = testing::RandomPlane(rng, 64, 48, 3);
  const auto out = RecoverBaseline(Request(p, CorruptionMask::ForPlane(64, 48, 16), {ref}));
  EXPECT_EQ(out.plane, p);
  EXPECT_EQ(out.status, RecoveryStatus::kOk);
}

TEST(Baseline, NoReferencePassesThrough) {
  Rng rng(2);
  const Plane p = testing::RandomPlane(rng, 32, 32, 1);
  const auto out =
      RecoverBaseline(Request(p, CorruptionMask::ForPlane(32, 32, 16, true), {}, Modality::kDepth));
  EXPECT_EQ(out.plane, p);
  EXPECT_EQ(out.status, RecoveryStatus::kPassthrough);
}

TEST(Baseline, StaticSceneFullyMaskedReturnsReference) {
  for (Modality m : kModalities) {
    const int c = m == Modality::kRgb ? 3 : 1;
    const Plane ref = testing::GradientPlane(64, 64, c, 5);
    // A zero-filled P decode of a static scene reproduces the reference.
    const Plane decoded = ref;
    const auto out = RecoverBaseline(Request(decoded, CorruptionMask::ForPlane(64, 64, 16, true),
                                             {Plane(64, 64, c, 9), ref}, m));
    // References are listed oldest first; only the newest is searched.
    ASSERT_EQ(out.plane, ref) << ModalityName(m);
  }
}

TEST(Baseline, UnmaskedPixelsUntouchedProperty) {
  Rng rng(3);
  for (int t = 0; t < 40; ++t) {
    const int bw = testing::UniformInt(rng, 1, 5), bh = testing::UniformInt(rng, 1, 4);
    const Modality m = testing::UniformInt(rng, 0, 1) ? Modality::kDepth : Modality::kRgb;
    const int c = m == Modality::kRgb ? 3 : 1;
    const Plane p = testing::RandomPlane(rng, bw * 16, bh * 16, c);
    const Plane ref = testing::GradientPlane(bw * 16, bh * 16, c, t);
    CorruptionMask mask(bw, bh);
    for (size_t i = 0; i < mask.block_count(); ++i) mask.set_index(i, rng() % 3 == 0);
    const auto out = RecoverBaseline(Request(p, mask, {ref}, m));
    for (int y = 0; y < p.height; ++y) {
      for (int x = 0; x < p.width; ++x) {
        if (mask.at(x / 16, y / 16)) continue;
        for (int k = 0; k < c; ++k) ASSERT_EQ(out.plane.at(x, y, k), p.at(x, y, k));
      }
    }
  }
}

TEST(Baseline, FindsShiftedBlock) {
  // Current frame is the reference moved right by 3 px; the masked block
  // should be filled from the shifted location.
  Plane ref(64, 64, 3);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      for (int k = 0; k < 3; ++k) {
        ref.at(x, y, k) = static_cast<uint8_t>(128 + 60 * std::sin(x / (5.0 + k)) + 50 * std::cos(y / 7.0));
      }
    }
  }
  Plane cur(64, 64, 3);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      for (int k = 0; k < 3; ++k) cur.at(x, y, k) = ref.at(std::max(0, x - 3), y, k);
    }
  }
  CorruptionMask mask(4, 4);
  mask.set(1, 2, true);
  Plane damaged = cur;
  for (int y = 32; y < 48; ++y) {
    for (int x = 16; x < 32; ++x) {
      for (int k = 0; k < 3; ++k) damaged.at(x, y, k) = 0;
    }
  }
  const auto out = RecoverBaselineRgb(Request(damaged, mask, {ref}));
  EXPECT_EQ(out.plane, cur);
}

TEST(BaselineDepth, ConstantPlaneStaysConstant) {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const auto v = static_cast<uint8_t>(testing::UniformInt(rng, 0, 255));
    Plane p(64, 48, 1, v);
    CorruptionMask mask(4, 3);
    for (size_t i = 0; i < mask.block_count(); ++i) mask.set_index(i, rng() % 2 == 0);
    for (int y = 0; y < 48; ++y) {
      for (int x = 0; x < 64; ++x) {
        if (mask.at(x / 16, y / 16)) p.at(x, y) = static_cast<uint8_t>(rng());
      }
    }
    const auto out = RecoverBaselineDepth(Request(p, mask, {Plane(64, 48, 1, v)}, Modality::kDepth));
    EXPECT_EQ(out.plane, Plane(64, 48, 1, v));
    EXPECT_EQ(MaxBoundaryStep(out.plane, mask), 0);
  }
}

TEST(BaselineDepth, RampBoundaryStepWithinInteriorPlusQuant) {
  // Horizontal ramp of slope 2 per pixel; the reference is the same ramp
  // shifted by one pixel and the masked block holds garbage.
  constexpr int kQuant = 4;
  Plane cur(64, 64, 1), ref(64, 64, 1);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      cur.at(x, y) = static_cast<uint8_t>(2 * x + 40);
      ref.at(x, y) = static_cast<uint8_t>(2 * x + 42);
    }
  }
  CorruptionMask mask(4, 4);
  mask.set(1, 1, true);
  Plane damaged = cur;
  for (int y = 16; y < 32; ++y) {
    for (int x = 16; x < 32; ++x) damaged.at(x, y) = 255;
  }
  const auto out = RecoverBaselineDepth(Request(damaged, mask, {ref}, Modality::kDepth));
  const int interior = InteriorGradientP95(cur, mask);
  EXPECT_EQ(interior, 2);
  EXPECT_LE(MaxBoundaryStep(out.plane, mask), interior + kQuant);
  EXPECT_GT(MaxBoundaryStep(damaged, mask), interior + kQuant);
}

TEST(MergeMasked, CopiesOnlyMaskedBlocks) {
  const Plane a(32, 32, 1, 10), b(32, 32, 1, 200);
  CorruptionMask mask(2, 2);
  mask.set(0, 1, true);
  const Plane m = MergeMasked(a, b, mask);
  EXPECT_EQ(m.at(0, 0), 10);
  EXPECT_EQ(m.at(31, 15), 10);
  EXPECT_EQ(m.at(0, 16), 200);
  EXPECT_EQ(m.at(15, 31), 200);
  EXPECT_EQ(m.at(16, 16), 10);
}

TEST(GradientMetrics, Examples) {
  Plane p(32, 16, 1, 0);
  for (int y = 0; y < 16; ++y) {
    for (int x = 16; x < 32; ++x) p.at(x, y) = 100;
  }
  CorruptionMask mask(2, 1);
  mask.set(1, 0, true);
  EXPECT_EQ(MaxBoundaryStep(p, mask), 100);
  EXPECT_EQ(InteriorGradientP95(p, mask), 0);
  EXPECT_EQ(MaxBoundaryStep(p, CorruptionMask(2, 1)), 0);
  EXPECT_EQ(InteriorGradientP95(p, CorruptionMask(2, 1, true)), 255);
}

TEST(RecoveryRequest, ValidateRejectsMismatches) {
  auto expect_mismatch = [](const RecoveryRequest& r) {
    try {
      r.Validate();
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
    }
  };
  const Modality d = Modality::kDepth;
  expect_mismatch(Request(Plane(32, 32, 1), CorruptionMask(3, 2), {}, d));
  expect_mismatch(Request(Plane(32, 32, 1), CorruptionMask(2, 2), {Plane(32, 16, 1)}, d));
  expect_mismatch(Request(Plane(32, 32, 1), CorruptionMask(2, 2), {Plane(32, 32, 3)}, d));
  expect_mismatch(Request(Plane(32, 32, 1), CorruptionMask(2, 2), {}, Modality::kRgb));
  EXPECT_NO_THROW(Request(Plane(40, 20, 1), CorruptionMask(3, 2), {Plane(40, 20, 1)}, d).Validate());
}

TEST(BaselineBackend, NameAndDispatch) {
  BaselineBackend b;
  EXPECT_EQ(b.name(), "baseline");
  const Plane ref = testing::GradientPlane(32, 32, 1);
  const auto out = b.Recover(
      Request(ref, CorruptionMask(2, 2, true), {ref}, Modality::kDepth), 0.0);
  EXPECT_EQ(out.plane, ref);
  EXPECT_GE(out.latency_ms, 0.0);
}

}  // namespace
}  // namespace volstream
