#include <cmath>

#include <gtest/gtest.h>

#include "test_support.h"
#include "volstream/metrics.h"

namespace volstream {
namespace {

// 32x32 mid-contrast pattern: 64 + ((37 y + 11 x) mod 128).
Plane PatternX() {
  Plane p(32, 32, 1);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) p.at(x, y) = static_cast<uint8_t>(64 + (y * 37 + x * 11) % 128);
  }
  return p;
}

// (3x div 4) + ((5 y + 3 x) mod 17)
Plane PatternY(const Plane& x) {
  Plane p(32, 32, 1);
  for (int r = 0; r < 32; ++r) {
    for (int c = 0; c < 32; ++c) p.at(c, r) = static_cast<uint8_t>(x.at(c, r) * 3 / 4 + (r * 5 + c * 3) % 17);
  }
  return p;
}

Plane Inverted(const Plane& x) {
  Plane p = x;
  for (auto& v : p.data) v = static_cast<uint8_t>(255 - v);
  return p;
}

// Reference values computed offline with numpy (uniform window, population
// statistics) and scikit-image structural_similarity (gaussian_weights=True,
// sigma=1.5, use_sample_covariance=False, data_range=255).
constexpr double kUniformXY = 0.9285624067444989;
constexpr double kGaussianXY = 0.9295144990035675;
constexpr double kUniformInverted = -0.9574653884527373;  // clamped to 0

TEST(Ssim, IdentityIsOne) {
  testing::Rng rng(1);
  const Plane a = testing::RandomPlane(rng, 40, 24, 3);
  EXPECT_DOUBLE_EQ(Ssim(a, a), 1.0);
  EXPECT_DOUBLE_EQ(Ssim(a, a, {SsimWindow::kGaussian11}), 1.0);
}

TEST(Ssim, InvertedMidContrastIsLow) {
  const Plane x = PatternX();
  const double s = Ssim(x, Inverted(x));
  EXPECT_LT(s, 0.2);
  EXPECT_LT(kUniformInverted, 0.0);
  EXPECT_DOUBLE_EQ(s, 0.0);
}

TEST(Ssim, MatchesReferenceImplementations) {
  const Plane x = PatternX();
  const Plane y = PatternY(x);
  EXPECT_NEAR(Ssim(x, y), kUniformXY, 1e-12);
  EXPECT_NEAR(Ssim(x, y, {SsimWindow::kGaussian11}), kGaussianXY, 1e-9);
}

TEST(Ssim, EqualConstantPlanesScoreOne) {
  EXPECT_DOUBLE_EQ(Ssim(Plane(16, 16, 1, 77), Plane(16, 16, 1, 77)), 1.0);
}

TEST(Ssim, SymmetricAndBounded) {
  testing::Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const Plane a = testing::RandomPlane(rng, 20, 12, 1);
    const Plane b = testing::RandomPlane(rng, 20, 12, 1);
    const double s = Ssim(a, b);
    EXPECT_DOUBLE_EQ(s, Ssim(b, a));
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(Ssim, SmallPlaneIsOneWindow) {
  Plane a(4, 4, 1, 10), b(4, 4, 1, 10);
  b.at(0, 0) = 200;
  const double s = Ssim(a, b);
  EXPECT_GT(s, 0.0);
  EXPECT_LT(s, 1.0);
}

TEST(Ssim, ShapeMismatchThrows) {
  try {
    Ssim(Plane(8, 8, 1), Plane(8, 8, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(Psnr, ClosedForms) {
  const Plane a(16, 16, 3, 100);
  EXPECT_EQ(Psnr(a, a), kPsnrIdentical);
  EXPECT_TRUE(std::isinf(Psnr(a, a)));
  EXPECT_NEAR(Psnr(a, Plane(16, 16, 3, 101)), 48.13080360867910, 1e-12);
  EXPECT_DOUBLE_EQ(Psnr(Plane(8, 8, 1, 0), Plane(8, 8, 1, 255)), 0.0);
  EXPECT_DOUBLE_EQ(MeanSquaredError(Plane(8, 8, 1, 0), Plane(8, 8, 1, 3)), 9.0);
}

TEST(FreezeStats, Examples) {
  const FreezeEvent one[] = {{0.0, 1000.0 / 30.0}};
  EXPECT_NEAR(ComputeFreezeStats(one).median_ms, 33.33, 0.01);
  const FreezeEvent two[] = {{0.0, 33.0}, {100.0, 967.0}};
  const FreezeStats s = ComputeFreezeStats(two);
  EXPECT_DOUBLE_EQ(s.median_ms, 500.0);
  EXPECT_DOUBLE_EQ(s.total_ms, 1000.0);
  EXPECT_EQ(s.count, 2u);
  const FreezeStats none = ComputeFreezeStats({});
  EXPECT_EQ(none.median_ms, 0.0);
  EXPECT_EQ(none.total_ms, 0.0);
  EXPECT_EQ(none.count, 0u);
}

TEST(Overhead, Examples) {
  EXPECT_DOUBLE_EQ(Overhead(1000, 0, 0), 0.0);
  // I-frames are 1/8 of the data and carry half-rate parity.
  EXPECT_DOUBLE_EQ(Overhead(8000, 500, 0), 0.0625);
  EXPECT_DOUBLE_EQ(Overhead(1000, 50, 33), 0.083);
  EXPECT_THROW(Overhead(0, 1, 1), Error);
}

TEST(NonRecovered, Examples) {
  std::vector<Outcome> all_clean(30, Outcome::kClean);
  EXPECT_EQ(NonRecoveredPercent(all_clean), 0.0);
  std::vector<Outcome> gop = all_clean;
  for (int i = 5; i < 30; ++i) gop[i] = Outcome::kLostGop;
  EXPECT_NEAR(NonRecoveredPercent(gop), 83.33, 0.01);
  std::vector<Outcome> partial = all_clean;
  partial[3] = Outcome::kPartialRecoverable;
  partial[4] = Outcome::kLostFrame;
  EXPECT_NEAR(NonRecoveredPercent(partial), 100.0 / 30.0, 1e-12);
  EXPECT_EQ(NonRecoveredPercent({}), 0.0);
}

TEST(Median, Conventions) {
  EXPECT_EQ(Median({}), 0.0);
  EXPECT_EQ(Median({3, 1, 2}), 2.0);
  EXPECT_EQ(Median({4, 1, 3, 2}), 2.5);
}

TEST(Outcome, NamesRoundTrip) {
  for (auto o : {Outcome::kClean, Outcome::kPartialRecoverable, Outcome::kLostFrame, Outcome::kLostGop}) {
    EXPECT_EQ(ParseOutcome(OutcomeName(o)), o);
  }
  EXPECT_THROW(ParseOutcome("meh"), Error);
  EXPECT_TRUE(IsNonRecovered(Outcome::kLostGop));
  EXPECT_FALSE(IsNonRecovered(Outcome::kPartialRecoverable));
  EXPECT_TRUE(IsCorrupted(Outcome::kPartialRecoverable));
}

}  // namespace
}  // namespace volstream
