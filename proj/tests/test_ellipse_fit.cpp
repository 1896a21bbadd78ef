#include <gtest/gtest.h>

#include "blobvid/ellipse_fit.hpp"
#include "blobvid/tensor.hpp"

using namespace blobvid;

TEST(MomentsInit, RectangleClosedForm) {
  const FrameGeometry g(64, 64);
  BinaryMask m(64, 64);
  for (int y = 24; y < 40; ++y)
    for (int x = 16; x < 48; ++x) m.set(y, x);
  const BlobParams p = moments_init(m, g);
  EXPECT_NEAR(p.cx, 32.0, 1e-12);
  EXPECT_NEAR(p.cy, 32.0, 1e-12);
  EXPECT_EQ(p.theta, 0.0);
  // discrete uniform variance (n^2 - 1)/12 over 32 and 16 integer-spaced centers
  EXPECT_NEAR(p.a, 2 * std::sqrt((32.0 * 32.0 - 1) / 12), 1e-9);
  EXPECT_NEAR(p.b, 2 * std::sqrt((16.0 * 16.0 - 1) / 12), 1e-9);
}

TEST(MomentsInit, DiskIsCircle) {
  const FrameGeometry g(64, 64);
  const BinaryMask m = rasterize({32, 32, 20, 20, 0}, g, 64, 64);
  const BlobParams p = moments_init(m, g);
  EXPECT_NEAR(p.a, p.b, 1e-6 * p.a);
  EXPECT_NEAR(p.theta, 0.0, 1e-6);
}

TEST(MomentsInit, RotatedBar) {
  const FrameGeometry g(64, 64);
  BinaryMask m(64, 64);
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c) {
      const double x = c + 0.5 - 32, y = r + 0.5 - 32;
      const double along = (x + y) / std::sqrt(2.0), across = (-x + y) / std::sqrt(2.0);
      if (std::abs(along) <= 25 && std::abs(across) <= 3) m.set(r, c);
    }
  // brute-force covariance angle
  double n = 0, sx = 0, sy = 0;
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c)
      if (m(r, c)) n += 1, sx += c + 0.5, sy += r + 0.5;
  double vxx = 0, vyy = 0, vxy = 0;
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c)
      if (m(r, c)) {
        const double dx = c + 0.5 - sx / n, dy = r + 0.5 - sy / n;
        vxx += dx * dx, vyy += dy * dy, vxy += dx * dy;
      }
  const double ref = 0.5 * std::atan2(2 * vxy, vxx - vyy);
  const BlobParams p = moments_init(m, g);
  EXPECT_NEAR(p.theta, kPi / 4, 0.05);
  EXPECT_NEAR(p.theta, ref, 1e-9);
}

TEST(MomentsInit, EmptyMaskThrows) {
  try {
    moments_init(BinaryMask(4, 4), FrameGeometry(4, 4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::empty_mask);
  }
  EXPECT_THROW(fit_ellipse(BinaryMask(4, 4), FrameGeometry(4, 4)), Error);
}

TEST(FitEllipse, RecoversKnownBlob) {
  const FrameGeometry g(64, 64);
  const BlobParams truth{32, 32, 0.3 * 64, 0.15 * 64, 0.4};
  const BinaryMask m = rasterize(truth, g, 64, 64);
  const FitResult r = fit_ellipse(m, g);
  EXPECT_GE(r.iou, 0.95);
  EXPECT_NEAR(r.iou, mask_iou(rasterize(r.params, g, 64, 64), m), 1e-12);
  EXPECT_TRUE(is_canonical(r.params));
  EXPECT_LE(r.iterations, 200);
}

TEST(FitEllipse, SinglePixel) {
  const FrameGeometry g(16, 16);
  BinaryMask m(16, 16);
  m.set(5, 9);
  const FitResult r = fit_ellipse(m, g);
  EXPECT_GT(r.iou, 0.0);
  const BlobParams init = moments_init(m, g);
  EXPECT_EQ(init.cx, 9.5);
  EXPECT_EQ(init.cy, 5.5);
  EXPECT_GE(r.params.b, 0.5);
}

TEST(FitEllipse, FullFrameBeatsInscribedEllipse) {
  const FrameGeometry g(32, 32);
  const BinaryMask m(32, 32, true);
  const double inscribed = mask_iou(rasterize({16, 16, 16, 16, 0}, g, 32, 32), m);
  EXPECT_GE(inscribed, kPi / 4 - 0.02);
  const FitResult r = fit_ellipse(m, g);
  EXPECT_GE(r.iou, inscribed);
}

TEST(FitEllipse, DeterministicAndNeverBelowInit) {
  Rng rng(77);
  const FrameGeometry g(64, 64);
  for (int i = 0; i < 20; ++i) {
    BinaryMask m(32, 32);
    // irregular union of two blobs
    const BlobParams p1{rng.uniform(16, 48), rng.uniform(16, 48), rng.uniform(4, 16), rng.uniform(3, 10),
                        rng.uniform(-1.5, 1.5)};
    const BlobParams p2{p1.cx + rng.uniform(-8, 8), p1.cy + rng.uniform(-8, 8), 6, 4, 0.2};
    const BinaryMask a = rasterize(p1, g, 32, 32), b = rasterize(p2, g, 32, 32);
    for (std::size_t k = 0; k < m.size(); ++k) m.set(k, a[k] || b[k]);
    const FitResult r1 = fit_ellipse(m, g), r2 = fit_ellipse(m, g);
    ASSERT_EQ(r1.params, r2.params);
    ASSERT_GE(r1.iou, mask_iou(rasterize(moments_init(m, g), g, 32, 32), m));
  }
}

TEST(InterpolateBlob, Endpoints) {
  const BlobParams p1{100, 100, 50, 30, 0.3}, p2{200, 300, 70, 50, -0.2};
  EXPECT_EQ(interpolate_blob_params(p1, p2, 0.0), p1);
  EXPECT_EQ(interpolate_blob_params(p1, p2, 1.0), p2);
  EXPECT_THROW(interpolate_blob_params(p1, p2, 1.5), Error);
  EXPECT_THROW(interpolate_blob_params(p1, p2, -0.1), Error);
}

TEST(InterpolateBlob, Midpoint) {
  const BlobParams m = interpolate_blob_params({100, 100, 50, 30, 0}, {200, 300, 70, 50, 0}, 0.5);
  EXPECT_EQ(m, (BlobParams{150, 200, 60, 40, 0}));
}

TEST(InterpolateBlob, WrapsThroughHalfTurnBoundary) {
  const BlobParams p1{0, 0, 5, 2, -kPi / 2 + 0.1}, p2{0, 0, 5, 2, kPi / 2 - 0.1};
  const BlobParams m = interpolate_blob_params(p1, p2, 0.5);
  EXPECT_NEAR(m.theta, kPi / 2, 1e-12);
}

TEST(InterpolateBlob, FixedPointAndSymmetry) {
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const BlobParams p1 = canonicalize({rng.uniform(0, 100), rng.uniform(0, 100), rng.uniform(1, 30),
                                        rng.uniform(1, 30), rng.uniform(-3, 3)});
    const BlobParams p2 = canonicalize({rng.uniform(0, 100), rng.uniform(0, 100), rng.uniform(1, 30),
                                        rng.uniform(1, 30), rng.uniform(-3, 3)});
    const double a = rng.uniform();
    const BlobParams same = interpolate_blob_params(p1, p1, a);
    ASSERT_NEAR(same.cx, p1.cx, 1e-12);
    ASSERT_NEAR(same.a, p1.a, 1e-12);
    ASSERT_NEAR(same.theta, p1.theta, 1e-12);
    const double t1 = interpolate_blob_params(p1, p2, a).theta;
    const double t2 = interpolate_blob_params(p2, p1, 1 - a).theta;
    const double d = std::remainder(t1 - t2, kPi);
    ASSERT_NEAR(d, 0.0, 1e-9) << t1 << " " << t2;
  }
}
