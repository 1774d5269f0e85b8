#include <gtest/gtest.h>

#include "oracles.hpp"
#include "scd/errors.hpp"
#include "scd/losses.hpp"
#include "scd/random.hpp"

namespace scd {
namespace {

Intrinsics square_k(int n) {
  Intrinsics K;
  K.fx = K.fy = 0.9 * n;
  K.cx = K.cy = (n - 1) / 2.0;
  K.width = K.height = n;
  return K;
}

Image random_image(Rng& rng, int h, int w, int channels = 1) {
  std::vector<Grid> ch;
  for (int c = 0; c < channels; ++c) {
    Grid g(h, w);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.uniform();
    ch.push_back(g);
  }
  return Image(ch);
}

double closed_form_dissimilarity(double c1, double c2) {
  const double s = (2 * c1 * c2 + kSsimC1) / (c1 * c1 + c2 * c2 + kSsimC1);
  return (1 - s) / 2;
}

// Identity warp of a constant source image onto frame a.
WarpResult constant_warp(int n, double value) {
  const DepthMap d = DepthMap::constant(n, n, 2.0);
  return warp_pair(Image::constant(1, n, n, value), d, d, PoseSE3(), square_k(n));
}

TEST(Ssim, IdenticalImagesGiveZero) {
  Rng rng(1);
  const Image a = random_image(rng, 9, 11, 3);
  EXPECT_TRUE((ssim_dissimilarity(a, a) == 0.0).all());
}

TEST(Ssim, ConstantImagesMatchClosedForm) {
  for (auto [c1, c2] : {std::pair{0.2, 0.5}, {0.0, 1.0}, {0.7, 0.69}}) {
    const Grid g = ssim_dissimilarity(Image::constant(1, 6, 7, c1), Image::constant(1, 6, 7, c2));
    EXPECT_LT((g - closed_form_dissimilarity(c1, c2)).abs().maxCoeff(), 1e-15);
  }
}

TEST(Ssim, MatchesScalarWindowOracleWithBorderClamping) {
  Rng rng(2);
  const int h = 7, w = 9;
  const Image x = random_image(rng, h, w, 3), y = random_image(rng, h, w, 3);
  const Grid g = ssim_dissimilarity(x, y);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const int cv = std::clamp(v, 1, h - 2), cu = std::clamp(u, 1, w - 2);
      double mean = 0;
      for (int c = 0; c < 3; ++c) {
        double xs[9], ys[9];
        for (int k = 0; k < 9; ++k) {
          xs[k] = x(c, cv + k / 3 - 1, cu + k % 3 - 1);
          ys[k] = y(c, cv + k / 3 - 1, cu + k % 3 - 1);
        }
        mean += oracle::ssim9(xs, ys) / 3;
      }
      EXPECT_NEAR(g(v, u), std::clamp((1 - mean) / 2, 0.0, 1.0), 1e-14);
    }
  }
}

TEST(Ssim, OutputInUnitRange) {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const Grid g = ssim_dissimilarity(random_image(rng, 5, 6), random_image(rng, 5, 6));
    EXPECT_GE(g.minCoeff(), 0.0);
    EXPECT_LE(g.maxCoeff(), 1.0);
  }
}

TEST(Ssim, ShapeMismatch) {
  EXPECT_THROW(ssim_dissimilarity(Image::constant(1, 5, 5, 0.1), Image::constant(1, 5, 6, 0.1)), Error);
}

TEST(Photometric, IdentityIsZero) {
  Rng rng(4);
  const Image a = random_image(rng, 8, 8);
  const DepthMap d = DepthMap::constant(8, 8, 2.0);
  EXPECT_EQ(photometric_loss(a, warp_pair(a, d, d, PoseSE3(), square_k(8)), {}).value, 0.0);
}

TEST(Photometric, L1HandArithmetic) {
  LossWeights w;
  w.lambda_i = 1;
  w.lambda_s = 0;
  EXPECT_NEAR(photometric_loss(Image::constant(1, 6, 6, 0.2), constant_warp(6, 0.5), w).value, 0.3, 1e-15);
}

TEST(Photometric, MixedClosedForm) {
  const double c1 = 0.2, c2 = 0.5;
  const double expect = 0.15 * std::abs(c1 - c2) + 0.85 * closed_form_dissimilarity(c1, c2);
  EXPECT_NEAR(photometric_loss(Image::constant(1, 6, 6, c1), constant_warp(6, c2), {}).value, expect, 1e-15);
}

TEST(Photometric, L1AveragesOverChannels) {
  LossWeights w;
  w.lambda_i = 1;
  w.lambda_s = 0;
  const Image a({Grid::Constant(5, 5, 0.1), Grid::Constant(5, 5, 0.2), Grid::Constant(5, 5, 0.3)});
  const Image b({Grid::Constant(5, 5, 0.2), Grid::Constant(5, 5, 0.2), Grid::Constant(5, 5, 0.6)});
  const DepthMap d = DepthMap::constant(5, 5, 1.0);
  EXPECT_NEAR(photometric_loss(a, warp_pair(b, d, d, PoseSE3(), square_k(5)), w).value, 0.4 / 3, 1e-15);
}

TEST(Photometric, EmptyValidSet) {
  const DepthMap d = DepthMap::constant(6, 6, 1.0);
  const WarpResult wr = warp_pair(Image::constant(1, 6, 6, 0.5), d, d, PoseSE3(Eigen::Matrix3d::Identity(), {50, 0, 0}),
                                  square_k(6));
  try {
    photometric_loss(Image::constant(1, 6, 6, 0.5), wr, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kEmptyValidSet);
  }
}

TEST(Smoothness, ConstantDepthIsZero) {
  Rng rng(5);
  EXPECT_EQ(smoothness_loss(DepthMap::constant(7, 7, 3.0), random_image(rng, 7, 7)), 0.0);
}

TEST(Smoothness, RampCountsForwardDifferences) {
  const int h = 5, w = 8;
  Grid d(h, w);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) d(v, u) = u + 1.0;
  const double expect = double(h * (w - 1)) / (h * w);
  EXPECT_NEAR(smoothness_loss(DepthMap(d), Image::constant(1, h, w, 0.3)), expect, 1e-15);
}

TEST(Smoothness, StrongerEdgesLowerTheLoss) {
  const int h = 4, w = 6;
  Grid d(h, w);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) d(v, u) = 1.0 + 0.5 * u;
  double previous = 1e300;
  for (double contrast : {0.0, 0.1, 0.2, 0.4}) {
    Grid g(h, w);
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) g(v, u) = 0.5 + ((u % 2) ? contrast : -contrast);
    const double l = smoothness_loss(DepthMap(d), Image({g}));
    EXPECT_LT(l, previous);
    previous = l;
  }
}

TEST(Smoothness, NormalizationRemovesDepthScale) {
  Rng rng(6);
  Grid d(6, 6);
  for (Eigen::Index i = 0; i < d.size(); ++i) d.data()[i] = rng.uniform(1, 3);
  const Image img = random_image(rng, 6, 6);
  LossOptions o;
  o.normalize_smoothness_depth = true;
  EXPECT_NEAR(smoothness_loss(DepthMap(d), img, o), smoothness_loss(DepthMap(7.0 * d), img, o), 1e-14);
  EXPECT_NEAR(smoothness_loss(DepthMap(7.0 * d), img), 49.0 * smoothness_loss(DepthMap(d), img), 1e-12);
}

TEST(DepthInconsistency, Examples) {
  EXPECT_EQ(depth_inconsistency(2.0, 2.0), 0.0);
  EXPECT_DOUBLE_EQ(depth_inconsistency(1.0, 3.0), 0.5);
  EXPECT_EQ(depth_inconsistency(1.0, 3.0), depth_inconsistency(3.0, 1.0));
}

TEST(DepthInconsistency, RangeSymmetryAndScaleInvarianceOnRandomPairs) {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double x = std::exp(rng.uniform(-10, 10)), y = std::exp(rng.uniform(-10, 10));
    const double k = std::exp(rng.uniform(-5, 5));
    const double d = depth_inconsistency(x, y);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0);
    EXPECT_EQ(d, depth_inconsistency(y, x));
    EXPECT_NEAR(depth_inconsistency(k * x, k * y), d, 1e-12);
  }
}

InconsistencyMap half_map(double value) {
  InconsistencyMap m;
  m.values = Grid::Zero(4, 4);
  m.values.topRows(2) = value;
  m.valid = BoolGrid::Constant(4, 4, true);
  return m;
}

TEST(GcLoss, Examples) {
  EXPECT_EQ(gc_loss(half_map(0.0)), 0.0);
  EXPECT_DOUBLE_EQ(gc_loss(half_map(0.5)), 0.25);
  InconsistencyMap empty = half_map(0.5);
  empty.valid.setConstant(false);
  EXPECT_THROW(gc_loss(empty), Error);
}

TEST(GcLoss, IgnoresInvalidPixels) {
  InconsistencyMap m = half_map(0.5);
  m.valid.bottomRows(2).setConstant(false);
  EXPECT_DOUBLE_EQ(gc_loss(m), 0.5);
}

TEST(WeightMask, OneMinusInconsistency) {
  const WeightMask m = weight_mask(half_map(0.5));
  EXPECT_TRUE((m.values.topRows(2) == 0.5).all());
  EXPECT_TRUE((m.values.bottomRows(2) == 1.0).all());
}

TEST(MaskedPhotometric, Examples) {
  const Grid lp = Grid::Constant(4, 4, 0.4);
  WeightMask m = weight_mask(half_map(0.5));
  EXPECT_NEAR(masked_photometric_loss(lp, m), 0.3, 1e-15);
  m.values.setOnes();
  EXPECT_NEAR(masked_photometric_loss(lp, m), 0.4, 1e-15);
  m.values.setZero();
  EXPECT_EQ(masked_photometric_loss(lp, m), 0.0);
  m.valid.setConstant(false);
  EXPECT_THROW(masked_photometric_loss(lp, m), Error);
}

TEST(MaskedPhotometric, MonotoneInInconsistency) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    InconsistencyMap d;
    d.values = Grid(5, 5);
    d.valid = BoolGrid::Constant(5, 5, true);
    Grid lp(5, 5);
    for (int i = 0; i < 25; ++i) {
      d.values.data()[i] = rng.uniform();
      lp.data()[i] = rng.uniform();
    }
    InconsistencyMap more = d;
    for (int i = 0; i < 25; ++i) more.values.data()[i] = std::min(1.0, d.values.data()[i] + rng.uniform(0, 0.3));
    EXPECT_LE(masked_photometric_loss(lp, weight_mask(more)), masked_photometric_loss(lp, weight_mask(d)));
  }
}

struct Scene {
  Image a, b;
  DepthMap da, db;
  PoseSE3 p;
  Intrinsics K;
};

Scene random_scene(std::uint64_t seed) {
  Rng rng(seed);
  const int n = 12;
  Scene s{random_image(rng, n, n), random_image(rng, n, n), {}, {}, {}, square_k(n)};
  Grid da(n, n), db(n, n);
  for (int i = 0; i < n * n; ++i) {
    da.data()[i] = rng.uniform(2, 4);
    db.data()[i] = rng.uniform(2, 4);
  }
  s.da = DepthMap(da);
  s.db = DepthMap(db);
  s.p = exp_twist(Twist::from_vector((Vector6d() << 0.01, -0.02, 0.005, 0.1, 0.05, -0.1).finished()));
  return s;
}

TEST(TotalLoss, IdentityIdenticalFramesIsZero) {
  Rng rng(9);
  const Image a = random_image(rng, 10, 10);
  const DepthMap d = DepthMap::constant(10, 10, 3.0);
  const LossReport r = total_loss(a, a, d, d, PoseSE3(), square_k(10));
  EXPECT_EQ(r.l_p, 0.0);
  EXPECT_EQ(r.l_gc, 0.0);
  EXPECT_EQ(r.l_s, 0.0);
  EXPECT_EQ(r.total, 0.0);
  EXPECT_EQ(r.valid_count, 100);
}

TEST(TotalLoss, DefaultWeightsAndComposition) {
  const LossWeights w;
  EXPECT_EQ(w.alpha, 1.0);
  EXPECT_EQ(w.beta, 0.1);
  EXPECT_EQ(w.gamma, 0.5);
  EXPECT_EQ(w.lambda_i, 0.15);
  EXPECT_EQ(w.lambda_s, 0.85);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Scene s = random_scene(seed);
    const LossReport r = total_loss(s.a, s.b, s.da, s.db, s.p, s.K);
    EXPECT_EQ(r.total, 1.0 * r.l_p_masked + 0.1 * r.l_s + 0.5 * r.l_gc);
    EXPECT_EQ(r.valid_count, r.d_diff.valid.count());
    EXPECT_GE(r.l_gc, 0.0);
    EXPECT_LE(r.l_gc, 1.0);
    for (int i = 0; i < r.mask.values.size(); ++i) {
      if (!r.mask.valid.data()[i]) continue;
      EXPECT_EQ(r.mask.values.data()[i], 1.0 - r.d_diff.values.data()[i]);
      EXPECT_GE(r.mask.values.data()[i], 0.0);
      EXPECT_LE(r.mask.values.data()[i], 1.0);
    }
  }
}

TEST(TotalLoss, GammaZeroExcludesGcButStillReportsIt) {
  const Scene s = random_scene(11);
  LossWeights w;
  w.gamma = 0;
  const LossReport r = total_loss(s.a, s.b, s.da, s.db, s.p, s.K, w);
  EXPECT_GT(r.l_gc, 0.0);
  EXPECT_EQ(r.total, r.l_p_masked + 0.1 * r.l_s);
}

TEST(TotalLoss, ReductionsWithUnitMaskAndNoSsim) {
  const Scene s = random_scene(12);
  LossWeights w;
  w.lambda_s = 0;
  w.lambda_i = 1;
  const LossReport r = total_loss(s.a, s.b, s.da, s.db, s.p, s.K, w);
  const WarpResult wr = warp_pair(s.b, s.da, s.db, s.p, s.K);
  double l1 = 0;
  for (int v = 0; v < 12; ++v)
    for (int u = 0; u < 12; ++u)
      if (wr.valid(v, u)) l1 += std::abs(s.a(0, v, u) - wr.synthesized(0, v, u));
  EXPECT_NEAR(r.l_p, l1 / wr.valid_count, 1e-15);
  WeightMask ones = r.mask;
  ones.values.setOnes();
  EXPECT_NEAR(masked_photometric_loss(r.per_pixel_lp, ones), r.l_p, 1e-15);
}

TEST(TotalLoss, BidirectionalAveragesDirections) {
  const Scene s = random_scene(13);
  const LossReport f = total_loss(s.a, s.b, s.da, s.db, s.p, s.K);
  const LossReport b = total_loss(s.b, s.a, s.db, s.da, s.p.inverse(), s.K);
  const LossReport both = total_loss(s.a, s.b, s.da, s.db, s.p, s.K, {}, true);
  EXPECT_NEAR(both.total, 0.5 * (f.total + b.total), 1e-15);
  EXPECT_NEAR(both.l_gc, 0.5 * (f.l_gc + b.l_gc), 1e-15);
  EXPECT_EQ(both.valid_count, f.valid_count);
}

TEST(TotalLoss, EmptyValidSetPropagates) {
  const Scene s = random_scene(14);
  try {
    total_loss(s.a, s.b, s.da, s.db, PoseSE3(Eigen::Matrix3d::Identity(), {100, 0, 0}), s.K);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kEmptyValidSet);
  }
}

TEST(LossWeights, RejectNegative) {
  LossWeights w;
  w.beta = -0.1;
  EXPECT_THROW(w.validate(), Error);
}

}  // namespace
}  // namespace scd
