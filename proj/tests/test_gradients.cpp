#include <gtest/gtest.h>

#include "scd/errors.hpp"
#include "scd/gradients.hpp"
#include "scd/synth.hpp"

namespace scd {
namespace {

double depth_rms(const Grid& g) { return std::sqrt(g.square().mean()); }

TEST(FiniteDifference, QuadraticIsExactForCentral) {
  auto f = [](double x) { return 3 * x * x + 2 * x + 1; };
  const double x = 0.7, h = 1e-3;
  const Difference d = finite_difference(f, x, h);
  EXPECT_NEAR(d.central, 6 * x + 2, 1e-9);
  EXPECT_NEAR(d.forward - (6 * x + 2), 3 * h, 1e-9);
  EXPECT_NEAR(d.backward - (6 * x + 2), -3 * h, 1e-9);
}

TEST(FiniteDifference, OneSidedEstimatesBracketCentral) {
  for (double x : {-2.0, 0.1, 1.3}) {
    const Difference d = finite_difference([](double t) { return std::exp(t) + t * t * t; }, x, 1e-3);
    EXPECT_LE(std::min(d.forward, d.backward), d.central);
    EXPECT_GE(std::max(d.forward, d.backward), d.central);
  }
}

TEST(FiniteDifference, CentralErrorIsSecondOrder) {
  auto f = [](double t) { return std::sin(3 * t); };
  const double exact = 3 * std::cos(3 * 0.4);
  const double e1 = std::abs(finite_difference(f, 0.4, 1e-2).central - exact);
  const double e2 = std::abs(finite_difference(f, 0.4, 5e-3).central - exact);
  EXPECT_NEAR(e1 / e2, 4.0, 0.05);
}

// 4×4 linear ramp, pure x-translation shifting by half a pixel; L1 only.
struct RampCase {
  Image ia, ib;
  DepthMap d;
  PoseSE3 p;
  Intrinsics K;
  LossWeights w;
};

RampCase ramp_case() {
  RampCase c;
  Grid gb(4, 4);
  for (int v = 0; v < 4; ++v)
    for (int u = 0; u < 4; ++u) gb(v, u) = 0.1 + 0.05 * u;
  c.ib = Image({gb});
  c.ia = Image::constant(1, 4, 4, 0.9);
  c.d = DepthMap::constant(4, 4, 2.0);
  c.p = PoseSE3(Eigen::Matrix3d::Identity(), {0.5, 0, 0});
  c.K.fx = c.K.fy = 2.0;
  c.K.cx = c.K.cy = 1.5;
  c.K.width = c.K.height = 4;
  c.w.lambda_i = 1;
  c.w.lambda_s = 0;
  c.w.beta = 0;
  c.w.gamma = 0;
  return c;
}

TEST(FdGradient, PureTranslationOnRampMatchesHandChainRule) {
  const RampCase c = ramp_case();
  // Every valid pixel has r = I_a - I'_a > 0 and dI'/du' = 0.05, du'/dv_x = fx/z = 1,
  // so dL/dv_x = -0.05; v_y and v_z leave u' unchanged or move it along the ramp.
  const GradReport fd = fd_gradient(c.ia, c.ib, c.d, c.d, c.p, c.K, c.w);
  EXPECT_NEAR(fd.d_loss_d_twist[3], -0.05, 1e-9);
  EXPECT_NEAR(fd.d_loss_d_twist[4], 0.0, 1e-9);
  const GradReport an = loss_gradients(c.ia, c.ib, c.d, c.d, c.p, c.K, c.w);
  EXPECT_NEAR(an.d_loss_d_twist[3], -0.05, 1e-12);
  // u' = u + fx·tx/z, so du'/dz = -fx·tx/z² = -0.25 at every valid pixel, each weighted 1/|V|.
  const WarpResult wr = warp_pair(c.ib, c.d, c.d, c.p, c.K);
  ASSERT_EQ(wr.valid_count, 12);
  for (int v = 0; v < 4; ++v)
    for (int u = 0; u < 3; ++u) EXPECT_NEAR(an.d_loss_d_depth(v, u), -0.05 * -0.25 / 12, 1e-12);
}

TEST(Gradients, VanishAtGroundTruthOptimum) {
  // Fronto-parallel plane shifted by exactly two pixels: I'_a = I_a and D_b^a = D'_b.
  const int n = 32;
  const double depth = 5.0, fx = 0.9 * n;
  const SceneSpec spec = scenes::fronto_parallel(3, n, 2, depth, Eigen::Vector3d(2.0 * depth / fx, 0, 0));
  const auto fr = render(spec);
  const GradReport g = loss_gradients(fr[0].image, fr[1].image, fr[0].depth, fr[1].depth,
                                      relative_gt_pose(fr[0], fr[1]), spec.intrinsics);
  EXPECT_LT(g.value, 1e-12);
  EXPECT_LT(g.d_loss_d_twist.norm(), 1e-6);
  EXPECT_LT(depth_rms(g.d_loss_d_depth), 1e-6);
}

TEST(Gradients, FiniteOnRandomInstances) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const GradCheckInstance in = make_gradcheck_instance(1000 + s, 8 + s % 5, 9 + s % 4, s % 2 ? 3 : 1, 0.0);
    const GradReport g = loss_gradients(in.image_a, in.image_b, in.depth_a, in.depth_b, in.pose_ab, in.K);
    EXPECT_TRUE(g.d_loss_d_depth.isFinite().all());
    EXPECT_TRUE(g.d_loss_d_depth_b.isFinite().all());
    EXPECT_TRUE(g.d_loss_d_twist.allFinite());
    EXPECT_TRUE(std::isfinite(g.value));
  }
}

TEST(Gradients, MatchFiniteDifferences) {
  const GradCheckSummary s = run_gradcheck(21, 50, 8, 16, 1e-4);
  EXPECT_EQ(s.instances, 50);
  EXPECT_EQ(s.failures, 0);
  EXPECT_LE(s.max_rel_error, 1e-4);
}

TEST(Gradients, MatchFiniteDifferencesForEveryVariant) {
  for (int variant = 0; variant < 4; ++variant) {
    GradientOptions o;
    o.stop_gradient_mask = variant & 1;
    o.detach_interpolated_depth = variant & 2;
    o.loss.normalize_smoothness_depth = variant == 3;
    for (std::uint64_t s = 0; s < 5; ++s) {
      const GradCheckInstance in = make_gradcheck_instance(50 + s, 10, 12, 1 + 2 * (s % 2));
      const GradReport an = loss_gradients(in.image_a, in.image_b, in.depth_a, in.depth_b, in.pose_ab, in.K, {}, o);
      const GradReport fd = fd_gradient(in.image_a, in.image_b, in.depth_a, in.depth_b, in.pose_ab, in.K, {}, {}, o);
      EXPECT_LE(compare_gradients(an, fd).max(), 1e-4) << "variant " << variant << " seed " << s;
    }
  }
}

TEST(Gradients, VariantsDiffer) {
  const GradCheckInstance in = make_gradcheck_instance(77, 12, 12);
  GradientOptions stop;
  stop.stop_gradient_mask = true;
  const GradReport full = loss_gradients(in.image_a, in.image_b, in.depth_a, in.depth_b, in.pose_ab, in.K);
  const GradReport sg = loss_gradients(in.image_a, in.image_b, in.depth_a, in.depth_b, in.pose_ab, in.K, {}, stop);
  EXPECT_GT((full.d_loss_d_depth - sg.d_loss_d_depth).abs().maxCoeff(), 0.0);
  EXPECT_EQ(full.value, sg.value);
}

TEST(Gradients, StepAlongNegativeGradientDecreasesLoss) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const GradCheckInstance in = make_gradcheck_instance(200 + s, 12, 12);
    const GradReport g = loss_gradients(in.image_a, in.image_b, in.depth_a, in.depth_b, in.pose_ab, in.K);
    // Exact line search over a small bracket: the best step is strictly better.
    double best = g.value;
    for (double t = 1e-6; t <= 1e-2; t *= 2) {
      const DepthMap d(in.depth_a.values() - t * g.d_loss_d_depth);
      const PoseSE3 p = compose(in.pose_ab, exp_twist(Twist::from_vector(-t * g.d_loss_d_twist)));
      best = std::min(best, total_loss(in.image_a, in.image_b, d, in.depth_b, p, in.K).total);
    }
    EXPECT_LT(best, g.value) << "seed " << s;
  }
}

TEST(Gradients, DepthGradientVanishesWithoutParallax) {
  // Identity pose: projections do not depend on depth. With gamma = beta = 0
  // only the mask still sees D_a; stopping its gradient leaves zero.
  const GradCheckInstance in = make_gradcheck_instance(5, 10, 10);
  LossWeights w;
  w.beta = w.gamma = 0;
  GradientOptions opt;
  opt.stop_gradient_mask = true;
  const GradReport g = loss_gradients(in.image_a, in.image_b, in.depth_a, in.depth_b, PoseSE3(), in.K, w, opt);
  EXPECT_LT(g.d_loss_d_depth.abs().maxCoeff(), 1e-15);
  opt.stop_gradient_mask = false;
  const GradReport live = loss_gradients(in.image_a, in.image_b, in.depth_a, in.depth_b, PoseSE3(), in.K, w, opt);
  EXPECT_GT(live.d_loss_d_depth.abs().maxCoeff(), 0.0);
}

TEST(Gradients, TinyToleranceFails) {
  const GradCheckSummary s = run_gradcheck(21, 3, 8, 10, 1e-12);
  EXPECT_GT(s.failures, 0);
}

TEST(Gradients, CheckIsDeterministic) {
  EXPECT_EQ(run_gradcheck(4, 4, 8, 12, 1e-4).max_rel_error, run_gradcheck(4, 4, 8, 12, 1e-4).max_rel_error);
}

TEST(Gradients, EmptyValidSet) {
  const GradCheckInstance in = make_gradcheck_instance(1, 8, 8);
  try {
    loss_gradients(in.image_a, in.image_b, in.depth_a, in.depth_b, PoseSE3(Eigen::Matrix3d::Identity(), {99, 0, 0}),
                   in.K);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kEmptyValidSet);
  }
}

TEST(CompareGradients, RelativeToReferenceWithFloor) {
  GradReport a, r;
  a.d_loss_d_depth = Grid::Constant(1, 2, 0.0);
  r.d_loss_d_depth = Grid::Constant(1, 2, 0.0);
  a.d_loss_d_depth_b = r.d_loss_d_depth_b = Grid::Zero(1, 2);
  a.d_loss_d_depth(0, 0) = 1.1;
  r.d_loss_d_depth(0, 0) = 1.0;
  a.d_loss_d_depth(0, 1) = 1e-8;
  const GradientDiscrepancy d = compare_gradients(a, r);
  EXPECT_NEAR(d.depth, 0.1, 1e-12);
  EXPECT_EQ(d.twist, 0.0);
}

}  // namespace
}  // namespace scd
