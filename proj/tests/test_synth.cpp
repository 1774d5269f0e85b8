#include <gtest/gtest.h>

#include "oracles.hpp"
#include "scd/errors.hpp"
#include "scd/synth.hpp"

namespace scd {
namespace {

std::vector<oracle::Plane> oracle_planes(const SceneSpec& s) {
  std::vector<oracle::Plane> out;
  for (const PlaneSpec& p : s.planes) {
    oracle::Plane q{p.normal, p.offset};
    if (p.bounds) {
      q.lo = p.bounds->min;
      q.hi = p.bounds->max;
    }
    out.push_back(q);
  }
  return out;
}

// Slab test against the box at its position in `frame`; returns camera depth.
std::optional<double> box_depth(const SceneSpec& s, std::size_t frame, double u, double v) {
  const PoseSE3& pose = s.camera_path[frame];
  const Intrinsics& K = s.intrinsics;
  const Eigen::Vector3d c = -pose.rotation().transpose() * pose.translation();
  const Eigen::Vector3d dir = pose.rotation().transpose() * Eigen::Vector3d((u - K.cx) / K.fx, (v - K.cy) / K.fy, 1);
  const Eigen::Vector3d center = s.moving_box->center + double(frame) * s.moving_box->translation_per_frame;
  double t0 = -1e300, t1 = 1e300;
  for (int i = 0; i < 3; ++i) {
    const double lo = center[i] - s.moving_box->half_extent[i], hi = center[i] + s.moving_box->half_extent[i];
    if (std::abs(dir[i]) < 1e-15) {
      if (c[i] < lo || c[i] > hi) return std::nullopt;
      continue;
    }
    double a = (lo - c[i]) / dir[i], b = (hi - c[i]) / dir[i];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  }
  if (t0 > t1 || t0 <= 1e-6) return std::nullopt;
  return t0;
}

TEST(Render, FrontoParallelIdentityMotion) {
  const SceneSpec s = scenes::fronto_parallel(1, 24, 2, 5.0, Eigen::Vector3d::Zero());
  const auto fr = render(s);
  ASSERT_EQ(fr.size(), 2u);
  for (const auto& f : fr) {
    EXPECT_TRUE((f.depth.values() == 5.0).all());
    EXPECT_FALSE(f.occlusion_mask.any());
    EXPECT_FALSE(f.dynamic_mask.any());
  }
}

TEST(Render, DepthMatchesAnalyticIntersection) {
  const SceneSpec s = scenes::static_planes(4, 40, 3);
  const auto fr = render(s);
  const auto planes = oracle_planes(s);
  const Intrinsics& K = s.intrinsics;
  for (std::size_t f = 0; f < fr.size(); ++f) {
    const PoseSE3& p = s.camera_path[f];
    for (int v = 0; v < 40; ++v) {
      for (int u = 0; u < 40; ++u) {
        const auto d = oracle::ray_depth(planes, p.rotation(), p.translation(), u, v, K.fx, K.fy, K.cx, K.cy);
        ASSERT_TRUE(d.has_value());
        EXPECT_NEAR(fr[f].depth(v, u), *d, 1e-9);
      }
    }
  }
}

TEST(Render, OcclusionMaskMatchesBruteForceVisibility) {
  const SceneSpec s = scenes::occlusion_band(2, 64);
  const auto fr = render(s);
  const auto planes = oracle_planes(s);
  const Intrinsics& K = s.intrinsics;
  const PoseSE3 p01 = relative_gt_pose(fr[0], fr[1]);
  const PoseSE3& cam1 = s.camera_path[1];
  int occluded = 0;
  for (int v = 0; v < 64; ++v) {
    for (int u = 0; u < 64; ++u) {
      const double d = fr[0].depth(v, u);
      const Eigen::Vector3d x0(d * (u - K.cx) / K.fx, d * (v - K.cy) / K.fy, d);
      const Eigen::Vector3d x1 = p01 * x0;
      const double u1 = K.fx * x1.x() / x1.z() + K.cx, v1 = K.fy * x1.y() / x1.z() + K.cy;
      bool hidden = false;
      if (u1 >= 0 && u1 <= 63 && v1 >= 0 && v1 <= 63) {
        const auto seen = oracle::ray_depth(planes, cam1.rotation(), cam1.translation(), u1, v1, K.fx, K.fy, K.cx, K.cy);
        hidden = seen && *seen < x1.z() * (1 - 1e-6);
      }
      EXPECT_EQ(bool(fr[0].occlusion_mask(v, u)), hidden) << u << "," << v;
      occluded += hidden;
    }
  }
  EXPECT_GT(occluded, 0);
  EXPECT_FALSE(fr[1].occlusion_mask.any());
}

TEST(Render, DynamicMaskIsTheBoxFootprint) {
  const SceneSpec s = scenes::moving_box(3, 48);
  const auto fr = render(s);
  const auto planes = oracle_planes(s);
  const Intrinsics& K = s.intrinsics;
  for (std::size_t f = 0; f < fr.size(); ++f) {
    const PoseSE3& p = s.camera_path[f];
    int on_box = 0;
    for (int v = 0; v < 48; ++v) {
      for (int u = 0; u < 48; ++u) {
        const auto plane = oracle::ray_depth(planes, p.rotation(), p.translation(), u, v, K.fx, K.fy, K.cx, K.cy);
        const auto box = box_depth(s, f, u, v);
        const bool expect = box && (!plane || *box < *plane);
        EXPECT_EQ(bool(fr[f].dynamic_mask(v, u)), expect);
        if (expect) EXPECT_NEAR(fr[f].depth(v, u), *box, 1e-9);
        on_box += expect;
      }
    }
    EXPECT_GT(on_box, 0);
  }
}

TEST(Render, DeterministicForSeed) {
  const auto a = render(scenes::moving_box(9, 32));
  const auto b = render(scenes::moving_box(9, 32));
  const auto c = render(scenes::moving_box(10, 32));
  for (std::size_t f = 0; f < a.size(); ++f) {
    EXPECT_TRUE((a[f].image.channel(0) == b[f].image.channel(0)).all());
    EXPECT_TRUE((a[f].depth.values() == b[f].depth.values()).all());
  }
  EXPECT_FALSE((a[0].image.channel(0) == c[0].image.channel(0)).all());
}

TEST(Render, ReprojectionOfStaticPixelsLandsOnNextSurface) {
  const SceneSpec s = scenes::static_planes(6, 48, 2);
  const auto fr = render(s);
  const PoseSE3 p01 = relative_gt_pose(fr[0], fr[1]);
  const Intrinsics& K = s.intrinsics;
  int checked = 0;
  for (int v = 0; v < 48; ++v) {
    for (int u = 0; u < 48; ++u) {
      if (fr[0].occlusion_mask(v, u)) continue;
      const Eigen::Vector3d x1 = p01 * lift({double(u), double(v)}, fr[0].depth(v, u), K);
      const Projection q = project(x1, K);
      if (q.pixel.u < 0 || q.pixel.u > 47 || q.pixel.v < 0 || q.pixel.v > 47) continue;
      const auto hit = cast_ray(s, 1, q.pixel.u, q.pixel.v);
      ASSERT_TRUE(hit.has_value());
      EXPECT_NEAR(hit->depth, q.depth, 1e-6);
      ++checked;
    }
  }
  EXPECT_GT(checked, 1000);
}

TEST(Render, ColorScenes) {
  SceneSpec s = scenes::static_planes(1, 16);
  s.channels = 3;
  const auto fr = render(s);
  EXPECT_EQ(fr[0].image.channels(), 3);
  EXPECT_FALSE((fr[0].image.channel(0) == fr[0].image.channel(1)).all());
}

TEST(Render, UncoveredFrustumIsInvalidScene) {
  SceneSpec s = scenes::static_planes(1, 16);
  s.planes.erase(s.planes.begin());  // keep only the floor
  try {
    render(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidScene);
  }
}

TEST(SceneSpec, Validation) {
  SceneSpec s = scenes::static_planes(1, 16);
  SceneSpec bad = s;
  bad.camera_path.clear();
  EXPECT_THROW(bad.validate(), Error);
  bad = s;
  bad.planes.clear();
  EXPECT_THROW(bad.validate(), Error);
  bad = s;
  bad.planes[0].texture.albedo_max = 1.5;
  EXPECT_THROW(bad.validate(), Error);
  bad = s;
  bad.intrinsics.width = 17;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(PerfectLoss, StaticScenesAreNearZero) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const SceneSpec s = scenes::static_planes(seed, 128, 3);
    for (const LossReport& r : perfect_loss_check(render(s), s.intrinsics)) EXPECT_LT(r.total, 1e-3);
  }
}

TEST(PerfectLoss, OccludedPixelsCarryThePhotometricError) {
  const SceneSpec s = scenes::occlusion_band(1);
  const auto fr = render(s);
  const LossReport r = perfect_loss_check(fr[0], fr[1], s.intrinsics);
  double occ = 0, vis = 0;
  int no = 0, nv = 0;
  for (int v = 0; v < s.height; ++v) {
    for (int u = 0; u < s.width; ++u) {
      if (!r.mask.valid(v, u)) continue;
      if (fr[0].occlusion_mask(v, u)) {
        occ += r.per_pixel_lp(v, u);
        ++no;
      } else {
        vis += r.per_pixel_lp(v, u);
        ++nv;
      }
    }
  }
  ASSERT_GT(no, 0);
  EXPECT_GT(occ / no, vis / nv);
}

TEST(PerfectLoss, MaskIsLowOnTheMovingBox) {
  const SceneSpec s = scenes::moving_box(1);
  const auto fr = render(s);
  const LossReport r = perfect_loss_check(fr[0], fr[1], s.intrinsics);
  double dyn = 0, stat = 0;
  int nd = 0, ns = 0;
  for (int v = 0; v < s.height; ++v) {
    for (int u = 0; u < s.width; ++u) {
      if (!r.mask.valid(v, u)) continue;
      (fr[0].dynamic_mask(v, u) ? dyn : stat) += r.mask.values(v, u);
      ++(fr[0].dynamic_mask(v, u) ? nd : ns);
    }
  }
  ASSERT_GT(nd, 0);
  EXPECT_LT(dyn / nd, stat / ns);
}

}  // namespace
}  // namespace scd
