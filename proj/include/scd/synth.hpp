#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "scd/geometry.hpp"
#include "scd/image.hpp"
#include "scd/losses.hpp"

namespace scd {

/// Smooth procedural albedo: a normalized sum of 3D sinusoids whose wave
/// vectors and phases are drawn from the scene seed.
struct TextureSpec {
  double albedo_min = 0.2;
  double albedo_max = 0.8;
  double wavelength_min = 1.0;  ///< world units
  double wavelength_max = 3.0;
  int components = 4;
  /// Evaluate the sinusoids in world space with waves drawn from the scene
  /// seed alone, so every solid plane with the same parameters shows one
  /// continuous texture (no seam where planes meet).
  bool solid = false;
};

struct AxisBox {
  Eigen::Vector3d min = Eigen::Vector3d::Constant(-1e300);
  Eigen::Vector3d max = Eigen::Vector3d::Constant(1e300);
  bool contains(const Eigen::Vector3d& x, double tol = 0.0) const;
};

/// Plane n·X = offset in world coordinates, optionally clipped to an
/// axis-aligned region (a hit outside `bounds` is a miss).
struct PlaneSpec {
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  double offset = 5.0;
  TextureSpec texture;
  std::optional<AxisBox> bounds;
};

/// Axis-aligned textured box that moves rigidly by `translation_per_frame`
/// each frame. Its texture is attached to the box.
struct MovingBox {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d half_extent = Eigen::Vector3d::Constant(0.5);
  Eigen::Vector3d translation_per_frame = Eigen::Vector3d::Zero();
  TextureSpec texture;
};

struct SceneSpec {
  int width = 64;
  int height = 64;
  int channels = 1;
  Intrinsics intrinsics;
  std::uint64_t seed = 0;
  std::vector<PlaneSpec> planes;
  std::optional<MovingBox> moving_box;
  std::vector<PoseSE3> camera_path;  ///< world-to-camera, one per frame

  /// Throws kInvalidScene for structural problems (no frames, no surfaces,
  /// size mismatch with the intrinsics, bad texture ranges).
  void validate() const;
};

struct RenderedFrame {
  Image image;
  DepthMap depth;
  PoseSE3 gt_pose;          ///< world-to-camera
  BoolGrid occlusion_mask;  ///< surface point hidden in the next frame (empty for the last)
  BoolGrid dynamic_mask;    ///< pixel sees the moving box
};

/// Ray casts every pixel of every frame. Throws kInvalidScene when a pixel
/// ray hits no surface.
std::vector<RenderedFrame> render(const SceneSpec& spec);

/// Nearest hit along the ray through pixel (u, v) of a frame. Returns the
/// depth (camera z) and whether it is on the moving box; nullopt on a miss.
struct RayHit {
  double depth = 0.0;
  bool on_box = false;
};
std::optional<RayHit> cast_ray(const SceneSpec& spec, std::size_t frame, double u, double v);

/// Relative ground-truth pose P_ab between two rendered frames.
PoseSE3 relative_gt_pose(const RenderedFrame& a, const RenderedFrame& b);

/// total_loss of a consecutive pair at its ground-truth depths and pose.
LossReport perfect_loss_check(const RenderedFrame& a, const RenderedFrame& b, const Intrinsics& K,
                              const LossWeights& w = {});
/// One report per consecutive pair of `frames`.
std::vector<LossReport> perfect_loss_check(const std::vector<RenderedFrame>& frames, const Intrinsics& K,
                                           const LossWeights& w = {});

/// Canned scenes shared by tests, the acceptance suite and the CLI examples.
namespace scenes {

/// A fronto-parallel wall and a floor sharing one solid texture, with a small
/// seeded camera motion; no occlusion, no moving object.
SceneSpec static_planes(std::uint64_t seed, int size = 128, int frames = 2);
/// Single fronto-parallel plane at `depth`, camera translating by `step` per
/// frame (world-to-camera translation is -k·step).
SceneSpec fronto_parallel(std::uint64_t seed, int size, int frames, double depth,
                          const Eigen::Vector3d& step);
/// Foreground half-plane in front of a wall, camera sliding along +x.
SceneSpec occlusion_band(std::uint64_t seed, int size = 96);
/// Textured box in front of a wall, moving against the camera motion.
SceneSpec moving_box(std::uint64_t seed, int size = 96);

}  // namespace scenes

}  // namespace scd
