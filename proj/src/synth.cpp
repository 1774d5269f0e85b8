#include "scd/synth.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "scd/errors.hpp"
#include "scd/random.hpp"

namespace scd {

bool AxisBox::contains(const Eigen::Vector3d& x, double tol) const {
  return (x.array() >= min.array() - tol).all() && (x.array() <= max.array() + tol).all();
}

void SceneSpec::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::kInvalidScene, m); };
  if (camera_path.empty()) fail("camera path is empty");
  if (planes.empty() && !moving_box) fail("scene has no surface");
  if (channels != 1 && channels != 3) fail("channels must be 1 or 3");
  if (width < 3 || height < 3) fail("image must be at least 3x3");
  if (intrinsics.width != width || intrinsics.height != height) fail("intrinsics size differs from image size");
  try {
    intrinsics.validate();
  } catch (const Error& e) {
    fail(e.what());
  }
  auto check_texture = [&](const TextureSpec& t) {
    if (!(t.albedo_min >= 0.0 && t.albedo_max <= 1.0 && t.albedo_min <= t.albedo_max)) {
      fail("albedo range must lie within [0, 1]");
    }
    if (!(t.wavelength_min > 0.0 && t.wavelength_max >= t.wavelength_min)) fail("bad wavelength range");
    if (t.components < 1) fail("texture needs at least one component");
  };
  for (const PlaneSpec& p : planes) {
    if (!(p.normal.norm() > 0.0)) fail("plane normal must be nonzero");
    check_texture(p.texture);
  }
  if (moving_box) {
    if (!(moving_box->half_extent.array() > 0.0).all()) fail("box extents must be positive");
    check_texture(moving_box->texture);
  }
}

namespace {

struct Hit {
  double depth = 0.0;
  int surface = -1;  // plane index, or planes.size() for the box
  Eigen::Vector3d point = Eigen::Vector3d::Zero();  // world coordinates
};

struct Texture {
  struct Wave {
    Eigen::Vector3d k;
    double amplitude;
    double phase[3];
  };
  std::vector<Wave> waves;
  double amplitude_sum = 0.0;
  double lo = 0.0, hi = 1.0;

  double albedo(const Eigen::Vector3d& x, int channel) const {
    double s = 0.0;
    for (const Wave& w : waves) s += w.amplitude * std::sin(w.k.dot(x) + w.phase[channel]);
    return std::clamp(lo + (hi - lo) * (0.5 + 0.5 * s / amplitude_sum), 0.0, 1.0);
  }
};

Texture make_texture(const TextureSpec& spec, const Eigen::Vector3d* plane_normal, std::uint64_t seed) {
  Rng rng(seed);
  Texture t;
  t.lo = spec.albedo_min;
  t.hi = spec.albedo_max;
  for (int i = 0; i < spec.components; ++i) {
    Eigen::Vector3d dir(rng.normal(), rng.normal(), rng.normal());
    if (plane_normal) {
      const Eigen::Vector3d n = plane_normal->normalized();
      dir -= n * n.dot(dir);
    }
    if (dir.norm() < 1e-9) dir = Eigen::Vector3d::UnitX();
    const double wavelength = rng.uniform(spec.wavelength_min, spec.wavelength_max);
    Texture::Wave w;
    w.k = dir.normalized() * (2.0 * std::numbers::pi / wavelength);
    w.amplitude = rng.uniform(0.5, 1.0);
    for (double& p : w.phase) p = rng.uniform(0.0, 2.0 * std::numbers::pi);
    t.amplitude_sum += w.amplitude;
    t.waves.push_back(w);
  }
  return t;
}

Eigen::Vector3d box_center(const MovingBox& box, std::size_t frame) {
  return box.center + static_cast<double>(frame) * box.translation_per_frame;
}

std::optional<Hit> cast(const SceneSpec& spec, std::size_t frame, double u, double v) {
  const PoseSE3& pose = spec.camera_path[frame];
  const Eigen::Matrix3d rt = pose.rotation().transpose();
  const Eigen::Vector3d origin = -(rt * pose.translation());
  const Intrinsics& K = spec.intrinsics;
  const Eigen::Vector3d dir = rt * Eigen::Vector3d((u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0);

  std::optional<Hit> best;
  auto consider = [&](double lambda, int surface) {
    if (!(lambda > kDepthFloor)) return;
    if (best && best->depth <= lambda) return;
    best = Hit{lambda, surface, origin + lambda * dir};
  };
  for (std::size_t i = 0; i < spec.planes.size(); ++i) {
    const PlaneSpec& p = spec.planes[i];
    const double denom = p.normal.dot(dir);
    if (std::abs(denom) < 1e-12) continue;
    const double lambda = (p.offset - p.normal.dot(origin)) / denom;
    if (p.bounds && !p.bounds->contains(origin + lambda * dir, 1e-9)) continue;
    consider(lambda, static_cast<int>(i));
  }
  if (spec.moving_box) {
    const Eigen::Vector3d c = box_center(*spec.moving_box, frame);
    const Eigen::Vector3d lo = c - spec.moving_box->half_extent;
    const Eigen::Vector3d hi = c + spec.moving_box->half_extent;
    double t_near = -1e300, t_far = 1e300;
    bool miss = false;
    for (int a = 0; a < 3 && !miss; ++a) {
      if (std::abs(dir[a]) < 1e-15) {
        miss = origin[a] < lo[a] || origin[a] > hi[a];
        continue;
      }
      double t0 = (lo[a] - origin[a]) / dir[a];
      double t1 = (hi[a] - origin[a]) / dir[a];
      if (t0 > t1) std::swap(t0, t1);
      t_near = std::max(t_near, t0);
      t_far = std::min(t_far, t1);
    }
    if (!miss && t_near <= t_far) consider(t_near, static_cast<int>(spec.planes.size()));
  }
  return best;
}

}  // namespace

std::optional<RayHit> cast_ray(const SceneSpec& spec, std::size_t frame, double u, double v) {
  if (frame >= spec.camera_path.size()) throw Error(ErrorKind::kInvalidArgument, "frame index out of range");
  const auto hit = cast(spec, frame, u, v);
  if (!hit) return std::nullopt;
  return RayHit{hit->depth, hit->surface == static_cast<int>(spec.planes.size())};
}

std::vector<RenderedFrame> render(const SceneSpec& spec) {
  spec.validate();
  const int h = spec.height;
  const int w = spec.width;
  const int box_id = static_cast<int>(spec.planes.size());

  std::vector<Texture> textures;
  for (std::size_t i = 0; i < spec.planes.size(); ++i) {
    const TextureSpec& t = spec.planes[i].texture;
    if (t.solid) {
      textures.push_back(make_texture(t, nullptr, spec.seed * 1000003ULL + 500009ULL));
    } else {
      textures.push_back(make_texture(t, &spec.planes[i].normal, spec.seed * 1000003ULL + i));
    }
  }
  if (spec.moving_box) {
    textures.push_back(make_texture(spec.moving_box->texture, nullptr, spec.seed * 1000003ULL + 999983ULL));
  }

  std::vector<RenderedFrame> frames;
  frames.reserve(spec.camera_path.size());
  for (std::size_t f = 0; f < spec.camera_path.size(); ++f) {
    std::vector<Grid> channels(static_cast<std::size_t>(spec.channels), Grid::Zero(h, w));
    Grid depth(h, w);
    RenderedFrame frame;
    frame.gt_pose = spec.camera_path[f];
    frame.dynamic_mask = BoolGrid::Constant(h, w, false);
    frame.occlusion_mask = BoolGrid::Constant(h, w, false);
    const bool has_next = f + 1 < spec.camera_path.size();

    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        const auto hit = cast(spec, f, u, v);
        if (!hit) {
          throw Error(ErrorKind::kInvalidScene, "pixel (" + std::to_string(u) + ", " + std::to_string(v) +
                                                    ") of frame " + std::to_string(f) + " hits no surface");
        }
        depth(v, u) = hit->depth;
        const bool on_box = hit->surface == box_id;
        frame.dynamic_mask(v, u) = on_box;
        // Box textures live in box-local coordinates so they move with it.
        const Eigen::Vector3d tex_point = on_box ? Eigen::Vector3d(hit->point - box_center(*spec.moving_box, f))
                                                 : hit->point;
        for (int c = 0; c < spec.channels; ++c) {
          channels[static_cast<std::size_t>(c)](v, u) = textures[static_cast<std::size_t>(hit->surface)].albedo(tex_point, c);
        }

        if (!has_next) continue;
        Eigen::Vector3d next_point = hit->point;
        if (on_box) next_point += spec.moving_box->translation_per_frame;
        const Eigen::Vector3d y = spec.camera_path[f + 1] * next_point;
        if (!(y.z() > kDepthFloor)) continue;
        const Projection q = project(y, spec.intrinsics);
        if (q.pixel.u < 0.0 || q.pixel.u > w - 1 || q.pixel.v < 0.0 || q.pixel.v > h - 1) continue;
        const auto seen = cast(spec, f + 1, q.pixel.u, q.pixel.v);
        frame.occlusion_mask(v, u) = !seen || seen->depth < y.z() * (1.0 - 1e-6);
      }
    }
    frame.image = Image(std::move(channels));
    frame.depth = DepthMap(std::move(depth));
    frames.push_back(std::move(frame));
  }
  return frames;
}

PoseSE3 relative_gt_pose(const RenderedFrame& a, const RenderedFrame& b) {
  return compose(a.gt_pose.inverse(), b.gt_pose);
}

LossReport perfect_loss_check(const RenderedFrame& a, const RenderedFrame& b, const Intrinsics& K,
                              const LossWeights& w) {
  return total_loss(a.image, b.image, a.depth, b.depth, relative_gt_pose(a, b), K, w);
}

std::vector<LossReport> perfect_loss_check(const std::vector<RenderedFrame>& frames, const Intrinsics& K,
                                           const LossWeights& w) {
  std::vector<LossReport> out;
  for (std::size_t i = 0; i + 1 < frames.size(); ++i) out.push_back(perfect_loss_check(frames[i], frames[i + 1], K, w));
  return out;
}

namespace scenes {

namespace {

Intrinsics square_intrinsics(int size, double focal_ratio) {
  Intrinsics K;
  K.width = size;
  K.height = size;
  K.fx = K.fy = focal_ratio * size;
  K.cx = K.cy = 0.5 * (size - 1);
  return K;
}

SceneSpec base(std::uint64_t seed, int size) {
  SceneSpec s;
  s.width = s.height = size;
  s.intrinsics = square_intrinsics(size, 0.9);
  s.seed = seed;
  return s;
}

}  // namespace

SceneSpec static_planes(std::uint64_t seed, int size, int frames) {
  SceneSpec s = base(seed, size);
  PlaneSpec wall;
  wall.normal = Eigen::Vector3d::UnitZ();
  wall.offset = 6.0;
  wall.texture = {0.15, 0.85, 1.2, 3.0, 4, true};
  PlaneSpec floor;
  floor.normal = Eigen::Vector3d::UnitY();
  floor.offset = 1.5;
  floor.texture = wall.texture;
  s.planes = {wall, floor};

  Rng rng(seed + 17);
  Twist step;
  step.omega = Eigen::Vector3d(rng.uniform(-0.006, 0.006), rng.uniform(-0.006, 0.006), rng.uniform(-0.004, 0.004));
  step.v = Eigen::Vector3d(rng.uniform(-0.12, 0.12), rng.uniform(-0.06, 0.06), rng.uniform(-0.15, 0.05));
  PoseSE3 pose;
  for (int f = 0; f < frames; ++f) {
    s.camera_path.push_back(pose);
    pose = compose(pose, exp_twist(step));
  }
  return s;
}

SceneSpec fronto_parallel(std::uint64_t seed, int size, int frames, double depth, const Eigen::Vector3d& step) {
  SceneSpec s = base(seed, size);
  PlaneSpec wall;
  wall.normal = Eigen::Vector3d::UnitZ();
  wall.offset = depth;
  wall.texture = {0.15, 0.85, 0.2 * depth, 0.5 * depth, 4};
  s.planes = {wall};
  for (int f = 0; f < frames; ++f) s.camera_path.emplace_back(Eigen::Matrix3d::Identity(), -static_cast<double>(f) * step);
  return s;
}

SceneSpec occlusion_band(std::uint64_t seed, int size) {
  SceneSpec s = base(seed, size);
  PlaneSpec wall;
  wall.offset = 8.0;
  wall.texture = {0.1, 0.5, 1.5, 3.5, 4};
  PlaneSpec front;
  front.offset = 3.0;
  front.texture = {0.55, 0.95, 0.6, 1.5, 4};
  AxisBox right_half;
  right_half.min.x() = 0.0;
  front.bounds = right_half;
  s.planes = {wall, front};
  for (int f = 0; f < 2; ++f) s.camera_path.emplace_back(Eigen::Matrix3d::Identity(), Eigen::Vector3d(-0.3 * f, 0, 0));
  return s;
}

SceneSpec moving_box(std::uint64_t seed, int size) {
  SceneSpec s = base(seed, size);
  PlaneSpec wall;
  wall.offset = 8.0;
  wall.texture = {0.1, 0.5, 1.5, 3.5, 4};
  s.planes = {wall};
  MovingBox box;
  box.center = Eigen::Vector3d(0.2, 0.0, 3.5);
  box.half_extent = Eigen::Vector3d(0.4, 0.5, 0.3);
  box.translation_per_frame = Eigen::Vector3d(-1.0, 0.0, 0.0);
  box.texture = {0.55, 0.95, 0.5, 1.2, 4};
  s.moving_box = box;
  for (int f = 0; f < 2; ++f) s.camera_path.emplace_back(Eigen::Matrix3d::Identity(), Eigen::Vector3d(-0.1 * f, 0, 0));
  return s;
}

}  // namespace scenes

}  // namespace scd
