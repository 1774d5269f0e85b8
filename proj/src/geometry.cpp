#include "scd/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "scd/errors.hpp"

namespace scd {

namespace {

constexpr double kOrthoTol = 1e-9;
constexpr double kSmallAngle = 1e-5;

bool is_rotation(const Eigen::Matrix3d& r, double tol) {
  const Eigen::Matrix3d err = r.transpose() * r - Eigen::Matrix3d::Identity();
  return err.cwiseAbs().maxCoeff() <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

Eigen::Vector3d vee(const Eigen::Matrix3d& m) { return {m(2, 1), m(0, 2), m(1, 0)}; }

}  // namespace

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw Error(ErrorKind::kInvalidArgument, "focal lengths must be positive");
  if (width <= 0 || height <= 0) throw Error(ErrorKind::kInvalidArgument, "image size must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw Error(ErrorKind::kInvalidArgument, "principal point outside the image");
  }
}

Eigen::Matrix3d Intrinsics::matrix() const {
  Eigen::Matrix3d k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

PoseSE3::PoseSE3(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
    : rotation_(rotation), translation_(translation) {
  if (!rotation.allFinite() || !translation.allFinite()) {
    throw Error(ErrorKind::kInvalidArgument, "pose has non-finite entries");
  }
  if (!is_rotation(rotation, kOrthoTol)) {
    throw Error(ErrorKind::kInvalidArgument, "rotation is not orthonormal with det 1");
  }
}

PoseSE3 PoseSE3::from_approximate(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation) {
  if (is_rotation(rotation, kOrthoTol)) return PoseSE3(rotation, translation);
  if (!rotation.allFinite() || !is_rotation(rotation, 1e-3)) {
    throw Error(ErrorKind::kInvalidArgument, "rotation is too far from orthonormal");
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return PoseSE3(svd.matrixU() * svd.matrixV().transpose(), translation);
}

Eigen::Matrix4d PoseSE3::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

PoseSE3 PoseSE3::inverse() const {
  const Eigen::Matrix3d rt = rotation_.transpose();
  return PoseSE3(rt, -(rt * translation_));
}

Vector6d Twist::vector() const {
  Vector6d x;
  x << omega, v;
  return x;
}

Twist Twist::from_vector(const Vector6d& x) { return Twist{x.head<3>(), x.tail<3>()}; }

Eigen::Matrix3d hat(const Eigen::Vector3d& w) {
  Eigen::Matrix3d m;
  m << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return m;
}

Eigen::Matrix3d so3_exp(const Eigen::Vector3d& omega) {
  const double theta2 = omega.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Eigen::Matrix3d w = hat(omega);
  double a, b;
  if (theta < kSmallAngle) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return Eigen::Matrix3d::Identity() + a * w + b * w * w;
}

double rotation_angle(const Eigen::Matrix3d& r) {
  const double s = 0.5 * vee(r - r.transpose()).norm();
  const double c = 0.5 * (r.trace() - 1.0);
  return std::atan2(s, c);
}

Eigen::Vector3d lift(const PixelCoord& p, double depth, const Intrinsics& K) {
  if (!(depth > 0.0)) throw Error(ErrorKind::kInvalidDepth, "lift requires a positive depth");
  return {depth * (p.u - K.cx) / K.fx, depth * (p.v - K.cy) / K.fy, depth};
}

Projection project(const Eigen::Vector3d& x, const Intrinsics& K) {
  if (!(x.z() > kDepthFloor)) throw Error(ErrorKind::kBehindCamera, "point is behind the camera");
  return {{K.fx * x.x() / x.z() + K.cx, K.fy * x.y() / x.z() + K.cy}, x.z()};
}

PoseSE3 compose(const PoseSE3& ab, const PoseSE3& bc) {
  return PoseSE3(bc.rotation() * ab.rotation(), bc.rotation() * ab.translation() + bc.translation());
}

PoseSE3 exp_twist(const Twist& t) {
  const double theta2 = t.omega.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Eigen::Matrix3d w = hat(t.omega);
  double b, c;
  if (theta < kSmallAngle) {
    b = 0.5 - theta2 / 24.0;
    c = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    b = (1.0 - std::cos(theta)) / theta2;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }
  const Eigen::Matrix3d v = Eigen::Matrix3d::Identity() + b * w + c * w * w;
  return PoseSE3(so3_exp(t.omega), v * t.v);
}

Twist log_pose(const PoseSE3& p) {
  const Eigen::Matrix3d& r = p.rotation();
  const double theta = rotation_angle(r);
  if (theta >= std::numbers::pi - 1e-6) {
    throw Error(ErrorKind::kIllConditionedLog, "rotation angle too close to pi");
  }
  const Eigen::Vector3d axis_sin = 0.5 * vee(r - r.transpose());  // sin(theta) * axis
  const double theta2 = theta * theta;
  Eigen::Vector3d omega;
  double d;
  if (theta < kSmallAngle) {
    omega = axis_sin * (1.0 + theta2 / 6.0);
    d = 1.0 / 12.0 + theta2 / 720.0;
  } else {
    omega = axis_sin * (theta / std::sin(theta));
    d = (1.0 - theta * std::sin(theta) / (2.0 * (1.0 - std::cos(theta)))) / theta2;
  }
  const Eigen::Matrix3d w = hat(omega);
  const Eigen::Matrix3d v_inv = Eigen::Matrix3d::Identity() - 0.5 * w + d * w * w;
  return Twist{omega, v_inv * p.translation()};
}

namespace {

WarpResult warp_impl(const Image& image_b, const DepthMap& depth_a, const DepthMap& depth_b,
                     const PoseSE3& pose_ab, const Intrinsics& K, const BoolGrid* forced) {
  const int h = depth_a.height();
  const int w = depth_a.width();
  require_same_shape(h, w, image_b.height(), image_b.width(), "warp_pair: D_a vs I_b");
  require_same_shape(h, w, depth_b.height(), depth_b.width(), "warp_pair: D_a vs D_b");
  require_same_shape(h, w, K.height, K.width, "warp_pair: D_a vs intrinsics");
  if (forced) require_same_shape(h, w, static_cast<int>(forced->rows()), static_cast<int>(forced->cols()), "warp_pair: valid mask");
  if (h < 2 || w < 2) throw Error(ErrorKind::kDimension, "warp_pair needs at least 2x2 images");
  K.validate();

  const int channels = image_b.channels();
  std::vector<Grid> synth(static_cast<std::size_t>(channels), Grid::Zero(h, w));
  WarpResult out;
  out.projected_depth = Grid::Zero(h, w);
  out.interpolated_depth = Grid::Zero(h, w);
  out.proj_u = Grid::Zero(h, w);
  out.proj_v = Grid::Zero(h, w);
  out.valid = BoolGrid::Constant(h, w, false);

  const Eigen::Matrix3d& rot = pose_ab.rotation();
  const Eigen::Vector3d& tr = pose_ab.translation();
  const double umax = w - 1;
  const double vmax = h - 1;
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const Eigen::Vector3d x = lift({double(u), double(v)}, depth_a(v, u), K);
      const Eigen::Vector3d y = rot * x + tr;
      if (!(y.z() > kDepthFloor)) continue;
      double qu = K.fx * y.x() / y.z() + K.cx;
      double qv = K.fy * y.y() / y.z() + K.cy;
      bool inside = qu >= 0.0 && qu <= umax && qv >= 0.0 && qv <= vmax;
      if (forced) {
        if (!(*forced)(v, u)) continue;
        qu = std::clamp(qu, 0.0, umax);
        qv = std::clamp(qv, 0.0, vmax);
        inside = true;
      }
      if (!inside) continue;
      out.valid(v, u) = true;
      ++out.valid_count;
      out.proj_u(v, u) = qu;
      out.proj_v(v, u) = qv;
      out.projected_depth(v, u) = y.z();
      out.interpolated_depth(v, u) = sample_bilinear(depth_b.values(), qu, qv).value;
      for (int c = 0; c < channels; ++c) {
        synth[static_cast<std::size_t>(c)](v, u) =
            std::clamp(sample_bilinear(image_b.channel(c), qu, qv).value, 0.0, 1.0);
      }
    }
  }
  out.synthesized = Image(std::move(synth));
  return out;
}

}  // namespace

WarpResult warp_pair(const Image& image_b, const DepthMap& depth_a, const DepthMap& depth_b,
                     const PoseSE3& pose_ab, const Intrinsics& K) {
  return warp_impl(image_b, depth_a, depth_b, pose_ab, K, nullptr);
}

WarpResult warp_pair_frozen(const Image& image_b, const DepthMap& depth_a, const DepthMap& depth_b,
                            const PoseSE3& pose_ab, const Intrinsics& K, const BoolGrid& valid) {
  return warp_impl(image_b, depth_a, depth_b, pose_ab, K, &valid);
}

}  // namespace scd
