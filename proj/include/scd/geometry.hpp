#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "scd/image.hpp"

namespace scd {

using Vector6d = Eigen::Matrix<double, 6, 1>;

/// Pinhole intrinsics in pixels. Pixel (u, v) is the continuous coordinate
/// (u, v); there is no half-pixel offset.
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  /// Throws kInvalidArgument unless fx, fy > 0 and the principal point lies
  /// inside the image.
  void validate() const;
  Eigen::Matrix3d matrix() const;
};

struct PixelCoord {
  double u = 0.0;
  double v = 0.0;
};

struct Projection {
  PixelCoord pixel;
  double depth = 0.0;
};

/// Rigid transform X_b = R·X_a + t. A pose named P_ab maps camera-a
/// coordinates into camera-b coordinates.
class PoseSE3 {
 public:
  PoseSE3() = default;
  /// Validates orthonormality and det(R) = 1 to 1e-9.
  PoseSE3(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  static PoseSE3 identity() { return {}; }
  /// Nearest rotation (SVD projection) of an approximately orthonormal matrix.
  /// Used for poses read from text files with limited precision.
  static PoseSE3 from_approximate(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }
  Eigen::Matrix4d matrix() const;

  Eigen::Vector3d operator*(const Eigen::Vector3d& x) const { return rotation_ * x + translation_; }
  PoseSE3 inverse() const;

 private:
  Eigen::Matrix3d rotation_ = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation_ = Eigen::Vector3d::Zero();
};

/// se(3) element: omega is an axis-angle rotation, v the translational part.
/// The 6-vector layout everywhere in this library is (omega, v).
struct Twist {
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();

  Vector6d vector() const;
  static Twist from_vector(const Vector6d& x);
};

Eigen::Matrix3d hat(const Eigen::Vector3d& w);
Eigen::Matrix3d so3_exp(const Eigen::Vector3d& omega);
/// Geodesic angle of a rotation, in radians, computed with atan2.
double rotation_angle(const Eigen::Matrix3d& rotation);

/// d · K⁻¹ · (u, v, 1). Throws kInvalidDepth for d <= 0.
Eigen::Vector3d lift(const PixelCoord& p, double depth, const Intrinsics& K);
/// Pinhole projection; the pixel may fall outside the image. Throws
/// kBehindCamera when X.z <= kDepthFloor.
Projection project(const Eigen::Vector3d& x, const Intrinsics& K);

/// P_ac from P_ab and P_bc, i.e. P_bc ∘ P_ab.
PoseSE3 compose(const PoseSE3& ab, const PoseSE3& bc);
inline PoseSE3 inverse(const PoseSE3& p) { return p.inverse(); }

PoseSE3 exp_twist(const Twist& t);
/// Inverse of exp_twist. Throws kIllConditionedLog when the rotation angle is
/// within 1e-6 of π.
Twist log_pose(const PoseSE3& p);

/// Output of the forward warp from frame a into frame b. Entries outside
/// `valid` are zero and must not be read.
struct WarpResult {
  Image synthesized;         ///< I'_a: I_b bilinearly sampled at the projections
  Grid projected_depth;      ///< D_b^a: z of the transformed point
  Grid interpolated_depth;   ///< D'_b: D_b bilinearly sampled at the projections
  Grid proj_u;               ///< projected column in frame b
  Grid proj_v;               ///< projected row in frame b
  BoolGrid valid;            ///< V
  int valid_count = 0;

  int height() const { return static_cast<int>(valid.rows()); }
  int width() const { return static_cast<int>(valid.cols()); }
};

/// Lifts every pixel of frame a with D_a, transforms by P_ab and samples frame
/// b. A pixel is valid when its projection lies in [0, W-1]×[0, H-1] with depth
/// above kDepthFloor.
WarpResult warp_pair(const Image& image_b, const DepthMap& depth_a, const DepthMap& depth_b,
                     const PoseSE3& pose_ab, const Intrinsics& K);

/// Same warp with the valid set imposed instead of computed. Projections of
/// forced-valid pixels are clamped into the image before sampling; pixels
/// whose transformed depth is not positive stay invalid.
WarpResult warp_pair_frozen(const Image& image_b, const DepthMap& depth_a, const DepthMap& depth_b,
                            const PoseSE3& pose_ab, const Intrinsics& K, const BoolGrid& valid);

}  // namespace scd
