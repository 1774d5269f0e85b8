#pragma once

#include <cstddef>
#include <vector>

#include "scd/geometry.hpp"
#include "scd/image.hpp"

namespace scd {

/// Camera-to-world poses, one per frame. Trajectories built by chain_poses
/// start at the identity; trajectories read from files may not.
struct Trajectory {
  std::vector<PoseSE3> poses;

  std::size_t size() const { return poses.size(); }
  Eigen::Vector3d position(std::size_t i) const { return poses[i].translation(); }
  /// Cumulative path length along the camera centers, starting at 0.
  std::vector<double> path_lengths() const;
};

/// trajectory[k] is the camera-to-world pose obtained by composing the first
/// k relatives, where relatives[k] = P_{k,k+1} maps camera-k coordinates into
/// camera-(k+1) coordinates. Throws kInvalidArgument on an empty list.
Trajectory chain_poses(const std::vector<PoseSE3>& relatives);

/// Inverse of chain_poses: P_{k,k+1} for consecutive poses.
std::vector<PoseSE3> relative_poses(const Trajectory& trajectory);

struct ScaleAlignment {
  double scale = 1.0;
  Trajectory aligned;
};

/// Least-squares scale over consecutive camera-center displacements; rotations
/// are untouched. Throws kDimension for mismatched lengths or fewer than two
/// poses, kDegenerateScale when every predicted displacement is zero.
ScaleAlignment align_global_scale(const Trajectory& pred, const Trajectory& gt);

struct PerFrameAlignment {
  Trajectory aligned;
  std::vector<double> scales;        ///< applied factor per step (1 where skipped)
  std::vector<std::size_t> skipped;  ///< steps left unscaled: zero-length gt or pred step
};

/// Rescales every predicted relative translation to the magnitude of the
/// matching ground-truth step, then chains. Baseline-comparison mode only.
PerFrameAlignment align_per_frame_scale(const std::vector<PoseSE3>& pred_relatives, const Trajectory& gt);

struct SegmentError {
  std::size_t first_frame = 0;
  double length = 0.0;      ///< nominal segment length in meters
  double t_err = 0.0;       ///< translation error / length (fraction)
  double r_err = 0.0;       ///< rotation error / length (rad per meter)
};

struct OdomErrors {
  double t_err = 0.0;  ///< percent
  double r_err = 0.0;  ///< degrees per 100 m
  struct PerLength {
    double length = 0.0;
    std::size_t count = 0;
    double t_err = 0.0;  ///< percent
    double r_err = 0.0;  ///< degrees per 100 m
  };
  std::vector<PerLength> per_length;
  std::vector<SegmentError> segments;
};

inline const std::vector<double>& odometry_segment_lengths() {
  static const std::vector<double> lengths{100, 200, 300, 400, 500, 600, 700, 800};
  return lengths;
}

/// KITTI-style relative errors over every start frame and every segment length
/// in odometry_segment_lengths(). A segment ends at the first frame whose gt
/// path length from the start reaches the nominal length (within 1e-9
/// relative). Throws kDimension on length mismatch and kNoValidSubsequence
/// when no segment fits.
OdomErrors kitti_odom_errors(const Trajectory& pred, const Trajectory& gt,
                             const std::vector<double>& lengths = odometry_segment_lengths());

struct AteResult {
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> per_snippet;
};

/// Absolute trajectory error of one snippet: translations are shifted so the
/// first positions coincide, the least-squares scale is applied and the error
/// is sqrt(Σ‖s·p − g‖²) / N, the snippet evaluation used by the SfMLearner
/// toolkit.
double snippet_ate(const std::vector<Eigen::Vector3d>& pred, const std::vector<Eigen::Vector3d>& gt);

/// Mean and population standard deviation of snippet_ate over 5-pose
/// snippets. Throws kDimension unless every snippet has exactly 5 poses.
AteResult ate_5frame(const std::vector<Trajectory>& pred_snippets, const std::vector<Trajectory>& gt_snippets);

/// Every window of 5 consecutive poses, re-anchored to its first pose.
std::vector<Trajectory> sliding_snippets(const Trajectory& trajectory, std::size_t length = 5);

struct DepthMetrics {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rms = 0.0;
  double rms_log = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
  double a3 = 0.0;
  std::size_t count = 0;
  double scale = 1.0;  ///< median ratio applied to pred (1 without median scaling)
};

/// Eigen et al. metrics over `mask`. With median scaling, pred is multiplied by
/// median(gt)/median(pred) over the mask; pred is then clamped to [1e-3, cap].
/// Accuracies use strict max(d/d*, d*/d) < 1.25^i. Throws kEmptyMask.
DepthMetrics eigen_depth_metrics(const DepthMap& pred, const DepthMap& gt, const BoolGrid& mask,
                                 bool median_scale = true, double cap = 80.0);

}  // namespace scd
