#pragma once

#include <string>
#include <vector>

#include "scd/geometry.hpp"
#include "scd/gradients.hpp"
#include "scd/losses.hpp"

namespace scd {

struct RefineConfig {
  int max_iters = 200;
  /// Size of the first step in twist units (rad, scene units).
  double step_twist = 1e-2;
  /// Size of the first step in log-depth units.
  double step_logdepth = 1e-2;
  /// Stop when an accepted step lowers the loss by less than tol_loss·max(1, L).
  double tol_loss = 1e-10;
  bool optimize_depth = true;
  bool optimize_pose = true;
  LossWeights weights;
  GradientOptions gradient;
  /// L-BFGS history length.
  int memory = 8;

  void validate() const;
};

enum class RefineStatus { kConverged, kMaxIters, kStalled };
std::string to_string(RefineStatus status);

struct RefineRecord {
  int iteration = 0;
  double total = 0.0;
  double l_p = 0.0;
  double l_p_masked = 0.0;
  double l_s = 0.0;
  double l_gc = 0.0;
  Twist twist;  ///< log of the first optimized pose after this iteration
  double depth_rms_change = 0.0;
  double step = 0.0;  ///< accepted line-search fraction, 0 for the initial record
};

/// Record 0 holds the initial state; each later record is one accepted step.
struct RefineTrace {
  std::vector<RefineRecord> records;
  RefineStatus status = RefineStatus::kMaxIters;
  int iterations = 0;
  int evaluations = 0;
};

struct RefineResult {
  PoseSE3 pose;
  DepthMap depth;
  RefineTrace trace;
};

/// Minimizes the a → b objective over the twist of P_ab (left increments)
/// and log D_a with L-BFGS and Armijo backtracking. D_b stays fixed.
/// Throws kEmptyValidSet when V is empty at the initial guess.
RefineResult refine_pair(const Image& image_a, const Image& image_b, const DepthMap& depth_a_init,
                         const DepthMap& depth_b_init, const PoseSE3& pose_init, const Intrinsics& K,
                         const RefineConfig& cfg = {});

struct SequenceResult {
  std::vector<PoseSE3> relatives;  ///< relatives[k] = P_{k,k+1}
  std::vector<DepthMap> depths;
  RefineTrace trace;
};

/// Minimizes Σ_k L(I_k, I_{k+1}, D_k, D_{k+1}, P_{k,k+1}) jointly over all
/// relative poses and all depth maps.
SequenceResult refine_sequence(const std::vector<Image>& images, const std::vector<DepthMap>& depths_init,
                               const std::vector<PoseSE3>& relatives_init, const Intrinsics& K,
                               const RefineConfig& cfg = {});

}  // namespace scd
