#pragma once

#include <cstdint>
#include <functional>

#include "scd/geometry.hpp"
#include "scd/losses.hpp"

namespace scd {

struct GradientOptions {
  /// Treat M as a constant in L_p^M.
  bool stop_gradient_mask = false;
  /// Treat D'_b as a constant in D_diff (no gradient through the sampled target).
  bool detach_interpolated_depth = false;
  LossOptions loss;
};

/// Gradients of the a → b objective. The twist gradient is taken with respect
/// to a left increment, d/dδ L(exp(δ)·P_ab) at δ = 0, in (omega, v) order.
struct GradReport {
  Grid d_loss_d_depth;    ///< ∂L/∂D_a(p)
  Grid d_loss_d_depth_b;  ///< ∂L/∂D_b(p)
  Vector6d d_loss_d_twist = Vector6d::Zero();
  double value = 0.0;
};

/// Analytic chain rule through lift/project/bilinear sampling/SSIM and the
/// inconsistency terms, with V held fixed at the evaluation point. Residuals
/// exactly at the |·| kinks (within 1e-9) get the zero subgradient.
/// Throws kEmptyValidSet.
GradReport loss_gradients(const Image& image_a, const Image& image_b, const DepthMap& depth_a,
                          const DepthMap& depth_b, const PoseSE3& pose_ab, const Intrinsics& K,
                          const LossWeights& w = {}, const GradientOptions& options = {});

struct FdSteps {
  double twist = 1e-5;
  double relative_depth = 1e-4;  ///< step for depth p is relative_depth · depth(p)
};

/// Central-difference gradient of the same objective under frozen-V semantics
/// (and frozen M or D'_b when the corresponding option is set).
GradReport fd_gradient(const Image& image_a, const Image& image_b, const DepthMap& depth_a,
                       const DepthMap& depth_b, const PoseSE3& pose_ab, const Intrinsics& K,
                       const LossWeights& w = {}, const FdSteps& steps = {},
                       const GradientOptions& options = {});

struct Difference {
  double forward = 0.0;
  double backward = 0.0;
  double central = 0.0;
};

/// One-sided and central difference quotients of f at x with step h.
Difference finite_difference(const std::function<double(double)>& f, double x, double h);

/// Largest |a − r| / max(|r|, floor) over all entries, r being the reference.
struct GradientDiscrepancy {
  double depth = 0.0;
  double depth_b = 0.0;
  double twist = 0.0;
  double max() const;
};
GradientDiscrepancy compare_gradients(const GradReport& analytic, const GradReport& reference,
                                      double floor = 1e-6);

/// A small random problem whose valid pixels stay at least `margin` away from
/// every kink of the objective (bilinear cell edges, |I_a − I'_a| = 0 and
/// D_b^a = D'_b), so finite differences are meaningful.
struct GradCheckInstance {
  Image image_a, image_b;
  DepthMap depth_a, depth_b;
  PoseSE3 pose_ab;
  Intrinsics K;
};
GradCheckInstance make_gradcheck_instance(std::uint64_t seed, int height, int width,
                                          int channels = 1, double margin = 1e-3);

struct GradCheckSummary {
  int instances = 0;
  int failures = 0;
  double max_rel_error = 0.0;
};

/// Compares loss_gradients against fd_gradient on `count` instances with sizes
/// drawn from [min_size, max_size].
GradCheckSummary run_gradcheck(std::uint64_t seed, int count, int min_size, int max_size,
                               double tolerance, const LossWeights& w = {},
                               const std::function<void(int, int, int, double)>& on_instance = {});

}  // namespace scd
