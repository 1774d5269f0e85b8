#pragma once

#include <optional>

#include "scd/geometry.hpp"
#include "scd/image.hpp"

namespace scd {

/// Weights of the total objective L = alpha·L_p^M + beta·L_s + gamma·L_GC and
/// of the per-pixel photometric mix lambda_i·L1 + lambda_s·(1 − SSIM)/2.
struct LossWeights {
  double alpha = 1.0;
  double beta = 0.1;
  double gamma = 0.5;
  double lambda_i = 0.15;
  double lambda_s = 0.85;

  void validate() const;
};

struct LossOptions {
  /// Divide D_a by its mean before the smoothness term.
  bool normalize_smoothness_depth = false;
};

inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// D_diff over V; entries outside `valid` are zero.
struct InconsistencyMap {
  Grid values;
  BoolGrid valid;
};

/// M = 1 − D_diff over V; entries outside `valid` are zero.
struct WeightMask {
  Grid values;
  BoolGrid valid;
};

struct LossReport {
  double l_p = 0.0;         ///< unmasked photometric mean over V
  double l_p_masked = 0.0;  ///< L_p^M
  double l_s = 0.0;
  double l_gc = 0.0;
  double total = 0.0;
  InconsistencyMap d_diff;
  WeightMask mask;
  Grid per_pixel_lp;  ///< L_p(p) over V, zero elsewhere
  int valid_count = 0;
};

/// Per-pixel (1 − SSIM)/2 with a 3×3 box window. Pixels on the border use
/// the nearest window that lies fully inside the image. Channels are averaged
/// and the result is clamped to [0, 1].
Grid ssim_dissimilarity(const Image& x, const Image& y);

/// Single-pixel SSIM of one 3×3 window given its nine x and y samples.
double ssim_window(const double* x, const double* y);

/// I'_a with pixels outside V replaced by I_a, the image the SSIM term sees.
Image masked_synthesis(const Image& image_a, const WarpResult& warp);

struct PhotometricResult {
  double value = 0.0;  ///< mean over V
  Grid per_pixel;      ///< L_p(p) over V, zero elsewhere
};

/// Throws kEmptyValidSet when V is empty.
PhotometricResult photometric_loss(const Image& image_a, const WarpResult& warp, const LossWeights& w);

/// Edge-aware smoothness: forward differences of D_a weighted by
/// exp(−|∂I_a|), squared, summed over both axes and divided by H·W.
double smoothness_loss(const DepthMap& depth_a, const Image& image_a, const LossOptions& options = {});

/// |x − y| / (x + y).
double depth_inconsistency(double projected, double interpolated);
InconsistencyMap depth_inconsistency(const WarpResult& warp);

/// Mean of D_diff over V. Throws kEmptyValidSet.
double gc_loss(const InconsistencyMap& d_diff);

WeightMask weight_mask(const InconsistencyMap& d_diff);

/// Mean over V of M(p)·L_p(p). Throws kEmptyValidSet.
double masked_photometric_loss(const Grid& per_pixel_lp, const WeightMask& mask);

/// Quantities held fixed when evaluating the objective under frozen-V
/// semantics (the finite-difference oracle uses this).
struct FrozenTerms {
  BoolGrid valid;
  std::optional<Grid> mask;                ///< M held constant (stop-gradient on M)
  std::optional<Grid> interpolated_depth;  ///< D'_b held constant (detached target)
};

/// One direction of the objective, a → b. With `frozen`, V and optionally M
/// and D'_b are taken from it rather than recomputed.
LossReport directional_loss(const Image& image_a, const Image& image_b, const DepthMap& depth_a,
                            const DepthMap& depth_b, const PoseSE3& pose_ab, const Intrinsics& K,
                            const LossWeights& w, const LossOptions& options = {},
                            const FrozenTerms* frozen = nullptr);

/// Full objective. When `bidirectional`, the b → a direction (with the
/// inverse pose) is evaluated too and every scalar term is the average of the
/// two directions; the maps and valid_count stay those of the a → b direction.
LossReport total_loss(const Image& image_a, const Image& image_b, const DepthMap& depth_a,
                      const DepthMap& depth_b, const PoseSE3& pose_ab, const Intrinsics& K,
                      const LossWeights& w = {}, bool bidirectional = false,
                      const LossOptions& options = {});

}  // namespace scd
