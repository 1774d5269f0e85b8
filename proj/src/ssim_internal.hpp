#pragma once

#include <algorithm>

namespace scd::detail {

/// Center of the 3×3 window used for a pixel at index i along an axis of
/// length n (n >= 3).
inline int window_center(int i, int n) { return std::clamp(i, 1, n - 2); }

struct SsimParts {
  double mu_x, mu_y;
  double a1, a2, b1, b2;  // SSIM = a1·a2 / (b1·b2)
  double value;
};

SsimParts ssim_parts(const double* x, const double* y);

/// Gradient of the window SSIM with respect to the nine y samples.
void ssim_grad_y(const double* x, const double* y, const SsimParts& parts, double* grad);

}  // namespace scd::detail
