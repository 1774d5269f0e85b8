#pragma once

#include <Eigen/Core>
#include <vector>

namespace scd {

/// Row-major H×W grid of doubles, indexed (v, u).
using Grid = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using BoolGrid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Floor applied to every depth value and to projection denominators.
inline constexpr double kDepthFloor = 1e-6;

/// Dense per-pixel depth in scene units. Values below kDepthFloor are raised
/// to it on construction; non-finite values are rejected.
class DepthMap {
 public:
  DepthMap() = default;
  explicit DepthMap(Grid values);

  static DepthMap constant(int height, int width, double value);

  const Grid& values() const { return values_; }
  double operator()(int v, int u) const { return values_(v, u); }
  int height() const { return static_cast<int>(values_.rows()); }
  int width() const { return static_cast<int>(values_.cols()); }

 private:
  Grid values_;
};

/// C×H×W intensities in [0, 1], C ∈ {1, 3}.
class Image {
 public:
  Image() = default;
  explicit Image(std::vector<Grid> channels);

  static Image constant(int channels, int height, int width, double value);

  int channels() const { return static_cast<int>(channels_.size()); }
  int height() const { return channels_.empty() ? 0 : static_cast<int>(channels_[0].rows()); }
  int width() const { return channels_.empty() ? 0 : static_cast<int>(channels_[0].cols()); }
  const Grid& channel(int c) const { return channels_[static_cast<std::size_t>(c)]; }
  double operator()(int c, int v, int u) const { return channel(c)(v, u); }

 private:
  std::vector<Grid> channels_;
};

struct BilinearSample {
  double value = 0.0;
  double d_u = 0.0;  ///< derivative along u (columns)
  double d_v = 0.0;  ///< derivative along v (rows)
};

/// Bilinear interpolation at the continuous location (u, v), which must lie in
/// [0, W-1]×[0, H-1]. Pixel (u, v) sits exactly at integer coordinates.
BilinearSample sample_bilinear(const Grid& grid, double u, double v);

/// The four corner weights used by sample_bilinear, for scattering gradients.
struct BilinearStencil {
  int u0 = 0;
  int v0 = 0;
  double w00 = 0.0, w10 = 0.0, w01 = 0.0, w11 = 0.0;  ///< (u0,v0) (u0+1,v0) (u0,v0+1) (u0+1,v0+1)
};
BilinearStencil bilinear_stencil(int height, int width, double u, double v);

void require_same_shape(int h0, int w0, int h1, int w1, const char* what);

}  // namespace scd
