#include "scd/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "scd/errors.hpp"

namespace scd {

DepthMap::DepthMap(Grid values) : values_(std::move(values)) {
  for (Eigen::Index i = 0; i < values_.size(); ++i) {
    double& d = values_.data()[i];
    if (!std::isfinite(d)) throw Error(ErrorKind::kInvalidDepth, "non-finite depth value");
    d = std::max(d, kDepthFloor);
  }
}

DepthMap DepthMap::constant(int height, int width, double value) {
  return DepthMap(Grid::Constant(height, width, value));
}

Image::Image(std::vector<Grid> channels) : channels_(std::move(channels)) {
  if (channels_.size() != 1 && channels_.size() != 3) {
    throw Error(ErrorKind::kDimension, "image must have 1 or 3 channels, got " +
                                           std::to_string(channels_.size()));
  }
  for (const Grid& c : channels_) {
    if (c.rows() != channels_[0].rows() || c.cols() != channels_[0].cols()) {
      throw Error(ErrorKind::kDimension, "image channels differ in size");
    }
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      const double x = c.data()[i];
      if (!(x >= 0.0 && x <= 1.0)) {
        throw Error(ErrorKind::kInvalidArgument, "image intensity outside [0, 1]");
      }
    }
  }
}

Image Image::constant(int channels, int height, int width, double value) {
  return Image(std::vector<Grid>(static_cast<std::size_t>(channels),
                                 Grid::Constant(height, width, value)));
}

BilinearStencil bilinear_stencil(int height, int width, double u, double v) {
  BilinearStencil s;
  s.u0 = std::clamp(static_cast<int>(std::floor(u)), 0, width - 2);
  s.v0 = std::clamp(static_cast<int>(std::floor(v)), 0, height - 2);
  const double a = u - s.u0;
  const double b = v - s.v0;
  s.w00 = (1.0 - a) * (1.0 - b);
  s.w10 = a * (1.0 - b);
  s.w01 = (1.0 - a) * b;
  s.w11 = a * b;
  return s;
}

BilinearSample sample_bilinear(const Grid& grid, double u, double v) {
  const int h = static_cast<int>(grid.rows());
  const int w = static_cast<int>(grid.cols());
  const int u0 = std::clamp(static_cast<int>(std::floor(u)), 0, w - 2);
  const int v0 = std::clamp(static_cast<int>(std::floor(v)), 0, h - 2);
  const double a = u - u0;
  const double b = v - v0;
  const double i00 = grid(v0, u0);
  const double i10 = grid(v0, u0 + 1);
  const double i01 = grid(v0 + 1, u0);
  const double i11 = grid(v0 + 1, u0 + 1);
  BilinearSample s;
  s.value = (1.0 - a) * (1.0 - b) * i00 + a * (1.0 - b) * i10 + (1.0 - a) * b * i01 + a * b * i11;
  s.d_u = (1.0 - b) * (i10 - i00) + b * (i11 - i01);
  s.d_v = (1.0 - a) * (i01 - i00) + a * (i11 - i10);
  return s;
}

void require_same_shape(int h0, int w0, int h1, int w1, const char* what) {
  if (h0 != h1 || w0 != w1) {
    throw Error(ErrorKind::kDimension, std::string(what) + ": " + std::to_string(h0) + "x" +
                                           std::to_string(w0) + " vs " + std::to_string(h1) +
                                           "x" + std::to_string(w1));
  }
}

}  // namespace scd
