#include "scd/losses.hpp"

#include <algorithm>
#include <cmath>

#include "scd/errors.hpp"
#include "ssim_internal.hpp"

namespace scd {

namespace detail {

SsimParts ssim_parts(const double* x, const double* y) {
  double mx = 0.0, my = 0.0;
  for (int k = 0; k < 9; ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= 9.0;
  my /= 9.0;
  double vx = 0.0, vy = 0.0, cxy = 0.0;
  for (int k = 0; k < 9; ++k) {
    const double dx = x[k] - mx;
    const double dy = y[k] - my;
    vx += dx * dx;
    vy += dy * dy;
    cxy += dx * dy;
  }
  vx /= 9.0;
  vy /= 9.0;
  cxy /= 9.0;
  SsimParts p;
  p.mu_x = mx;
  p.mu_y = my;
  p.a1 = 2.0 * mx * my + kSsimC1;
  p.a2 = 2.0 * cxy + kSsimC2;
  p.b1 = mx * mx + my * my + kSsimC1;
  p.b2 = vx + vy + kSsimC2;
  p.value = (p.a1 * p.a2) / (p.b1 * p.b2);
  return p;
}

void ssim_grad_y(const double* x, const double* y, const SsimParts& p, double* grad) {
  const double denom = p.b1 * p.b2;
  for (int k = 0; k < 9; ++k) {
    const double da1 = 2.0 * p.mu_x / 9.0;
    const double da2 = 2.0 * (x[k] - p.mu_x) / 9.0;
    const double db1 = 2.0 * p.mu_y / 9.0;
    const double db2 = 2.0 * (y[k] - p.mu_y) / 9.0;
    grad[k] = (da1 * p.a2 + p.a1 * da2) / denom - p.value * (db1 / p.b1 + db2 / p.b2);
  }
}

}  // namespace detail

void LossWeights::validate() const {
  for (double x : {alpha, beta, gamma, lambda_i, lambda_s}) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw Error(ErrorKind::kInvalidArgument, "loss weights must be finite and nonnegative");
    }
  }
}

double ssim_window(const double* x, const double* y) { return detail::ssim_parts(x, y).value; }

Grid ssim_dissimilarity(const Image& x, const Image& y) {
  require_same_shape(x.height(), x.width(), y.height(), y.width(), "ssim_dissimilarity");
  if (x.channels() != y.channels()) throw Error(ErrorKind::kDimension, "ssim_dissimilarity: channel count differs");
  const int h = x.height();
  const int w = x.width();
  if (h < 3 || w < 3) throw Error(ErrorKind::kDimension, "ssim_dissimilarity needs at least 3x3 images");

  // SSIM per window center, averaged over channels.
  Grid center_ssim = Grid::Zero(h, w);
  double xs[9], ys[9];
  for (int c = 0; c < x.channels(); ++c) {
    const Grid& gx = x.channel(c);
    const Grid& gy = y.channel(c);
    for (int v = 1; v < h - 1; ++v) {
      for (int u = 1; u < w - 1; ++u) {
        int k = 0;
        for (int dv = -1; dv <= 1; ++dv) {
          for (int du = -1; du <= 1; ++du, ++k) {
            xs[k] = gx(v + dv, u + du);
            ys[k] = gy(v + dv, u + du);
          }
        }
        center_ssim(v, u) += ssim_window(xs, ys);
      }
    }
  }
  center_ssim /= x.channels();

  Grid out(h, w);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const double s = center_ssim(detail::window_center(v, h), detail::window_center(u, w));
      out(v, u) = std::clamp(0.5 * (1.0 - s), 0.0, 1.0);
    }
  }
  return out;
}

Image masked_synthesis(const Image& image_a, const WarpResult& warp) {
  require_same_shape(image_a.height(), image_a.width(), warp.height(), warp.width(), "masked_synthesis");
  if (image_a.channels() != warp.synthesized.channels()) {
    throw Error(ErrorKind::kDimension, "masked_synthesis: channel count differs");
  }
  std::vector<Grid> channels;
  channels.reserve(static_cast<std::size_t>(image_a.channels()));
  for (int c = 0; c < image_a.channels(); ++c) {
    channels.push_back(warp.valid.select(warp.synthesized.channel(c), image_a.channel(c)));
  }
  return Image(std::move(channels));
}

PhotometricResult photometric_loss(const Image& image_a, const WarpResult& warp, const LossWeights& w) {
  if (warp.valid_count == 0) throw Error(ErrorKind::kEmptyValidSet, "photometric loss over an empty valid set");
  const Image synth = masked_synthesis(image_a, warp);
  const Grid dissim = ssim_dissimilarity(image_a, synth);
  const int h = warp.height();
  const int wd = warp.width();
  const int channels = image_a.channels();
  PhotometricResult out;
  out.per_pixel = Grid::Zero(h, wd);
  double sum = 0.0;
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < wd; ++u) {
      if (!warp.valid(v, u)) continue;
      double l1 = 0.0;
      for (int c = 0; c < channels; ++c) l1 += std::abs(image_a(c, v, u) - synth(c, v, u));
      l1 /= channels;
      const double lp = w.lambda_i * l1 + w.lambda_s * dissim(v, u);
      out.per_pixel(v, u) = lp;
      sum += lp;
    }
  }
  out.value = sum / warp.valid_count;
  return out;
}

double smoothness_loss(const DepthMap& depth_a, const Image& image_a, const LossOptions& options) {
  const int h = depth_a.height();
  const int w = depth_a.width();
  require_same_shape(h, w, image_a.height(), image_a.width(), "smoothness_loss");
  const int channels = image_a.channels();
  Grid d = depth_a.values();
  if (options.normalize_smoothness_depth) d /= d.mean();

  auto edge_weight = [&](int v0, int u0, int v1, int u1) {
    double g = 0.0;
    for (int c = 0; c < channels; ++c) g += std::abs(image_a(c, v1, u1) - image_a(c, v0, u0));
    return std::exp(-g / channels);
  };
  double sum = 0.0;
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (u + 1 < w) {
        const double t = edge_weight(v, u, v, u + 1) * (d(v, u + 1) - d(v, u));
        sum += t * t;
      }
      if (v + 1 < h) {
        const double t = edge_weight(v, u, v + 1, u) * (d(v + 1, u) - d(v, u));
        sum += t * t;
      }
    }
  }
  return sum / (static_cast<double>(h) * w);
}

double depth_inconsistency(double projected, double interpolated) {
  return std::abs(projected - interpolated) / (projected + interpolated);
}

InconsistencyMap depth_inconsistency(const WarpResult& warp) {
  InconsistencyMap out;
  out.valid = warp.valid;
  out.values = Grid::Zero(warp.height(), warp.width());
  for (int v = 0; v < warp.height(); ++v) {
    for (int u = 0; u < warp.width(); ++u) {
      if (warp.valid(v, u)) {
        out.values(v, u) = depth_inconsistency(warp.projected_depth(v, u), warp.interpolated_depth(v, u));
      }
    }
  }
  return out;
}

namespace {

double mean_over(const Grid& values, const BoolGrid& valid, const char* what) {
  double sum = 0.0;
  long count = 0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (valid.data()[i]) {
      sum += values.data()[i];
      ++count;
    }
  }
  if (count == 0) throw Error(ErrorKind::kEmptyValidSet, what);
  return sum / static_cast<double>(count);
}

}  // namespace

double gc_loss(const InconsistencyMap& d_diff) {
  return mean_over(d_diff.values, d_diff.valid, "geometry-consistency loss over an empty valid set");
}

WeightMask weight_mask(const InconsistencyMap& d_diff) {
  WeightMask m;
  m.valid = d_diff.valid;
  m.values = d_diff.valid.select(1.0 - d_diff.values, 0.0);
  return m;
}

double masked_photometric_loss(const Grid& per_pixel_lp, const WeightMask& mask) {
  require_same_shape(static_cast<int>(per_pixel_lp.rows()), static_cast<int>(per_pixel_lp.cols()),
                     static_cast<int>(mask.values.rows()), static_cast<int>(mask.values.cols()),
                     "masked_photometric_loss");
  const Grid weighted = mask.values * per_pixel_lp;
  return mean_over(weighted, mask.valid, "masked photometric loss over an empty valid set");
}

LossReport directional_loss(const Image& image_a, const Image& image_b, const DepthMap& depth_a,
                            const DepthMap& depth_b, const PoseSE3& pose_ab, const Intrinsics& K,
                            const LossWeights& w, const LossOptions& options, const FrozenTerms* frozen) {
  w.validate();
  require_same_shape(image_a.height(), image_a.width(), depth_a.height(), depth_a.width(), "total_loss: I_a vs D_a");
  if (image_a.channels() != image_b.channels()) throw Error(ErrorKind::kDimension, "total_loss: channel count differs");

  WarpResult warp = frozen ? warp_pair_frozen(image_b, depth_a, depth_b, pose_ab, K, frozen->valid)
                           : warp_pair(image_b, depth_a, depth_b, pose_ab, K);
  if (warp.valid_count == 0) throw Error(ErrorKind::kEmptyValidSet, "no pixel of frame a projects into frame b");
  if (frozen && frozen->interpolated_depth) {
    warp.interpolated_depth = warp.valid.select(*frozen->interpolated_depth, 0.0);
  }

  LossReport r;
  const PhotometricResult photo = photometric_loss(image_a, warp, w);
  r.l_p = photo.value;
  r.per_pixel_lp = photo.per_pixel;
  r.d_diff = depth_inconsistency(warp);
  r.mask = weight_mask(r.d_diff);
  r.l_gc = gc_loss(r.d_diff);
  WeightMask used_mask = r.mask;
  if (frozen && frozen->mask) used_mask.values = warp.valid.select(*frozen->mask, 0.0);
  r.l_p_masked = masked_photometric_loss(photo.per_pixel, used_mask);
  r.l_s = smoothness_loss(depth_a, image_a, options);
  r.valid_count = warp.valid_count;
  r.total = w.alpha * r.l_p_masked + w.beta * r.l_s + w.gamma * r.l_gc;
  return r;
}

LossReport total_loss(const Image& image_a, const Image& image_b, const DepthMap& depth_a,
                      const DepthMap& depth_b, const PoseSE3& pose_ab, const Intrinsics& K,
                      const LossWeights& w, bool bidirectional, const LossOptions& options) {
  LossReport fwd = directional_loss(image_a, image_b, depth_a, depth_b, pose_ab, K, w, options);
  if (!bidirectional) return fwd;
  const LossReport bwd = directional_loss(image_b, image_a, depth_b, depth_a, pose_ab.inverse(), K, w, options);
  fwd.l_p = 0.5 * (fwd.l_p + bwd.l_p);
  fwd.l_p_masked = 0.5 * (fwd.l_p_masked + bwd.l_p_masked);
  fwd.l_s = 0.5 * (fwd.l_s + bwd.l_s);
  fwd.l_gc = 0.5 * (fwd.l_gc + bwd.l_gc);
  fwd.total = 0.5 * (fwd.total + bwd.total);
  return fwd;
}

}  // namespace scd
