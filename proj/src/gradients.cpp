#include "scd/gradients.hpp"

#include <algorithm>
#include <cmath>

#include "scd/errors.hpp"
#include "scd/random.hpp"
#include "ssim_internal.hpp"

namespace scd {

namespace {

constexpr double kKink = 1e-9;

double kink_sign(double r, double scale) {
  if (std::abs(r) <= kKink * scale) return 0.0;
  return r > 0.0 ? 1.0 : -1.0;
}

// ∂L_s/∂D for the edge-aware smoothness term.
Grid smoothness_gradient(const DepthMap& depth, const Image& image, const LossOptions& options) {
  const int h = depth.height();
  const int w = depth.width();
  const int channels = image.channels();
  const double mean = depth.values().mean();
  const Grid d = options.normalize_smoothness_depth ? Grid(depth.values() / mean) : depth.values();
  const double norm = 1.0 / (static_cast<double>(h) * w);

  auto edge_weight = [&](int v0, int u0, int v1, int u1) {
    double g = 0.0;
    for (int c = 0; c < channels; ++c) g += std::abs(image(c, v1, u1) - image(c, v0, u0));
    return std::exp(-g / channels);
  };
  Grid g = Grid::Zero(h, w);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (u + 1 < w) {
        const double e = edge_weight(v, u, v, u + 1);
        const double t = 2.0 * norm * e * e * (d(v, u + 1) - d(v, u));
        g(v, u + 1) += t;
        g(v, u) -= t;
      }
      if (v + 1 < h) {
        const double e = edge_weight(v, u, v + 1, u);
        const double t = 2.0 * norm * e * e * (d(v + 1, u) - d(v, u));
        g(v + 1, u) += t;
        g(v, u) -= t;
      }
    }
  }
  if (!options.normalize_smoothness_depth) return g;
  // d̃ = D / mean(D): ∂/∂D_q = (g̃_q − mean_p(g̃_p·d̃_p)) / mean(D)
  const double coupling = (g * d).sum() / static_cast<double>(h * w);
  return (g - coupling) / mean;
}

}  // namespace

GradReport loss_gradients(const Image& image_a, const Image& image_b, const DepthMap& depth_a,
                          const DepthMap& depth_b, const PoseSE3& pose_ab, const Intrinsics& K,
                          const LossWeights& w, const GradientOptions& options) {
  w.validate();
  require_same_shape(image_a.height(), image_a.width(), depth_a.height(), depth_a.width(),
                     "loss_gradients: I_a vs D_a");
  if (image_a.channels() != image_b.channels()) {
    throw Error(ErrorKind::kDimension, "loss_gradients: channel count differs");
  }
  const WarpResult warp = warp_pair(image_b, depth_a, depth_b, pose_ab, K);
  if (warp.valid_count == 0) throw Error(ErrorKind::kEmptyValidSet, "no pixel of frame a projects into frame b");

  const int h = warp.height();
  const int wd = warp.width();
  const int channels = image_a.channels();
  const double inv_n = 1.0 / warp.valid_count;
  const Image synth = masked_synthesis(image_a, warp);

  // Forward pass, keeping the per-pixel quantities the backward pass needs.
  const PhotometricResult photo = photometric_loss(image_a, warp, w);
  const InconsistencyMap d_diff = depth_inconsistency(warp);
  const WeightMask mask = weight_mask(d_diff);
  const double l_p_masked = masked_photometric_loss(photo.per_pixel, mask);
  const double l_gc = gc_loss(d_diff);
  const double l_s = smoothness_loss(depth_a, image_a, options.loss);

  GradReport out;
  out.value = w.alpha * l_p_masked + w.beta * l_s + w.gamma * l_gc;

  // Upstream gradients of the per-pixel photometric value and of D_diff.
  Grid g_lp = Grid::Zero(h, wd);
  Grid g_dd = Grid::Zero(h, wd);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < wd; ++u) {
      if (!warp.valid(v, u)) continue;
      g_lp(v, u) = w.alpha * inv_n * mask.values(v, u);
      g_dd(v, u) = w.gamma * inv_n;
      if (!options.stop_gradient_mask) g_dd(v, u) -= w.alpha * inv_n * photo.per_pixel(v, u);
    }
  }

  // ∂L/∂I'_a per channel, accumulated only on valid pixels.
  std::vector<Grid> g_synth(static_cast<std::size_t>(channels), Grid::Zero(h, wd));
  for (int c = 0; c < channels; ++c) {
    Grid& gs = g_synth[static_cast<std::size_t>(c)];
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < wd; ++u) {
        if (!warp.valid(v, u)) continue;
        const double r = image_a(c, v, u) - synth(c, v, u);
        gs(v, u) -= g_lp(v, u) * w.lambda_i / channels * kink_sign(r, 1.0);
      }
    }
  }

  // SSIM: each pixel reads the window at its (clamped) center. Collect the
  // upstream per center, then push it through the window derivative.
  if (w.lambda_s != 0.0) {
    Grid center_raw = Grid::Zero(h, wd);
    double xs[9], ys[9];
    for (int c = 0; c < channels; ++c) {
      for (int v = 1; v < h - 1; ++v) {
        for (int u = 1; u < wd - 1; ++u) {
          int k = 0;
          for (int dv = -1; dv <= 1; ++dv)
            for (int du = -1; du <= 1; ++du, ++k) {
              xs[k] = image_a(c, v + dv, u + du);
              ys[k] = synth(c, v + dv, u + du);
            }
          center_raw(v, u) += detail::ssim_parts(xs, ys).value;
        }
      }
    }
    Grid upstream = Grid::Zero(h, wd);
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < wd; ++u) {
        if (!warp.valid(v, u)) continue;
        const int cv = detail::window_center(v, h);
        const int cu = detail::window_center(u, wd);
        const double raw = 0.5 * (1.0 - center_raw(cv, cu) / channels);
        if (raw < 0.0 || raw > 1.0) continue;  // clamped
        upstream(cv, cu) += g_lp(v, u) * w.lambda_s;
      }
    }
    double grad[9];
    for (int c = 0; c < channels; ++c) {
      Grid& gs = g_synth[static_cast<std::size_t>(c)];
      for (int v = 1; v < h - 1; ++v) {
        for (int u = 1; u < wd - 1; ++u) {
          const double up = upstream(v, u);
          if (up == 0.0) continue;
          int k = 0;
          for (int dv = -1; dv <= 1; ++dv)
            for (int du = -1; du <= 1; ++du, ++k) {
              xs[k] = image_a(c, v + dv, u + du);
              ys[k] = synth(c, v + dv, u + du);
            }
          detail::ssim_grad_y(xs, ys, detail::ssim_parts(xs, ys), grad);
          k = 0;
          for (int dv = -1; dv <= 1; ++dv)
            for (int du = -1; du <= 1; ++du, ++k) {
              if (warp.valid(v + dv, u + du)) gs(v + dv, u + du) += up * (-0.5 / channels) * grad[k];
            }
        }
      }
    }
  }

  // Through bilinear sampling, projection and the rigid transform.
  out.d_loss_d_depth = Grid::Zero(h, wd);
  out.d_loss_d_depth_b = Grid::Zero(h, wd);
  Eigen::Vector3d g_omega = Eigen::Vector3d::Zero();
  Eigen::Vector3d g_trans = Eigen::Vector3d::Zero();
  const Eigen::Matrix3d& rot = pose_ab.rotation();
  const Eigen::Vector3d& tr = pose_ab.translation();
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < wd; ++u) {
      if (!warp.valid(v, u)) continue;
      const double qu = warp.proj_u(v, u);
      const double qv = warp.proj_v(v, u);
      double g_qu = 0.0, g_qv = 0.0;
      for (int c = 0; c < channels; ++c) {
        const double gs = g_synth[static_cast<std::size_t>(c)](v, u);
        if (gs == 0.0) continue;
        const BilinearSample s = sample_bilinear(image_b.channel(c), qu, qv);
        g_qu += gs * s.d_u;
        g_qv += gs * s.d_v;
      }

      const double z = warp.projected_depth(v, u);
      const double s = warp.interpolated_depth(v, u);
      const double sgn = kink_sign(z - s, z + s);
      const double denom = (z + s) * (z + s);
      const double g_z = g_dd(v, u) * sgn * 2.0 * s / denom;
      if (!options.detach_interpolated_depth) {
        const double g_s = -g_dd(v, u) * sgn * 2.0 * z / denom;
        const BilinearSample ds = sample_bilinear(depth_b.values(), qu, qv);
        g_qu += g_s * ds.d_u;
        g_qv += g_s * ds.d_v;
        const BilinearStencil st = bilinear_stencil(h, wd, qu, qv);
        out.d_loss_d_depth_b(st.v0, st.u0) += g_s * st.w00;
        out.d_loss_d_depth_b(st.v0, st.u0 + 1) += g_s * st.w10;
        out.d_loss_d_depth_b(st.v0 + 1, st.u0) += g_s * st.w01;
        out.d_loss_d_depth_b(st.v0 + 1, st.u0 + 1) += g_s * st.w11;
      }

      const double d = depth_a(v, u);
      const Eigen::Vector3d ray((u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0);
      const Eigen::Vector3d y = rot * (d * ray) + tr;
      const double iz = 1.0 / y.z();
      const Eigen::Vector3d g_y(g_qu * K.fx * iz, g_qv * K.fy * iz,
                                -(g_qu * K.fx * y.x() + g_qv * K.fy * y.y()) * iz * iz + g_z);
      out.d_loss_d_depth(v, u) += g_y.dot(rot * ray);
      g_omega += y.cross(g_y);
      g_trans += g_y;
    }
  }
  out.d_loss_d_twist << g_omega, g_trans;

  if (w.beta != 0.0) out.d_loss_d_depth += w.beta * smoothness_gradient(depth_a, image_a, options.loss);
  return out;
}

Difference finite_difference(const std::function<double(double)>& f, double x, double h) {
  const double f0 = f(x);
  const double fp = f(x + h);
  const double fm = f(x - h);
  return {(fp - f0) / h, (f0 - fm) / h, (fp - fm) / (2.0 * h)};
}

GradReport fd_gradient(const Image& image_a, const Image& image_b, const DepthMap& depth_a,
                       const DepthMap& depth_b, const PoseSE3& pose_ab, const Intrinsics& K,
                       const LossWeights& w, const FdSteps& steps, const GradientOptions& options) {
  if (!(steps.twist > 0.0) || !(steps.relative_depth > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "finite-difference steps must be positive");
  }
  const LossReport base = directional_loss(image_a, image_b, depth_a, depth_b, pose_ab, K, w, options.loss);
  FrozenTerms frozen;
  frozen.valid = base.d_diff.valid;
  if (options.stop_gradient_mask) frozen.mask = base.mask.values;
  if (options.detach_interpolated_depth) {
    frozen.interpolated_depth =
        warp_pair(image_b, depth_a, depth_b, pose_ab, K).interpolated_depth;
  }
  auto eval = [&](const DepthMap& da, const DepthMap& db, const PoseSE3& p) {
    return directional_loss(image_a, image_b, da, db, p, K, w, options.loss, &frozen).total;
  };

  GradReport out;
  out.value = base.total;
  for (int i = 0; i < 6; ++i) {
    auto f = [&](double x) {
      Vector6d delta = Vector6d::Zero();
      delta[i] = x;
      return eval(depth_a, depth_b, compose(pose_ab, exp_twist(Twist::from_vector(delta))));
    };
    const double hp = steps.twist;
    out.d_loss_d_twist[i] = (f(hp) - f(-hp)) / (2.0 * hp);
  }

  const int h = depth_a.height();
  const int wd = depth_a.width();
  out.d_loss_d_depth = Grid::Zero(h, wd);
  out.d_loss_d_depth_b = Grid::Zero(h, wd);
  Grid da = depth_a.values();
  Grid db = depth_b.values();
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < wd; ++u) {
      const double step_a = steps.relative_depth * da(v, u);
      const double keep_a = da(v, u);
      da(v, u) = keep_a + step_a;
      const double fp = eval(DepthMap(da), depth_b, pose_ab);
      da(v, u) = keep_a - step_a;
      const double fm = eval(DepthMap(da), depth_b, pose_ab);
      da(v, u) = keep_a;
      out.d_loss_d_depth(v, u) = (fp - fm) / (2.0 * step_a);

      const double step_b = steps.relative_depth * db(v, u);
      const double keep_b = db(v, u);
      db(v, u) = keep_b + step_b;
      const double gp = eval(depth_a, DepthMap(db), pose_ab);
      db(v, u) = keep_b - step_b;
      const double gm = eval(depth_a, DepthMap(db), pose_ab);
      db(v, u) = keep_b;
      out.d_loss_d_depth_b(v, u) = (gp - gm) / (2.0 * step_b);
    }
  }
  return out;
}

double GradientDiscrepancy::max() const { return std::max({depth, depth_b, twist}); }

GradientDiscrepancy compare_gradients(const GradReport& analytic, const GradReport& reference, double floor) {
  auto worst = [floor](const auto& a, const auto& r) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const double ref = r.data()[i];
      m = std::max(m, std::abs(a.data()[i] - ref) / std::max(std::abs(ref), floor));
    }
    return m;
  };
  GradientDiscrepancy d;
  d.depth = worst(analytic.d_loss_d_depth, reference.d_loss_d_depth);
  d.depth_b = worst(analytic.d_loss_d_depth_b, reference.d_loss_d_depth_b);
  d.twist = worst(analytic.d_loss_d_twist, reference.d_loss_d_twist);
  return d;
}

namespace {

double frac_distance(double x) {
  const double f = x - std::floor(x);
  return std::min(f, 1.0 - f);
}

}  // namespace

GradCheckInstance make_gradcheck_instance(std::uint64_t seed, int height, int width, int channels,
                                          double margin) {
  Rng rng(seed);
  GradCheckInstance inst;
  inst.K.width = width;
  inst.K.height = height;
  inst.K.fx = 0.9 * width;
  inst.K.fy = 0.9 * height;
  inst.K.cx = 0.5 * (width - 1);
  inst.K.cy = 0.5 * (height - 1);

  auto random_image = [&] {
    std::vector<Grid> ch;
    for (int c = 0; c < channels; ++c) {
      Grid g(height, width);
      for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.uniform(0.05, 0.95);
      ch.push_back(std::move(g));
    }
    return Image(std::move(ch));
  };
  inst.image_a = random_image();
  inst.image_b = random_image();

  Grid db(height, width);
  for (Eigen::Index i = 0; i < db.size(); ++i) db.data()[i] = rng.uniform(2.0, 4.0);
  inst.depth_b = DepthMap(db);

  Twist t;
  for (int i = 0; i < 3; ++i) t.omega[i] = rng.uniform(-0.03, 0.03);
  for (int i = 0; i < 3; ++i) t.v[i] = rng.uniform(-0.15, 0.15);
  inst.pose_ab = exp_twist(t);

  Grid da(height, width);
  for (Eigen::Index i = 0; i < da.size(); ++i) da.data()[i] = rng.uniform(2.0, 4.0);

  // Redraw the depth of any valid pixel sitting near a kink until none does.
  for (int round = 0; round < 1000; ++round) {
    const WarpResult warp = warp_pair(inst.image_b, DepthMap(da), inst.depth_b, inst.pose_ab, inst.K);
    bool clean = true;
    for (int v = 0; v < height; ++v) {
      for (int u = 0; u < width; ++u) {
        const double qu = warp.proj_u(v, u);
        const double qv = warp.proj_v(v, u);
        bool bad = false;
        if (warp.valid(v, u)) {
          bad = frac_distance(qu) < margin || frac_distance(qv) < margin;
          for (int c = 0; c < channels && !bad; ++c) {
            bad = std::abs(inst.image_a(c, v, u) - warp.synthesized(c, v, u)) < margin;
          }
          const double z = warp.projected_depth(v, u);
          const double s = warp.interpolated_depth(v, u);
          bad = bad || std::abs(z - s) < margin * (z + s);
        } else {
          // Also keep invalid pixels away from the image border so V is stable.
          const Eigen::Vector3d y =
              inst.pose_ab * lift({double(u), double(v)}, da(v, u), inst.K);
          if (y.z() > kDepthFloor) {
            const double pu = inst.K.fx * y.x() / y.z() + inst.K.cx;
            const double pv = inst.K.fy * y.y() / y.z() + inst.K.cy;
            bad = std::abs(pu) < margin || std::abs(pu - (width - 1)) < margin ||
                  std::abs(pv) < margin || std::abs(pv - (height - 1)) < margin;
          }
        }
        if (bad) {
          da(v, u) = rng.uniform(2.0, 4.0);
          clean = false;
        }
      }
    }
    if (clean) break;
  }
  inst.depth_a = DepthMap(da);
  return inst;
}

GradCheckSummary run_gradcheck(std::uint64_t seed, int count, int min_size, int max_size,
                               double tolerance, const LossWeights& w,
                               const std::function<void(int, int, int, double)>& on_instance) {
  if (count <= 0 || min_size < 3 || max_size < min_size) {
    throw Error(ErrorKind::kInvalidArgument, "gradcheck needs count > 0 and 3 <= min_size <= max_size");
  }
  Rng rng(seed);
  GradCheckSummary summary;
  for (int i = 0; i < count; ++i) {
    const int hgt = rng.uniform_int(min_size, max_size);
    const int wid = rng.uniform_int(min_size, max_size);
    const int channels = (i % 2 == 0) ? 1 : 3;
    const std::uint64_t inst_seed = (static_cast<std::uint64_t>(rng.uniform_int(0, 1 << 30)) << 8) + i;
    const GradCheckInstance inst = make_gradcheck_instance(inst_seed, hgt, wid, channels);
    const GradReport an = loss_gradients(inst.image_a, inst.image_b, inst.depth_a, inst.depth_b,
                                         inst.pose_ab, inst.K, w);
    const GradReport fd = fd_gradient(inst.image_a, inst.image_b, inst.depth_a, inst.depth_b,
                                      inst.pose_ab, inst.K, w);
    const double err = compare_gradients(an, fd).max();
    summary.max_rel_error = std::max(summary.max_rel_error, err);
    ++summary.instances;
    if (!(err <= tolerance)) ++summary.failures;
    if (on_instance) on_instance(i, hgt, wid, err);
  }
  return summary;
}

}  // namespace scd
