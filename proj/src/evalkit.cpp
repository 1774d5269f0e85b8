#include "scd/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "scd/errors.hpp"

namespace scd {

std::vector<double> Trajectory::path_lengths() const {
  std::vector<double> dist(poses.size(), 0.0);
  for (std::size_t i = 1; i < poses.size(); ++i) {
    dist[i] = dist[i - 1] + (position(i) - position(i - 1)).norm();
  }
  return dist;
}

Trajectory chain_poses(const std::vector<PoseSE3>& relatives) {
  if (relatives.empty()) throw Error(ErrorKind::kInvalidArgument, "chain_poses needs at least one relative pose");
  Trajectory t;
  t.poses.reserve(relatives.size() + 1);
  t.poses.push_back(PoseSE3::identity());
  for (const PoseSE3& rel : relatives) t.poses.push_back(compose(rel.inverse(), t.poses.back()));
  return t;
}

std::vector<PoseSE3> relative_poses(const Trajectory& trajectory) {
  std::vector<PoseSE3> rel;
  for (std::size_t k = 0; k + 1 < trajectory.size(); ++k) {
    rel.push_back(compose(trajectory.poses[k], trajectory.poses[k + 1].inverse()));
  }
  return rel;
}

namespace {

void require_same_length(const Trajectory& a, const Trajectory& b, std::size_t min_size) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::kDimension, "trajectory lengths differ: " + std::to_string(a.size()) +
                                           " vs " + std::to_string(b.size()));
  }
  if (a.size() < min_size) {
    throw Error(ErrorKind::kDimension, "trajectory needs at least " + std::to_string(min_size) + " poses");
  }
}

Trajectory scale_translations(const Trajectory& t, double s) {
  Trajectory out;
  out.poses.reserve(t.size());
  for (const PoseSE3& p : t.poses) out.poses.emplace_back(p.rotation(), s * p.translation());
  return out;
}

}  // namespace

ScaleAlignment align_global_scale(const Trajectory& pred, const Trajectory& gt) {
  require_same_length(pred, gt, 2);
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k + 1 < pred.size(); ++k) {
    const Eigen::Vector3d dp = pred.position(k + 1) - pred.position(k);
    const Eigen::Vector3d dg = gt.position(k + 1) - gt.position(k);
    num += dp.dot(dg);
    den += dp.squaredNorm();
  }
  if (den == 0.0) throw Error(ErrorKind::kDegenerateScale, "predicted trajectory does not move");
  ScaleAlignment out;
  out.scale = num / den;
  out.aligned = scale_translations(pred, out.scale);
  return out;
}

PerFrameAlignment align_per_frame_scale(const std::vector<PoseSE3>& pred_relatives, const Trajectory& gt) {
  if (pred_relatives.size() + 1 != gt.size()) {
    throw Error(ErrorKind::kDimension, "per-frame alignment needs one relative pose per gt step");
  }
  const std::vector<PoseSE3> gt_rel = relative_poses(gt);
  PerFrameAlignment out;
  std::vector<PoseSE3> scaled;
  scaled.reserve(pred_relatives.size());
  for (std::size_t k = 0; k < pred_relatives.size(); ++k) {
    const PoseSE3& p = pred_relatives[k];
    const double pn = p.translation().norm();
    const double gn = gt_rel[k].translation().norm();
    double s = 1.0;
    if (gn == 0.0 || pn == 0.0) {
      out.skipped.push_back(k);
    } else {
      s = gn / pn;
    }
    out.scales.push_back(s);
    scaled.emplace_back(p.rotation(), s * p.translation());
  }
  out.aligned = chain_poses(scaled);
  return out;
}

OdomErrors kitti_odom_errors(const Trajectory& pred, const Trajectory& gt, const std::vector<double>& lengths) {
  require_same_length(pred, gt, 1);
  const std::vector<double> dist = gt.path_lengths();
  const std::size_t n = gt.size();
  OdomErrors out;
  for (double len : lengths) out.per_length.push_back({len, 0, 0.0, 0.0});

  for (std::size_t first = 0; first < n; ++first) {
    for (std::size_t li = 0; li < lengths.size(); ++li) {
      const double len = lengths[li];
      const double target = dist[first] + len - 1e-9 * len;
      const auto it = std::find_if(dist.begin() + static_cast<std::ptrdiff_t>(first) + 1, dist.end(),
                                   [target](double d) { return d >= target; });
      if (it == dist.end()) continue;
      const std::size_t last = static_cast<std::size_t>(it - dist.begin());
      const PoseSE3 delta_gt = compose(gt.poses[last], gt.poses[first].inverse());
      const PoseSE3 delta_pred = compose(pred.poses[last], pred.poses[first].inverse());
      const PoseSE3 err = compose(delta_gt, delta_pred.inverse());
      SegmentError seg;
      seg.first_frame = first;
      seg.length = len;
      seg.t_err = err.translation().norm() / len;
      seg.r_err = rotation_angle(err.rotation()) / len;
      out.segments.push_back(seg);
      auto& pl = out.per_length[li];
      ++pl.count;
      pl.t_err += seg.t_err;
      pl.r_err += seg.r_err;
    }
  }
  if (out.segments.empty()) {
    throw Error(ErrorKind::kNoValidSubsequence, "ground-truth path is shorter than the shortest segment length");
  }
  constexpr double kRadToDeg = 180.0 / std::numbers::pi;
  double t_sum = 0.0, r_sum = 0.0;
  for (const SegmentError& s : out.segments) {
    t_sum += s.t_err;
    r_sum += s.r_err;
  }
  const double count = static_cast<double>(out.segments.size());
  out.t_err = 100.0 * t_sum / count;
  out.r_err = 100.0 * kRadToDeg * r_sum / count;
  for (auto& pl : out.per_length) {
    if (pl.count == 0) continue;
    pl.t_err = 100.0 * pl.t_err / static_cast<double>(pl.count);
    pl.r_err = 100.0 * kRadToDeg * pl.r_err / static_cast<double>(pl.count);
  }
  return out;
}

double snippet_ate(const std::vector<Eigen::Vector3d>& pred, const std::vector<Eigen::Vector3d>& gt) {
  if (pred.size() != gt.size() || pred.empty()) {
    throw Error(ErrorKind::kDimension, "snippet_ate needs equally sized, nonempty snippets");
  }
  const Eigen::Vector3d offset = gt[0] - pred[0];
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const Eigen::Vector3d p = pred[i] + offset;
    num += p.dot(gt[i]);
    den += p.squaredNorm();
  }
  const double scale = den > 0.0 ? num / den : 1.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sq += (scale * (pred[i] + offset) - gt[i]).squaredNorm();
  return std::sqrt(sq) / static_cast<double>(pred.size());
}

AteResult ate_5frame(const std::vector<Trajectory>& pred_snippets, const std::vector<Trajectory>& gt_snippets) {
  if (pred_snippets.size() != gt_snippets.size() || pred_snippets.empty()) {
    throw Error(ErrorKind::kDimension, "ate_5frame needs matching, nonempty snippet lists");
  }
  AteResult out;
  for (std::size_t s = 0; s < pred_snippets.size(); ++s) {
    const Trajectory& p = pred_snippets[s];
    const Trajectory& g = gt_snippets[s];
    if (p.size() != 5 || g.size() != 5) {
      throw Error(ErrorKind::kDimension, "snippet " + std::to_string(s) + " does not have 5 poses");
    }
    std::vector<Eigen::Vector3d> pp, gp;
    for (std::size_t i = 0; i < 5; ++i) {
      pp.push_back(p.position(i));
      gp.push_back(g.position(i));
    }
    out.per_snippet.push_back(snippet_ate(pp, gp));
  }
  const double n = static_cast<double>(out.per_snippet.size());
  for (double e : out.per_snippet) out.mean += e;
  out.mean /= n;
  double var = 0.0;
  for (double e : out.per_snippet) var += (e - out.mean) * (e - out.mean);
  out.std = std::sqrt(var / n);
  return out;
}

std::vector<Trajectory> sliding_snippets(const Trajectory& trajectory, std::size_t length) {
  std::vector<Trajectory> out;
  if (length == 0 || trajectory.size() < length) return out;
  for (std::size_t first = 0; first + length <= trajectory.size(); ++first) {
    Trajectory snip;
    const PoseSE3 anchor = trajectory.poses[first].inverse();
    for (std::size_t i = 0; i < length; ++i) snip.poses.push_back(compose(trajectory.poses[first + i], anchor));
    out.push_back(std::move(snip));
  }
  return out;
}

namespace {

double median(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

DepthMetrics eigen_depth_metrics(const DepthMap& pred, const DepthMap& gt, const BoolGrid& mask,
                                 bool median_scale, double cap) {
  require_same_shape(pred.height(), pred.width(), gt.height(), gt.width(), "eigen_depth_metrics: pred vs gt");
  require_same_shape(pred.height(), pred.width(), static_cast<int>(mask.rows()), static_cast<int>(mask.cols()),
                     "eigen_depth_metrics: mask");
  if (!(cap > 1e-3)) throw Error(ErrorKind::kInvalidArgument, "depth cap must exceed 1e-3");
  std::vector<double> p, g;
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    if (!mask.data()[i]) continue;
    p.push_back(pred.values().data()[i]);
    g.push_back(gt.values().data()[i]);
  }
  if (p.empty()) throw Error(ErrorKind::kEmptyMask, "no pixel selected for depth evaluation");

  DepthMetrics m;
  m.count = p.size();
  if (median_scale) m.scale = median(g) / median(p);
  for (double& d : p) d = std::clamp(d * m.scale, 1e-3, cap);

  const double t1 = 1.25, t2 = 1.25 * 1.25, t3 = 1.25 * 1.25 * 1.25;
  double sq = 0.0, sq_log = 0.0;
  std::size_t c1 = 0, c2 = 0, c3 = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i];
    const double ref = g[i];
    const double diff = d - ref;
    m.abs_rel += std::abs(diff) / ref;
    m.sq_rel += diff * diff / ref;
    sq += diff * diff;
    const double dl = std::log(d) - std::log(ref);
    sq_log += dl * dl;
    const double ratio = std::max(d / ref, ref / d);
    c1 += ratio < t1;
    c2 += ratio < t2;
    c3 += ratio < t3;
  }
  const double n = static_cast<double>(p.size());
  m.abs_rel /= n;
  m.sq_rel /= n;
  m.rms = std::sqrt(sq / n);
  m.rms_log = std::sqrt(sq_log / n);
  m.a1 = static_cast<double>(c1) / n;
  m.a2 = static_cast<double>(c2) / n;
  m.a3 = static_cast<double>(c3) / n;
  return m;
}

}  // namespace scd
