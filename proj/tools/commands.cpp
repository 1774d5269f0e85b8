#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>

#include "json.hpp"
#include "scd/errors.hpp"
#include "scd/evalkit.hpp"
#include "scd/gradients.hpp"
#include "scd/io.hpp"
#include "scd/random.hpp"
#include "scd/synth.hpp"
#include "svg_plot.hpp"

namespace scd::cli {

using nlohmann::json;

namespace {

constexpr double kDegPerRad = 180.0 / std::numbers::pi;

void emit(std::ostream& out, const json& j) { out << j.dump(2) << "\n"; }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, dir.string() + ": cannot create directory: " + ec.message());
}

fs::path require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw Error(ErrorKind::kIo, p.string() + ": no such file");
  return p;
}

fs::path frame_image_path(const fs::path& dir, int index) {
  const fs::path pgm = dir / frame_name("frame", index, "pgm");
  if (fs::is_regular_file(pgm)) return pgm;
  return require_file(dir / frame_name("frame", index, "ppm"));
}

// P_ab from camera-to-world poses: X_b = T_b⁻¹·T_a·X_a.
PoseSE3 relative_from_world(const PoseSE3& cam_to_world_a, const PoseSE3& cam_to_world_b) {
  return compose(cam_to_world_a, cam_to_world_b.inverse());
}

const PoseSE3& pose_at(const std::vector<PoseSE3>& poses, int index, const fs::path& file) {
  if (index < 0 || static_cast<std::size_t>(index) >= poses.size()) {
    throw Error(ErrorKind::kInvalidArgument, file.string() + " has no pose for frame " + std::to_string(index));
  }
  return poses[static_cast<std::size_t>(index)];
}

json report_json(const LossReport& r) {
  return {{"l_p", r.l_p},   {"l_p_masked", r.l_p_masked}, {"l_s", r.l_s},
          {"l_gc", r.l_gc}, {"total", r.total},           {"valid_count", r.valid_count}};
}

// Invalid pixels are written as NaN so they are distinguishable in viewers.
Grid with_invalid(const Grid& values, const BoolGrid& valid) {
  return valid.select(values, Grid::Constant(values.rows(), values.cols(), std::nan("")));
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double median_ratio(const DepthMap& d, const DepthMap& gt) {
  const Grid r = d.values() / gt.values();
  return median(std::vector<double>(r.data(), r.data() + r.size()));
}

json metrics_json(const DepthMetrics& m) {
  return {{"abs_rel", m.abs_rel}, {"sq_rel", m.sq_rel}, {"rms", m.rms},     {"rms_log", m.rms_log},
          {"a1", m.a1},           {"a2", m.a2},         {"a3", m.a3},       {"count", m.count},
          {"scale", m.scale}};
}

}  // namespace

std::string frame_name(const std::string& stem, int index, const std::string& ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "_%03d.", index);
  return stem + buf + ext;
}

int cmd_synth(const SynthArgs& o, std::ostream& out) {
  SceneSpec spec;
  if (!o.spec_path.empty()) {
    spec = io::read_scene(o.spec_path);
  } else {
    const int size = o.size > 0 ? o.size : 0;
    if (o.preset == "static-planes") {
      spec = scenes::static_planes(o.seed, size > 0 ? size : 128, o.frames > 0 ? o.frames : 2);
    } else if (o.preset == "fronto-parallel") {
      spec = scenes::fronto_parallel(o.seed, size > 0 ? size : 64, o.frames > 0 ? o.frames : 3, 5.0,
                                     Eigen::Vector3d(0.3, 0.05, 0.1));
    } else if (o.preset == "occlusion-band") {
      spec = scenes::occlusion_band(o.seed, size > 0 ? size : 96);
    } else if (o.preset == "moving-box") {
      spec = scenes::moving_box(o.seed, size > 0 ? size : 96);
    } else {
      throw Error(ErrorKind::kInvalidArgument, "unknown preset '" + o.preset + "'");
    }
  }
  const std::vector<RenderedFrame> frames = render(spec);

  ensure_dir(o.out_dir);
  const std::string ext = spec.channels == 1 ? "pgm" : "ppm";
  std::vector<PoseSE3> cam_to_world;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const int k = static_cast<int>(i);
    io::write_pnm(o.out_dir / frame_name("frame", k, ext), frames[i].image);
    io::write_depth(o.out_dir / frame_name("depth", k, "pfm"), frames[i].depth);
    io::write_mask(o.out_dir / frame_name("occlusion", k, "pgm"), frames[i].occlusion_mask);
    io::write_mask(o.out_dir / frame_name("dynamic", k, "pgm"), frames[i].dynamic_mask);
    cam_to_world.push_back(frames[i].gt_pose.inverse());
  }
  io::write_kitti_poses(o.out_dir / "poses.txt", cam_to_world);
  io::write_camera(o.out_dir / "camera.json", spec.intrinsics);
  io::write_text(o.out_dir / "scene.json", io::scene_to_json(spec).dump(2) + "\n");

  emit(out, {{"frames", frames.size()}, {"width", spec.width}, {"height", spec.height},
             {"channels", spec.channels}, {"out_dir", o.out_dir.string()}});
  return 0;
}

int cmd_loss(const LossArgs& o, std::ostream& out) {
  const Intrinsics K = io::read_camera(require_file(o.data_dir / "camera.json"));
  const fs::path pose_file = o.poses.empty() ? o.data_dir / "poses.txt" : o.poses;
  const std::vector<PoseSE3> poses = io::read_kitti_poses(require_file(pose_file));
  const fs::path depth_dir = o.depth_dir.empty() ? o.data_dir : o.depth_dir;

  const Image ia = io::read_pnm(frame_image_path(o.data_dir, o.a));
  const Image ib = io::read_pnm(frame_image_path(o.data_dir, o.b));
  const DepthMap da = io::read_depth(require_file(depth_dir / frame_name("depth", o.a, "pfm")));
  const DepthMap db = io::read_depth(require_file(depth_dir / frame_name("depth", o.b, "pfm")));
  const PoseSE3 pab = relative_from_world(pose_at(poses, o.a, pose_file), pose_at(poses, o.b, pose_file));

  scd::LossOptions lo;
  lo.normalize_smoothness_depth = o.normalize_smoothness_depth;
  const LossReport r = total_loss(ia, ib, da, db, pab, K, o.weights, o.bidirectional, lo);

  json j = report_json(r);
  j["a"] = o.a;
  j["b"] = o.b;
  j["bidirectional"] = o.bidirectional;
  if (!o.dump_dir.empty()) {
    ensure_dir(o.dump_dir);
    io::write_pfm(o.dump_dir / "d_diff.pfm", with_invalid(r.d_diff.values, r.d_diff.valid));
    io::write_pfm(o.dump_dir / "mask.pfm", with_invalid(r.mask.values, r.mask.valid));
    io::write_pfm(o.dump_dir / "per_pixel_lp.pfm", with_invalid(r.per_pixel_lp, r.mask.valid));
  }
  emit(out, j);
  return 0;
}

int cmd_gradcheck(const GradcheckArgs& o, std::ostream& out) {
  if (!(o.tolerance > 0.0)) throw Error(ErrorKind::kInvalidArgument, "tolerance must be positive");
  json instances = json::array();
  const GradCheckSummary s =
      run_gradcheck(o.seed, o.count, o.min_size, o.max_size, o.tolerance, o.weights,
                    [&](int i, int h, int w, double err) {
                      instances.push_back({{"index", i}, {"height", h}, {"width", w}, {"max_rel_error", err}});
                    });
  const bool pass = s.failures == 0;
  emit(out, {{"seed", o.seed},
             {"instances", s.instances},
             {"failures", s.failures},
             {"tolerance", o.tolerance},
             {"max_rel_error", s.max_rel_error},
             {"pass", pass},
             {"per_instance", instances}});
  return pass ? 0 : 1;
}

int cmd_refine(const RefineArgs& o, std::ostream& out) {
  if (o.frames.size() < 2) throw Error(ErrorKind::kInvalidArgument, "refine needs at least two frames");
  const Intrinsics K = io::read_camera(require_file(o.data_dir / "camera.json"));
  const fs::path pose_file = o.data_dir / "poses.txt";
  const std::vector<PoseSE3> world = io::read_kitti_poses(require_file(pose_file));
  const fs::path depth_dir = o.depth_dir.empty() ? o.data_dir : o.depth_dir;

  std::vector<Image> images;
  std::vector<DepthMap> reference_depths, depths;
  for (std::size_t i = 0; i < o.frames.size(); ++i) {
    const int k = o.frames[i];
    images.push_back(io::read_pnm(frame_image_path(o.data_dir, k)));
    reference_depths.push_back(io::read_depth(require_file(depth_dir / frame_name("depth", k, "pfm"))));
    const double s = o.init_depth_scale * (i > 0 ? o.scale_jump : 1.0);
    depths.emplace_back(s * reference_depths.back().values());
  }

  Rng rng(o.seed);
  std::vector<PoseSE3> reference_poses, poses;
  for (std::size_t i = 0; i + 1 < o.frames.size(); ++i) {
    const PoseSE3 gt = relative_from_world(pose_at(world, o.frames[i], pose_file),
                                           pose_at(world, o.frames[i + 1], pose_file));
    reference_poses.push_back(gt);
    Eigen::Vector3d t = gt.translation() * o.init_translation_scale * (i > 0 ? o.scale_jump : 1.0);
    Eigen::Matrix3d r = gt.rotation();
    if (o.perturb_rot_deg != 0.0) {
      const Eigen::Vector3d axis = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()).normalized();
      r = so3_exp(axis * (o.perturb_rot_deg / kDegPerRad)) * r;
    }
    if (o.perturb_trans_frac != 0.0) {
      const Eigen::Vector3d dir = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()).normalized();
      t += o.perturb_trans_frac * gt.translation().norm() * dir;
    }
    poses.emplace_back(r, t);
  }

  std::vector<PoseSE3> final_poses;
  std::vector<DepthMap> final_depths;
  RefineTrace trace;
  if (o.frames.size() == 2) {
    RefineResult r = refine_pair(images[0], images[1], depths[0], depths[1], poses[0], K, o.config);
    final_poses = {r.pose};
    final_depths = {r.depth, depths[1]};
    trace = std::move(r.trace);
  } else {
    SequenceResult r = refine_sequence(images, depths, poses, K, o.config);
    final_poses = std::move(r.relatives);
    final_depths = std::move(r.depths);
    trace = std::move(r.trace);
  }

  ensure_dir(o.out_dir);
  io::write_kitti_poses(o.out_dir / "pose.txt", final_poses);
  const std::size_t refined = o.frames.size() == 2 ? 1 : final_depths.size();
  for (std::size_t i = 0; i < refined; ++i) {
    io::write_depth(o.out_dir / frame_name("depth", o.frames[i], "pfm"), final_depths[i]);
  }
  std::string csv = "iter,l_p_masked,l_s,l_gc,total,l_p,step,depth_rms_change\n";
  for (const RefineRecord& rec : trace.records) {
    csv += std::to_string(rec.iteration) + "," + io::format_double(rec.l_p_masked) + "," +
           io::format_double(rec.l_s) + "," + io::format_double(rec.l_gc) + "," + io::format_double(rec.total) +
           "," + io::format_double(rec.l_p) + "," + io::format_double(rec.step) + "," +
           io::format_double(rec.depth_rms_change) + "\n";
  }
  io::write_text(o.out_dir / "trace.csv", csv);

  json pairs = json::array();
  for (std::size_t i = 0; i < final_poses.size(); ++i) {
    const PoseSE3& gt = reference_poses[i];
    const PoseSE3& est = final_poses[i];
    const double tn = gt.translation().norm();
    pairs.push_back(
        {{"a", o.frames[i]},
         {"b", o.frames[i + 1]},
         {"rotation_error_deg", rotation_angle(gt.rotation().transpose() * est.rotation()) * kDegPerRad},
         {"translation_error_rel", tn > 0.0 ? json((est.translation() - gt.translation()).norm() / tn) : json()}});
  }
  json j{{"status", to_string(trace.status)},
         {"iterations", trace.iterations},
         {"evaluations", trace.evaluations},
         {"initial_total", trace.records.front().total},
         {"final_total", trace.records.back().total},
         {"pairs", pairs}};
  json scales = json::array();
  for (std::size_t i = 0; i < refined; ++i) scales.push_back(median_ratio(final_depths[i], reference_depths[i]));
  j["median_depth_scale"] = scales;
  if (refined >= 2) {
    j["scale_ratio"] = scales.back().get<double>() / scales.front().get<double>();
  }
  emit(out, j);
  return 0;
}

int cmd_eval_traj(const EvalTrajArgs& o, std::ostream& out) {
  const Trajectory pred{io::read_kitti_poses(require_file(o.pred))};
  const Trajectory gt{io::read_kitti_poses(require_file(o.gt))};
  if (pred.size() != gt.size()) {
    throw Error(ErrorKind::kDimension, "trajectory lengths differ: " + std::to_string(pred.size()) + " vs " +
                                           std::to_string(gt.size()));
  }
  if (pred.size() < 2) throw Error(ErrorKind::kDimension, "trajectories need at least two poses");

  json j{{"align", o.align}, {"frames", pred.size()}};
  Trajectory aligned;
  if (o.align == "global") {
    ScaleAlignment a = align_global_scale(pred, gt);
    j["scale"] = a.scale;
    aligned = std::move(a.aligned);
  } else if (o.align == "per-frame") {
    PerFrameAlignment a = align_per_frame_scale(relative_poses(pred), gt);
    // Chaining starts at the identity; put the result in the gt frame.
    for (PoseSE3& p : a.aligned.poses) p = compose(p, gt.poses.front());
    j["scales"] = a.scales;
    j["skipped"] = a.skipped;
    aligned = std::move(a.aligned);
  } else if (o.align == "none") {
    j["scale"] = 1.0;
    aligned = pred;
  } else {
    throw Error(ErrorKind::kInvalidArgument, "--align must be global, per-frame or none");
  }

  const OdomErrors e = kitti_odom_errors(aligned, gt);
  j["t_err"] = e.t_err;
  j["r_err"] = e.r_err;
  json per_length = json::array();
  for (const OdomErrors::PerLength& p : e.per_length) {
    per_length.push_back({{"length", p.length}, {"count", p.count}, {"t_err", p.t_err}, {"r_err", p.r_err}});
  }
  j["per_length"] = per_length;
  if (pred.size() >= 5) {
    const AteResult ate = ate_5frame(sliding_snippets(pred), sliding_snippets(gt));
    j["ate_5frame"] = {{"mean", ate.mean}, {"std", ate.std}, {"snippets", ate.per_snippet.size()}};
  }

  if (!o.out_dir.empty()) {
    ensure_dir(o.out_dir);
    io::write_text(o.out_dir / "trajectory.svg", trajectory_svg(aligned, gt));
    std::string csv = "frame,x,y,z,gt_x,gt_y,gt_z\n";
    for (std::size_t i = 0; i < aligned.size(); ++i) {
      const Eigen::Vector3d p = aligned.position(i), g = gt.position(i);
      csv += std::to_string(i);
      for (double v : {p.x(), p.y(), p.z(), g.x(), g.y(), g.z()}) csv += "," + io::format_double(v);
      csv += "\n";
    }
    io::write_text(o.out_dir / "aligned.csv", csv);
  }
  emit(out, j);
  return 0;
}

int cmd_eval_depth(const EvalDepthArgs& o, std::ostream& out) {
  if (!fs::is_directory(o.gt_dir)) throw Error(ErrorKind::kIo, o.gt_dir.string() + ": not a directory");
  if (!fs::is_directory(o.pred_dir)) throw Error(ErrorKind::kIo, o.pred_dir.string() + ": not a directory");
  std::vector<fs::path> gt_files;
  for (const auto& entry : fs::directory_iterator(o.gt_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pfm") gt_files.push_back(entry.path());
  }
  std::sort(gt_files.begin(), gt_files.end());
  if (gt_files.empty()) throw Error(ErrorKind::kIo, o.gt_dir.string() + ": no .pfm depth files");

  json frames = json::array();
  DepthMetrics mean;
  mean.scale = 0.0;
  for (const fs::path& g : gt_files) {
    const fs::path name = g.filename();
    const Grid gt_raw = io::read_pfm(g);
    const DepthMap pred = io::read_depth(require_file(o.pred_dir / name));
    BoolGrid mask = gt_raw.isFinite() && gt_raw > 1e-3 && gt_raw < o.cap;
    if (!o.mask_dir.empty()) {
      const fs::path mp = o.mask_dir / fs::path(name).replace_extension(".pgm");
      const BoolGrid extra = io::read_mask(require_file(mp));
      require_same_shape(static_cast<int>(extra.rows()), static_cast<int>(extra.cols()),
                         static_cast<int>(mask.rows()), static_cast<int>(mask.cols()), "mask");
      mask = mask && extra;
    }
    const DepthMap gt(mask.select(gt_raw, 1.0));
    const DepthMetrics m = eigen_depth_metrics(pred, gt, mask, o.median_scale, o.cap);
    json fj = metrics_json(m);
    fj["file"] = name.string();
    frames.push_back(fj);
    mean.abs_rel += m.abs_rel;
    mean.sq_rel += m.sq_rel;
    mean.rms += m.rms;
    mean.rms_log += m.rms_log;
    mean.a1 += m.a1;
    mean.a2 += m.a2;
    mean.a3 += m.a3;
    mean.count += m.count;
    mean.scale += m.scale;
  }
  const double n = static_cast<double>(gt_files.size());
  for (double* v : {&mean.abs_rel, &mean.sq_rel, &mean.rms, &mean.rms_log, &mean.a1, &mean.a2, &mean.a3, &mean.scale})
    *v /= n;
  emit(out, {{"frames", frames}, {"mean", metrics_json(mean)}, {"median_scale", o.median_scale}, {"cap", o.cap}});
  return 0;
}

}  // namespace scd::cli
