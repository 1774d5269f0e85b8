#include "cli.hpp"

#include "CLI11.hpp"
#include "commands.hpp"
#include "scd/errors.hpp"

namespace scd::cli {

namespace {

void add_weight_flags(CLI::App* app, LossWeights& w) {
  app->add_option("--alpha", w.alpha, "weight of the masked photometric term")->capture_default_str();
  app->add_option("--beta", w.beta, "weight of the smoothness term")->capture_default_str();
  app->add_option("--gamma", w.gamma, "weight of the geometry-consistency term")->capture_default_str();
  app->add_option("--lambda-i", w.lambda_i, "L1 share of the photometric error")->capture_default_str();
  app->add_option("--lambda-s", w.lambda_s, "SSIM share of the photometric error")->capture_default_str();
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kEmptyValidSet:
    case ErrorKind::kBehindCamera:
    case ErrorKind::kDegenerateScale:
    case ErrorKind::kIllConditionedLog:
      return kExitDegenerate;
    case ErrorKind::kNoValidSubsequence:
    case ErrorKind::kEmptyMask:
      return kExitInsufficientData;
    default:
      return kExitInput;
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scale-consistent depth and ego-motion objective: losses, gradients, refinement, evaluation", "scd"};
  app.require_subcommand(1);

  SynthArgs synth;
  CLI::App* c_synth = app.add_subcommand("synth", "render a synthetic scene to image/depth/pose files");
  auto* spec_opt = c_synth->add_option("--spec", synth.spec_path, "SceneSpec JSON file");
  auto* preset_opt =
      c_synth->add_option("--preset", synth.preset, "canned scene instead of --spec")
          ->check(CLI::IsMember({"static-planes", "fronto-parallel", "occlusion-band", "moving-box"}));
  spec_opt->excludes(preset_opt);
  c_synth->add_option("--seed", synth.seed, "preset seed")->capture_default_str();
  c_synth->add_option("--size", synth.size, "preset image size (square)");
  c_synth->add_option("--frames", synth.frames, "preset frame count");
  c_synth->add_option("--out", synth.out_dir, "output directory")->required();

  LossArgs loss;
  CLI::App* c_loss = app.add_subcommand("loss", "evaluate the total objective on one frame pair");
  c_loss->add_option("data", loss.data_dir, "directory written by synth")->required();
  c_loss->add_option("--a", loss.a, "target frame index")->capture_default_str();
  c_loss->add_option("--b", loss.b, "source frame index")->capture_default_str();
  c_loss->add_option("--depth-dir", loss.depth_dir, "read depth_NNN.pfm from here instead");
  c_loss->add_option("--poses", loss.poses, "camera-to-world KITTI pose file instead of data/poses.txt");
  c_loss->add_flag("--bidirectional", loss.bidirectional, "average the a->b and b->a objectives");
  c_loss->add_flag("--normalize-depth", loss.normalize_smoothness_depth, "mean-normalize depth in smoothness");
  c_loss->add_option("--dump-dir", loss.dump_dir, "write d_diff.pfm, mask.pfm and per_pixel_lp.pfm here");
  add_weight_flags(c_loss, loss.weights);

  GradcheckArgs gc;
  CLI::App* c_gc = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
  c_gc->add_option("--seed", gc.seed)->capture_default_str();
  c_gc->add_option("--count", gc.count, "number of random instances")->capture_default_str();
  c_gc->add_option("--min-size", gc.min_size)->capture_default_str();
  c_gc->add_option("--max-size", gc.max_size)->capture_default_str();
  c_gc->add_option("--tolerance", gc.tolerance, "max relative error")->capture_default_str();
  add_weight_flags(c_gc, gc.weights);

  RefineArgs ref;
  std::string frames_text = "0,1";
  CLI::App* c_ref = app.add_subcommand("refine", "direct refinement of pose and depth on synthetic frames");
  c_ref->add_option("data", ref.data_dir, "directory written by synth")->required();
  c_ref->add_option("--frames", frames_text, "comma-separated frame indices (2 = pair, more = sequence)")
      ->capture_default_str();
  c_ref->add_option("--out", ref.out_dir, "output directory")->required();
  c_ref->add_option("--depth-dir", ref.depth_dir, "initial depths instead of the ground truth");
  c_ref->add_option("--init-depth-scale", ref.init_depth_scale, "multiply every initial depth")->capture_default_str();
  c_ref->add_option("--init-translation-scale", ref.init_translation_scale, "multiply every initial translation")->capture_default_str();
  c_ref->add_option("--scale-jump", ref.scale_jump, "extra scale for frames after the first")
      ->capture_default_str();
  c_ref->add_option("--perturb-rot-deg", ref.perturb_rot_deg, "random initial rotation error, degrees")->capture_default_str();
  c_ref->add_option("--perturb-trans-frac", ref.perturb_trans_frac, "random initial translation error, fraction of |t|")->capture_default_str();
  c_ref->add_option("--seed", ref.seed, "perturbation seed")->capture_default_str();
  c_ref->add_option("--max-iters", ref.config.max_iters, "accepted-step budget")->capture_default_str();
  c_ref->add_option("--step-twist", ref.config.step_twist, "first-step size for pose parameters")->capture_default_str();
  c_ref->add_option("--step-logdepth", ref.config.step_logdepth, "first-step size for log-depth")->capture_default_str();
  c_ref->add_option("--tol-loss", ref.config.tol_loss, "relative decrease that counts as converged")->capture_default_str();
  bool no_depth = false, no_pose = false;
  c_ref->add_flag("--fix-depth", no_depth, "keep depths fixed");
  c_ref->add_flag("--fix-pose", no_pose, "keep poses fixed");
  c_ref->add_flag("--stop-grad-mask", ref.config.gradient.stop_gradient_mask, "treat M as a constant");
  c_ref->add_flag("--detach-target", ref.config.gradient.detach_interpolated_depth,
                  "no gradient through the interpolated target depth");
  add_weight_flags(c_ref, ref.config.weights);

  EvalTrajArgs et;
  CLI::App* c_et = app.add_subcommand("eval-traj", "KITTI odometry errors and 5-frame ATE");
  c_et->add_option("--pred", et.pred, "predicted camera-to-world poses (KITTI format)")->required();
  c_et->add_option("--gt", et.gt, "ground-truth camera-to-world poses (KITTI format)")->required();
  c_et->add_option("--align", et.align, "scale alignment before scoring")->check(CLI::IsMember({"global", "per-frame", "none"}))
      ->capture_default_str();
  c_et->add_option("--out", et.out_dir, "write trajectory.svg and aligned.csv here");

  EvalDepthArgs ed;
  bool no_median = false;
  CLI::App* c_ed = app.add_subcommand("eval-depth", "Eigen depth metrics over matching PFM files");
  c_ed->add_option("--pred", ed.pred_dir)->required();
  c_ed->add_option("--gt", ed.gt_dir)->required();
  c_ed->add_option("--mask-dir", ed.mask_dir, "optional <name>.pgm masks");
  c_ed->add_flag("--no-median-scale", no_median, "evaluate absolute depths");
  c_ed->add_option("--cap", ed.cap)->capture_default_str();

  std::vector<const char*> argv{"scd"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (c_synth->parsed()) {
      if (synth.spec_path.empty() && synth.preset.empty()) {
        throw Error(ErrorKind::kInvalidArgument, "synth needs --spec or --preset");
      }
      return cmd_synth(synth, out);
    }
    if (c_loss->parsed()) return cmd_loss(loss, out);
    if (c_gc->parsed()) return cmd_gradcheck(gc, out);
    if (c_ref->parsed()) {
      ref.frames.clear();
      for (const std::string& tok : CLI::detail::split(frames_text, ',')) {
        try {
          ref.frames.push_back(std::stoi(tok));
        } catch (const std::exception&) {
          throw Error(ErrorKind::kInvalidArgument, "bad frame index '" + tok + "'");
        }
      }
      ref.config.optimize_depth = !no_depth;
      ref.config.optimize_pose = !no_pose;
      return cmd_refine(ref, out);
    }
    if (c_et->parsed()) return cmd_eval_traj(et, out);
    if (c_ed->parsed()) {
      ed.median_scale = !no_median;
      return cmd_eval_depth(ed, out);
    }
  } catch (const Error& e) {
    err << "scd: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "scd: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace scd::cli
