#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "scd/losses.hpp"
#include "scd/refine.hpp"

namespace scd::cli {

namespace fs = std::filesystem;

struct SynthArgs {
  std::string spec_path;  ///< SceneSpec JSON; empty when a preset is used
  std::string preset;     ///< static-planes | fronto-parallel | occlusion-band | moving-box
  std::uint64_t seed = 0;
  int size = 0;  ///< 0 keeps the preset's default
  int frames = 0;
  fs::path out_dir;
};

struct LossArgs {
  fs::path data_dir;
  fs::path depth_dir;  ///< empty: depths from data_dir
  fs::path poses;      ///< empty: data_dir/poses.txt
  int a = 0;
  int b = 1;
  bool bidirectional = false;
  bool normalize_smoothness_depth = false;
  fs::path dump_dir;
  LossWeights weights;
};

struct GradcheckArgs {
  std::uint64_t seed = 0;
  int count = 50;
  int min_size = 8;
  int max_size = 16;
  double tolerance = 1e-4;
  LossWeights weights;
};

struct RefineArgs {
  fs::path data_dir;
  fs::path depth_dir;
  std::vector<int> frames{0, 1};
  fs::path out_dir;
  double init_depth_scale = 1.0;
  double init_translation_scale = 1.0;
  /// Depths of frames after the first and translations of pairs after the
  /// first are multiplied by this factor (two-pair scale experiment).
  double scale_jump = 1.0;
  double perturb_rot_deg = 0.0;
  double perturb_trans_frac = 0.0;
  std::uint64_t seed = 0;
  RefineConfig config;
};

struct EvalTrajArgs {
  fs::path pred;
  fs::path gt;
  std::string align = "global";
  fs::path out_dir;
};

struct EvalDepthArgs {
  fs::path pred_dir;
  fs::path gt_dir;
  fs::path mask_dir;
  bool median_scale = true;
  double cap = 80.0;
};

/// Each command writes its JSON report to `out` and returns the exit code.
/// Failures are reported by throwing scd::Error.
int cmd_synth(const SynthArgs& o, std::ostream& out);
int cmd_loss(const LossArgs& o, std::ostream& out);
int cmd_gradcheck(const GradcheckArgs& o, std::ostream& out);
int cmd_refine(const RefineArgs& o, std::ostream& out);
int cmd_eval_traj(const EvalTrajArgs& o, std::ostream& out);
int cmd_eval_depth(const EvalDepthArgs& o, std::ostream& out);

/// Frame file names used by synth and read by the other commands.
std::string frame_name(const std::string& stem, int index, const std::string& ext);

}  // namespace scd::cli
