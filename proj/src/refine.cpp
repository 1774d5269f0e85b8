#include "scd/refine.hpp"

#include <cmath>
#include <deque>
#include <limits>

#include "scd/errors.hpp"

namespace scd {

void RefineConfig::validate() const {
  if (max_iters < 1) throw Error(ErrorKind::kInvalidArgument, "max_iters must be at least 1");
  if (!(step_twist > 0.0) || !(step_logdepth > 0.0))
    throw Error(ErrorKind::kInvalidArgument, "refine steps must be positive");
  if (!(tol_loss >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "tol_loss must be non-negative");
  if (memory < 0) throw Error(ErrorKind::kInvalidArgument, "memory must be non-negative");
  weights.validate();
}

std::string to_string(RefineStatus status) {
  switch (status) {
    case RefineStatus::kConverged: return "converged";
    case RefineStatus::kMaxIters: return "max_iters";
    case RefineStatus::kStalled: return "stalled";
  }
  return "unknown";
}

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxHalvings = 40;
constexpr double kMaxTwistStep = 0.05;
constexpr double kMaxLogDepthStep = 0.25;

struct State {
  std::vector<PoseSE3> poses;
  std::vector<Grid> log_depth;
};

struct Terms {
  double total = 0.0, l_p = 0.0, l_p_masked = 0.0, l_s = 0.0, l_gc = 0.0;
};

// Chain of frames 0..n with pairs (k, k+1). Variables are the twists of the
// free poses followed by the log-depths of the free depth maps.
class Problem {
 public:
  Problem(const std::vector<Image>& images, const Intrinsics& K, const RefineConfig& cfg,
          std::vector<bool> depth_free)
      : images_(images), K_(K), cfg_(cfg), depth_free_(std::move(depth_free)) {
    const std::size_t pairs = images_.size() - 1;
    offset_ = 0;
    if (cfg_.optimize_pose) offset_ = static_cast<Eigen::Index>(6 * pairs);
    dim_ = offset_;
    depth_offsets_.assign(images_.size(), -1);
    for (std::size_t k = 0; k < images_.size(); ++k) {
      if (cfg_.optimize_depth && depth_free_[k]) {
        depth_offsets_[k] = dim_;
        dim_ += static_cast<Eigen::Index>(images_[k].height()) * images_[k].width();
      }
    }
    precond_ = Eigen::VectorXd::Ones(dim_);
    for (std::size_t k = 0; k < images_.size(); ++k) {
      if (depth_offsets_[k] < 0) continue;
      const Eigen::Index n = static_cast<Eigen::Index>(images_[k].height()) * images_[k].width();
      precond_.segment(depth_offsets_[k], n).setConstant(static_cast<double>(n));
    }
  }

  Eigen::Index dim() const { return dim_; }
  const Eigen::VectorXd& precond() const { return precond_; }

  std::vector<DepthMap> depths(const State& s) const {
    std::vector<DepthMap> out;
    for (const Grid& ld : s.log_depth) out.emplace_back(ld.exp());
    return out;
  }

  Terms value(const State& s) const {
    const std::vector<DepthMap> d = depths(s);
    Terms t;
    for (std::size_t k = 0; k + 1 < images_.size(); ++k) {
      const LossReport r = total_loss(images_[k], images_[k + 1], d[k], d[k + 1], s.poses[k], K_,
                                      cfg_.weights, false, cfg_.gradient.loss);
      t.total += r.total;
      t.l_p += r.l_p;
      t.l_p_masked += r.l_p_masked;
      t.l_s += r.l_s;
      t.l_gc += r.l_gc;
    }
    return t;
  }

  Eigen::VectorXd gradient(const State& s) const {
    const std::vector<DepthMap> d = depths(s);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim_);
    for (std::size_t k = 0; k + 1 < images_.size(); ++k) {
      const GradReport r = loss_gradients(images_[k], images_[k + 1], d[k], d[k + 1], s.poses[k], K_,
                                          cfg_.weights, cfg_.gradient);
      if (cfg_.optimize_pose) g.segment<6>(static_cast<Eigen::Index>(6 * k)) = r.d_loss_d_twist;
      add_depth(g, k, r.d_loss_d_depth, d[k]);
      add_depth(g, k + 1, r.d_loss_d_depth_b, d[k + 1]);
    }
    return g;
  }

  State retract(const State& s, const Eigen::VectorXd& dx) const {
    State out = s;
    if (cfg_.optimize_pose) {
      for (std::size_t k = 0; k < out.poses.size(); ++k) {
        const Vector6d step = dx.segment<6>(static_cast<Eigen::Index>(6 * k));
        out.poses[k] = compose(out.poses[k], exp_twist(Twist::from_vector(step)));
      }
    }
    for (std::size_t k = 0; k < out.log_depth.size(); ++k) {
      if (depth_offsets_[k] < 0) continue;
      Grid& ld = out.log_depth[k];
      const Eigen::Index n = ld.size();
      for (Eigen::Index i = 0; i < n; ++i) ld.data()[i] += dx[depth_offsets_[k] + i];
    }
    return out;
  }

  // Largest step in units of the configured first-step sizes, and the factor
  // that keeps a step inside the per-iteration caps.
  double normalized_size(const Eigen::VectorXd& d) const {
    double m = 0.0;
    if (offset_ > 0) m = std::max(m, d.head(offset_).lpNorm<Eigen::Infinity>() / cfg_.step_twist);
    if (dim_ > offset_) m = std::max(m, d.tail(dim_ - offset_).lpNorm<Eigen::Infinity>() / cfg_.step_logdepth);
    return m;
  }

  double cap_factor(const Eigen::VectorXd& d) const {
    double f = 1.0;
    if (offset_ > 0) {
      const double m = d.head(offset_).lpNorm<Eigen::Infinity>();
      if (m > kMaxTwistStep) f = std::min(f, kMaxTwistStep / m);
    }
    if (dim_ > offset_) {
      const double m = d.tail(dim_ - offset_).lpNorm<Eigen::Infinity>();
      if (m > kMaxLogDepthStep) f = std::min(f, kMaxLogDepthStep / m);
    }
    return f;
  }

  double depth_rms_change(const State& a, const State& b) const {
    double sum = 0.0;
    Eigen::Index count = 0;
    for (std::size_t k = 0; k < a.log_depth.size(); ++k) {
      if (depth_offsets_[k] < 0) continue;
      sum += (a.log_depth[k].exp() - b.log_depth[k].exp()).square().sum();
      count += a.log_depth[k].size();
    }
    return count == 0 ? 0.0 : std::sqrt(sum / static_cast<double>(count));
  }

 private:
  void add_depth(Eigen::VectorXd& g, std::size_t k, const Grid& d_loss_d_depth, const DepthMap& depth) const {
    if (depth_offsets_[k] < 0) return;
    const Grid chain = d_loss_d_depth * depth.values();
    for (Eigen::Index i = 0; i < chain.size(); ++i) g[depth_offsets_[k] + i] += chain.data()[i];
  }

  const std::vector<Image>& images_;
  Intrinsics K_;
  const RefineConfig& cfg_;
  std::vector<bool> depth_free_;
  std::vector<Eigen::Index> depth_offsets_;
  Eigen::Index offset_ = 0;
  Eigen::Index dim_ = 0;
  Eigen::VectorXd precond_;
};

RefineRecord make_record(int iteration, const Terms& t, const State& s, double rms, double step) {
  RefineRecord r;
  r.iteration = iteration;
  r.total = t.total;
  r.l_p = t.l_p;
  r.l_p_masked = t.l_p_masked;
  r.l_s = t.l_s;
  r.l_gc = t.l_gc;
  if (!s.poses.empty()) {
    try {
      r.twist = log_pose(s.poses.front());
    } catch (const Error&) {
      r.twist = Twist{};
    }
  }
  r.depth_rms_change = rms;
  r.step = step;
  return r;
}

struct Pair {
  Eigen::VectorXd s, y;
  double rho;
};

Eigen::VectorXd lbfgs_direction(const Eigen::VectorXd& g, const std::deque<Pair>& memory,
                                const Eigen::VectorXd& precond) {
  Eigen::VectorXd q = g;
  std::vector<double> alpha(memory.size());
  for (std::size_t i = memory.size(); i-- > 0;) {
    alpha[i] = memory[i].rho * memory[i].s.dot(q);
    q -= alpha[i] * memory[i].y;
  }
  const Pair& last = memory.back();
  const double gamma = last.s.dot(last.y) / last.y.dot(precond.cwiseProduct(last.y));
  Eigen::VectorXd r = gamma * precond.cwiseProduct(q);
  for (std::size_t i = 0; i < memory.size(); ++i) {
    const double beta = memory[i].rho * memory[i].y.dot(r);
    r += (alpha[i] - beta) * memory[i].s;
  }
  return -r;
}

RefineTrace optimize(const Problem& problem, State& state, const RefineConfig& cfg) {
  RefineTrace trace;
  Terms terms = problem.value(state);
  ++trace.evaluations;
  trace.records.push_back(make_record(0, terms, state, 0.0, 0.0));
  if (problem.dim() == 0) {
    trace.status = RefineStatus::kConverged;
    return trace;
  }
  Eigen::VectorXd g = problem.gradient(state);
  std::deque<Pair> memory;

  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    if (g.lpNorm<Eigen::Infinity>() == 0.0) {
      trace.status = RefineStatus::kConverged;
      return trace;
    }
    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      Eigen::VectorXd d;
      if (!memory.empty()) d = lbfgs_direction(g, memory, problem.precond());
      if (memory.empty() || !(g.dot(d) < 0.0)) {
        memory.clear();
        d = -problem.precond().cwiseProduct(g);
        d /= problem.normalized_size(d);
      }
      d *= problem.cap_factor(d);
      const double slope = g.dot(d);

      double step = 1.0;
      for (int h = 0; h <= kMaxHalvings; ++h, step *= 0.5) {
        const State trial = problem.retract(state, step * d);
        Terms trial_terms;
        try {
          trial_terms = problem.value(trial);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::kEmptyValidSet) throw;
          continue;
        }
        ++trace.evaluations;
        if (!std::isfinite(trial_terms.total)) continue;
        if (trial_terms.total <= terms.total + kArmijo * step * slope) {
          const Eigen::VectorXd g_new = problem.gradient(trial);
          const Eigen::VectorXd s = step * d;
          const Eigen::VectorXd y = g_new - g;
          const double sy = s.dot(y);
          if (cfg.memory > 0 && sy > 1e-300) {
            memory.push_back({s, y, 1.0 / sy});
            if (static_cast<int>(memory.size()) > cfg.memory) memory.pop_front();
          }
          const double decrease = terms.total - trial_terms.total;
          trace.records.push_back(
              make_record(iter, trial_terms, trial, problem.depth_rms_change(state, trial), step));
          trace.iterations = iter;
          state = trial;
          terms = trial_terms;
          g = g_new;
          accepted = true;
          if (decrease <= cfg.tol_loss * std::max(1.0, std::abs(terms.total))) {
            trace.status = RefineStatus::kConverged;
            return trace;
          }
          break;
        }
      }
      if (!accepted) {
        if (memory.empty()) break;
        memory.clear();
      }
    }
    if (!accepted) {
      trace.status = RefineStatus::kStalled;
      return trace;
    }
  }
  trace.status = RefineStatus::kMaxIters;
  return trace;
}

}  // namespace

RefineResult refine_pair(const Image& image_a, const Image& image_b, const DepthMap& depth_a_init,
                         const DepthMap& depth_b_init, const PoseSE3& pose_init, const Intrinsics& K,
                         const RefineConfig& cfg) {
  cfg.validate();
  const std::vector<Image> images{image_a, image_b};
  Problem problem(images, K, cfg, {true, false});
  State state{{pose_init}, {depth_a_init.values().log(), depth_b_init.values().log()}};
  RefineTrace trace = optimize(problem, state, cfg);
  return {state.poses.front(), DepthMap(state.log_depth.front().exp()), std::move(trace)};
}

SequenceResult refine_sequence(const std::vector<Image>& images, const std::vector<DepthMap>& depths_init,
                               const std::vector<PoseSE3>& relatives_init, const Intrinsics& K,
                               const RefineConfig& cfg) {
  cfg.validate();
  if (images.size() < 2) throw Error(ErrorKind::kInvalidArgument, "a sequence needs at least two frames");
  if (depths_init.size() != images.size() || relatives_init.size() + 1 != images.size())
    throw Error(ErrorKind::kDimension, "sequence needs one depth per frame and one pose per consecutive pair");
  Problem problem(images, K, cfg, std::vector<bool>(images.size(), true));
  State state{relatives_init, {}};
  for (const DepthMap& d : depths_init) state.log_depth.push_back(d.values().log());
  RefineTrace trace = optimize(problem, state, cfg);
  SequenceResult out;
  out.relatives = state.poses;
  for (const Grid& ld : state.log_depth) out.depths.emplace_back(ld.exp());
  out.trace = std::move(trace);
  return out;
}

}  // namespace scd
