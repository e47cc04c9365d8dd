#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "skelgrow/assignment.hpp"
#include "skelgrow/densify.hpp"
#include "skelgrow/growth.hpp"
#include "skelgrow/loss.hpp"
#include "skelgrow/model.hpp"
#include "skelgrow/optimizer.hpp"

namespace skelgrow {

/// Everything the fitter is allowed to see: the base skeleton, the given
/// pose sequence, observed point trajectories, the canonical template that
/// initializes the cloud, and the held-out frame mask.
struct FitInputs {
  JointTree tree;                     // base joints only
  PoseSequence pose;                  // N frames
  Vec3Grid observations;              // N x P
  std::vector<Vec3> template_points;  // P
  std::vector<char> heldout;          // N, may be empty (none held out)

  void validate() const;
  std::vector<int> training_frames() const;
  std::vector<int> heldout_frames() const;
};

struct TrainConfig {
  double lambda_mk = 0.4;
  ThresholdMode threshold_mode = ThresholdMode::relative;
  double threshold_value = 0.5;  // tau; the paper-faithful absolute option uses 3.5e-6
  int warmup_iters = 8000;
  int total_iters = 12000;
  double lr_positions = 1e-3;
  double lr_logits = 1e-2;
  double lr_decoder = 1e-3;
  LossMode loss_mode = LossMode::correspondence;
  DecoderConfig decoder;
  double mk_eps = 1e-8;
  DensifyParams densify;
  bool growth_enabled = true;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TraceRow {
  int iteration = 0;
  bool refine_phase = false;
  double loss = 0.0;
  int point_count = 0;
  double eps_d = 0.0;
};

struct GrowthDecision {
  std::vector<int> selected;
  std::vector<double> joint_gradients;
};

/// The assignment matrices computed at growth time (base joints only).
struct AssignmentSnapshot {
  MotionKernelTable mk;
  std::vector<double> w_mk;     // P x K0
  std::vector<double> w_lbs;    // P x K0
  std::vector<double> hybrid;   // P x K0
};

struct TrainReport {
  std::vector<int> grown;
  std::vector<double> joint_gradients;
  double warmup_final_loss = std::numeric_limits<double>::quiet_NaN();
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  double full_mse = std::numeric_limits<double>::quiet_NaN();
  double heldout_mse = std::numeric_limits<double>::quiet_NaN();
  int point_count = 0;
  int base_joints = 0;
  int extra_joints = 0;
  int frames = 0;
  int training_frame_count = 0;
  std::vector<TraceRow> trace;
};

/// Loss and exact reverse-mode gradients at the current parameters,
/// evaluated over the training frames.
struct GradientBundle {
  double loss = 0.0;
  std::vector<double> d_positions;         // 3P
  std::vector<double> d_logits;            // P x K
  std::vector<double> d_decoder;           // decoder params (empty pre-growth)
  std::vector<double> point_grad_norms;    // per point, mean over frames of |dL/dx_o|
  std::vector<double> point_residuals;     // per point, mean over frames
};

/// Fits the model to the observations on the schedule: warm-up (base
/// skeleton only, gradient norms accumulated), a single growth event
/// driven by motion-kernel-hybrid gradient localization, then refinement
/// that additionally optimizes the grown-joint decoder.
class Trainer {
 public:
  Trainer(TrainConfig config, FitInputs inputs);

  TrainReport run();

  double step();
  GradientBundle evaluate_gradients();
  AssignmentSnapshot assignment_snapshot() const;
  GrowthDecision decide_growth() const;
  void apply_growth(std::span<const int> parents);

  int iteration() const { return iteration_; }
  const TrainConfig& config() const { return config_; }
  const ModelState& model() const { return model_; }
  ModelState& mutable_model() { return model_; }
  const FitInputs& inputs() const { return inputs_; }
  const std::vector<TraceRow>& trace() const { return trace_; }

  Vec3Grid predict(const std::vector<int>& frames) const { return model_.warp(frames); }
  double error_over(const std::vector<int>& frames) const;
  std::vector<double> warmup_mean_norms() const { return warmup_norm_mean_; }
  const std::vector<double>& last_point_grad_norms() const { return last_norms_; }
  double densify_threshold() const { return densify_.current(); }

 private:
  void record_warmup_norms(const std::vector<double>& norms);
  void maybe_densify();
  Vec3Grid observations_for(const std::vector<int>& frames) const;

  TrainConfig config_;
  FitInputs inputs_;
  ModelState model_;
  std::vector<int> training_frames_;
  std::vector<std::vector<Transform>> base_transforms_;  // all N frames, base joints
  Vec3Grid base_joint_trajectory_;                       // all N frames, posed base joints

  Adam adam_positions_;
  Adam adam_logits_;
  Adam adam_decoder_;

  int iteration_ = 0;
  bool grown_ = false;
  std::vector<TraceRow> trace_;

  // warm-up gradient statistics (per point, running mean over iterations)
  std::vector<double> warmup_norm_mean_;
  long warmup_norm_count_ = 0;

  // densification state
  DensifyController densify_;
  std::vector<double> densify_norm_accum_;
  long densify_norm_count_ = 0;
  std::vector<int> prune_strikes_;
  std::vector<double> last_residuals_;
  std::vector<double> last_norms_;
  std::mt19937_64 densify_rng_;
};

}  // namespace skelgrow
