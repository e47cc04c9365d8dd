#include "skelgrow/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "skelgrow/errors.hpp"
#include "skelgrow/threading.hpp"

namespace skelgrow {

static_assert(sizeof(Vec3) == 3 * sizeof(double), "Vec3 must be a plain triple of doubles");

void FitInputs::validate() const {
  if (tree.extra_count() != 0) {
    throw ValidationError("FitInputs: tree must contain base joints only");
  }
  pose.validate(tree.base_count());
  const int n = pose.frame_count();
  if (n < 2) throw ValidationError("FitInputs: at least 2 frames required");
  if (observations.frames != n) {
    throw ValidationError("FitInputs: observation frame count != pose frame count");
  }
  if (observations.count < 1) throw ValidationError("FitInputs: no observed points");
  if (static_cast<int>(template_points.size()) != observations.count) {
    throw ValidationError("FitInputs: template point count != observed point count");
  }
  if (!heldout.empty() && static_cast<int>(heldout.size()) != n) {
    throw ValidationError("FitInputs: held-out mask length != frame count");
  }
  if (static_cast<int>(training_frames().size()) < 2) {
    throw ValidationError("FitInputs: need at least 2 training frames");
  }
}

std::vector<int> FitInputs::training_frames() const {
  std::vector<int> frames;
  for (int f = 0; f < pose.frame_count(); ++f) {
    if (heldout.empty() || !heldout[f]) frames.push_back(f);
  }
  return frames;
}

std::vector<int> FitInputs::heldout_frames() const {
  std::vector<int> frames;
  for (int f = 0; f < pose.frame_count(); ++f) {
    if (!heldout.empty() && heldout[f]) frames.push_back(f);
  }
  return frames;
}

void TrainConfig::validate() const {
  if (lambda_mk < 0.0 || lambda_mk > 1.0) {
    throw ValidationError("TrainConfig: lambda_mk must lie in [0, 1]");
  }
  if (warmup_iters < 0) throw ValidationError("TrainConfig: warmup_iters must be >= 0");
  if (warmup_iters >= total_iters) {
    throw ValidationError("TrainConfig: warmup_iters must be < total_iters");
  }
  if (lr_positions <= 0.0 || lr_logits <= 0.0 || lr_decoder <= 0.0) {
    throw ValidationError("TrainConfig: learning rates must be positive");
  }
  if (threshold_mode == ThresholdMode::absolute) {
    if (threshold_value <= 0.0) throw ValidationError("TrainConfig: threshold_value must be > 0");
  } else if (threshold_value <= 0.0 || threshold_value > 1.0) {
    throw ValidationError("TrainConfig: relative threshold_value must lie in (0, 1]");
  }
  if (mk_eps <= 0.0) throw ValidationError("TrainConfig: mk_eps must be positive");
  if (densify.enabled && loss_mode != LossMode::chamfer) {
    throw ValidationError("TrainConfig: densification requires chamfer loss mode");
  }
}

Trainer::Trainer(TrainConfig config, FitInputs inputs)
    : config_(std::move(config)), inputs_(std::move(inputs)), densify_(config_.densify),
      densify_rng_(config_.seed ^ 0x9e3779b97f4a7c15ull) {
  config_.validate();
  inputs_.validate();
  training_frames_ = inputs_.training_frames();

  model_.tree = inputs_.tree;
  model_.pose = inputs_.pose;
  model_.cloud.position = inputs_.template_points;
  model_.cloud.joint_count = model_.tree.base_count();
  model_.cloud.blend_prior = bone_distance_prior(model_.cloud.position, model_.tree);
  model_.cloud.correction_logits.assign(
      model_.cloud.blend_prior.size(), 0.0);
  model_.cloud.validate();

  const int n = model_.pose.frame_count();
  const int base = model_.tree.base_count();
  base_transforms_.resize(static_cast<size_t>(n));
  base_joint_trajectory_ = Vec3Grid(n, base);
  for (int f = 0; f < n; ++f) {
    base_transforms_[f] = forward_kinematics(model_.tree, model_.pose.local_rotation[f],
                                             model_.pose.root_translation[f]);
    const std::vector<Vec3> posed = posed_joint_positions(model_.tree, base_transforms_[f]);
    for (int k = 0; k < base; ++k) base_joint_trajectory_.at(f, k) = posed[k];
  }

  const int p = model_.cloud.point_count();
  adam_positions_ = Adam(static_cast<size_t>(p) * 3);
  adam_logits_ = Adam(model_.cloud.correction_logits.size());
  warmup_norm_mean_.assign(static_cast<size_t>(p), 0.0);
  densify_norm_accum_.assign(static_cast<size_t>(p), 0.0);
  prune_strikes_.assign(static_cast<size_t>(p), 0);
}

Vec3Grid Trainer::observations_for(const std::vector<int>& frames) const {
  Vec3Grid out(static_cast<int>(frames.size()), inputs_.observations.count);
  for (size_t i = 0; i < frames.size(); ++i) {
    for (int j = 0; j < inputs_.observations.count; ++j) {
      out.at(static_cast<int>(i), j) = inputs_.observations.at(frames[i], j);
    }
  }
  return out;
}

GradientBundle Trainer::evaluate_gradients() {
  model_.sync_extra_rest_positions();
  CanonicalCloud& cloud = model_.cloud;
  const JointTree& tree = model_.tree;
  const int p = cloud.point_count();
  const int k = cloud.joint_count;
  const int base = tree.base_count();
  const int extras = tree.extra_count();
  const int ft = static_cast<int>(training_frames_.size());

  const BlendWeights blend = effective_blend_weights_with_mass(cloud);
  const std::vector<double>& weights = blend.weights;

  // Per-frame joint transforms; extras decode their rotation at the frame
  // timestamp and pivot about their current rest position.
  std::vector<std::vector<Transform>> transforms(static_cast<size_t>(ft));
  std::vector<std::vector<Vec3>> extra_angles(static_cast<size_t>(ft));
  for (int fi = 0; fi < ft; ++fi) {
    const int f = training_frames_[fi];
    std::vector<Rotation> extra_rot(static_cast<size_t>(extras));
    extra_angles[fi].resize(static_cast<size_t>(extras));
    for (int e = 0; e < extras; ++e) {
      extra_angles[fi][e] =
          model_.decoder->rotation_axis_angle(e, model_.pose.timestamps[f]);
      extra_rot[e] = exp_so3(extra_angles[fi][e]);
    }
    transforms[fi] = forward_kinematics(tree, model_.pose.local_rotation[f],
                                        model_.pose.root_translation[f], extra_rot);
  }

  // Rotation matrices once per (frame, joint).
  std::vector<Mat3> rot(static_cast<size_t>(ft) * k);
  for (int fi = 0; fi < ft; ++fi) {
    for (int j = 0; j < k; ++j) {
      rot[static_cast<size_t>(fi) * k + j] = transforms[fi][j].rotation.matrix();
    }
  }

  // Forward pass: per-joint rigid maps cached for the backward pass.
  std::vector<Vec3> rigid(static_cast<size_t>(ft) * p * k);
  Vec3Grid pred(ft, p);
  parallel_for(ft, [&](int begin, int end) {
    for (int fi = begin; fi < end; ++fi) {
      for (int i = 0; i < p; ++i) {
        const double* wrow = &weights[static_cast<size_t>(i) * k];
        Vec3* ys = &rigid[(static_cast<size_t>(fi) * p + i) * k];
        Vec3 acc = Vec3::Zero();
        for (int j = 0; j < k; ++j) {
          ys[j] = rot[static_cast<size_t>(fi) * k + j] * cloud.position[i] +
                  transforms[fi][j].translation;
          acc += wrow[j] * ys[j];
        }
        pred.at(fi, i) = acc;
      }
    }
  });

  const Vec3Grid obs = observations_for(training_frames_);
  LossEvaluation loss = reconstruction_loss(pred, obs, config_.loss_mode);

  GradientBundle out;
  out.loss = loss.value;
  out.point_residuals = std::move(loss.point_residuals);
  out.d_positions.assign(static_cast<size_t>(p) * 3, 0.0);
  out.d_logits.assign(static_cast<size_t>(p) * k, 0.0);
  out.point_grad_norms.assign(static_cast<size_t>(p), 0.0);

  // Backward through the blend: canonical positions, weight logits,
  // per-point gradient norms.
  parallel_for(p, [&](int begin, int end) {
    std::vector<double> dw(static_cast<size_t>(k));
    for (int i = begin; i < end; ++i) {
      const double* wrow = &weights[static_cast<size_t>(i) * k];
      std::fill(dw.begin(), dw.end(), 0.0);
      Vec3 dpos = Vec3::Zero();
      double norm_acc = 0.0;
      for (int fi = 0; fi < ft; ++fi) {
        const Vec3& u = loss.gradient.at(fi, i);
        norm_acc += u.norm();
        const Vec3* ys = &rigid[(static_cast<size_t>(fi) * p + i) * k];
        for (int j = 0; j < k; ++j) {
          dpos += wrow[j] * (rot[static_cast<size_t>(fi) * k + j].transpose() * u);
          dw[j] += ys[j].dot(u);
        }
      }
      out.point_grad_norms[i] = norm_acc / ft;
      for (int c = 0; c < 3; ++c) out.d_positions[static_cast<size_t>(i) * 3 + c] = dpos[c];
      // prior-backed columns form a softmax in their logits; grown columns
      // add linear mass, so their gradient is not scaled by their weight
      double pull = 0.0;
      for (int j = 0; j < k; ++j) pull += dw[j] * wrow[j];
      const int prior_backed = cloud.prior_backed_columns();
      for (int j = 0; j < k; ++j) {
        const double l = cloud.logit(i, j);
        double d;
        if (j < prior_backed) {
          const bool clamped = l <= -kLogitClamp || l >= kLogitClamp;
          d = clamped ? 0.0 : wrow[j] * (dw[j] - pull);
        } else {
          d = l >= 0.0 ? (dw[j] - pull) / blend.row_mass[i] : 0.0;
        }
        out.d_logits[static_cast<size_t>(i) * k + j] = d;
      }
    }
  });

  // Backward into the grown-joint decoder.
  if (extras > 0) {
    std::vector<Vec3> d_offset(static_cast<size_t>(extras), Vec3::Zero());
    Vec3Grid d_angle(ft, extras);
    std::vector<Vec3> d_offset_frame(static_cast<size_t>(ft) * extras, Vec3::Zero());
    parallel_for(ft, [&](int begin, int end) {
      for (int fi = begin; fi < end; ++fi) {
        for (int e = 0; e < extras; ++e) {
          const int j = base + e;
          const int parent = model_.book.entries[e].parent;
          const Mat3 parent_rot_t =
              base_transforms_[training_frames_[fi]][parent].rotation.matrix().transpose();
          const Mat3 local_rot = exp_so3(extra_angles[fi][e]).matrix();
          const Vec3& pivot = tree.rest_position(j);
          Vec3 u_sum = Vec3::Zero();
          Vec3 cross_sum = Vec3::Zero();
          for (int i = 0; i < p; ++i) {
            const double w = weights[static_cast<size_t>(i) * k + j];
            if (w == 0.0) continue;
            const Vec3 u = parent_rot_t * loss.gradient.at(fi, i);
            u_sum += w * u;
            const Vec3 lever = local_rot * (cloud.position[i] - pivot);
            cross_sum += w * lever.cross(u);
          }
          d_angle.at(fi, e) =
              so3_left_jacobian(extra_angles[fi][e]).transpose() * cross_sum;
          d_offset_frame[static_cast<size_t>(fi) * extras + e] =
              (Mat3::Identity() - local_rot).transpose() * u_sum;
        }
      }
    });
    for (int fi = 0; fi < ft; ++fi) {
      for (int e = 0; e < extras; ++e) {
        d_offset[e] += d_offset_frame[static_cast<size_t>(fi) * extras + e];
      }
    }
    out.d_decoder = model_.decoder->gradients(d_offset, d_angle);
  }

  last_residuals_ = out.point_residuals;
  last_norms_ = out.point_grad_norms;
  return out;
}

double Trainer::step() {
  GradientBundle g = evaluate_gradients();
  if (!std::isfinite(g.loss)) {
    throw NumericError("train_step: loss is not finite at iteration " +
                       std::to_string(iteration_));
  }

  CanonicalCloud& cloud = model_.cloud;
  const int p = cloud.point_count();
  adam_positions_.step(
      std::span<double>(cloud.position.data()->data(), static_cast<size_t>(p) * 3),
      g.d_positions, AdamConfig{config_.lr_positions});
  adam_logits_.step(cloud.correction_logits, g.d_logits, AdamConfig{config_.lr_logits});
  if (model_.decoder && model_.decoder->param_count() > 0) {
    adam_decoder_.step(model_.decoder->params(), g.d_decoder, AdamConfig{config_.lr_decoder});
    model_.sync_extra_rest_positions();
  }

  if (iteration_ < config_.warmup_iters) record_warmup_norms(g.point_grad_norms);
  ++densify_norm_count_;
  for (int i = 0; i < p; ++i) {
    densify_norm_accum_[i] +=
        (g.point_grad_norms[i] - densify_norm_accum_[i]) / static_cast<double>(densify_norm_count_);
  }

  const double eps_d = densify_.update_threshold(p);
  trace_.push_back(TraceRow{iteration_, iteration_ >= config_.warmup_iters, g.loss, p, eps_d});
  maybe_densify();
  ++iteration_;
  return g.loss;
}

void Trainer::record_warmup_norms(const std::vector<double>& norms) {
  ++warmup_norm_count_;
  for (size_t i = 0; i < norms.size(); ++i) {
    warmup_norm_mean_[i] += (norms[i] - warmup_norm_mean_[i]) / static_cast<double>(warmup_norm_count_);
  }
}

void Trainer::maybe_densify() {
  const DensifyParams& params = config_.densify;
  if (!params.enabled || config_.loss_mode != LossMode::chamfer) return;
  if ((iteration_ + 1) % params.interval != 0) return;

  CanonicalCloud& cloud = model_.cloud;
  const int k = cloud.joint_count;
  const double eps_d = densify_.current();
  const DensifyPlan plan =
      densify_and_prune(cloud, prune_strikes_, densify_norm_accum_, last_residuals_, eps_d,
                        config_.loss_mode, densify_rng_, params);
  if (plan.cloned == 0 && plan.pruned == 0) return;

  const int new_p = static_cast<int>(plan.source.size());
  std::vector<int> pos_map(static_cast<size_t>(new_p) * 3);
  std::vector<int> logit_map(static_cast<size_t>(new_p) * k);
  std::vector<double> warm(static_cast<size_t>(new_p), 0.0);
  for (int i = 0; i < new_p; ++i) {
    const int src = plan.source[i];
    for (int c = 0; c < 3; ++c) pos_map[static_cast<size_t>(i) * 3 + c] = src * 3 + c;
    for (int j = 0; j < k; ++j) {
      logit_map[static_cast<size_t>(i) * k + j] = src * k + j;
    }
    warm[i] = warmup_norm_mean_[src];
  }
  adam_positions_.reindex(pos_map);
  adam_logits_.reindex(logit_map);
  warmup_norm_mean_ = std::move(warm);
  densify_norm_accum_.assign(static_cast<size_t>(new_p), 0.0);
  densify_norm_count_ = 0;
  last_norms_.assign(static_cast<size_t>(new_p), 0.0);
  last_residuals_.assign(static_cast<size_t>(new_p), 0.0);
}

AssignmentSnapshot Trainer::assignment_snapshot() const {
  if (model_.tree.extra_count() > 0) {
    throw ValidationError("assignment_snapshot: growth already applied");
  }
  AssignmentSnapshot snap;
  const Vec3Grid point_traj = model_.warp_all();
  snap.mk = compute_motion_kernels(point_traj, base_joint_trajectory_);
  snap.w_mk = mk_weights(snap.mk, config_.mk_eps);
  snap.w_lbs = effective_blend_weights(model_.cloud);
  snap.hybrid = hybrid_weights(snap.w_mk, snap.w_lbs, model_.tree.base_count(),
                               config_.lambda_mk);
  return snap;
}

GrowthDecision Trainer::decide_growth() const {
  const AssignmentSnapshot snap = assignment_snapshot();
  JointGradientAccumulator acc(model_.tree.base_count());
  acc.add(warmup_norm_mean_, snap.hybrid);
  const JointGradientVector g = acc.current();
  GrowthDecision decision;
  decision.joint_gradients = g.g;
  decision.selected = select_parent_joints(g, config_.threshold_mode, config_.threshold_value);
  return decision;
}

void Trainer::apply_growth(std::span<const int> parents) {
  if (grown_) throw ValidationError("apply_growth: growth event already happened");
  grown_ = true;
  model_.book.creation_iteration = iteration_;
  if (parents.empty()) return;

  const int old_k = model_.cloud.joint_count;
  grow_joints(model_.tree, model_.cloud, model_.book, parents);
  const int new_k = model_.cloud.joint_count;
  const int p = model_.cloud.point_count();

  std::vector<double> training_timestamps;
  training_timestamps.reserve(training_frames_.size());
  for (const int f : training_frames_) {
    training_timestamps.push_back(model_.pose.timestamps[f]);
  }
  model_.decoder = JointDecoder::make(static_cast<int>(parents.size()),
                                      std::move(training_timestamps), config_.decoder,
                                      config_.seed ^ 0xd1b54a32d192ed03ull);
  adam_decoder_ = Adam(static_cast<size_t>(model_.decoder->param_count()));

  std::vector<int> logit_map(static_cast<size_t>(p) * new_k, -1);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < old_k; ++j) {
      logit_map[static_cast<size_t>(i) * new_k + j] = i * old_k + j;
    }
  }
  adam_logits_.reindex(logit_map);
}

double Trainer::error_over(const std::vector<int>& frames) const {
  if (frames.empty()) return std::numeric_limits<double>::quiet_NaN();
  const Vec3Grid pred = model_.warp(frames);
  const Vec3Grid obs = observations_for(frames);
  return reconstruction_loss(pred, obs, config_.loss_mode).value;
}

TrainReport Trainer::run() {
  TrainReport report;
  for (int i = 0; i < config_.warmup_iters; ++i) step();
  if (!trace_.empty()) report.warmup_final_loss = trace_.back().loss;

  const GrowthDecision decision = decide_growth();
  report.joint_gradients = decision.joint_gradients;
  if (config_.growth_enabled) {
    apply_growth(decision.selected);
    report.grown = decision.selected;
  } else {
    apply_growth({});
  }

  while (iteration_ < config_.total_iters) step();
  report.final_loss = trace_.back().loss;

  std::vector<int> all_frames(static_cast<size_t>(model_.pose.frame_count()));
  std::iota(all_frames.begin(), all_frames.end(), 0);
  report.full_mse = error_over(all_frames);
  report.heldout_mse = error_over(inputs_.heldout_frames());
  report.point_count = model_.cloud.point_count();
  report.base_joints = model_.tree.base_count();
  report.extra_joints = model_.tree.extra_count();
  report.frames = model_.pose.frame_count();
  report.training_frame_count = static_cast<int>(training_frames_.size());
  report.trace = trace_;
  return report;
}

}  // namespace skelgrow
