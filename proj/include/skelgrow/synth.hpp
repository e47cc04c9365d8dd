#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "skelgrow/kinematics.hpp"
#include "skelgrow/trainer.hpp"

namespace skelgrow {

enum class AttachmentKind { rigid_object, loose_cloth };

/// A part that co-moves with a host joint but carries its own motion:
/// a rigid held object (stick of points, banded sinusoid rotation) or a
/// loose hanging patch (low-frequency oscillation).
struct AttachmentSpec {
  AttachmentKind kind = AttachmentKind::rigid_object;
  int host = 0;
  double amplitude = 0.3;  // own rotation amplitude, radians
  int points = 60;
  double size = 0.25;
  std::optional<Vec3> canonical_offset;  // grip placement relative to the host joint
};

struct SceneSpec {
  std::string topology = "humanoid8";  // "humanoid8" | "chain"
  int base_joints = 8;                 // chain length; must be 8 for humanoid8
  int frames = 60;
  int points_per_segment = 285;
  double body_amplitude = 0.5;   // radians, per-joint motion scale
  double noise_sigma = 1e-3;     // observation noise, scene units
  std::uint64_t seed = 1;
  std::vector<AttachmentSpec> attachments;

  void validate() const;
};

/// Ground truth generated from a SceneSpec. Observations are the true
/// model's warp plus noise; labels record which joint each point rides on.
struct SyntheticScene {
  SceneSpec spec;
  JointTree true_tree;  // base joints + one true extra joint per attachment
  PoseSequence pose;    // base pose
  Vec3Grid extra_angles;               // N x Ke, axis-angle of true extras
  std::vector<Vec3> canonical_points;  // P, the template
  Vec3Grid observations;               // N x P
  std::vector<int> labels;             // per point, base joint it is assigned to
  std::vector<int> point_attachment;   // per point, attachment index or -1 for body
  std::vector<char> heldout;           // N

  int base_count() const { return true_tree.base_count(); }
  int point_count() const { return static_cast<int>(canonical_points.size()); }
  int frame_count() const { return pose.frame_count(); }

  /// True joint carrying point p (extra joints included).
  int true_joint_of_point(int p) const;
};

SyntheticScene generate_scene(const SceneSpec& spec);

/// Stored per-point base-joint attachment labels.
const std::vector<int>& oracle_assignment(const SyntheticScene& scene);

/// Posed positions of every true joint (base + extras) across all frames.
Vec3Grid true_joint_trajectory(const SyntheticScene& scene);

/// The observable slice handed to the fitter: base tree, pose,
/// observations, template, held-out mask. No truth labels, no extras.
FitInputs make_fit_inputs(const SyntheticScene& scene);

bool needs_growth(const SceneSpec& spec);

}  // namespace skelgrow
