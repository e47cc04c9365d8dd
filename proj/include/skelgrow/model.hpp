#pragma once

#include <optional>
#include <vector>

#include "skelgrow/growth.hpp"
#include "skelgrow/kinematics.hpp"

namespace skelgrow {

/// A fitted skeleton-extension model: base tree plus grown joints, the
/// canonical cloud, and the decoder holding grown-joint offsets and
/// per-frame rotations. The pose sequence is the (given) base motion.
struct ModelState {
  JointTree tree;
  PoseSequence pose;
  CanonicalCloud cloud;
  ExtraJointBook book;
  std::optional<JointDecoder> decoder;

  /// Refreshes grown joints' rest positions from the decoder offsets.
  void sync_extra_rest_positions();

  /// Global joint transforms for one pose frame, decoding grown-joint
  /// rotations at that frame's timestamp (overrides honored).
  std::vector<Transform> frame_transforms(int frame) const;

  /// Same, with the base pose taken from `base_frame` while grown joints
  /// decode at timestamp t (the frozen-body animation path).
  std::vector<Transform> transforms_at(int base_frame, double t) const;

  Vec3Grid warp(const std::vector<int>& frames) const;
  Vec3Grid warp_all() const;
};

}  // namespace skelgrow
