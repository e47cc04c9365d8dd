#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "skelgrow/geometry.hpp"

namespace skelgrow {

/// Kinematic tree. Joints are stored in topological order (parent index is
/// always smaller than the child's). The first `base_count` joints form the
/// fixed base skeleton; joints appended by growth follow them.
class JointTree {
 public:
  JointTree() = default;
  /// Validates: exactly one root, parent < child, 0 < base_count <= K.
  JointTree(std::vector<int> parents, std::vector<Vec3> rest_positions, int base_count);

  int joint_count() const { return static_cast<int>(parent_.size()); }
  int base_count() const { return base_count_; }
  int extra_count() const { return joint_count() - base_count_; }

  int parent(int joint) const { return parent_[joint]; }
  const Vec3& rest_position(int joint) const { return rest_position_[joint]; }
  void set_rest_position(int joint, const Vec3& p) { rest_position_[joint] = p; }
  const std::vector<int>& parents() const { return parent_; }
  const std::vector<Vec3>& rest_positions() const { return rest_position_; }

  /// Appends a grown joint under `parent_index` (must be a base joint).
  void append_extra_joint(int parent_index, const Vec3& rest_position);

  std::vector<int> children_of(int joint) const;

 private:
  std::vector<int> parent_;         // -1 for the root
  std::vector<Vec3> rest_position_;
  int base_count_ = 0;
};

/// Per-frame base pose: local rotations for the base joints plus a root
/// translation, with timestamps normalized to [0, 1].
struct PoseSequence {
  std::vector<double> timestamps;                     // N, strictly increasing
  std::vector<std::vector<Rotation>> local_rotation;  // N x base_count
  std::vector<Vec3> root_translation;                 // N

  int frame_count() const { return static_cast<int>(timestamps.size()); }
  void validate(int base_count) const;
};

/// Global rigid transform per joint. Local rotations pivot about the
/// joint's own rest position; the root additionally translates.
std::vector<Transform> forward_kinematics(const JointTree& tree,
                                          std::span<const Rotation> base_rotation,
                                          const Vec3& root_translation,
                                          std::span<const Rotation> extra_rotation = {});

/// Posed joint positions: global(k) applied to rest(k).
std::vector<Vec3> posed_joint_positions(const JointTree& tree,
                                        std::span<const Transform> global);

/// Canonical points with a row-stochastic blend-weight prior and learnable
/// per-point correction logits (stride = joint_count, row-major).
///
/// The first `base_columns` columns carry a genuine prior and are corrected
/// multiplicatively; columns appended by growth have only a tiny floor and
/// their weight mass is learned directly (additively), so a fresh column
/// receives full-strength gradients instead of ones scaled by its own
/// near-zero weight.
struct CanonicalCloud {
  std::vector<Vec3> position;           // P
  int joint_count = 0;                  // K, column stride
  int base_columns = -1;                // -1: every column is prior-backed
  std::vector<double> blend_prior;      // P x K
  std::vector<double> correction_logits;  // P x K

  int point_count() const { return static_cast<int>(position.size()); }
  int prior_backed_columns() const { return base_columns < 0 ? joint_count : base_columns; }
  double& prior(int p, int k) { return blend_prior[static_cast<size_t>(p) * joint_count + k]; }
  double prior(int p, int k) const {
    return blend_prior[static_cast<size_t>(p) * joint_count + k];
  }
  double& logit(int p, int k) {
    return correction_logits[static_cast<size_t>(p) * joint_count + k];
  }
  double logit(int p, int k) const {
    return correction_logits[static_cast<size_t>(p) * joint_count + k];
  }

  /// P >= 1, prior rows nonnegative and summing to 1 within 1e-6,
  /// logits finite.
  void validate() const;

  /// Adds `count` columns for grown joints. Their prior is a small uniform
  /// floor (so the weight is produced entirely by the logits once trained)
  /// and their logits start at zero. The floor is small enough that
  /// renormalization moves effective weights by less than 1e-6.
  void append_joint_columns(int count, double prior_floor = 1e-8);
};

/// Effective blend weights. Prior-backed columns contribute
/// prior * exp(logit) with the exponent clamped to +-40; grown columns
/// contribute prior_floor + max(logit, 0). Rows are renormalized, so they
/// stay stochastic within 1e-9 for any logit magnitude.
std::vector<double> effective_blend_weights(const CanonicalCloud& cloud);

/// Same, also returning each row's unnormalized mass (needed to
/// differentiate through the grown columns).
struct BlendWeights {
  std::vector<double> weights;    // P x K, row-stochastic
  std::vector<double> row_mass;   // P
};
BlendWeights effective_blend_weights_with_mass(const CanonicalCloud& cloud);

/// Exponent clamp used by effective_blend_weights; gradients through a
/// clamped logit are zero.
inline constexpr double kLogitClamp = 40.0;

/// x_o[p] = sum_k w[p,k] * (R_k x_c[p] + t_k).
std::vector<Vec3> lbs_warp(const CanonicalCloud& cloud, std::span<const Transform> transforms);

/// Warp with precomputed weights (stride = transform count).
void lbs_warp_with_weights(std::span<const Vec3> positions, std::span<const double> weights,
                           std::span<const Transform> transforms, std::span<Vec3> out);

/// Distance-based blend-weight prior over the base skeleton. A joint's
/// "bone" is the union of segments from its rest position to each child's;
/// leaf joints degenerate to the point itself. Weight is proportional to
/// 1 / (d^2 + eps), normalized per row. Emulates nearest-template-vertex
/// priors: soft, concentrated on the nearest bone, and never exactly zero
/// so the learnable correction can recover from a wrong prior.
std::vector<double> bone_distance_prior(std::span<const Vec3> points, const JointTree& tree,
                                        double eps = 1e-4);

double point_segment_distance_squared(const Vec3& p, const Vec3& a, const Vec3& b);

}  // namespace skelgrow
