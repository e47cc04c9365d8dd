#include "skelgrow/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "skelgrow/errors.hpp"
#include "skelgrow/threading.hpp"

namespace skelgrow {

JointTree::JointTree(std::vector<int> parents, std::vector<Vec3> rest_positions, int base_count)
    : parent_(std::move(parents)), rest_position_(std::move(rest_positions)),
      base_count_(base_count) {
  const int k = joint_count();
  if (k == 0) throw ValidationError("JointTree: empty tree");
  if (rest_position_.size() != parent_.size()) {
    throw ValidationError("JointTree: parents and rest_positions size mismatch");
  }
  if (base_count_ <= 0 || base_count_ > k) {
    throw ValidationError("JointTree: base_count must satisfy 0 < base_count <= joint_count");
  }
  int roots = 0;
  for (int j = 0; j < k; ++j) {
    if (parent_[j] < 0) {
      ++roots;
    } else if (parent_[j] >= j) {
      throw ValidationError("JointTree: parent index must precede the child (topological order)");
    }
    if (!rest_position_[j].allFinite()) {
      throw ValidationError("JointTree: rest position not finite");
    }
  }
  if (roots != 1) throw ValidationError("JointTree: exactly one root required");
}

void JointTree::append_extra_joint(int parent_index, const Vec3& rest_position) {
  if (parent_index < 0 || parent_index >= base_count_) {
    throw ValidationError("JointTree: extra joints must hang under a base joint");
  }
  parent_.push_back(parent_index);
  rest_position_.push_back(rest_position);
}

std::vector<int> JointTree::children_of(int joint) const {
  std::vector<int> children;
  for (int j = 0; j < joint_count(); ++j) {
    if (parent_[j] == joint) children.push_back(j);
  }
  return children;
}

void PoseSequence::validate(int base_count) const {
  const int n = frame_count();
  if (n == 0) throw ValidationError("PoseSequence: no frames");
  if (local_rotation.size() != timestamps.size() || root_translation.size() != timestamps.size()) {
    throw ValidationError("PoseSequence: per-frame array sizes disagree");
  }
  for (int f = 0; f < n; ++f) {
    if (timestamps[f] < 0.0 || timestamps[f] > 1.0) {
      throw ValidationError("PoseSequence: timestamps must lie in [0, 1]");
    }
    if (f > 0 && timestamps[f] <= timestamps[f - 1]) {
      throw ValidationError("PoseSequence: timestamps must be strictly increasing");
    }
    if (static_cast<int>(local_rotation[f].size()) != base_count) {
      throw ValidationError("PoseSequence: rotation count does not match base joint count");
    }
  }
}

std::vector<Transform> forward_kinematics(const JointTree& tree,
                                          std::span<const Rotation> base_rotation,
                                          const Vec3& root_translation,
                                          std::span<const Rotation> extra_rotation) {
  const int k = tree.joint_count();
  const int base = tree.base_count();
  if (static_cast<int>(base_rotation.size()) != base) {
    throw ValidationError("forward_kinematics: base rotation count != base joint count");
  }
  if (static_cast<int>(extra_rotation.size()) != k - base) {
    throw ValidationError("forward_kinematics: extra rotation count != extra joint count");
  }
  std::vector<Transform> global(static_cast<size_t>(k));
  for (int j = 0; j < k; ++j) {
    const Rotation& r = j < base ? base_rotation[j] : extra_rotation[j - base];
    const Vec3& pivot = tree.rest_position(j);
    Transform local{r, pivot - r.apply(pivot)};
    const int p = tree.parent(j);
    if (p < 0) {
      local.translation += root_translation;
      global[j] = local;
    } else {
      global[j] = compose(global[p], local);
    }
  }
  return global;
}

std::vector<Vec3> posed_joint_positions(const JointTree& tree,
                                        std::span<const Transform> global) {
  std::vector<Vec3> out(static_cast<size_t>(tree.joint_count()));
  for (int j = 0; j < tree.joint_count(); ++j) {
    out[j] = global[j].apply(tree.rest_position(j));
  }
  return out;
}

void CanonicalCloud::validate() const {
  const int p = point_count();
  if (p < 1) throw ValidationError("CanonicalCloud: at least one point required");
  if (joint_count < 1) throw ValidationError("CanonicalCloud: joint_count must be positive");
  if (base_columns > joint_count) {
    throw ValidationError("CanonicalCloud: base_columns exceeds joint_count");
  }
  const size_t expect = static_cast<size_t>(p) * joint_count;
  if (blend_prior.size() != expect || correction_logits.size() != expect) {
    throw ValidationError("CanonicalCloud: weight matrix shapes do not match P x K");
  }
  for (int i = 0; i < p; ++i) {
    double row_sum = 0.0;
    for (int k = 0; k < joint_count; ++k) {
      const double w = prior(i, k);
      if (w < 0.0) throw ValidationError("CanonicalCloud: negative prior weight");
      if (!std::isfinite(logit(i, k))) throw ValidationError("CanonicalCloud: non-finite logit");
      row_sum += w;
    }
    if (std::abs(row_sum - 1.0) > 1e-6) {
      throw ValidationError("CanonicalCloud: prior row does not sum to 1");
    }
  }
}

void CanonicalCloud::append_joint_columns(int count, double prior_floor) {
  if (count <= 0) return;
  if (base_columns < 0) base_columns = joint_count;
  const int p = point_count();
  const int old_k = joint_count;
  const int new_k = old_k + count;
  std::vector<double> prior_next(static_cast<size_t>(p) * new_k, prior_floor);
  std::vector<double> logits_next(static_cast<size_t>(p) * new_k, 0.0);
  for (int i = 0; i < p; ++i) {
    for (int k = 0; k < old_k; ++k) {
      prior_next[static_cast<size_t>(i) * new_k + k] = prior(i, k);
      logits_next[static_cast<size_t>(i) * new_k + k] = logit(i, k);
    }
  }
  blend_prior = std::move(prior_next);
  correction_logits = std::move(logits_next);
  joint_count = new_k;
}

BlendWeights effective_blend_weights_with_mass(const CanonicalCloud& cloud) {
  const int p = cloud.point_count();
  const int k = cloud.joint_count;
  const int prior_backed = cloud.prior_backed_columns();
  BlendWeights out;
  out.weights.assign(static_cast<size_t>(p) * k, 0.0);
  out.row_mass.assign(static_cast<size_t>(p), 0.0);
  parallel_for(p, [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      double* row = &out.weights[static_cast<size_t>(i) * k];
      double sum = 0.0;
      for (int j = 0; j < k; ++j) {
        const double l = cloud.logit(i, j);
        if (j < prior_backed) {
          row[j] = cloud.prior(i, j) * std::exp(std::clamp(l, -kLogitClamp, kLogitClamp));
        } else {
          row[j] = cloud.prior(i, j) + std::max(l, 0.0);
        }
        sum += row[j];
      }
      out.row_mass[i] = sum;
      for (int j = 0; j < k; ++j) row[j] /= sum;
    }
  });
  return out;
}

std::vector<double> effective_blend_weights(const CanonicalCloud& cloud) {
  return effective_blend_weights_with_mass(cloud).weights;
}

std::vector<Vec3> lbs_warp(const CanonicalCloud& cloud, std::span<const Transform> transforms) {
  if (static_cast<int>(transforms.size()) != cloud.joint_count) {
    throw ValidationError("lbs_warp: transform count != cloud joint count");
  }
  const std::vector<double> weights = effective_blend_weights(cloud);
  std::vector<Vec3> out(cloud.position.size());
  lbs_warp_with_weights(cloud.position, weights, transforms, out);
  return out;
}

void lbs_warp_with_weights(std::span<const Vec3> positions, std::span<const double> weights,
                           std::span<const Transform> transforms, std::span<Vec3> out) {
  const int p = static_cast<int>(positions.size());
  const int k = static_cast<int>(transforms.size());
  if (weights.size() != static_cast<size_t>(p) * k || out.size() != positions.size()) {
    throw ValidationError("lbs_warp_with_weights: shape mismatch");
  }
  // matrix form, bit-identical with the training forward pass
  std::vector<Mat3> rot(static_cast<size_t>(k));
  for (int j = 0; j < k; ++j) rot[j] = transforms[j].rotation.matrix();
  parallel_for(p, [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      const double* row = &weights[static_cast<size_t>(i) * k];
      Vec3 acc = Vec3::Zero();
      for (int j = 0; j < k; ++j) {
        if (row[j] == 0.0) continue;
        acc += row[j] * (rot[j] * positions[i] + transforms[j].translation);
      }
      out[i] = acc;
    }
  });
}

double point_segment_distance_squared(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 <= 0.0) return (p - a).squaredNorm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).squaredNorm();
}

std::vector<double> bone_distance_prior(std::span<const Vec3> points, const JointTree& tree,
                                        double eps) {
  if (eps <= 0.0) throw ValidationError("bone_distance_prior: eps must be positive");
  const int k = tree.base_count();
  const int p = static_cast<int>(points.size());

  // Bone of joint j: segments to each base child, or the joint point itself.
  std::vector<std::vector<int>> children(static_cast<size_t>(k));
  for (int j = 0; j < k; ++j) {
    const int parent = tree.parent(j);
    if (parent >= 0) children[parent].push_back(j);
  }

  std::vector<double> prior(static_cast<size_t>(p) * k, 0.0);
  parallel_for(p, [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      double* row = &prior[static_cast<size_t>(i) * k];
      double sum = 0.0;
      for (int j = 0; j < k; ++j) {
        double d2;
        if (children[j].empty()) {
          d2 = (points[i] - tree.rest_position(j)).squaredNorm();
        } else {
          d2 = std::numeric_limits<double>::infinity();
          for (const int c : children[j]) {
            d2 = std::min(d2, point_segment_distance_squared(points[i], tree.rest_position(j),
                                                             tree.rest_position(c)));
          }
        }
        row[j] = 1.0 / (d2 + eps);
        sum += row[j];
      }
      for (int j = 0; j < k; ++j) row[j] /= sum;
    }
  });
  return prior;
}

}  // namespace skelgrow
