#pragma once

#include <random>

#include "skelgrow/geometry.hpp"
#include "skelgrow/kinematics.hpp"

namespace skelgrow::testutil {

inline Vec3 random_vec3(std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> d(-scale, scale);
  const double x = d(rng);
  const double y = d(rng);
  const double z = d(rng);
  return Vec3(x, y, z);
}

inline Rotation random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  const double w = d(rng);
  const double x = d(rng);
  const double y = d(rng);
  const double z = d(rng);
  return Rotation::from_quaternion(w, x, y, z);
}

inline Rotation rot90x() { return exp_so3(Vec3(M_PI / 2.0, 0.0, 0.0)); }

/// root -> child chain with the child offset along +z.
inline JointTree two_joint_chain() {
  return JointTree({-1, 0}, {Vec3(0, 0, 0), Vec3(0, 0, 1)}, 2);
}

inline CanonicalCloud uniform_cloud(std::vector<Vec3> points, int joints) {
  CanonicalCloud cloud;
  cloud.position = std::move(points);
  cloud.joint_count = joints;
  const size_t total = cloud.position.size() * joints;
  cloud.blend_prior.assign(total, 1.0 / joints);
  cloud.correction_logits.assign(total, 0.0);
  return cloud;
}

}  // namespace skelgrow::testutil
