#include <doctest.h>

#include <random>

#include "skelgrow/errors.hpp"
#include "skelgrow/kinematics.hpp"
#include "test_util.hpp"

using namespace skelgrow;
using testutil::random_rotation;
using testutil::random_vec3;
using testutil::uniform_cloud;

namespace {

JointTree random_tree(std::mt19937_64& rng, int joints) {
  std::vector<int> parents(static_cast<size_t>(joints));
  std::vector<Vec3> rest(static_cast<size_t>(joints));
  parents[0] = -1;
  rest[0] = Vec3::Zero();
  for (int j = 1; j < joints; ++j) {
    parents[j] = std::uniform_int_distribution<int>(0, j - 1)(rng);
    rest[j] = random_vec3(rng);
  }
  return JointTree(std::move(parents), std::move(rest), joints);
}

std::vector<Rotation> random_pose(std::mt19937_64& rng, int joints) {
  std::vector<Rotation> pose(static_cast<size_t>(joints));
  for (auto& r : pose) r = random_rotation(rng);
  return pose;
}

}  // namespace

TEST_CASE("JointTree validation") {
  CHECK_THROWS_AS(JointTree({-1, -1}, {Vec3::Zero(), Vec3::Zero()}, 2), ValidationError);
  CHECK_THROWS_AS(JointTree({0, -1}, {Vec3::Zero(), Vec3::Zero()}, 2), ValidationError);
  CHECK_THROWS_AS(JointTree({-1, 0}, {Vec3::Zero(), Vec3::Zero()}, 3), ValidationError);
  CHECK_THROWS_AS(JointTree({}, {}, 0), ValidationError);
}

TEST_CASE("forward kinematics: identity pose keeps every joint at rest") {
  std::mt19937_64 rng(21);
  const JointTree tree = random_tree(rng, 6);
  const std::vector<Rotation> pose(6);
  const auto global = forward_kinematics(tree, pose, Vec3::Zero());
  for (int j = 0; j < 6; ++j) {
    CHECK(global[j].rotation.is_identity(1e-15));
    CHECK(global[j].translation.norm() < 1e-15);
    CHECK((global[j].apply(tree.rest_position(j)) - tree.rest_position(j)).norm() < 1e-15);
  }
}

TEST_CASE("forward kinematics: two-joint chain with the root rotated 90 degrees") {
  const JointTree tree = testutil::two_joint_chain();
  const std::vector<Rotation> pose{testutil::rot90x(), Rotation()};
  const auto global = forward_kinematics(tree, pose, Vec3::Zero());
  const Vec3 child = global[1].apply(tree.rest_position(1));
  CHECK(child.x() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(child.y() == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(child.z() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("forward kinematics: grown joint with identity rotation tracks its parent") {
  std::mt19937_64 rng(22);
  JointTree tree = random_tree(rng, 5);
  tree.append_extra_joint(3, tree.rest_position(3) + Vec3(0.1, 0, 0.2));
  const std::vector<Rotation> pose = random_pose(rng, 5);
  const Vec3 root_t = random_vec3(rng);
  const std::vector<Rotation> extra{Rotation()};
  const auto global = forward_kinematics(tree, pose, root_t, extra);
  const Vec3 probe = random_vec3(rng);
  CHECK((global[5].apply(probe) - global[3].apply(probe)).norm() < 1e-15);
}

TEST_CASE("forward kinematics: appending extras never disturbs base transforms") {
  std::mt19937_64 rng(23);
  const JointTree base = random_tree(rng, 7);
  const std::vector<Rotation> pose = random_pose(rng, 7);
  const Vec3 root_t = random_vec3(rng);
  const auto before = forward_kinematics(base, pose, root_t);

  JointTree grown = base;
  grown.append_extra_joint(2, grown.rest_position(2));
  grown.append_extra_joint(5, grown.rest_position(5));
  std::mt19937_64 rng2(24);
  const std::vector<Rotation> extra{random_rotation(rng2), random_rotation(rng2)};
  const auto after = forward_kinematics(grown, pose, root_t, extra);
  for (int j = 0; j < 7; ++j) {
    CHECK((before[j].translation - after[j].translation).norm() == 0.0);
    CHECK((before[j].rotation.quaternion().coeffs() - after[j].rotation.quaternion().coeffs())
              .norm() == 0.0);
  }
}

TEST_CASE("forward kinematics rejects mismatched rotation counts") {
  const JointTree tree = testutil::two_joint_chain();
  const std::vector<Rotation> short_pose{Rotation()};
  CHECK_THROWS_AS(forward_kinematics(tree, short_pose, Vec3::Zero()), ValidationError);
}

TEST_CASE("lbs_warp: identity transforms return canonical positions") {
  std::mt19937_64 rng(25);
  std::vector<Vec3> points;
  for (int i = 0; i < 50; ++i) points.push_back(random_vec3(rng, 2.0));
  const CanonicalCloud cloud = uniform_cloud(points, 4);
  const std::vector<Transform> id(4);
  const std::vector<Vec3> warped = lbs_warp(cloud, id);
  for (int i = 0; i < 50; ++i) {
    CHECK((warped[i] - points[i]).norm() < 1e-12);
  }
}

TEST_CASE("lbs_warp: half/half blend of two translations") {
  CanonicalCloud cloud = uniform_cloud({Vec3(0.3, -0.2, 0.9)}, 2);
  std::vector<Transform> t(2);
  t[0].translation = Vec3(1, 0, 0);
  t[1].translation = Vec3(0, 1, 0);
  const std::vector<Vec3> warped = lbs_warp(cloud, t);
  CHECK((warped[0] - (Vec3(0.3, -0.2, 0.9) + Vec3(0.5, 0.5, 0.0))).norm() < 1e-12);
}

TEST_CASE("lbs_warp: full weight on one joint is that joint's rigid map") {
  std::mt19937_64 rng(26);
  CanonicalCloud cloud;
  cloud.position = {random_vec3(rng)};
  cloud.joint_count = 3;
  cloud.blend_prior = {0.0, 1.0, 0.0};
  cloud.correction_logits = {0.0, 0.0, 0.0};
  std::vector<Transform> t(3);
  for (auto& x : t) x = Transform{random_rotation(rng), random_vec3(rng)};
  const std::vector<Vec3> warped = lbs_warp(cloud, t);
  CHECK((warped[0] - t[1].apply(cloud.position[0])).norm() < 1e-12);
}

TEST_CASE("lbs_warp is linear in the translations for fixed rotations") {
  std::mt19937_64 rng(27);
  std::vector<Vec3> points;
  for (int i = 0; i < 20; ++i) points.push_back(random_vec3(rng));
  CanonicalCloud cloud = uniform_cloud(points, 3);
  for (auto& l : cloud.correction_logits) l = random_vec3(rng).x();

  std::vector<Transform> rotations_only(3);
  std::vector<Transform> full(3);
  std::vector<Vec3> translations(3);
  for (int k = 0; k < 3; ++k) {
    const Rotation r = random_rotation(rng);
    translations[k] = random_vec3(rng, 2.0);
    rotations_only[k] = Transform{r, Vec3::Zero()};
    full[k] = Transform{r, translations[k]};
  }
  const std::vector<Vec3> base = lbs_warp(cloud, rotations_only);
  const std::vector<Vec3> shifted = lbs_warp(cloud, full);
  const std::vector<double> weights = effective_blend_weights(cloud);
  for (int i = 0; i < 20; ++i) {
    Vec3 expect = base[i];
    for (int k = 0; k < 3; ++k) expect += weights[i * 3 + k] * translations[k];
    CHECK((shifted[i] - expect).norm() < 1e-10);
  }
}

TEST_CASE("effective_blend_weights: zero logits reproduce the prior") {
  std::mt19937_64 rng(28);
  CanonicalCloud cloud;
  cloud.position = {Vec3::Zero(), Vec3::Zero()};
  cloud.joint_count = 3;
  cloud.blend_prior = {0.2, 0.5, 0.3, 0.7, 0.1, 0.2};
  cloud.correction_logits.assign(6, 0.0);
  const std::vector<double> w = effective_blend_weights(cloud);
  for (size_t i = 0; i < 6; ++i) CHECK(w[i] == doctest::Approx(cloud.blend_prior[i]).epsilon(1e-12));
}

TEST_CASE("effective_blend_weights: a large logit saturates its joint") {
  CanonicalCloud cloud;
  cloud.position = {Vec3::Zero()};
  cloud.joint_count = 2;
  cloud.blend_prior = {0.5, 0.5};
  cloud.correction_logits = {50.0, 0.0};  // clamped to 40 internally
  const std::vector<double> w = effective_blend_weights(cloud);
  CHECK(w[0] > 1.0 - 1e-9);
  CHECK(w[0] + w[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("effective_blend_weights: multiplicative correction with renormalization") {
  CanonicalCloud cloud;
  cloud.position = {Vec3::Zero()};
  cloud.joint_count = 2;
  cloud.blend_prior = {0.5, 0.5};
  cloud.correction_logits = {std::log(2.0), 0.0};
  const std::vector<double> w = effective_blend_weights(cloud);
  CHECK(w[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(w[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("effective_blend_weights stays row-stochastic for any logit magnitude") {
  std::mt19937_64 rng(29);
  CanonicalCloud cloud;
  const int p = 40, k = 5;
  for (int i = 0; i < p; ++i) cloud.position.push_back(Vec3::Zero());
  cloud.joint_count = k;
  cloud.blend_prior.assign(static_cast<size_t>(p) * k, 1.0 / k);
  cloud.correction_logits.resize(static_cast<size_t>(p) * k);
  std::uniform_real_distribution<double> wild(-1e6, 1e6);
  for (auto& l : cloud.correction_logits) l = wild(rng);
  const std::vector<double> w = effective_blend_weights(cloud);
  for (int i = 0; i < p; ++i) {
    double sum = 0.0;
    for (int j = 0; j < k; ++j) {
      CHECK(w[static_cast<size_t>(i) * k + j] >= 0.0);
      sum += w[static_cast<size_t>(i) * k + j];
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("CanonicalCloud validation catches malformed rows") {
  CanonicalCloud cloud;
  cloud.position = {Vec3::Zero()};
  cloud.joint_count = 2;
  cloud.blend_prior = {0.6, 0.6};
  cloud.correction_logits = {0.0, 0.0};
  CHECK_THROWS_AS(cloud.validate(), ValidationError);
  cloud.blend_prior = {0.5, 0.5};
  CHECK_NOTHROW(cloud.validate());
  cloud.correction_logits[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(cloud.validate(), ValidationError);
}

TEST_CASE("append_joint_columns keeps rows stochastic within 1e-6 and preserves old weights") {
  std::mt19937_64 rng(30);
  CanonicalCloud cloud;
  cloud.position = {Vec3::Zero(), Vec3::Zero()};
  cloud.joint_count = 2;
  cloud.blend_prior = {0.3, 0.7, 0.9, 0.1};
  cloud.correction_logits = {0.4, -0.2, 0.0, 1.0};
  const CanonicalCloud before = cloud;
  cloud.append_joint_columns(2);
  CHECK(cloud.joint_count == 4);
  CHECK_NOTHROW(cloud.validate());
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      CHECK(cloud.prior(i, j) == before.prior(i, j));
      CHECK(cloud.logit(i, j) == before.logit(i, j));
    }
    for (int j = 2; j < 4; ++j) {
      CHECK(cloud.prior(i, j) == 1e-8);
      CHECK(cloud.logit(i, j) == 0.0);
    }
  }
}

TEST_CASE("bone_distance_prior concentrates on the owning bone") {
  // chain: three joints along +y; a point on the lower segment belongs to 0
  const JointTree tree({-1, 0, 1}, {Vec3(0, 0, 0), Vec3(0, 1, 0), Vec3(0, 2, 0)}, 3);
  const std::vector<Vec3> pts{Vec3(0.02, 0.5, 0), Vec3(0.02, 1.5, 0), Vec3(0, 2.1, 0)};
  const std::vector<double> prior = bone_distance_prior(pts, tree);
  CHECK(prior[0] > prior[1]);  // first point: joint 0 over joint 1
  CHECK(prior[0] > prior[2]);
  CHECK(prior[3 + 1] > prior[3 + 0]);  // second point: joint 1
  // beyond the leaf the leaf "bone" degenerates to the shared endpoint,
  // so joints 1 and 2 tie and both beat joint 0
  CHECK(prior[6 + 2] == doctest::Approx(prior[6 + 1]).epsilon(1e-12));
  CHECK(prior[6 + 1] > prior[6 + 0]);
  for (int i = 0; i < 3; ++i) {
    double sum = 0.0;
    for (int j = 0; j < 3; ++j) sum += prior[static_cast<size_t>(i) * 3 + j];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("PoseSequence validation") {
  PoseSequence pose;
  pose.timestamps = {0.0, 0.5, 0.5};
  pose.local_rotation = {std::vector<Rotation>(2), std::vector<Rotation>(2),
                         std::vector<Rotation>(2)};
  pose.root_translation = {Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  CHECK_THROWS_AS(pose.validate(2), ValidationError);
  pose.timestamps = {0.0, 0.5, 1.0};
  CHECK_NOTHROW(pose.validate(2));
  CHECK_THROWS_AS(pose.validate(3), ValidationError);
}
