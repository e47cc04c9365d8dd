#include <doctest.h>

#include <random>

#include "skelgrow/densify.hpp"
#include "skelgrow/errors.hpp"
#include "skelgrow/loss.hpp"
#include "test_util.hpp"

using namespace skelgrow;
using testutil::random_vec3;

TEST_CASE("correspondence loss: exact fit gives zero loss and gradients") {
  std::mt19937_64 rng(51);
  Vec3Grid pred(3, 5);
  for (auto& v : pred.data) v = random_vec3(rng);
  const Vec3Grid obs = pred;
  const LossEvaluation out = reconstruction_loss(pred, obs, LossMode::correspondence);
  CHECK(out.value == 0.0);
  for (const Vec3& g : out.gradient.data) CHECK(g.norm() == 0.0);
}

TEST_CASE("correspondence loss: single point, unit offset") {
  Vec3Grid pred(1, 1), obs(1, 1);
  pred.at(0, 0) = Vec3(1, 0, 0);
  const LossEvaluation out = reconstruction_loss(pred, obs, LossMode::correspondence);
  CHECK(out.value == doctest::Approx(1.0).epsilon(1e-15));
  CHECK((out.gradient.at(0, 0) - Vec3(2, 0, 0)).norm() < 1e-15);
}

TEST_CASE("correspondence loss gradient matches finite differences") {
  std::mt19937_64 rng(52);
  Vec3Grid pred(2, 4), obs(2, 4);
  for (auto& v : pred.data) v = random_vec3(rng);
  for (auto& v : obs.data) v = random_vec3(rng);
  const LossEvaluation out = reconstruction_loss(pred, obs, LossMode::correspondence);
  const double h = 1e-6;
  for (int f = 0; f < 2; ++f) {
    for (int i = 0; i < 4; ++i) {
      for (int c = 0; c < 3; ++c) {
        Vec3Grid up = pred, down = pred;
        up.at(f, i)[c] += h;
        down.at(f, i)[c] -= h;
        const double fd = (reconstruction_loss(up, obs, LossMode::correspondence).value -
                           reconstruction_loss(down, obs, LossMode::correspondence).value) /
                          (2 * h);
        CHECK(std::abs(fd - out.gradient.at(f, i)[c]) < 1e-8);
      }
    }
  }
}

TEST_CASE("correspondence loss rejects mismatched point counts") {
  Vec3Grid pred(1, 2), obs(1, 3);
  CHECK_THROWS_AS(reconstruction_loss(pred, obs, LossMode::correspondence), ValidationError);
}

TEST_CASE("chamfer of a cloud against itself is zero") {
  std::mt19937_64 rng(53);
  Vec3Grid pred(2, 8);
  for (auto& v : pred.data) v = random_vec3(rng);
  const LossEvaluation out = reconstruction_loss(pred, pred, LossMode::chamfer);
  CHECK(out.value == 0.0);
}

TEST_CASE("chamfer matches the nearest observation and differentiates through it") {
  Vec3Grid pred(1, 1), obs(1, 2);
  pred.at(0, 0) = Vec3(0.9, 0, 0);
  obs.at(0, 0) = Vec3(1, 0, 0);
  obs.at(0, 1) = Vec3(-1, 0, 0);
  const LossEvaluation out = reconstruction_loss(pred, obs, LossMode::chamfer);
  CHECK(out.matches[0] == 0);
  CHECK(out.value == doctest::Approx(0.01).epsilon(1e-12));
  CHECK((out.gradient.at(0, 0) - Vec3(-0.2, 0, 0)).norm() < 1e-12);
}

TEST_CASE("chamfer rejects empty observation frames") {
  Vec3Grid pred(1, 1), obs(1, 0);
  CHECK_THROWS_AS(reconstruction_loss(pred, obs, LossMode::chamfer), ValidationError);
}

TEST_CASE("densify threshold: paper constants at and above the budget") {
  DensifyParams params;
  DensifyController ctrl(params);
  CHECK(ctrl.update_threshold(30000) == doctest::Approx(1e-3).epsilon(1e-15));
  CHECK(ctrl.update_threshold(35000) == doctest::Approx(1.5e-3).epsilon(1e-15));
  CHECK(ctrl.update_threshold(100) == doctest::Approx(5e-4).epsilon(1e-15));
}

TEST_CASE("densify threshold is nondecreasing in the point count") {
  DensifyParams params;
  DensifyController ctrl(params);
  double prev = 0.0;
  for (int n = 29990; n <= 40000; n += 7) {
    const double eps = ctrl.update_threshold(n);
    CHECK(eps >= prev);
    CHECK(eps >= params.eps_d0);
    prev = eps;
  }
}

namespace {

CanonicalCloud small_cloud(int p, int k, std::mt19937_64& rng) {
  CanonicalCloud cloud;
  for (int i = 0; i < p; ++i) cloud.position.push_back(random_vec3(rng));
  cloud.joint_count = k;
  cloud.blend_prior.assign(static_cast<size_t>(p) * k, 1.0 / k);
  cloud.correction_logits.assign(static_cast<size_t>(p) * k, 0.0);
  return cloud;
}

}  // namespace

TEST_CASE("densify_and_prune: quiet cloud stays untouched") {
  std::mt19937_64 rng(54);
  CanonicalCloud cloud = small_cloud(20, 2, rng);
  std::vector<int> strikes(20, 0);
  const std::vector<double> grads(20, 1e-6);
  const std::vector<double> residuals(20, 1e-8);
  const DensifyPlan plan = densify_and_prune(cloud, strikes, grads, residuals, 5e-4,
                                             LossMode::chamfer, rng, DensifyParams{});
  CHECK(plan.cloned == 0);
  CHECK(plan.pruned == 0);
  CHECK(cloud.point_count() == 20);
}

TEST_CASE("densify_and_prune: one hot point clones within a few sigma") {
  std::mt19937_64 rng(55);
  DensifyParams params;
  int beyond_three_sigma = 0;
  double mean_abs = 0.0;
  int samples = 0;
  for (int trial = 0; trial < 100; ++trial) {
    CanonicalCloud cloud = small_cloud(20, 2, rng);
    cloud.correction_logits[7 * 2] = 0.31;  // check the copy below
    const Vec3 parent = cloud.position[7];
    std::vector<int> strikes(20, 0);
    std::vector<double> grads(20, 1e-6);
    grads[7] = 1e-2;
    const std::vector<double> residuals(20, 1e-8);
    const DensifyPlan plan = densify_and_prune(cloud, strikes, grads, residuals, 5e-4,
                                               LossMode::chamfer, rng, params);
    REQUIRE(plan.cloned == 1);
    REQUIRE(cloud.point_count() == 21);
    CHECK(cloud.logit(20, 0) == 0.31);  // logits copied
    const Vec3 offset = cloud.position[20] - parent;
    for (int c = 0; c < 3; ++c) {
      mean_abs += std::abs(offset[c]);
      ++samples;
      if (std::abs(offset[c]) > 3.0 * params.clone_sigma) ++beyond_three_sigma;
    }
  }
  mean_abs /= samples;
  // |N(0, sigma)| has mean sigma * sqrt(2/pi) ~ 0.80 sigma
  CHECK(mean_abs > 0.6 * params.clone_sigma);
  CHECK(mean_abs < 1.0 * params.clone_sigma);
  CHECK(beyond_three_sigma <= 6);  // ~0.27% expected over 300 samples
}

TEST_CASE("densify_and_prune: persistent outliers are pruned after three strikes") {
  std::mt19937_64 rng(56);
  DensifyParams params;
  CanonicalCloud cloud = small_cloud(400, 2, rng);
  std::vector<int> strikes(400, 0);
  const std::vector<double> grads(400, 1e-9);
  std::vector<double> residuals(400, 1e-8);
  residuals[13] = 1.0;  // above the 99.5th percentile every event
  for (int event = 0; event < 2; ++event) {
    const DensifyPlan plan = densify_and_prune(cloud, strikes, grads, residuals, 5e-4,
                                               LossMode::chamfer, rng, params);
    CHECK(plan.pruned == 0);
  }
  const DensifyPlan plan = densify_and_prune(cloud, strikes, grads, residuals, 5e-4,
                                             LossMode::chamfer, rng, params);
  CHECK(plan.pruned == 1);
  CHECK(cloud.point_count() == 399);
}

TEST_CASE("densify_and_prune never drops below the point floor") {
  std::mt19937_64 rng(57);
  DensifyParams params;
  CanonicalCloud cloud = small_cloud(18, 2, rng);
  std::vector<int> strikes(18, params.prune_strikes);  // everyone is a candidate
  const std::vector<double> grads(18, 1e-9);
  std::vector<double> residuals(18);
  for (int i = 0; i < 18; ++i) residuals[i] = 1.0 + i;
  const DensifyPlan plan = densify_and_prune(cloud, strikes, grads, residuals, 5e-4,
                                             LossMode::chamfer, rng, params);
  CHECK(cloud.point_count() >= params.min_points);
  CHECK(plan.pruned <= 2);
}

TEST_CASE("densify_and_prune refuses correspondence mode") {
  std::mt19937_64 rng(58);
  CanonicalCloud cloud = small_cloud(4, 1, rng);
  std::vector<int> strikes(4, 0);
  const std::vector<double> grads(4, 0.0);
  const std::vector<double> residuals(4, 0.0);
  CHECK_THROWS_AS(densify_and_prune(cloud, strikes, grads, residuals, 5e-4,
                                    LossMode::correspondence, rng, DensifyParams{}),
                  ValidationError);
}
