#pragma once

#include <random>
#include <span>
#include <vector>

#include "skelgrow/kinematics.hpp"
#include "skelgrow/loss.hpp"

namespace skelgrow {

struct DensifyParams {
  bool enabled = false;
  double eps_d0 = 5e-4;
  double a = 2.0;
  double b = 5000.0;
  int n_max = 30000;
  int interval = 500;        // iterations between densify events
  double clone_sigma = 1e-3; // positional jitter of clones
  double prune_quantile = 0.995;
  int prune_strikes = 3;     // consecutive events above quantile before pruning
  int min_points = 16;
};

/// Adaptive densification threshold: the gradient cutoff is raised once
/// the point count reaches the budget, eps_d = (a + (n - N) / b) * eps_d0,
/// which suppresses further cloning as the cloud grows.
class DensifyController {
 public:
  explicit DensifyController(const DensifyParams& params);

  /// Recomputes and returns eps_d for the given point count.
  double update_threshold(int point_count);
  double current() const { return eps_d_; }
  const DensifyParams& params() const { return params_; }

 private:
  DensifyParams params_;
  double eps_d_;
};

/// Row remapping produced by a densify event: source[i] is the old point
/// index that new point i derives from.
struct DensifyPlan {
  std::vector<int> source;
  std::vector<char> is_clone;
  int cloned = 0;
  int pruned = 0;
};

/// Clones points whose accumulated gradient exceeds eps_d (jittered copy,
/// prior and logits duplicated) and prunes points whose residual stayed
/// above the 99.5th percentile for `prune_strikes` consecutive events.
/// Pruning never drops the cloud below min_points. Only valid in chamfer
/// mode: correspondence supervision forbids count changes.
DensifyPlan densify_and_prune(CanonicalCloud& cloud, std::vector<int>& strike_state,
                              std::span<const double> grad_norms,
                              std::span<const double> residuals, double eps_d, LossMode mode,
                              std::mt19937_64& rng, const DensifyParams& params);

}  // namespace skelgrow
