#include "skelgrow/densify.hpp"

#include <algorithm>
#include <cmath>

#include "skelgrow/errors.hpp"

namespace skelgrow {

DensifyController::DensifyController(const DensifyParams& params)
    : params_(params), eps_d_(params.eps_d0) {
  if (params.eps_d0 <= 0.0 || params.b <= 0.0 || params.n_max < 0) {
    throw ValidationError("DensifyController: invalid parameters");
  }
}

double DensifyController::update_threshold(int point_count) {
  if (point_count < 0) throw ValidationError("DensifyController: negative point count");
  if (point_count >= params_.n_max) {
    eps_d_ = (params_.a + (point_count - params_.n_max) / params_.b) * params_.eps_d0;
  } else {
    eps_d_ = params_.eps_d0;
  }
  return eps_d_;
}

DensifyPlan densify_and_prune(CanonicalCloud& cloud, std::vector<int>& strike_state,
                              std::span<const double> grad_norms,
                              std::span<const double> residuals, double eps_d, LossMode mode,
                              std::mt19937_64& rng, const DensifyParams& params) {
  if (mode != LossMode::chamfer) {
    throw ValidationError("densify_and_prune: requires chamfer loss mode");
  }
  const int p = cloud.point_count();
  if (grad_norms.size() != static_cast<size_t>(p) || residuals.size() != static_cast<size_t>(p) ||
      strike_state.size() != static_cast<size_t>(p)) {
    throw ValidationError("densify_and_prune: per-point array size mismatch");
  }

  // Residual quantile via nearest rank.
  std::vector<double> sorted(residuals.begin(), residuals.end());
  std::sort(sorted.begin(), sorted.end());
  const int rank = std::max(
      0, static_cast<int>(std::ceil(params.prune_quantile * p)) - 1);
  const double cutoff = sorted[std::min(rank, p - 1)];

  for (int i = 0; i < p; ++i) {
    if (residuals[i] > cutoff) {
      ++strike_state[i];
    } else {
      strike_state[i] = 0;
    }
  }

  std::vector<int> prune_candidates;
  for (int i = 0; i < p; ++i) {
    if (strike_state[i] >= params.prune_strikes) prune_candidates.push_back(i);
  }
  const int prunable = std::max(0, p - params.min_points);
  if (static_cast<int>(prune_candidates.size()) > prunable) {
    // keep the least offending candidates
    std::stable_sort(prune_candidates.begin(), prune_candidates.end(),
                     [&](int a, int b) { return residuals[a] > residuals[b]; });
    prune_candidates.resize(static_cast<size_t>(prunable));
  }
  std::vector<char> pruned(static_cast<size_t>(p), 0);
  for (const int i : prune_candidates) pruned[i] = 1;

  DensifyPlan plan;
  plan.pruned = static_cast<int>(prune_candidates.size());
  for (int i = 0; i < p; ++i) {
    if (!pruned[i]) {
      plan.source.push_back(i);
      plan.is_clone.push_back(0);
    }
  }
  std::normal_distribution<double> jitter(0.0, params.clone_sigma);
  std::vector<Vec3> clone_offsets;
  for (int i = 0; i < p; ++i) {
    if (pruned[i]) continue;
    if (grad_norms[i] > eps_d) {
      plan.source.push_back(i);
      plan.is_clone.push_back(1);
      clone_offsets.emplace_back(jitter(rng), jitter(rng), jitter(rng));
      ++plan.cloned;
    }
  }

  const int k = cloud.joint_count;
  const int new_p = static_cast<int>(plan.source.size());
  std::vector<Vec3> position(static_cast<size_t>(new_p));
  std::vector<double> prior(static_cast<size_t>(new_p) * k);
  std::vector<double> logits(static_cast<size_t>(new_p) * k);
  std::vector<int> strikes(static_cast<size_t>(new_p), 0);
  int clone_i = 0;
  for (int i = 0; i < new_p; ++i) {
    const int src = plan.source[i];
    position[i] = cloud.position[src];
    if (plan.is_clone[i]) {
      position[i] += clone_offsets[clone_i++];
    } else {
      strikes[i] = strike_state[src];
    }
    for (int j = 0; j < k; ++j) {
      prior[static_cast<size_t>(i) * k + j] = cloud.prior(src, j);
      logits[static_cast<size_t>(i) * k + j] = cloud.logit(src, j);
    }
  }
  cloud.position = std::move(position);
  cloud.blend_prior = std::move(prior);
  cloud.correction_logits = std::move(logits);
  strike_state = std::move(strikes);
  return plan;
}

}  // namespace skelgrow
