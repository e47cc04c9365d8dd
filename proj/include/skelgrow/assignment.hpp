#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "skelgrow/geometry.hpp"

namespace skelgrow {

/// P x K table of motion kernels: per point-joint variance of their
/// Euclidean distance across frames. Zero means the pair moves rigidly
/// together.
struct MotionKernelTable {
  int points = 0;
  int joints = 0;
  std::vector<double> mk;  // P x K, row-major

  double& at(int p, int k) { return mk[static_cast<size_t>(p) * joints + k]; }
  double at(int p, int k) const { return mk[static_cast<size_t>(p) * joints + k]; }
};

/// mk[p][k] = (1/N) sum_i (|x[i,p] - j[i,k]| - mu)^2 with mu the mean
/// distance over frames. Requires N >= 2 (a single frame has no variance
/// to discriminate with).
MotionKernelTable compute_motion_kernels(const Vec3Grid& point_trajectory,
                                         const Vec3Grid& joint_trajectory);

/// Row-normalized inverse kernels: w[p][k] = (mk+eps)^-1 / sum_j (mk+eps)^-1.
/// eps regularizes the exact-zero kernels of rigid attachments.
std::vector<double> mk_weights(const MotionKernelTable& table, double eps = 1e-8);

/// w = lambda * w_mk + (1 - lambda) * w_lbs, rows stay stochastic.
/// Both inputs must be row-stochastic P x `stride` matrices.
std::vector<double> hybrid_weights(std::span<const double> w_mk, std::span<const double> w_lbs,
                                   int stride, double lambda);

struct JointGradientVector {
  std::vector<double> g;          // per joint, >= 0, NaN-free
  long accumulation_count = 0;
};

/// Weighted mean of per-point gradient norms per joint:
/// g[k] = sum_p w[p,k] g_p / sum_p w[p,k]; a joint with zero total weight
/// gets 0 rather than NaN.
std::vector<double> weighted_gradient_means(std::span<const double> point_grad_norms,
                                            std::span<const double> weights, int joint_count);

/// Running arithmetic mean of weighted_gradient_means across calls.
class JointGradientAccumulator {
 public:
  explicit JointGradientAccumulator(int joint_count);
  void add(std::span<const double> point_grad_norms, std::span<const double> weights);
  JointGradientVector current() const;
  int joint_count() const { return joint_count_; }

 private:
  int joint_count_;
  std::vector<double> mean_;
  long count_ = 0;
};

/// Diagnostic dump, one row per joint: index, accumulated gradient.
void dump_joint_gradients_csv(const JointGradientVector& g, const std::filesystem::path& path);

}  // namespace skelgrow
