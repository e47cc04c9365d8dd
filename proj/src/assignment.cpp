#include "skelgrow/assignment.hpp"

#include <cmath>
#include <fstream>

#include "skelgrow/errors.hpp"
#include "skelgrow/threading.hpp"

namespace skelgrow {

MotionKernelTable compute_motion_kernels(const Vec3Grid& point_trajectory,
                                         const Vec3Grid& joint_trajectory) {
  const int n = point_trajectory.frames;
  const int p = point_trajectory.count;
  const int k = joint_trajectory.count;
  if (n < 2) throw ValidationError("compute_motion_kernels: need at least 2 frames");
  if (joint_trajectory.frames != n) {
    throw ValidationError("compute_motion_kernels: frame counts disagree");
  }

  MotionKernelTable table;
  table.points = p;
  table.joints = k;
  table.mk.assign(static_cast<size_t>(p) * k, 0.0);

  parallel_for(p, [&](int begin, int end) {
    std::vector<double> dist(static_cast<size_t>(n));
    for (int i = begin; i < end; ++i) {
      for (int j = 0; j < k; ++j) {
        double mean = 0.0;
        for (int f = 0; f < n; ++f) {
          dist[f] = (point_trajectory.at(f, i) - joint_trajectory.at(f, j)).norm();
          mean += dist[f];
        }
        mean /= n;
        double var = 0.0;
        for (int f = 0; f < n; ++f) {
          const double d = dist[f] - mean;
          var += d * d;
        }
        table.at(i, j) = var / n;
      }
    }
  });
  return table;
}

std::vector<double> mk_weights(const MotionKernelTable& table, double eps) {
  if (eps <= 0.0) throw ValidationError("mk_weights: eps must be positive");
  const int p = table.points;
  const int k = table.joints;
  std::vector<double> weights(static_cast<size_t>(p) * k);
  parallel_for(p, [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      double* row = &weights[static_cast<size_t>(i) * k];
      double sum = 0.0;
      for (int j = 0; j < k; ++j) {
        row[j] = 1.0 / (table.at(i, j) + eps);
        sum += row[j];
      }
      for (int j = 0; j < k; ++j) row[j] /= sum;
    }
  });
  return weights;
}

namespace {

void check_row_stochastic(std::span<const double> w, int stride, const char* name) {
  if (stride <= 0 || w.size() % stride != 0) {
    throw ValidationError(std::string(name) + ": size not a multiple of stride");
  }
  const size_t rows = w.size() / stride;
  for (size_t r = 0; r < rows; ++r) {
    double sum = 0.0;
    for (int j = 0; j < stride; ++j) {
      const double v = w[r * stride + j];
      if (!(v >= 0.0)) throw ValidationError(std::string(name) + ": negative or NaN weight");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw ValidationError(std::string(name) + ": row does not sum to 1");
    }
  }
}

}  // namespace

std::vector<double> hybrid_weights(std::span<const double> w_mk, std::span<const double> w_lbs,
                                   int stride, double lambda) {
  if (lambda < 0.0 || lambda > 1.0) {
    throw ValidationError("hybrid_weights: lambda must lie in [0, 1]");
  }
  if (w_mk.size() != w_lbs.size()) {
    throw ValidationError("hybrid_weights: input sizes disagree");
  }
  check_row_stochastic(w_mk, stride, "hybrid_weights(w_mk)");
  check_row_stochastic(w_lbs, stride, "hybrid_weights(w_lbs)");
  std::vector<double> out(w_mk.size());
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] = lambda * w_mk[i] + (1.0 - lambda) * w_lbs[i];
  }
  return out;
}

std::vector<double> weighted_gradient_means(std::span<const double> point_grad_norms,
                                            std::span<const double> weights, int joint_count) {
  const size_t p = point_grad_norms.size();
  if (weights.size() != p * joint_count) {
    throw ValidationError("weighted_gradient_means: weight shape mismatch");
  }
  for (const double g : point_grad_norms) {
    if (!(g >= 0.0) || !std::isfinite(g)) {
      throw ValidationError("weighted_gradient_means: gradient norms must be finite and >= 0");
    }
  }
  std::vector<double> num(static_cast<size_t>(joint_count), 0.0);
  std::vector<double> den(static_cast<size_t>(joint_count), 0.0);
  for (size_t i = 0; i < p; ++i) {
    const double* row = &weights[i * joint_count];
    for (int k = 0; k < joint_count; ++k) {
      num[k] += row[k] * point_grad_norms[i];
      den[k] += row[k];
    }
  }
  std::vector<double> g(static_cast<size_t>(joint_count), 0.0);
  for (int k = 0; k < joint_count; ++k) {
    g[k] = den[k] > 0.0 ? num[k] / den[k] : 0.0;
  }
  return g;
}

JointGradientAccumulator::JointGradientAccumulator(int joint_count)
    : joint_count_(joint_count), mean_(static_cast<size_t>(joint_count), 0.0) {
  if (joint_count < 1) throw ValidationError("JointGradientAccumulator: joint_count must be >= 1");
}

void JointGradientAccumulator::add(std::span<const double> point_grad_norms,
                                   std::span<const double> weights) {
  const std::vector<double> g = weighted_gradient_means(point_grad_norms, weights, joint_count_);
  ++count_;
  for (int k = 0; k < joint_count_; ++k) {
    mean_[k] += (g[k] - mean_[k]) / static_cast<double>(count_);
  }
}

JointGradientVector JointGradientAccumulator::current() const {
  return JointGradientVector{mean_, count_};
}

void dump_joint_gradients_csv(const JointGradientVector& g, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("dump_joint_gradients_csv: cannot open " + path.string());
  out.precision(17);
  out << "joint,gradient\n";
  for (size_t k = 0; k < g.g.size(); ++k) {
    out << k << "," << g.g[k] << "\n";
  }
  if (!out) throw IoError("dump_joint_gradients_csv: write failed for " + path.string());
}

}  // namespace skelgrow
