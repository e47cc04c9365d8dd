#pragma once

#include <vector>

#include "skelgrow/geometry.hpp"

namespace skelgrow {

enum class LossMode { correspondence, chamfer };

struct LossEvaluation {
  double value = 0.0;
  Vec3Grid gradient;                    // dL/dpred, frames x P
  std::vector<int> matches;             // chamfer only: matched obs index per (f, p)
  std::vector<double> point_residuals;  // per point, mean over frames of squared residual
};

/// 3D reconstruction loss over a batch of frames.
///
/// correspondence: mean over (frame, point) of |pred - obs|^2, gradient
/// 2 (pred - obs) / (frames * points); requires equal point counts.
///
/// chamfer: one-sided mean nearest-neighbor squared distance pred -> obs;
/// the matching is frozen for the gradient. Observation frames must be
/// nonempty.
LossEvaluation reconstruction_loss(const Vec3Grid& pred, const Vec3Grid& obs, LossMode mode);

}  // namespace skelgrow
