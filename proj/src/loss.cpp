#include "skelgrow/loss.hpp"

#include <cmath>
#include <limits>

#include "skelgrow/errors.hpp"
#include "skelgrow/threading.hpp"

namespace skelgrow {

LossEvaluation reconstruction_loss(const Vec3Grid& pred, const Vec3Grid& obs, LossMode mode) {
  const int frames = pred.frames;
  const int p = pred.count;
  if (frames == 0 || p == 0) throw ValidationError("reconstruction_loss: empty prediction");
  if (obs.frames != frames) throw ValidationError("reconstruction_loss: frame counts disagree");
  if (mode == LossMode::correspondence && obs.count != p) {
    throw ValidationError("reconstruction_loss: correspondence mode requires equal point counts");
  }
  if (obs.count == 0) throw ValidationError("reconstruction_loss: empty observation frame");

  LossEvaluation out;
  out.gradient = Vec3Grid(frames, p);
  out.point_residuals.assign(static_cast<size_t>(p), 0.0);
  const double scale = 1.0 / (static_cast<double>(frames) * p);

  if (mode == LossMode::correspondence) {
    std::vector<double> frame_loss(static_cast<size_t>(frames), 0.0);
    std::vector<double> residual(static_cast<size_t>(frames) * p, 0.0);
    parallel_for(frames, [&](int begin, int end) {
      for (int f = begin; f < end; ++f) {
        double acc = 0.0;
        for (int i = 0; i < p; ++i) {
          const Vec3 r = pred.at(f, i) - obs.at(f, i);
          acc += r.squaredNorm();
          residual[static_cast<size_t>(f) * p + i] = r.squaredNorm();
          out.gradient.at(f, i) = 2.0 * scale * r;
        }
        frame_loss[f] = acc;
      }
    });
    double total = 0.0;
    for (int f = 0; f < frames; ++f) total += frame_loss[f];
    out.value = total * scale;
    for (int i = 0; i < p; ++i) {
      double acc = 0.0;
      for (int f = 0; f < frames; ++f) acc += residual[static_cast<size_t>(f) * p + i];
      out.point_residuals[i] = acc / frames;
    }
    return out;
  }

  // chamfer: brute-force nearest neighbor, adequate at desk scale
  out.matches.assign(static_cast<size_t>(frames) * p, -1);
  std::vector<double> frame_loss(static_cast<size_t>(frames), 0.0);
  std::vector<double> residual(static_cast<size_t>(frames) * p, 0.0);
  parallel_for(frames, [&](int begin, int end) {
    for (int f = begin; f < end; ++f) {
      double acc = 0.0;
      for (int i = 0; i < p; ++i) {
        double best = std::numeric_limits<double>::infinity();
        int best_j = -1;
        for (int j = 0; j < obs.count; ++j) {
          const double d2 = (pred.at(f, i) - obs.at(f, j)).squaredNorm();
          if (d2 < best) {
            best = d2;
            best_j = j;
          }
        }
        out.matches[static_cast<size_t>(f) * p + i] = best_j;
        residual[static_cast<size_t>(f) * p + i] = best;
        acc += best;
        out.gradient.at(f, i) = 2.0 * scale * (pred.at(f, i) - obs.at(f, best_j));
      }
      frame_loss[f] = acc;
    }
  });
  double total = 0.0;
  for (int f = 0; f < frames; ++f) total += frame_loss[f];
  out.value = total * scale;
  for (int i = 0; i < p; ++i) {
    double acc = 0.0;
    for (int f = 0; f < frames; ++f) acc += residual[static_cast<size_t>(f) * p + i];
    out.point_residuals[i] = acc / frames;
  }
  return out;
}

}  // namespace skelgrow
