#include "skelgrow/model.hpp"

#include <numeric>

#include "skelgrow/errors.hpp"

namespace skelgrow {

void ModelState::sync_extra_rest_positions() {
  const int base = tree.base_count();
  for (int e = 0; e < book.size(); ++e) {
    const int parent = book.entries[e].parent;
    Vec3 offset = Vec3::Zero();
    if (decoder) offset = decoder->position_offset(e);
    tree.set_rest_position(base + e, tree.rest_position(parent) + offset);
  }
}

std::vector<Transform> ModelState::frame_transforms(int frame) const {
  return transforms_at(frame, pose.timestamps[frame]);
}

std::vector<Transform> ModelState::transforms_at(int base_frame, double t) const {
  if (base_frame < 0 || base_frame >= pose.frame_count()) {
    throw ValidationError("ModelState: frame index out of range");
  }
  std::vector<Rotation> extra(static_cast<size_t>(tree.extra_count()));
  for (int e = 0; e < tree.extra_count(); ++e) {
    if (!decoder) throw ValidationError("ModelState: grown joints present but no decoder");
    extra[e] = decoder->rotation(e, t);
  }
  return forward_kinematics(tree, pose.local_rotation[base_frame],
                            pose.root_translation[base_frame], extra);
}

Vec3Grid ModelState::warp(const std::vector<int>& frames) const {
  const std::vector<double> weights = effective_blend_weights(cloud);
  Vec3Grid out(static_cast<int>(frames.size()), cloud.point_count());
  for (size_t i = 0; i < frames.size(); ++i) {
    const std::vector<Transform> transforms = frame_transforms(frames[i]);
    lbs_warp_with_weights(cloud.position, weights, transforms,
                          std::span<Vec3>(&out.at(static_cast<int>(i), 0), cloud.point_count()));
  }
  return out;
}

Vec3Grid ModelState::warp_all() const {
  std::vector<int> frames(static_cast<size_t>(pose.frame_count()));
  std::iota(frames.begin(), frames.end(), 0);
  return warp(frames);
}

}  // namespace skelgrow
