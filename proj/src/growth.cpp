#include "skelgrow/growth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "skelgrow/errors.hpp"

namespace skelgrow {

std::vector<int> select_parent_joints(const JointGradientVector& gradients, ThresholdMode mode,
                                      double value) {
  const int k = static_cast<int>(gradients.g.size());
  for (const double g : gradients.g) {
    if (!std::isfinite(g)) throw ValidationError("select_parent_joints: non-finite gradient");
  }
  if (mode == ThresholdMode::absolute) {
    if (value <= 0.0) throw ValidationError("select_parent_joints: threshold must be positive");
  } else {
    if (value <= 0.0 || value > 1.0) {
      throw ValidationError("select_parent_joints: relative threshold must lie in (0, 1]");
    }
  }

  std::vector<int> order(static_cast<size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (gradients.g[a] != gradients.g[b]) return gradients.g[a] > gradients.g[b];
    return a < b;
  });

  double threshold = value;
  if (mode == ThresholdMode::relative) {
    const double top = k > 0 ? gradients.g[order.front()] : 0.0;
    if (top <= 0.0) return {};
    threshold = value * top;
  }

  std::vector<int> selected;
  for (const int j : order) {
    if (gradients.g[j] < threshold) break;
    selected.push_back(j);
  }
  // Growth targets must be a strict subset of the joints; when every joint
  // clears the threshold nothing stands out.
  if (static_cast<int>(selected.size()) == k) return {};
  // Relative mode additionally demands separation: the strongest excluded
  // joint must sit clearly below the weakest selected one, otherwise the
  // values form a continuum rather than an outlier set and nothing stands
  // out.
  if (mode == ThresholdMode::relative && !selected.empty()) {
    const double weakest_selected = gradients.g[selected.back()];
    const double strongest_excluded = gradients.g[order[selected.size()]];
    if (strongest_excluded > kSelectionSeparationMargin * weakest_selected) return {};
  }
  return selected;
}

void grow_joints(JointTree& tree, CanonicalCloud& cloud, ExtraJointBook& book,
                 std::span<const int> parent_joints) {
  if (parent_joints.empty()) return;
  if (cloud.joint_count != tree.joint_count()) {
    throw ValidationError("grow_joints: cloud and tree joint counts disagree");
  }
  std::set<int> seen;
  for (const int j : parent_joints) {
    if (j < 0 || j >= tree.base_count()) {
      throw ValidationError("grow_joints: parent must be a base joint");
    }
    if (!seen.insert(j).second) {
      throw ValidationError("grow_joints: duplicate parent in one growth call");
    }
  }
  for (const int j : parent_joints) {
    tree.append_extra_joint(j, tree.rest_position(j));
    book.entries.push_back(ExtraJointEntry{j});
  }
  cloud.append_joint_columns(static_cast<int>(parent_joints.size()));
}

JointDecoder JointDecoder::make(int entry_count, std::vector<double> timestamps,
                                const DecoderConfig& config, std::uint64_t seed) {
  if (entry_count < 0) throw ValidationError("JointDecoder: negative entry count");
  if (timestamps.empty()) throw ValidationError("JointDecoder: timestamps required");
  for (size_t f = 1; f < timestamps.size(); ++f) {
    if (timestamps[f] <= timestamps[f - 1]) {
      throw ValidationError("JointDecoder: timestamps must be strictly increasing");
    }
  }
  JointDecoder d;
  d.config_ = config;
  d.entry_count_ = entry_count;
  d.timestamps_ = std::move(timestamps);
  const int frames = d.frame_count();
  if (config.mode == DecoderMode::table) {
    d.params_.assign(static_cast<size_t>(entry_count) * 3 +
                         static_cast<size_t>(entry_count) * frames * 3,
                     0.0);
  } else {
    d.position_net_ = Mlp(2 * config.pe_freqs_index, 3, config.position_width,
                          config.position_depth);
    d.rotation_net_ = Mlp(2 * config.pe_freqs_index + 2 * config.pe_freqs_time, 3,
                          config.rotation_width, config.rotation_depth);
    d.rotation_params_offset_ = d.position_net_.param_count();
    d.params_.assign(static_cast<size_t>(d.position_net_.param_count()) +
                         d.rotation_net_.param_count(),
                     0.0);
    std::mt19937_64 rng(seed);
    d.position_net_.init_params(
        std::span<double>(d.params_.data(), d.position_net_.param_count()), rng,
        config.last_layer_scale);
    d.rotation_net_.init_params(
        std::span<double>(d.params_.data() + d.rotation_params_offset_,
                          d.rotation_net_.param_count()),
        rng, config.last_layer_scale);
  }
  return d;
}

void JointDecoder::check_entry(int entry) const {
  if (entry < 0 || entry >= entry_count_) {
    throw ValidationError("JointDecoder: entry index out of range");
  }
}

int JointDecoder::nearest_index(const std::vector<double>& ts, double t) {
  const auto it = std::lower_bound(ts.begin(), ts.end(), t);
  if (it == ts.begin()) return 0;
  if (it == ts.end()) return static_cast<int>(ts.size()) - 1;
  const int hi = static_cast<int>(it - ts.begin());
  const int lo = hi - 1;
  // ties snap to the earlier frame
  return (t - ts[lo] <= ts[hi] - t) ? lo : hi;
}

int JointDecoder::nearest_frame(double t) const { return nearest_index(timestamps_, t); }

std::vector<double> JointDecoder::position_input(int entry) const {
  const double x = entry_count_ > 0 ? static_cast<double>(entry) / entry_count_ : 0.0;
  return positional_encoding(x, config_.pe_freqs_index);
}

std::vector<double> JointDecoder::rotation_input(int entry, double t) const {
  const double x = entry_count_ > 0 ? static_cast<double>(entry) / entry_count_ : 0.0;
  std::vector<double> in(static_cast<size_t>(2 * config_.pe_freqs_index +
                                             2 * config_.pe_freqs_time));
  positional_encoding(x, config_.pe_freqs_index,
                      std::span<double>(in.data(), 2 * config_.pe_freqs_index));
  positional_encoding(t, config_.pe_freqs_time,
                      std::span<double>(in.data() + 2 * config_.pe_freqs_index,
                                        2 * config_.pe_freqs_time));
  return in;
}

Vec3 JointDecoder::position_offset(int entry) const {
  check_entry(entry);
  if (config_.mode == DecoderMode::table) {
    const size_t o = static_cast<size_t>(entry) * 3;
    return Vec3(params_[o], params_[o + 1], params_[o + 2]);
  }
  const std::vector<double> in = position_input(entry);
  Vec3 out;
  position_net_.forward(std::span<const double>(params_.data(), position_net_.param_count()),
                        in, std::span<double>(out.data(), 3));
  return out;
}

Vec3 JointDecoder::rotation_axis_angle(int entry, double t) const {
  check_entry(entry);
  if (override_) {
    const int f = nearest_index(override_->timestamps, t);
    return override_->angles.at(f, entry);
  }
  if (config_.mode == DecoderMode::table) {
    return table_axis_angle(entry, nearest_frame(t));
  }
  const std::vector<double> in = rotation_input(entry, t);
  Vec3 out;
  rotation_net_.forward(
      std::span<const double>(params_.data() + rotation_params_offset_,
                              rotation_net_.param_count()),
      in, std::span<double>(out.data(), 3));
  return out;
}

void JointDecoder::set_overrides(Vec3Grid angles, std::vector<double> override_timestamps) {
  if (angles.count != entry_count_) {
    throw ValidationError("JointDecoder: override entry count mismatch");
  }
  if (angles.frames != static_cast<int>(override_timestamps.size()) || angles.frames == 0) {
    throw ValidationError("JointDecoder: override frame count mismatch");
  }
  for (size_t f = 1; f < override_timestamps.size(); ++f) {
    if (override_timestamps[f] <= override_timestamps[f - 1]) {
      throw ValidationError("JointDecoder: override timestamps must be strictly increasing");
    }
  }
  override_ = OverrideTable{std::move(override_timestamps), std::move(angles)};
}

std::vector<double> JointDecoder::gradients(std::span<const Vec3> d_offset,
                                            const Vec3Grid& d_axis_angle) const {
  if (static_cast<int>(d_offset.size()) != entry_count_ ||
      d_axis_angle.count != entry_count_ || d_axis_angle.frames != frame_count()) {
    throw ValidationError("JointDecoder::gradients: adjoint shape mismatch");
  }
  std::vector<double> grads(params_.size(), 0.0);
  if (config_.mode == DecoderMode::table) {
    const int frames = frame_count();
    for (int e = 0; e < entry_count_; ++e) {
      for (int c = 0; c < 3; ++c) grads[static_cast<size_t>(e) * 3 + c] = d_offset[e][c];
      for (int f = 0; f < frames; ++f) {
        const size_t o = static_cast<size_t>(entry_count_) * 3 +
                         (static_cast<size_t>(e) * frames + f) * 3;
        for (int c = 0; c < 3; ++c) grads[o + c] = d_axis_angle.at(f, e)[c];
      }
    }
    return grads;
  }

  const std::span<const double> pos_params(params_.data(), position_net_.param_count());
  const std::span<const double> rot_params(params_.data() + rotation_params_offset_,
                                           rotation_net_.param_count());
  std::span<double> pos_grads(grads.data(), position_net_.param_count());
  std::span<double> rot_grads(grads.data() + rotation_params_offset_,
                              rotation_net_.param_count());
  Mlp::Trace trace;
  Vec3 out;
  for (int e = 0; e < entry_count_; ++e) {
    const std::vector<double> in = position_input(e);
    position_net_.forward(pos_params, in, std::span<double>(out.data(), 3), trace);
    position_net_.backward(pos_params, trace, std::span<const double>(d_offset[e].data(), 3),
                           pos_grads);
    for (int f = 0; f < frame_count(); ++f) {
      const Vec3& adj = d_axis_angle.at(f, e);
      if (adj.isZero()) continue;
      const std::vector<double> rin = rotation_input(e, timestamps_[f]);
      rotation_net_.forward(rot_params, rin, std::span<double>(out.data(), 3), trace);
      rotation_net_.backward(rot_params, trace, std::span<const double>(adj.data(), 3),
                             rot_grads);
    }
  }
  return grads;
}

void JointDecoder::set_table_offset(int entry, const Vec3& offset) {
  check_entry(entry);
  if (config_.mode != DecoderMode::table) {
    throw ValidationError("JointDecoder: offset storage is table-mode only");
  }
  const size_t o = static_cast<size_t>(entry) * 3;
  for (int c = 0; c < 3; ++c) params_[o + c] = offset[c];
}

void JointDecoder::set_table_axis_angle(int entry, int frame, const Vec3& axis_angle) {
  check_entry(entry);
  if (config_.mode != DecoderMode::table) {
    throw ValidationError("JointDecoder: axis-angle storage is table-mode only");
  }
  if (frame < 0 || frame >= frame_count()) {
    throw ValidationError("JointDecoder: frame index out of range");
  }
  const size_t o = static_cast<size_t>(entry_count_) * 3 +
                   (static_cast<size_t>(entry) * frame_count() + frame) * 3;
  for (int c = 0; c < 3; ++c) params_[o + c] = axis_angle[c];
}

Vec3 JointDecoder::table_axis_angle(int entry, int frame) const {
  check_entry(entry);
  if (config_.mode != DecoderMode::table) {
    throw ValidationError("JointDecoder: axis-angle storage is table-mode only");
  }
  if (frame < 0 || frame >= frame_count()) {
    throw ValidationError("JointDecoder: frame index out of range");
  }
  const size_t o = static_cast<size_t>(entry_count_) * 3 +
                   (static_cast<size_t>(entry) * frame_count() + frame) * 3;
  return Vec3(params_[o], params_[o + 1], params_[o + 2]);
}

}  // namespace skelgrow
