#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "skelgrow/assignment.hpp"
#include "skelgrow/geometry.hpp"
#include "skelgrow/kinematics.hpp"
#include "skelgrow/mlp.hpp"

namespace skelgrow {

enum class ThresholdMode { absolute, relative };

/// Separation margin for relative-mode selection: the strongest joint left
/// out must fall at least this factor below the weakest joint selected.
inline constexpr double kSelectionSeparationMargin = 0.8;

/// Joints whose accumulated gradient clears the threshold, strongest
/// first (ties broken by ascending joint index). `value` is the absolute
/// cutoff or, in relative mode, the fraction of the maximum. A selection
/// that would contain every joint means nothing stands out and yields an
/// empty result, as does a non-positive maximum or an unseparated prefix
/// in relative mode.
std::vector<int> select_parent_joints(const JointGradientVector& gradients, ThresholdMode mode,
                                      double value);

struct ExtraJointEntry {
  int parent = -1;  // base joint index
};

/// Registry of grown joints. Offsets and per-frame rotations live in the
/// decoder; entry i corresponds to tree joint base_count + i.
struct ExtraJointBook {
  std::vector<ExtraJointEntry> entries;
  long creation_iteration = -1;

  int size() const { return static_cast<int>(entries.size()); }
};

/// Appends one child joint per selected parent: rest position equals the
/// parent's (zero offset), and the cloud gains matching weight columns.
/// Duplicate parents within one call are rejected.
void grow_joints(JointTree& tree, CanonicalCloud& cloud, ExtraJointBook& book,
                 std::span<const int> parent_joints);

enum class DecoderMode { table, mlp };

struct DecoderConfig {
  DecoderMode mode = DecoderMode::table;
  int pe_freqs_index = 6;
  int pe_freqs_time = 6;
  int position_width = 256;
  int position_depth = 4;
  int rotation_width = 128;
  int rotation_depth = 4;
  double last_layer_scale = 1e-2;
};

/// Decodes per-entry canonical offsets and per-frame local rotations for
/// grown joints.
///
/// Table mode stores the values directly (offset per entry, axis-angle per
/// entry and frame; lookups snap to the nearest stored timestamp). MLP mode
/// derives them from positional encodings of the normalized entry index
/// and the timestamp, which makes rotations continuous in t.
///
/// Explicit overrides, when set, bypass the decoder entirely for rotation
/// queries — the animation path.
class JointDecoder {
 public:
  JointDecoder() = default;
  static JointDecoder make(int entry_count, std::vector<double> timestamps,
                           const DecoderConfig& config, std::uint64_t seed);

  DecoderMode mode() const { return config_.mode; }
  const DecoderConfig& config() const { return config_; }
  int entry_count() const { return entry_count_; }
  int frame_count() const { return static_cast<int>(timestamps_.size()); }
  const std::vector<double>& timestamps() const { return timestamps_; }

  Vec3 position_offset(int entry) const;
  Vec3 rotation_axis_angle(int entry, double t) const;
  Rotation rotation(int entry, double t) const { return exp_so3(rotation_axis_angle(entry, t)); }

  /// angles is frames x entries at the given timestamps.
  void set_overrides(Vec3Grid angles, std::vector<double> override_timestamps);
  void clear_overrides() { override_.reset(); }
  bool has_overrides() const { return override_.has_value(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  int param_count() const { return static_cast<int>(params_.size()); }

  /// Exact reverse-mode gradients of the loss w.r.t. every parameter,
  /// given adjoints for each decoded offset and each decoded axis-angle
  /// (frames x entries, at the decoder's own timestamps).
  std::vector<double> gradients(std::span<const Vec3> d_offset,
                                const Vec3Grid& d_axis_angle) const;

  /// Table-mode direct access (serialization, tests).
  void set_table_offset(int entry, const Vec3& offset);
  void set_table_axis_angle(int entry, int frame, const Vec3& axis_angle);
  Vec3 table_axis_angle(int entry, int frame) const;

  int nearest_frame(double t) const;

 private:
  DecoderConfig config_;
  int entry_count_ = 0;
  std::vector<double> timestamps_;
  std::vector<double> params_;
  Mlp position_net_;  // mlp mode only
  Mlp rotation_net_;
  int rotation_params_offset_ = 0;

  struct OverrideTable {
    std::vector<double> timestamps;
    Vec3Grid angles;  // frames x entries
  };
  std::optional<OverrideTable> override_;

  void check_entry(int entry) const;
  std::vector<double> position_input(int entry) const;
  std::vector<double> rotation_input(int entry, double t) const;
  static int nearest_index(const std::vector<double>& ts, double t);
};

}  // namespace skelgrow
