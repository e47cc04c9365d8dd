#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "skelgrow/model.hpp"
#include "skelgrow/synth.hpp"
#include "skelgrow/trainer.hpp"

namespace skelgrow {

using json = nlohmann::json;

/// Writes via a temp file and rename so interrupted runs never leave a
/// half-written artifact.
void atomic_write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

// ---- binary sidecar (bulk float arrays) ------------------------------
// Little-endian layout: magic "SKGF", u32 version, u64 seed, u32 ndim,
// u32 dims[ndim], then the row-major f64 payload.

void write_f64_sidecar(const std::filesystem::path& path, std::uint64_t seed,
                       std::span<const int> dims, std::span<const double> data);

struct SidecarData {
  std::uint64_t seed = 0;
  std::vector<int> dims;
  std::vector<double> data;
};
SidecarData read_f64_sidecar(const std::filesystem::path& path);

// ---- scene spec & scene ----------------------------------------------

json scene_spec_to_json(const SceneSpec& spec);
SceneSpec scene_spec_from_json(const json& j);

/// scene.json plus an observations sidecar next to it (same stem, .f64).
void save_scene(const SyntheticScene& scene, const std::filesystem::path& json_path);
SyntheticScene load_scene(const std::filesystem::path& json_path);

// ---- run configuration -------------------------------------------------

struct RunConfig {
  TrainConfig train;
  std::optional<std::string> scene_path;  // exactly one of scene_path / scene_spec
  std::optional<SceneSpec> scene_spec;
  std::string out_dir = ".";
  bool export_ply = true;
};

/// Strict parse: unknown keys are rejected with the offending field named.
RunConfig run_config_from_json(const json& j);
RunConfig load_run_config(const std::filesystem::path& path);
json run_config_to_json(const RunConfig& config);

// ---- fitted model -------------------------------------------------------

void save_model(const ModelState& model, const std::filesystem::path& path);
ModelState load_model(const std::filesystem::path& path);

// ---- training artifacts -------------------------------------------------

json report_to_json(const TrainReport& report, const RunConfig& config);
void write_loss_csv(const std::vector<TraceRow>& trace, const std::filesystem::path& path);

/// The explicit-animation exchange format: timestamps plus, per grown
/// joint, its parent, canonical position, and the decoded axis-angle for
/// every frame.
struct JointBookFile {
  std::vector<double> timestamps;
  struct Entry {
    int parent = -1;
    Vec3 canonical_position = Vec3::Zero();
    std::vector<Vec3> per_frame_axis_angle;
  };
  std::vector<Entry> entries;
};

JointBookFile decode_joint_book(const ModelState& model);
json joint_book_to_json(const JointBookFile& book);
JointBookFile joint_book_from_json(const json& j);

// ---- animation overrides -------------------------------------------------

struct AnimationOverrides {
  std::vector<double> timestamps;  // empty means "use the model's pose timestamps"
  Vec3Grid angles;                 // frames x entries
  std::optional<int> freeze_base_frame;
};

AnimationOverrides overrides_from_json(const json& j, int expected_entries);

// ---- PLY ------------------------------------------------------------------

/// ASCII PLY with the canonical header and 9-significant-digit coordinates.
void export_ply(std::span<const Vec3> points, const std::filesystem::path& path);
std::vector<Vec3> read_ply(const std::filesystem::path& path);

}  // namespace skelgrow
