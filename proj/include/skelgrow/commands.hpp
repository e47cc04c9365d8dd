#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "skelgrow/serialization.hpp"

namespace skelgrow {

/// CLI command bodies. They throw ValidationError / NumericError / IoError;
/// the executable maps those to exit codes 2 / 3 / 4.

/// Generates a scene from a spec file and writes scene.json + scene.f64.
void cmd_generate(const std::filesystem::path& spec_path, const std::filesystem::path& out_dir,
                  std::optional<std::uint64_t> seed_override);

struct TrainArtifacts {
  TrainReport report;
  std::filesystem::path report_path;
  std::filesystem::path model_path;
};

/// Runs the full fit and writes report.json, loss.csv, joint_book.json,
/// model.json, joint_gradients.csv, and per-frame PLY exports.
TrainArtifacts cmd_train(const std::filesystem::path& config_path,
                         std::optional<std::filesystem::path> out_override,
                         std::optional<std::uint64_t> seed_override);

/// Replays a trained model with explicit grown-joint rotations in place of
/// the decoder, optionally freezing the base pose at one frame, and writes
/// one PLY per override frame.
void cmd_animate(const std::filesystem::path& model_path,
                 const std::filesystem::path& overrides_path,
                 const std::filesystem::path& out_dir);

/// Reconstruction errors of a trained model against a scene.
void cmd_eval(const std::filesystem::path& model_path, const std::filesystem::path& scene_path,
              const std::filesystem::path& out_path);

}  // namespace skelgrow
