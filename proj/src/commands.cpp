#include "skelgrow/commands.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "skelgrow/errors.hpp"

namespace skelgrow {

namespace fs = std::filesystem;

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string frame_file_name(const char* stem, int index) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%04d.ply", stem, index);
  return buf;
}

}  // namespace

void cmd_generate(const fs::path& spec_path, const fs::path& out_dir,
                  std::optional<std::uint64_t> seed_override) {
  json j;
  try {
    j = json::parse(read_text(spec_path));
  } catch (const json::parse_error& e) {
    throw IoError("spec parse error in " + spec_path.string() + ": " + e.what());
  }
  SceneSpec spec = scene_spec_from_json(j);
  if (seed_override) spec.seed = *seed_override;
  const SyntheticScene scene = generate_scene(spec);
  ensure_dir(out_dir);
  save_scene(scene, out_dir / "scene.json");

  std::printf("scene: %d base joints, %d points, %d frames, %zu attachment(s)\n",
              scene.base_count(), scene.point_count(), scene.frame_count(),
              spec.attachments.size());
  std::printf("wrote %s\n", (out_dir / "scene.json").string().c_str());
}

TrainArtifacts cmd_train(const fs::path& config_path, std::optional<fs::path> out_override,
                         std::optional<std::uint64_t> seed_override) {
  RunConfig config = load_run_config(config_path);
  if (out_override) config.out_dir = out_override->string();
  if (seed_override) config.train.seed = *seed_override;

  SyntheticScene scene;
  if (config.scene_path) {
    fs::path scene_path(*config.scene_path);
    if (scene_path.is_relative()) scene_path = config_path.parent_path() / scene_path;
    scene = load_scene(scene_path);
  } else {
    scene = generate_scene(*config.scene_spec);
  }

  Trainer trainer(config.train, make_fit_inputs(scene));
  const TrainReport report = trainer.run();

  const fs::path out_dir(config.out_dir);
  ensure_dir(out_dir);
  TrainArtifacts artifacts;
  artifacts.report = report;
  artifacts.report_path = out_dir / "report.json";
  artifacts.model_path = out_dir / "model.json";

  atomic_write_text(artifacts.report_path, report_to_json(report, config).dump(2) + "\n");
  write_loss_csv(report.trace, out_dir / "loss.csv");
  save_model(trainer.model(), artifacts.model_path);
  atomic_write_text(out_dir / "joint_book.json",
                    joint_book_to_json(decode_joint_book(trainer.model())).dump(2) + "\n");
  JointGradientVector g;
  g.g = report.joint_gradients;
  g.accumulation_count = 1;
  dump_joint_gradients_csv(g, out_dir / "joint_gradients.csv");

  if (config.export_ply) {
    const fs::path ply_dir = out_dir / "ply";
    ensure_dir(ply_dir);
    const Vec3Grid warped = trainer.model().warp_all();
    for (int f = 0; f < warped.frames; ++f) {
      export_ply(std::span<const Vec3>(&warped.at(f, 0), warped.count),
                 ply_dir / frame_file_name("frame", f));
    }
  }

  std::printf("train: final loss %.6g, held-out %.6g, grown joints [", report.final_loss,
              report.heldout_mse);
  for (size_t i = 0; i < report.grown.size(); ++i) {
    std::printf("%s%d", i ? ", " : "", report.grown[i]);
  }
  std::printf("]\nwrote %s\n", artifacts.report_path.string().c_str());
  return artifacts;
}

void cmd_animate(const fs::path& model_path, const fs::path& overrides_path,
                 const fs::path& out_dir) {
  ModelState model = load_model(model_path);
  if (!model.decoder || model.book.size() == 0) {
    throw ValidationError("animate: model has no grown joints to animate");
  }
  json j;
  try {
    j = json::parse(read_text(overrides_path));
  } catch (const json::parse_error& e) {
    throw IoError("overrides parse error in " + overrides_path.string() + ": " + e.what());
  }
  AnimationOverrides overrides = overrides_from_json(j, model.book.size());

  const int n = model.pose.frame_count();
  const int frames = overrides.angles.frames;
  if (overrides.timestamps.empty()) {
    if (frames != n) {
      throw ValidationError(
          "animate: overrides without timestamps must cover every pose frame");
    }
    overrides.timestamps = model.pose.timestamps;
  }
  if (!overrides.freeze_base_frame && frames != n) {
    throw ValidationError("animate: override frame count differs from the pose; "
                          "set freeze_base_frame to animate extras alone");
  }
  if (overrides.freeze_base_frame &&
      (*overrides.freeze_base_frame < 0 || *overrides.freeze_base_frame >= n)) {
    throw ValidationError("animate: freeze_base_frame out of range");
  }

  model.decoder->set_overrides(overrides.angles, overrides.timestamps);
  ensure_dir(out_dir);
  const std::vector<double> weights = effective_blend_weights(model.cloud);
  std::vector<Vec3> out(static_cast<size_t>(model.cloud.point_count()));
  for (int f = 0; f < frames; ++f) {
    const int base_frame = overrides.freeze_base_frame ? *overrides.freeze_base_frame : f;
    const std::vector<Transform> transforms =
        model.transforms_at(base_frame, overrides.timestamps[f]);
    lbs_warp_with_weights(model.cloud.position, weights, transforms, out);
    export_ply(out, out_dir / frame_file_name("anim", f));
  }
  std::printf("animate: wrote %d frame(s) to %s\n", frames, out_dir.string().c_str());
}

void cmd_eval(const fs::path& model_path, const fs::path& scene_path, const fs::path& out_path) {
  const ModelState model = load_model(model_path);
  const SyntheticScene scene = load_scene(scene_path);
  if (scene.point_count() != model.cloud.point_count()) {
    throw ValidationError("eval: scene and model point counts differ");
  }
  if (scene.frame_count() != model.pose.frame_count()) {
    throw ValidationError("eval: scene and model frame counts differ");
  }
  const Vec3Grid pred = model.warp_all();
  const int n = scene.frame_count();
  const int p = scene.point_count();

  json per_frame = json::array();
  double full = 0.0;
  double held = 0.0;
  int held_frames = 0;
  for (int f = 0; f < n; ++f) {
    double acc = 0.0;
    for (int i = 0; i < p; ++i) {
      acc += (pred.at(f, i) - scene.observations.at(f, i)).squaredNorm();
    }
    acc /= p;
    per_frame.push_back(acc);
    full += acc;
    if (!scene.heldout.empty() && scene.heldout[f]) {
      held += acc;
      ++held_frames;
    }
  }
  full /= n;

  json j;
  j["format"] = "skelgrow-eval";
  j["full_mse"] = full;
  j["heldout_mse"] = held_frames > 0 ? json(held / held_frames) : json(nullptr);
  j["per_frame_mse"] = std::move(per_frame);
  j["frames"] = n;
  j["points"] = p;
  atomic_write_text(out_path, j.dump(2) + "\n");
  std::printf("eval: full mse %.6g over %d frames\n", full, n);
}

}  // namespace skelgrow
