// Exercises the installed CLI binary end to end: exit codes, artifact
// presence, and determinism of report hashes across reruns. The binary
// path arrives as argv[1] from CTest.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include "skelgrow/serialization.hpp"

namespace fs = std::filesystem;

namespace {

int failures = 0;

void expect(bool ok, const std::string& what) {
  if (ok) {
    std::printf("[ ok ] %s\n", what.c_str());
  } else {
    std::printf("[FAIL] %s\n", what.c_str());
    ++failures;
  }
}

int run(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  if (status < 0) return -1;
  return WEXITSTATUS(status);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: cli_smoke <path-to-skelgrow>\n");
    return 2;
  }
  const std::string cli = argv[1];
  const fs::path dir = fs::temp_directory_path() /
                       ("skelgrow_cli_" + std::to_string(std::random_device{}()));
  fs::create_directories(dir);
  const std::string quiet = " > /dev/null 2>&1";

  expect(run(cli + " --help" + quiet) == 0, "--help exits 0");
  expect(run(cli + " bogus" + quiet) == 2, "unknown subcommand exits 2");

  {
    skelgrow::SceneSpec spec;
    spec.topology = "humanoid8";
    spec.frames = 14;
    spec.points_per_segment = 8;
    spec.noise_sigma = 0.0;
    spec.seed = 5;
    skelgrow::AttachmentSpec att;
    att.host = 5;
    att.amplitude = 0.5;
    att.points = 16;
    spec.attachments.push_back(att);
    skelgrow::atomic_write_text(dir / "spec.json",
                                skelgrow::scene_spec_to_json(spec).dump(2));
    auto bad = skelgrow::scene_spec_to_json(spec);
    bad["frames"] = 1;
    skelgrow::atomic_write_text(dir / "bad_spec.json", bad.dump(2));
  }

  expect(run(cli + " generate --config " + (dir / "spec.json").string() + " --out " +
             (dir / "scene").string() + quiet) == 0,
         "generate exits 0");
  expect(fs::exists(dir / "scene/scene.json") && fs::exists(dir / "scene/scene.f64"),
         "generate writes scene.json and the sidecar");

  const int bad_code = run(cli + " generate --config " + (dir / "bad_spec.json").string() +
                           " --out " + (dir / "scene_bad").string() + " 2> " +
                           (dir / "stderr.txt").string());
  expect(bad_code == 2, "invalid spec exits 2");
  expect(skelgrow::read_text(dir / "stderr.txt").find("frames") != std::string::npos,
         "validation message names the field");

  {
    skelgrow::json run_cfg;
    run_cfg["scene"] = (dir / "scene/scene.json").string();
    run_cfg["warmup_iters"] = 150;
    run_cfg["total_iters"] = 700;
    run_cfg["seed"] = 3;
    run_cfg["export_ply"] = false;
    skelgrow::atomic_write_text(dir / "run.json", run_cfg.dump(2));
  }
  expect(run(cli + " train --config " + (dir / "run.json").string() + " --out " +
             (dir / "out1").string() + quiet) == 0,
         "train exits 0");
  expect(run(cli + " train --config " + (dir / "run.json").string() + " --out " +
             (dir / "out2").string() + quiet) == 0,
         "second train exits 0");
  expect(skelgrow::read_text(dir / "out1/report.json") ==
             skelgrow::read_text(dir / "out2/report.json"),
         "identical config and seed give identical report.json bytes");

  expect(run(cli + " animate --model " + (dir / "out1/model.json").string() +
             " --overrides " + (dir / "out1/joint_book.json").string() + " --out " +
             (dir / "anim").string() + quiet) == 0,
         "animate exits 0 with the dumped joint book as overrides");
  expect(fs::exists(dir / "anim/anim_0000.ply"), "animate writes PLY frames");

  expect(run(cli + " eval --model " + (dir / "out1/model.json").string() + " --scene " +
             (dir / "scene/scene.json").string() + " --out " + (dir / "eval.json").string() +
             quiet) == 0,
         "eval exits 0");

  expect(run(cli + " animate --model " + (dir / "missing.json").string() + " --overrides " +
             (dir / "out1/joint_book.json").string() + " --out " + (dir / "anim2").string() +
             quiet) == 4,
         "missing model file exits 4");

  fs::remove_all(dir);
  if (failures == 0) {
    std::printf("cli smoke: all checks passed\n");
    return 0;
  }
  std::printf("cli smoke: %d failure(s)\n", failures);
  return 1;
}
