#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "skelgrow/errors.hpp"
#include "skelgrow/serialization.hpp"
#include "test_util.hpp"

using namespace skelgrow;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("skelgrow_io_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

SceneSpec io_scene_spec() {
  SceneSpec spec;
  spec.topology = "chain";
  spec.base_joints = 3;
  spec.frames = 12;
  spec.points_per_segment = 6;
  spec.noise_sigma = 1e-3;
  spec.seed = 99;
  AttachmentSpec att;
  att.host = 2;
  att.amplitude = 0.4;
  att.points = 8;
  att.canonical_offset = Vec3(0.05, -0.03, 0.02);
  spec.attachments.push_back(att);
  return spec;
}

}  // namespace

TEST_CASE("f64 sidecar round-trips bit-exactly") {
  TempDir dir;
  std::mt19937_64 rng(61);
  std::vector<double> data(2 * 3 * 3);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (auto& x : data) x = u(rng);
  data[0] = 0.1 + 0.2;  // not exactly representable sums survive anyway
  const int dims[3] = {2, 3, 3};
  write_f64_sidecar(dir.path / "a.f64", 1234, dims, data);
  const SidecarData back = read_f64_sidecar(dir.path / "a.f64");
  CHECK(back.seed == 1234);
  CHECK(back.dims == std::vector<int>{2, 3, 3});
  CHECK(back.data == data);
}

TEST_CASE("sidecar rejects truncation and bad magic") {
  TempDir dir;
  const int dims[1] = {2};
  write_f64_sidecar(dir.path / "b.f64", 7, dims, std::vector<double>{1.0, 2.0});
  std::string bytes = read_text(dir.path / "b.f64");
  atomic_write_text(dir.path / "trunc.f64", bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_f64_sidecar(dir.path / "trunc.f64"), IoError);
  bytes[0] = 'X';
  atomic_write_text(dir.path / "magic.f64", bytes);
  CHECK_THROWS_AS(read_f64_sidecar(dir.path / "magic.f64"), IoError);
}

TEST_CASE("scene save/load/save is byte-identical") {
  TempDir dir;
  fs::create_directories(dir.path / "rt");
  const SyntheticScene scene = generate_scene(io_scene_spec());
  save_scene(scene, dir.path / "scene.json");
  const SyntheticScene loaded = load_scene(dir.path / "scene.json");
  save_scene(loaded, dir.path / "rt/scene.json");
  CHECK(read_text(dir.path / "scene.json") == read_text(dir.path / "rt/scene.json"));
  CHECK(read_text(dir.path / "scene.f64") == read_text(dir.path / "rt/scene.f64"));
  CHECK(loaded.labels == scene.labels);
  CHECK(loaded.observations.data == scene.observations.data);
}

TEST_CASE("scene spec json rejects unknown fields by name") {
  json j = scene_spec_to_json(io_scene_spec());
  j["framez"] = 10;
  CHECK_THROWS_WITH_AS(scene_spec_from_json(j), doctest::Contains("framez"), ValidationError);
}

TEST_CASE("run config: strict keys, exclusivity, defaults") {
  json j;
  j["scene"] = "scene.json";
  const RunConfig config = run_config_from_json(j);
  CHECK(config.train.lambda_mk == 0.4);
  CHECK(config.train.warmup_iters == 8000);
  CHECK(config.train.total_iters == 12000);
  CHECK(config.train.threshold_mode == ThresholdMode::relative);
  CHECK(config.train.threshold_value == 0.5);
  CHECK(config.train.densify.enabled == false);
  CHECK(config.train.densify.eps_d0 == 5e-4);

  json both = j;
  both["scene_spec"] = scene_spec_to_json(io_scene_spec());
  CHECK_THROWS_AS(run_config_from_json(both), ValidationError);

  json unknown = j;
  unknown["warmup_itters"] = 5;
  CHECK_THROWS_WITH_AS(run_config_from_json(unknown), doctest::Contains("warmup_itters"),
                       ValidationError);

  json neither;
  CHECK_THROWS_AS(run_config_from_json(neither), ValidationError);
}

TEST_CASE("PLY: a single origin point gives the canonical 8-line file") {
  TempDir dir;
  const std::vector<Vec3> pts{Vec3(0, 0, 0)};
  export_ply(pts, dir.path / "one.ply");
  const std::string text = read_text(dir.path / "one.ply");
  CHECK(text ==
        "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
        "property float z\nend_header\n0 0 0\n");
  int lines = 0;
  for (const char c : text) {
    if (c == '\n') ++lines;
  }
  CHECK(lines == 8);
}

TEST_CASE("PLY: empty cloud still produces a valid header") {
  TempDir dir;
  export_ply(std::vector<Vec3>{}, dir.path / "zero.ply");
  const std::string text = read_text(dir.path / "zero.ply");
  CHECK(text.find("element vertex 0") != std::string::npos);
  CHECK(read_ply(dir.path / "zero.ply").empty());
}

TEST_CASE("PLY round-trip preserves coordinates to 1e-7") {
  TempDir dir;
  std::mt19937_64 rng(62);
  std::vector<Vec3> pts;
  for (int i = 0; i < 64; ++i) pts.push_back(testutil::random_vec3(rng, 3.0));
  export_ply(pts, dir.path / "c.ply");
  const std::vector<Vec3> back = read_ply(dir.path / "c.ply");
  REQUIRE(back.size() == pts.size());
  for (size_t i = 0; i < pts.size(); ++i) {
    CHECK((pts[i] - back[i]).cwiseAbs().maxCoeff() < 1e-7);
  }
}

TEST_CASE("PLY rejects non-finite coordinates") {
  TempDir dir;
  const std::vector<Vec3> pts{Vec3(std::numeric_limits<double>::infinity(), 0, 0)};
  CHECK_THROWS_AS(export_ply(pts, dir.path / "bad.ply"), ValidationError);
}

TEST_CASE("model save/load reproduces warps bit-exactly") {
  TempDir dir;
  const SyntheticScene scene = generate_scene(io_scene_spec());
  TrainConfig cfg;
  cfg.warmup_iters = 20;
  cfg.total_iters = 60;
  cfg.seed = 11;
  Trainer trainer(cfg, make_fit_inputs(scene));
  trainer.run();
  REQUIRE(trainer.model().tree.extra_count() > 0);

  save_model(trainer.model(), dir.path / "model.json");
  const ModelState loaded = load_model(dir.path / "model.json");
  const Vec3Grid a = trainer.model().warp_all();
  const Vec3Grid b = loaded.warp_all();
  REQUIRE(a.data.size() == b.data.size());
  for (size_t i = 0; i < a.data.size(); ++i) CHECK(a.data[i] == b.data[i]);

  // and the file itself is stable under a load/save cycle
  save_model(loaded, dir.path / "model2.json");
  CHECK(read_text(dir.path / "model.json") == read_text(dir.path / "model2.json"));
}

TEST_CASE("joint book json round-trips bit-identically") {
  TempDir dir;
  const SyntheticScene scene = generate_scene(io_scene_spec());
  TrainConfig cfg;
  cfg.warmup_iters = 20;
  cfg.total_iters = 50;
  cfg.seed = 12;
  Trainer trainer(cfg, make_fit_inputs(scene));
  trainer.run();
  REQUIRE(trainer.model().book.size() > 0);

  const JointBookFile book = decode_joint_book(trainer.model());
  const std::string once = joint_book_to_json(book).dump(2);
  const JointBookFile reloaded = joint_book_from_json(json::parse(once));
  const std::string twice = joint_book_to_json(reloaded).dump(2);
  CHECK(once == twice);
}

TEST_CASE("overrides: entry and frame mismatches are rejected") {
  json j;
  j["entries"] = json::array();
  json entry;
  entry["per_frame_axis_angle"] = json::array({json::array({0.0, 0.0, 0.0})});
  j["entries"].push_back(entry);
  CHECK_THROWS_AS(overrides_from_json(j, 2), ValidationError);

  j["entries"].push_back(entry);
  CHECK_NOTHROW(overrides_from_json(j, 2));

  json mismatched = j;
  mismatched["entries"][1]["per_frame_axis_angle"].push_back(json::array({1.0, 0.0, 0.0}));
  CHECK_THROWS_AS(overrides_from_json(mismatched, 2), ValidationError);

  json with_ts = j;
  with_ts["timestamps"] = json::array({0.0, 0.5});
  CHECK_THROWS_AS(overrides_from_json(with_ts, 2), ValidationError);
}

TEST_CASE("atomic_write_text leaves no temp file behind") {
  TempDir dir;
  atomic_write_text(dir.path / "x.txt", "hello");
  CHECK(read_text(dir.path / "x.txt") == "hello");
  CHECK_FALSE(fs::exists(dir.path / "x.txt.tmp"));
}
