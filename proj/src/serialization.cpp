#include "skelgrow/serialization.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "skelgrow/errors.hpp"

namespace skelgrow {

namespace fs = std::filesystem;

void atomic_write_text(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("rename failed for " + path.string() + ": " + ec.message());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return content;
}

// ---- binary sidecar -------------------------------------------------------

namespace {

constexpr char kSidecarMagic[4] = {'S', 'K', 'G', 'F'};

void append_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t read_u32(const std::string& buf, size_t& pos) {
  if (pos + 4 > buf.size()) throw IoError("sidecar truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

std::uint64_t read_u64(const std::string& buf, size_t& pos) {
  if (pos + 8 > buf.size()) throw IoError("sidecar truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
  pos += 8;
  return v;
}

}  // namespace

void write_f64_sidecar(const fs::path& path, std::uint64_t seed, std::span<const int> dims,
                       std::span<const double> data) {
  size_t expect = 1;
  for (const int d : dims) {
    if (d < 0) throw ValidationError("sidecar: negative dimension");
    expect *= static_cast<size_t>(d);
  }
  if (expect != data.size()) throw ValidationError("sidecar: dims do not match payload size");

  std::string buf;
  buf.reserve(24 + dims.size() * 4 + data.size() * 8);
  buf.append(kSidecarMagic, 4);
  append_u32(buf, 1);  // version
  append_u64(buf, seed);
  append_u32(buf, static_cast<std::uint32_t>(dims.size()));
  for (const int d : dims) append_u32(buf, static_cast<std::uint32_t>(d));
  for (const double x : data) append_u64(buf, std::bit_cast<std::uint64_t>(x));
  atomic_write_text(path, buf);
}

SidecarData read_f64_sidecar(const fs::path& path) {
  const std::string buf = read_text(path);
  if (buf.size() < 4 || std::memcmp(buf.data(), kSidecarMagic, 4) != 0) {
    throw IoError("sidecar: bad magic in " + path.string());
  }
  size_t pos = 4;
  const std::uint32_t version = read_u32(buf, pos);
  if (version != 1) throw IoError("sidecar: unsupported version");
  SidecarData out;
  out.seed = read_u64(buf, pos);
  const std::uint32_t ndim = read_u32(buf, pos);
  size_t total = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    const int d = static_cast<int>(read_u32(buf, pos));
    out.dims.push_back(d);
    total *= static_cast<size_t>(d);
  }
  out.data.resize(total);
  for (size_t i = 0; i < total; ++i) out.data[i] = std::bit_cast<double>(read_u64(buf, pos));
  if (pos != buf.size()) throw IoError("sidecar: trailing bytes in " + path.string());
  return out;
}

// ---- json helpers -----------------------------------------------------------

namespace {

void check_keys(const json& j, std::initializer_list<const char*> known,
                const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool found = false;
    for (const char* k : known) {
      if (key == k) {
        found = true;
        break;
      }
    }
    if (!found) throw ValidationError(where + ": unknown field '" + key + "'");
  }
}

json vec3_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ValidationError(where + ": expected [x, y, z]");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json vec3_list_to_json(std::span<const Vec3> v) {
  json arr = json::array();
  for (const Vec3& x : v) arr.push_back(vec3_to_json(x));
  return arr;
}

std::vector<Vec3> vec3_list_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw ValidationError(where + ": expected an array");
  std::vector<Vec3> out;
  out.reserve(j.size());
  for (const json& x : j) out.push_back(vec3_from_json(x, where));
  return out;
}

json pose_to_json(const PoseSequence& pose) {
  json j;
  j["timestamps"] = pose.timestamps;
  j["root_translation"] = vec3_list_to_json(pose.root_translation);
  json rotations = json::array();
  for (const auto& frame : pose.local_rotation) {
    json fr = json::array();
    for (const Rotation& r : frame) {
      const Eigen::Quaterniond& q = r.quaternion();
      fr.push_back(json::array({q.w(), q.x(), q.y(), q.z()}));
    }
    rotations.push_back(std::move(fr));
  }
  j["local_rotation_wxyz"] = std::move(rotations);
  return j;
}

PoseSequence pose_from_json(const json& j) {
  check_keys(j, {"timestamps", "root_translation", "local_rotation_wxyz"}, "pose");
  PoseSequence pose;
  pose.timestamps = j.at("timestamps").get<std::vector<double>>();
  pose.root_translation = vec3_list_from_json(j.at("root_translation"), "pose.root_translation");
  for (const json& fr : j.at("local_rotation_wxyz")) {
    std::vector<Rotation> frame;
    for (const json& q : fr) {
      if (!q.is_array() || q.size() != 4) {
        throw ValidationError("pose.local_rotation_wxyz: expected [w, x, y, z]");
      }
      frame.push_back(Rotation::from_unit_quaternion(q[0].get<double>(), q[1].get<double>(),
                                                     q[2].get<double>(), q[3].get<double>()));
    }
    pose.local_rotation.push_back(std::move(frame));
  }
  return pose;
}

json tree_to_json(const JointTree& tree) {
  json j;
  j["base_count"] = tree.base_count();
  j["parents"] = tree.parents();
  j["rest_positions"] = vec3_list_to_json(tree.rest_positions());
  return j;
}

JointTree tree_from_json(const json& j) {
  check_keys(j, {"base_count", "parents", "rest_positions"}, "tree");
  return JointTree(j.at("parents").get<std::vector<int>>(),
                   vec3_list_from_json(j.at("rest_positions"), "tree.rest_positions"),
                   j.at("base_count").get<int>());
}

Vec3Grid grid_from_flat(const std::vector<double>& flat, int frames, int count,
                        const std::string& where) {
  if (flat.size() != static_cast<size_t>(frames) * count * 3) {
    throw ValidationError(where + ": flat array size mismatch");
  }
  Vec3Grid grid(frames, count);
  for (size_t i = 0; i < grid.data.size(); ++i) {
    grid.data[i] = Vec3(flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]);
  }
  return grid;
}

std::vector<double> grid_to_flat(const Vec3Grid& grid) {
  std::vector<double> flat(grid.data.size() * 3);
  for (size_t i = 0; i < grid.data.size(); ++i) {
    flat[3 * i] = grid.data[i].x();
    flat[3 * i + 1] = grid.data[i].y();
    flat[3 * i + 2] = grid.data[i].z();
  }
  return flat;
}

}  // namespace

// ---- scene spec -------------------------------------------------------------

json scene_spec_to_json(const SceneSpec& spec) {
  json j;
  j["topology"] = spec.topology;
  j["base_joints"] = spec.base_joints;
  j["frames"] = spec.frames;
  j["points_per_segment"] = spec.points_per_segment;
  j["body_amplitude"] = spec.body_amplitude;
  j["noise_sigma"] = spec.noise_sigma;
  j["seed"] = spec.seed;
  json atts = json::array();
  for (const AttachmentSpec& a : spec.attachments) {
    json aj;
    aj["kind"] = a.kind == AttachmentKind::rigid_object ? "rigid_object" : "loose_cloth";
    aj["host"] = a.host;
    aj["amplitude"] = a.amplitude;
    aj["points"] = a.points;
    aj["size"] = a.size;
    if (a.canonical_offset) aj["canonical_offset"] = vec3_to_json(*a.canonical_offset);
    atts.push_back(std::move(aj));
  }
  j["attachments"] = std::move(atts);
  return j;
}

SceneSpec scene_spec_from_json(const json& j) {
  check_keys(j,
             {"topology", "base_joints", "frames", "points_per_segment", "body_amplitude",
              "noise_sigma", "seed", "attachments"},
             "scene spec");
  SceneSpec spec;
  if (j.contains("topology")) spec.topology = j.at("topology").get<std::string>();
  if (j.contains("base_joints")) spec.base_joints = j.at("base_joints").get<int>();
  if (j.contains("frames")) spec.frames = j.at("frames").get<int>();
  if (j.contains("points_per_segment")) {
    spec.points_per_segment = j.at("points_per_segment").get<int>();
  }
  if (j.contains("body_amplitude")) spec.body_amplitude = j.at("body_amplitude").get<double>();
  if (j.contains("noise_sigma")) spec.noise_sigma = j.at("noise_sigma").get<double>();
  if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("attachments")) {
    for (const json& aj : j.at("attachments")) {
      check_keys(aj, {"kind", "host", "amplitude", "points", "size", "canonical_offset"},
                 "attachment");
      AttachmentSpec a;
      if (aj.contains("kind")) {
        const std::string kind = aj.at("kind").get<std::string>();
        if (kind == "rigid_object") {
          a.kind = AttachmentKind::rigid_object;
        } else if (kind == "loose_cloth") {
          a.kind = AttachmentKind::loose_cloth;
        } else {
          throw ValidationError("attachment: unknown kind '" + kind + "'");
        }
      }
      if (aj.contains("host")) a.host = aj.at("host").get<int>();
      if (aj.contains("amplitude")) a.amplitude = aj.at("amplitude").get<double>();
      if (aj.contains("points")) a.points = aj.at("points").get<int>();
      if (aj.contains("size")) a.size = aj.at("size").get<double>();
      if (aj.contains("canonical_offset")) {
        a.canonical_offset = vec3_from_json(aj.at("canonical_offset"), "canonical_offset");
      }
      spec.attachments.push_back(a);
    }
  }
  spec.validate();
  return spec;
}

// ---- scene ------------------------------------------------------------------

namespace {

fs::path sidecar_path_for(const fs::path& json_path) {
  fs::path p = json_path;
  p.replace_extension(".f64");
  return p;
}

}  // namespace

void save_scene(const SyntheticScene& scene, const fs::path& json_path) {
  json j;
  j["format"] = "skelgrow-scene";
  j["version"] = 1;
  j["spec"] = scene_spec_to_json(scene.spec);
  j["tree"] = tree_to_json(scene.true_tree);
  j["pose"] = pose_to_json(scene.pose);
  j["extra_axis_angle"] = grid_to_flat(scene.extra_angles);
  j["canonical_points"] = vec3_list_to_json(scene.canonical_points);
  j["labels"] = scene.labels;
  j["point_attachment"] = scene.point_attachment;
  json mask = json::array();
  for (const char h : scene.heldout) mask.push_back(h != 0);
  j["heldout"] = std::move(mask);
  const fs::path sidecar = sidecar_path_for(json_path);
  j["observations_sidecar"] = sidecar.filename().string();

  const std::vector<double> flat = grid_to_flat(scene.observations);
  const int dims[3] = {scene.observations.frames, scene.observations.count, 3};
  write_f64_sidecar(sidecar, scene.spec.seed, dims, flat);
  atomic_write_text(json_path, j.dump(2) + "\n");
}

SyntheticScene load_scene(const fs::path& json_path) {
  json j;
  try {
    j = json::parse(read_text(json_path));
  } catch (const json::parse_error& e) {
    throw IoError("scene parse error in " + json_path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "skelgrow-scene") {
    throw ValidationError("not a skelgrow scene file: " + json_path.string());
  }
  SyntheticScene scene;
  scene.spec = scene_spec_from_json(j.at("spec"));
  scene.true_tree = tree_from_json(j.at("tree"));
  scene.pose = pose_from_json(j.at("pose"));
  scene.canonical_points = vec3_list_from_json(j.at("canonical_points"), "canonical_points");
  scene.labels = j.at("labels").get<std::vector<int>>();
  scene.point_attachment = j.at("point_attachment").get<std::vector<int>>();
  for (const json& h : j.at("heldout")) scene.heldout.push_back(h.get<bool>() ? 1 : 0);

  const int n = scene.pose.frame_count();
  scene.extra_angles = grid_from_flat(j.at("extra_axis_angle").get<std::vector<double>>(), n,
                                      scene.true_tree.extra_count(), "extra_axis_angle");

  const fs::path sidecar =
      json_path.parent_path() / j.at("observations_sidecar").get<std::string>();
  const SidecarData obs = read_f64_sidecar(sidecar);
  if (obs.dims.size() != 3 || obs.dims[2] != 3 || obs.dims[0] != n ||
      obs.dims[1] != static_cast<int>(scene.canonical_points.size())) {
    throw ValidationError("scene sidecar has unexpected shape: " + sidecar.string());
  }
  scene.observations = grid_from_flat(obs.data, obs.dims[0], obs.dims[1], "observations");
  return scene;
}

// ---- run config ----------------------------------------------------------------

namespace {

ThresholdMode threshold_mode_from_string(const std::string& s) {
  if (s == "absolute") return ThresholdMode::absolute;
  if (s == "relative") return ThresholdMode::relative;
  throw ValidationError("threshold_mode must be 'absolute' or 'relative', got '" + s + "'");
}

std::string threshold_mode_to_string(ThresholdMode m) {
  return m == ThresholdMode::absolute ? "absolute" : "relative";
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  check_keys(j,
             {"scene", "scene_spec", "out_dir", "seed", "lambda_mk", "threshold_mode",
              "threshold_value", "warmup_iters", "total_iters", "lr_positions", "lr_logits",
              "lr_decoder", "loss_mode", "decoder_mode", "pe_freqs_index", "pe_freqs_time",
              "mk_eps", "densify", "growth_enabled", "export_ply"},
             "config");
  RunConfig config;
  TrainConfig& t = config.train;
  if (j.contains("scene")) config.scene_path = j.at("scene").get<std::string>();
  if (j.contains("scene_spec")) config.scene_spec = scene_spec_from_json(j.at("scene_spec"));
  if (config.scene_path.has_value() == config.scene_spec.has_value()) {
    throw ValidationError("config: exactly one of 'scene' or 'scene_spec' is required");
  }
  if (j.contains("out_dir")) config.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("seed")) t.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("lambda_mk")) t.lambda_mk = j.at("lambda_mk").get<double>();
  if (j.contains("threshold_mode")) {
    t.threshold_mode = threshold_mode_from_string(j.at("threshold_mode").get<std::string>());
  }
  if (j.contains("threshold_value")) t.threshold_value = j.at("threshold_value").get<double>();
  if (j.contains("warmup_iters")) t.warmup_iters = j.at("warmup_iters").get<int>();
  if (j.contains("total_iters")) t.total_iters = j.at("total_iters").get<int>();
  if (j.contains("lr_positions")) t.lr_positions = j.at("lr_positions").get<double>();
  if (j.contains("lr_logits")) t.lr_logits = j.at("lr_logits").get<double>();
  if (j.contains("lr_decoder")) t.lr_decoder = j.at("lr_decoder").get<double>();
  if (j.contains("loss_mode")) {
    const std::string mode = j.at("loss_mode").get<std::string>();
    if (mode == "correspondence") {
      t.loss_mode = LossMode::correspondence;
    } else if (mode == "chamfer") {
      t.loss_mode = LossMode::chamfer;
    } else {
      throw ValidationError("config: loss_mode must be 'correspondence' or 'chamfer'");
    }
  }
  if (j.contains("decoder_mode")) {
    const std::string mode = j.at("decoder_mode").get<std::string>();
    if (mode == "table") {
      t.decoder.mode = DecoderMode::table;
    } else if (mode == "mlp") {
      t.decoder.mode = DecoderMode::mlp;
    } else {
      throw ValidationError("config: decoder_mode must be 'table' or 'mlp'");
    }
  }
  if (j.contains("pe_freqs_index")) t.decoder.pe_freqs_index = j.at("pe_freqs_index").get<int>();
  if (j.contains("pe_freqs_time")) t.decoder.pe_freqs_time = j.at("pe_freqs_time").get<int>();
  if (j.contains("mk_eps")) t.mk_eps = j.at("mk_eps").get<double>();
  if (j.contains("growth_enabled")) t.growth_enabled = j.at("growth_enabled").get<bool>();
  if (j.contains("export_ply")) config.export_ply = j.at("export_ply").get<bool>();
  if (j.contains("densify")) {
    const json& dj = j.at("densify");
    check_keys(dj, {"enabled", "eps_d0", "a", "b", "n_max", "interval"}, "config.densify");
    if (dj.contains("enabled")) t.densify.enabled = dj.at("enabled").get<bool>();
    if (dj.contains("eps_d0")) t.densify.eps_d0 = dj.at("eps_d0").get<double>();
    if (dj.contains("a")) t.densify.a = dj.at("a").get<double>();
    if (dj.contains("b")) t.densify.b = dj.at("b").get<double>();
    if (dj.contains("n_max")) t.densify.n_max = dj.at("n_max").get<int>();
    if (dj.contains("interval")) t.densify.interval = dj.at("interval").get<int>();
  }
  t.validate();
  return config;
}

RunConfig load_run_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw IoError("config parse error in " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

json run_config_to_json(const RunConfig& config) {
  const TrainConfig& t = config.train;
  json j;
  if (config.scene_path) j["scene"] = *config.scene_path;
  if (config.scene_spec) j["scene_spec"] = scene_spec_to_json(*config.scene_spec);
  j["out_dir"] = config.out_dir;
  j["seed"] = t.seed;
  j["lambda_mk"] = t.lambda_mk;
  j["threshold_mode"] = threshold_mode_to_string(t.threshold_mode);
  j["threshold_value"] = t.threshold_value;
  j["warmup_iters"] = t.warmup_iters;
  j["total_iters"] = t.total_iters;
  j["lr_positions"] = t.lr_positions;
  j["lr_logits"] = t.lr_logits;
  j["lr_decoder"] = t.lr_decoder;
  j["loss_mode"] = t.loss_mode == LossMode::correspondence ? "correspondence" : "chamfer";
  j["decoder_mode"] = t.decoder.mode == DecoderMode::table ? "table" : "mlp";
  j["pe_freqs_index"] = t.decoder.pe_freqs_index;
  j["pe_freqs_time"] = t.decoder.pe_freqs_time;
  j["mk_eps"] = t.mk_eps;
  j["growth_enabled"] = t.growth_enabled;
  j["export_ply"] = config.export_ply;
  j["densify"] = {{"enabled", t.densify.enabled}, {"eps_d0", t.densify.eps_d0},
                  {"a", t.densify.a},             {"b", t.densify.b},
                  {"n_max", t.densify.n_max},     {"interval", t.densify.interval}};
  return j;
}

// ---- model -------------------------------------------------------------------

void save_model(const ModelState& model, const fs::path& path) {
  json j;
  j["format"] = "skelgrow-model";
  j["version"] = 1;
  j["tree"] = tree_to_json(model.tree);
  j["pose"] = pose_to_json(model.pose);
  json cloud;
  cloud["positions"] = vec3_list_to_json(model.cloud.position);
  cloud["joint_count"] = model.cloud.joint_count;
  cloud["base_columns"] = model.cloud.base_columns;
  cloud["blend_prior"] = model.cloud.blend_prior;
  cloud["correction_logits"] = model.cloud.correction_logits;
  j["cloud"] = std::move(cloud);
  json book;
  book["creation_iteration"] = model.book.creation_iteration;
  json parents = json::array();
  for (const ExtraJointEntry& e : model.book.entries) parents.push_back(e.parent);
  book["parents"] = std::move(parents);
  j["book"] = std::move(book);
  if (model.decoder) {
    const JointDecoder& d = *model.decoder;
    json dec;
    dec["mode"] = d.mode() == DecoderMode::table ? "table" : "mlp";
    dec["entry_count"] = d.entry_count();
    dec["timestamps"] = d.timestamps();
    dec["pe_freqs_index"] = d.config().pe_freqs_index;
    dec["pe_freqs_time"] = d.config().pe_freqs_time;
    dec["position_width"] = d.config().position_width;
    dec["position_depth"] = d.config().position_depth;
    dec["rotation_width"] = d.config().rotation_width;
    dec["rotation_depth"] = d.config().rotation_depth;
    dec["params"] = std::vector<double>(d.params().begin(), d.params().end());
    j["decoder"] = std::move(dec);
  }
  atomic_write_text(path, j.dump(2) + "\n");
}

ModelState load_model(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw IoError("model parse error in " + path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "skelgrow-model") {
    throw ValidationError("not a skelgrow model file: " + path.string());
  }
  ModelState model;
  model.tree = tree_from_json(j.at("tree"));
  model.pose = pose_from_json(j.at("pose"));
  const json& cloud = j.at("cloud");
  model.cloud.position = vec3_list_from_json(cloud.at("positions"), "cloud.positions");
  model.cloud.joint_count = cloud.at("joint_count").get<int>();
  model.cloud.base_columns = cloud.value("base_columns", -1);
  model.cloud.blend_prior = cloud.at("blend_prior").get<std::vector<double>>();
  model.cloud.correction_logits = cloud.at("correction_logits").get<std::vector<double>>();
  model.cloud.validate();
  const json& book = j.at("book");
  model.book.creation_iteration = book.at("creation_iteration").get<long>();
  for (const json& p : book.at("parents")) {
    model.book.entries.push_back(ExtraJointEntry{p.get<int>()});
  }
  if (j.contains("decoder")) {
    const json& dec = j.at("decoder");
    DecoderConfig dc;
    dc.mode = dec.at("mode").get<std::string>() == "table" ? DecoderMode::table
                                                            : DecoderMode::mlp;
    dc.pe_freqs_index = dec.at("pe_freqs_index").get<int>();
    dc.pe_freqs_time = dec.at("pe_freqs_time").get<int>();
    dc.position_width = dec.at("position_width").get<int>();
    dc.position_depth = dec.at("position_depth").get<int>();
    dc.rotation_width = dec.at("rotation_width").get<int>();
    dc.rotation_depth = dec.at("rotation_depth").get<int>();
    JointDecoder d = JointDecoder::make(dec.at("entry_count").get<int>(),
                                        dec.at("timestamps").get<std::vector<double>>(), dc, 0);
    const std::vector<double> params = dec.at("params").get<std::vector<double>>();
    if (params.size() != static_cast<size_t>(d.param_count())) {
      throw ValidationError("model decoder parameter count mismatch");
    }
    std::copy(params.begin(), params.end(), d.params().begin());
    model.decoder = std::move(d);
  }
  if (model.tree.extra_count() != model.book.size()) {
    throw ValidationError("model: tree extras and book entries disagree");
  }
  model.sync_extra_rest_positions();
  return model;
}

// ---- report & trace ------------------------------------------------------------

json report_to_json(const TrainReport& report, const RunConfig& config) {
  json j;
  j["format"] = "skelgrow-report";
  j["grown"] = report.grown;
  j["joint_gradients"] = report.joint_gradients;
  j["warmup_final_loss"] = report.warmup_final_loss;
  j["final_loss"] = report.final_loss;
  j["full_mse"] = report.full_mse;
  if (std::isnan(report.heldout_mse)) {
    j["heldout_mse"] = nullptr;
  } else {
    j["heldout_mse"] = report.heldout_mse;
  }
  j["point_count"] = report.point_count;
  j["base_joints"] = report.base_joints;
  j["extra_joints"] = report.extra_joints;
  j["frames"] = report.frames;
  j["training_frames"] = report.training_frame_count;
  j["seed"] = config.train.seed;
  json cfg = run_config_to_json(config);
  cfg.erase("out_dir");  // machine-specific, keep the report portable
  j["config"] = std::move(cfg);
  return j;
}

void write_loss_csv(const std::vector<TraceRow>& trace, const fs::path& path) {
  std::string out = "iteration,phase,loss,point_count,eps_d\n";
  char line[160];
  for (const TraceRow& row : trace) {
    std::snprintf(line, sizeof(line), "%d,%s,%.17g,%d,%.17g\n", row.iteration,
                  row.refine_phase ? "refine" : "warmup", row.loss, row.point_count, row.eps_d);
    out += line;
  }
  atomic_write_text(path, out);
}

// ---- joint book -----------------------------------------------------------------

JointBookFile decode_joint_book(const ModelState& model) {
  JointBookFile file;
  file.timestamps = model.pose.timestamps;
  for (int e = 0; e < model.book.size(); ++e) {
    JointBookFile::Entry entry;
    entry.parent = model.book.entries[e].parent;
    entry.canonical_position = model.tree.rest_position(model.tree.base_count() + e);
    entry.per_frame_axis_angle.reserve(file.timestamps.size());
    for (const double t : file.timestamps) {
      entry.per_frame_axis_angle.push_back(model.decoder->rotation_axis_angle(e, t));
    }
    file.entries.push_back(std::move(entry));
  }
  return file;
}

json joint_book_to_json(const JointBookFile& book) {
  json j;
  j["format"] = "skelgrow-joint-book";
  j["timestamps"] = book.timestamps;
  json entries = json::array();
  for (const auto& e : book.entries) {
    json ej;
    ej["parent"] = e.parent;
    ej["canonical_position"] = vec3_to_json(e.canonical_position);
    ej["per_frame_axis_angle"] = vec3_list_to_json(e.per_frame_axis_angle);
    entries.push_back(std::move(ej));
  }
  j["entries"] = std::move(entries);
  return j;
}

JointBookFile joint_book_from_json(const json& j) {
  JointBookFile book;
  if (j.contains("timestamps")) book.timestamps = j.at("timestamps").get<std::vector<double>>();
  for (const json& ej : j.at("entries")) {
    JointBookFile::Entry entry;
    if (ej.contains("parent")) entry.parent = ej.at("parent").get<int>();
    if (ej.contains("canonical_position")) {
      entry.canonical_position = vec3_from_json(ej.at("canonical_position"),
                                                "joint book canonical_position");
    }
    entry.per_frame_axis_angle =
        vec3_list_from_json(ej.at("per_frame_axis_angle"), "per_frame_axis_angle");
    book.entries.push_back(std::move(entry));
  }
  return book;
}

// ---- overrides -------------------------------------------------------------------

AnimationOverrides overrides_from_json(const json& j, int expected_entries) {
  if (!j.contains("entries")) throw ValidationError("overrides: missing 'entries'");
  const json& entries = j.at("entries");
  if (static_cast<int>(entries.size()) != expected_entries) {
    throw ValidationError("overrides: entry count " + std::to_string(entries.size()) +
                          " does not match the model's " + std::to_string(expected_entries) +
                          " grown joints");
  }
  AnimationOverrides out;
  int frames = -1;
  std::vector<std::vector<Vec3>> per_entry;
  for (const json& ej : entries) {
    std::vector<Vec3> angles =
        vec3_list_from_json(ej.at("per_frame_axis_angle"), "per_frame_axis_angle");
    if (frames < 0) {
      frames = static_cast<int>(angles.size());
    } else if (frames != static_cast<int>(angles.size())) {
      throw ValidationError("overrides: entries disagree on frame count");
    }
    per_entry.push_back(std::move(angles));
  }
  if (frames <= 0) throw ValidationError("overrides: no frames");
  out.angles = Vec3Grid(frames, expected_entries);
  for (int e = 0; e < expected_entries; ++e) {
    for (int f = 0; f < frames; ++f) out.angles.at(f, e) = per_entry[e][f];
  }
  if (j.contains("timestamps")) {
    out.timestamps = j.at("timestamps").get<std::vector<double>>();
    if (static_cast<int>(out.timestamps.size()) != frames) {
      throw ValidationError("overrides: timestamps length does not match frame count");
    }
  }
  if (j.contains("freeze_base_frame")) {
    out.freeze_base_frame = j.at("freeze_base_frame").get<int>();
  }
  return out;
}

// ---- PLY --------------------------------------------------------------------------

void export_ply(std::span<const Vec3> points, const fs::path& path) {
  for (const Vec3& p : points) {
    if (!p.allFinite()) throw ValidationError("export_ply: non-finite coordinate");
  }
  std::string out;
  out.reserve(64 + points.size() * 32);
  out += "ply\nformat ascii 1.0\nelement vertex " + std::to_string(points.size()) +
         "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  char line[96];
  for (const Vec3& p : points) {
    std::snprintf(line, sizeof(line), "%.9g %.9g %.9g\n", p.x(), p.y(), p.z());
    out += line;
  }
  atomic_write_text(path, out);
}

std::vector<Vec3> read_ply(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());
  std::string line;
  size_t count = 0;
  bool in_header = true;
  std::vector<Vec3> points;
  while (std::getline(in, line)) {
    if (in_header) {
      if (line.rfind("element vertex ", 0) == 0) {
        count = std::stoul(line.substr(15));
      } else if (line == "end_header") {
        in_header = false;
        points.reserve(count);
      }
      continue;
    }
    if (points.size() == count) break;
    Vec3 p;
    if (std::sscanf(line.c_str(), "%lf %lf %lf", &p.x(), &p.y(), &p.z()) != 3) {
      throw IoError("malformed PLY vertex line in " + path.string());
    }
    points.push_back(p);
  }
  if (points.size() != count) throw IoError("PLY vertex count mismatch in " + path.string());
  return points;
}

}  // namespace skelgrow
