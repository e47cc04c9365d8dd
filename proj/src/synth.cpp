#include "skelgrow/synth.hpp"

#include <cmath>
#include <random>

#include "skelgrow/errors.hpp"

namespace skelgrow {

namespace {

constexpr double kTau = 6.283185307179586;

struct SinusoidChannel {
  double amp1 = 0.0, phase1 = 0.0;  // one cycle over the sequence
  double amp2 = 0.0, phase2 = 0.0;  // two cycles
  double eval(double t) const {
    return amp1 * std::sin(kTau * t + phase1) + amp2 * std::sin(2.0 * kTau * t + phase2);
  }
};

struct SinusoidTrajectory {
  SinusoidChannel channel[3];
  Vec3 eval(double t) const {
    return Vec3(channel[0].eval(t), channel[1].eval(t), channel[2].eval(t));
  }
};

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Vec3 random_unit(std::mt19937_64& rng) {
  // rejection sampling keeps the distribution isotropic
  for (;;) {
    const Vec3 v(uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0));
    const double n = v.norm();
    if (n > 1e-3 && n <= 1.0) return v / n;
  }
}

Vec3 gauss3(std::mt19937_64& rng, double sigma) {
  std::normal_distribution<double> d(0.0, sigma);
  const double x = d(rng);
  const double y = d(rng);
  const double z = d(rng);
  return Vec3(x, y, z);
}

SinusoidTrajectory sample_trajectory(std::mt19937_64& rng, double amplitude,
                                     bool with_second_harmonic) {
  SinusoidTrajectory traj;
  for (int c = 0; c < 3; ++c) {
    traj.channel[c].amp1 = amplitude * uniform(rng, 0.25, 0.55);
    traj.channel[c].phase1 = uniform(rng, 0.0, kTau);
    traj.channel[c].amp2 = with_second_harmonic ? amplitude * uniform(rng, 0.1, 0.25) : 0.0;
    traj.channel[c].phase2 = uniform(rng, 0.0, kTau);
  }
  return traj;
}

JointTree build_base_tree(const SceneSpec& spec) {
  if (spec.topology == "humanoid8") {
    // pelvis, chest, L elbow, L hand, R elbow, R hand, L knee, R knee
    std::vector<int> parents{-1, 0, 1, 2, 1, 4, 0, 0};
    std::vector<Vec3> rest{
        {0.0, 0.0, 0.0},  {0.0, 0.5, 0.0},   {0.35, 0.5, 0.0},  {0.7, 0.5, 0.0},
        {-0.35, 0.5, 0.0}, {-0.7, 0.5, 0.0}, {0.18, -0.5, 0.0}, {-0.18, -0.5, 0.0}};
    return JointTree(std::move(parents), std::move(rest), 8);
  }
  if (spec.topology == "chain") {
    std::vector<int> parents(static_cast<size_t>(spec.base_joints));
    std::vector<Vec3> rest(static_cast<size_t>(spec.base_joints));
    for (int k = 0; k < spec.base_joints; ++k) {
      parents[k] = k - 1;
      rest[k] = Vec3(0.0, 0.3 * k, 0.0);
    }
    return JointTree(std::move(parents), std::move(rest), spec.base_joints);
  }
  throw ValidationError("SceneSpec: unknown topology '" + spec.topology + "'");
}

}  // namespace

void SceneSpec::validate() const {
  if (topology != "humanoid8" && topology != "chain") {
    throw ValidationError("SceneSpec: unknown topology '" + topology + "'");
  }
  if (topology == "humanoid8" && base_joints != 8) {
    throw ValidationError("SceneSpec: base_joints must be 8 for the humanoid8 topology");
  }
  if (base_joints < 2) throw ValidationError("SceneSpec: base_joints must be >= 2");
  if (frames < 2) throw ValidationError("SceneSpec: frames must be >= 2");
  if (points_per_segment < 0) {
    throw ValidationError("SceneSpec: points_per_segment must be >= 0");
  }
  if (body_amplitude < 0.0) throw ValidationError("SceneSpec: body_amplitude must be >= 0");
  if (noise_sigma < 0.0) throw ValidationError("SceneSpec: noise_sigma must be >= 0");
  int total_points = points_per_segment * (base_joints - 1);
  for (const AttachmentSpec& a : attachments) {
    if (a.host < 0 || a.host >= base_joints) {
      throw ValidationError("SceneSpec: attachment host out of range");
    }
    if (a.amplitude < 0.0) throw ValidationError("SceneSpec: attachment amplitude must be >= 0");
    if (a.points < 1) throw ValidationError("SceneSpec: attachment points must be >= 1");
    if (a.size <= 0.0) throw ValidationError("SceneSpec: attachment size must be positive");
    total_points += a.points;
  }
  if (total_points < 1) throw ValidationError("SceneSpec: scene would contain no points");
}

int SyntheticScene::true_joint_of_point(int p) const {
  return point_attachment[p] >= 0 ? base_count() + point_attachment[p] : labels[p];
}

SyntheticScene generate_scene(const SceneSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);

  SyntheticScene scene;
  scene.spec = spec;
  scene.true_tree = build_base_tree(spec);
  const int base = scene.true_tree.base_count();
  const int n = spec.frames;

  // base joint motion
  std::vector<SinusoidTrajectory> joint_motion(static_cast<size_t>(base));
  for (int k = 0; k < base; ++k) {
    const double scale = (k == 0) ? 0.5 * spec.body_amplitude : spec.body_amplitude;
    joint_motion[k] = sample_trajectory(rng, scale, true);
  }
  const SinusoidTrajectory root_motion = sample_trajectory(rng, 0.1 * spec.body_amplitude, false);

  // attachments: true extra joint + own motion + points
  std::vector<SinusoidTrajectory> extra_motion;
  std::vector<Vec3> points;
  std::vector<int> labels;
  std::vector<int> attachment_of;

  // body points along each bone segment, owned by the proximal joint
  for (int k = 0; k < base; ++k) {
    const int parent = scene.true_tree.parent(k);
    if (parent < 0) continue;
    const Vec3& a = scene.true_tree.rest_position(parent);
    const Vec3& b = scene.true_tree.rest_position(k);
    for (int i = 0; i < spec.points_per_segment; ++i) {
      const double u = 0.06 + 0.88 * ((i + 0.5) / spec.points_per_segment);
      points.push_back(a + u * (b - a) + gauss3(rng, 0.012));
      labels.push_back(parent);
      attachment_of.push_back(-1);
    }
  }

  for (size_t ai = 0; ai < spec.attachments.size(); ++ai) {
    const AttachmentSpec& att = spec.attachments[ai];
    const Vec3 host_rest = scene.true_tree.rest_position(att.host);
    const Vec3 grip = host_rest + (att.canonical_offset ? *att.canonical_offset
                                                        : 0.07 * random_unit(rng));
    scene.true_tree.append_extra_joint(att.host, grip);
    extra_motion.push_back(sample_trajectory(rng, att.amplitude,
                                             att.kind == AttachmentKind::rigid_object));
    if (att.kind == AttachmentKind::rigid_object) {
      const Vec3 dir = random_unit(rng);
      for (int i = 0; i < att.points; ++i) {
        const double s = 0.08 + 0.92 * ((i + 0.5) / att.points);
        points.push_back(grip + s * att.size * dir + gauss3(rng, 0.008));
        labels.push_back(att.host);
        attachment_of.push_back(static_cast<int>(ai));
      }
    } else {
      const Vec3 d1 = random_unit(rng);
      Vec3 d2 = d1.cross(random_unit(rng));
      if (d2.norm() < 1e-6) d2 = d1.cross(Vec3(1.0, 0.0, 0.0));
      d2.normalize();
      for (int i = 0; i < att.points; ++i) {
        const double u = uniform(rng, -0.5, 0.5);
        const double v = uniform(rng, 0.0, 1.0);
        points.push_back(grip + u * att.size * d1 + v * att.size * 0.6 * d2 +
                         gauss3(rng, 0.008));
        labels.push_back(att.host);
        attachment_of.push_back(static_cast<int>(ai));
      }
    }
  }

  const int p = static_cast<int>(points.size());
  const int extras = scene.true_tree.extra_count();
  scene.canonical_points = std::move(points);
  scene.labels = std::move(labels);
  scene.point_attachment = std::move(attachment_of);

  // base pose
  scene.pose.timestamps.resize(static_cast<size_t>(n));
  scene.pose.local_rotation.resize(static_cast<size_t>(n));
  scene.pose.root_translation.resize(static_cast<size_t>(n));
  scene.extra_angles = Vec3Grid(n, extras);
  for (int f = 0; f < n; ++f) {
    const double t = static_cast<double>(f) / (n - 1);
    scene.pose.timestamps[f] = t;
    scene.pose.local_rotation[f].resize(static_cast<size_t>(base));
    for (int k = 0; k < base; ++k) {
      scene.pose.local_rotation[f][k] = exp_so3(joint_motion[k].eval(t));
    }
    scene.pose.root_translation[f] = root_motion.eval(t);
    for (int e = 0; e < extras; ++e) {
      scene.extra_angles.at(f, e) = extra_motion[e].eval(t);
    }
  }

  // observations: each point rides rigidly on its true joint
  scene.observations = Vec3Grid(n, p);
  for (int f = 0; f < n; ++f) {
    std::vector<Rotation> extra_rot(static_cast<size_t>(extras));
    for (int e = 0; e < extras; ++e) extra_rot[e] = exp_so3(scene.extra_angles.at(f, e));
    const std::vector<Transform> global = forward_kinematics(
        scene.true_tree, scene.pose.local_rotation[f], scene.pose.root_translation[f],
        extra_rot);
    for (int i = 0; i < p; ++i) {
      const int j = scene.true_joint_of_point(i);
      Vec3 x = global[j].apply(scene.canonical_points[i]);
      if (spec.noise_sigma > 0.0) x += gauss3(rng, spec.noise_sigma);
      scene.observations.at(f, i) = x;
    }
  }

  scene.heldout.assign(static_cast<size_t>(n), 0);
  for (int f = 0; f < n; ++f) {
    if ((f + 1) % 10 == 0) scene.heldout[f] = 1;
  }
  return scene;
}

const std::vector<int>& oracle_assignment(const SyntheticScene& scene) { return scene.labels; }

Vec3Grid true_joint_trajectory(const SyntheticScene& scene) {
  const int n = scene.frame_count();
  const int k = scene.true_tree.joint_count();
  const int extras = scene.true_tree.extra_count();
  Vec3Grid out(n, k);
  for (int f = 0; f < n; ++f) {
    std::vector<Rotation> extra_rot(static_cast<size_t>(extras));
    for (int e = 0; e < extras; ++e) extra_rot[e] = exp_so3(scene.extra_angles.at(f, e));
    const std::vector<Transform> global = forward_kinematics(
        scene.true_tree, scene.pose.local_rotation[f], scene.pose.root_translation[f],
        extra_rot);
    const std::vector<Vec3> posed = posed_joint_positions(scene.true_tree, global);
    for (int j = 0; j < k; ++j) out.at(f, j) = posed[j];
  }
  return out;
}

FitInputs make_fit_inputs(const SyntheticScene& scene) {
  FitInputs inputs;
  std::vector<int> base_parents(scene.true_tree.parents().begin(),
                                scene.true_tree.parents().begin() + scene.base_count());
  std::vector<Vec3> base_rest(scene.true_tree.rest_positions().begin(),
                              scene.true_tree.rest_positions().begin() + scene.base_count());
  inputs.tree = JointTree(std::move(base_parents), std::move(base_rest), scene.base_count());
  inputs.pose = scene.pose;
  inputs.observations = scene.observations;
  inputs.template_points = scene.canonical_points;
  inputs.heldout = scene.heldout;
  return inputs;
}

bool needs_growth(const SceneSpec& spec) {
  for (const AttachmentSpec& a : spec.attachments) {
    if (a.amplitude > 0.0) return true;
  }
  return false;
}

}  // namespace skelgrow
